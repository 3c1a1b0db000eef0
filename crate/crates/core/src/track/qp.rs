//! Convex box-constrained quadratic programs with sparse Hessians:
//! `min ½ xᵀHx + qᵀx  s.t.  lo ≤ x ≤ hi`.
//!
//! Primal active-set method. Each iteration minimises over the variables
//! not held at a bound (sparse Cholesky) and walks towards that point,
//! holding the first bound it meets. At a face minimiser the bound with the
//! most negative multiplier is released. Convergence is declared on the
//! natural KKT residual `‖x − P(x − ∇f)‖∞`.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::TrackError;

pub const KKT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 300;
/// Solves per face, each on the residual gradient of the last.
const REFINE: usize = 3;

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Symmetric sparse matrix assembled from triplets; both triangles must
/// be supplied.
pub fn assemble(n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for &(i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CscMatrix::from(&coo)
}

fn matvec(h: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (i, j, v) in h.triplet_iter() {
        y[i] += v * x[j];
    }
    y
}

fn project(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Natural residual of the KKT conditions at `x`.
pub fn kkt_residual(h: &CscMatrix<f64>, q: &[f64], lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let hx = matvec(h, x);
    (0..x.len()).map(|i| (x[i] - project(x[i] - (hx[i] + q[i]), lo[i], hi[i])).abs()).fold(0.0, f64::max)
}

pub fn solve_box_qp(
    h: &CscMatrix<f64>,
    q: &[f64],
    lo: &[f64],
    hi: &[f64],
    x0: Option<&[f64]>,
) -> Result<QpSolution, TrackError> {
    let n = q.len();
    assert!(h.nrows() == n && h.ncols() == n && lo.len() == n && hi.len() == n);
    if let Some(i) = (0..n).find(|&i| lo[i] > hi[i]) {
        return Err(TrackError::Constraint(format!("empty box at variable {i}")));
    }
    let mut diag = vec![0.0; n];
    for (i, j, v) in h.triplet_iter() {
        if i == j {
            diag[i] += v;
        }
    }
    if let Some(i) = (0..n).find(|&i| !(diag[i] > 0.0)) {
        return Err(TrackError::Constraint(format!("Hessian diagonal not positive at {i}")));
    }
    let mut x: Vec<f64> = match x0 {
        Some(x0) => (0..n).map(|i| project(x0[i], lo[i], hi[i])).collect(),
        None => (0..n).map(|i| project(0.0, lo[i], hi[i])).collect(),
    };
    let grad = |x: &[f64]| -> Vec<f64> { matvec(h, x).iter().zip(q).map(|(a, b)| a + b).collect() };
    // working set: 0 free, -1 held at lo, +1 held at hi
    let mut held: Vec<i8> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] || x[i] <= lo[i] {
                -1
            } else if x[i] >= hi[i] {
                1
            } else {
                0
            }
        })
        .collect();
    let pattern: Vec<(usize, usize)> = h.triplet_iter().map(|(i, j, _)| (i, j)).collect();
    let mut chol: Option<CscCholesky<f64>> = None;
    let mut residual = f64::INFINITY;
    let max_iter = MAX_ITER + 4 * n;

    for it in 0..max_iter {
        // minimiser over the current face, refined until the free
        // gradient stops shrinking
        let values: Vec<f64> = pattern
            .iter()
            .zip(h.values())
            .map(|(&(i, j), &v)| if held[i] == 0 && held[j] == 0 || i == j { v } else { 0.0 })
            .collect();
        let ok = match chol.as_mut() {
            Some(c) => c.refactor(&values).is_ok(),
            None => {
                let m = CscMatrix::try_from_pattern_and_values(h.pattern().clone(), values).expect("pattern reuse");
                CscCholesky::factor(&m).map(|c| chol = Some(c)).is_ok()
            }
        };
        if !ok {
            return Err(TrackError::Optimization { residual });
        }
        let c = chol.as_ref().unwrap();
        let mut g = grad(&x);
        let mut d = vec![0.0; n];
        let mut last = f64::INFINITY;
        for _ in 0..REFINE {
            let free_g = (0..n).filter(|&i| held[i] == 0).map(|i| g[i].abs()).fold(0.0, f64::max);
            if free_g < 0.1 * KKT_TOL || free_g >= last {
                break;
            }
            last = free_g;
            let rhs = DMatrix::from_iterator(n, 1, (0..n).map(|i| if held[i] == 0 { -g[i] } else { 0.0 }));
            let dd = c.solve(&rhs);
            for i in (0..n).filter(|&i| held[i] == 0) {
                d[i] += dd[(i, 0)];
            }
            let xt: Vec<f64> = (0..n).map(|i| x[i] + d[i]).collect();
            g = grad(&xt);
        }

        // walk towards it, stopping at the first bound in the way
        let mut beta = 1.0f64;
        let mut block = None;
        for i in (0..n).filter(|&i| held[i] == 0) {
            let room = if d[i] > 0.0 {
                (hi[i] - x[i]) / d[i]
            } else if d[i] < 0.0 {
                (lo[i] - x[i]) / d[i]
            } else {
                f64::INFINITY
            };
            if room < beta {
                beta = room;
                block = Some(i);
            }
        }
        for i in (0..n).filter(|&i| held[i] == 0) {
            x[i] = project(x[i] + beta * d[i], lo[i], hi[i]);
        }
        if let Some(i) = block {
            held[i] = if d[i] > 0.0 { 1 } else { -1 };
            x[i] = if d[i] > 0.0 { hi[i] } else { lo[i] };
            continue;
        }

        // at the face minimiser: release the bound whose multiplier is
        // most negative, or stop
        let g = grad(&x);
        residual = (0..n).map(|i| (x[i] - project(x[i] - g[i], lo[i], hi[i])).abs()).fold(0.0, f64::max);
        let worst = (0..n)
            .filter(|&i| held[i] != 0 && lo[i] < hi[i])
            .map(|i| (i, held[i] as f64 * g[i]))
            .filter(|&(_, lam)| lam > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((i, lam)) if lam > 0.1 * KKT_TOL => held[i] = 0,
            _ if residual < KKT_TOL => return Ok(QpSolution { x, residual, iterations: it }),
            _ => return Err(TrackError::Optimization { residual }),
        }
    }
    Err(TrackError::Optimization { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: try every lower/upper/free assignment and keep
    /// the one satisfying all KKT conditions.
    fn brute_force(h: &DMatrix<f64>, q: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
        let n = q.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0u8; n];
            let mut c = code;
            for s in state.iter_mut() {
                *s = (c % 3) as u8;
                c /= 3;
            }
            let mut x = vec![0.0; n];
            for i in 0..n {
                x[i] = match state[i] {
                    0 => lo[i],
                    1 => hi[i],
                    _ => 0.0,
                };
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            if !free.is_empty() {
                let m = free.len();
                let a = DMatrix::from_fn(m, m, |r, c| h[(free[r], free[c])]);
                let b = DVector::from_fn(m, |r, _| {
                    -q[free[r]] - (0..n).filter(|j| state[*j] != 2).map(|j| h[(free[r], j)] * x[j]).sum::<f64>()
                });
                let sol = a.lu().solve(&b).unwrap();
                for (r, &i) in free.iter().enumerate() {
                    x[i] = sol[r];
                }
            }
            if (0..n).any(|i| x[i] < lo[i] - 1e-12 || x[i] > hi[i] + 1e-12) {
                continue;
            }
            let f: f64 = (0..n).map(|i| 0.5 * x[i] * (0..n).map(|j| h[(i, j)] * x[j]).sum::<f64>() + q[i] * x[i]).sum();
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = 5;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
            let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut trip = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    trip.push((i, j, h[(i, j)]));
                }
            }
            let hs = assemble(n, &trip);
            let sol = solve_box_qp(&hs, &q, &lo, &hi, None).unwrap();
            let oracle = brute_force(&h, &q, &lo, &hi);
            for i in 0..n {
                assert!((sol.x[i] - oracle[i]).abs() < 1e-7, "{:?} vs {:?}", sol.x, oracle);
            }
            assert!(sol.residual < KKT_TOL);
        }
    }

    #[test]
    fn unconstrained_tridiagonal() {
        let n = 50;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let h = assemble(n, &trip);
        let q = vec![-1.0; n];
        let big = vec![1e9; n];
        let neg: Vec<f64> = big.iter().map(|v| -v).collect();
        let sol = solve_box_qp(&h, &q, &neg, &big, None).unwrap();
        // continuous analogue x'' = -1 with zero ends: x_i = (i+1)(n-i)/2
        for i in 0..n {
            let expect = (i + 1) as f64 * (n - i) as f64 / 2.0;
            assert!((sol.x[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_box_is_rejected() {
        let h = assemble(1, &[(0, 0, 1.0)]);
        assert!(matches!(solve_box_qp(&h, &[0.0], &[1.0], &[0.0], None), Err(TrackError::Constraint(_))));
    }
}
