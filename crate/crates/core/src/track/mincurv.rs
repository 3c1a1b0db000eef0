//! Minimum-curvature raceline: lateral offsets along the centerline
//! normals that minimise the sum of squared discrete curvatures.
//!
//! The objective is minimised by Gauss-Newton. Each iteration linearises
//! the curvature of every vertex in the three offsets it depends on and
//! solves the resulting box-constrained QP; a backtracking search on the
//! exact objective keeps every accepted iterate no worse than the last.

use super::boundaries::{Corridor, TrackBoundaries};
use super::geom::{menger_curvature, V2};
use super::qp::{assemble, solve_box_qp};
use super::TrackError;

const MAX_OUTER: usize = 500;
const FD_STEP: f64 = 1e-5;
const DAMPING: f64 = 1e-6;
const PEAK_BUFFER: f64 = 0.02;
const PEAK_WEIGHT: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct MinCurvatureResult {
    /// Offset of every station along its normal, positive to the left.
    pub offsets: Vec<f64>,
    pub path: Vec<V2>,
    pub curvature: Vec<f64>,
    pub objective: f64,
    pub centerline_objective: f64,
    pub iterations: usize,
    /// KKT residual of the last QP subproblem.
    pub qp_residual: f64,
}

struct Problem<'a> {
    c: &'a Corridor,
    n: usize,
    closed: bool,
}

impl Problem<'_> {
    fn point(&self, a: &[f64], i: usize) -> V2 {
        self.c.center[i] + self.c.normal[i] * a[i]
    }

    /// Vertices carrying a curvature term.
    fn rows(&self) -> std::ops::Range<usize> {
        if self.closed {
            0..self.n
        } else {
            1..self.n - 1
        }
    }

    fn nbrs(&self, i: usize) -> [usize; 3] {
        let n = self.n;
        [(i + n - 1) % n, i, (i + 1) % n]
    }

    fn kappa_at(&self, a: &[f64], i: usize) -> f64 {
        let [p, q, r] = self.nbrs(i);
        menger_curvature(&self.point(a, p), &self.point(a, q), &self.point(a, r))
    }

    fn curvature(&self, a: &[f64]) -> Vec<f64> {
        let mut k = vec![0.0; self.n];
        for i in self.rows() {
            k[i] = self.kappa_at(a, i);
        }
        k
    }
}

fn sum_sq(k: &[f64]) -> f64 {
    k.iter().map(|v| v * v).sum()
}

fn max_abs(k: &[f64]) -> f64 {
    k.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn optimize_min_curvature(b: &TrackBoundaries, margin: f64) -> Result<MinCurvatureResult, TrackError> {
    let corr = b.corridor();
    optimize_corridor(&corr, margin)
}

pub fn optimize_corridor(corr: &Corridor, margin: f64) -> Result<MinCurvatureResult, TrackError> {
    let n = corr.center.len();
    if n < 4 {
        return Err(TrackError::TooFewPoints { needed: 4, got: n });
    }
    if !(margin >= 0.0) {
        return Err(TrackError::Constraint(format!("margin {margin} must be non-negative")));
    }
    let min_hw = corr.half_width.iter().cloned().fold(f64::INFINITY, f64::min);
    if margin >= min_hw {
        return Err(TrackError::Constraint(format!(
            "margin {margin} m leaves no room inside the narrowest half-width {min_hw:.3} m"
        )));
    }
    let pb = Problem { c: corr, n, closed: corr.closed };
    let hi: Vec<f64> = corr.half_width.iter().map(|h| h - margin).collect();
    let lo: Vec<f64> = hi.iter().map(|h| -h).collect();

    let mut a = vec![0.0; n];
    let mut k = pb.curvature(&a);
    let f0 = sum_sq(&k);
    let kmax0 = max_abs(&k);
    // vertices near the starting peak curvature pay a quadratic penalty
    // so iterates bend around that ceiling instead of through it
    let kcap = kmax0 * (1.0 - PEAK_BUFFER);
    let merit = |k: &[f64]| -> f64 { k.iter().map(|v| v * v + PEAK_WEIGHT * (v.abs() - kcap).max(0.0).powi(2)).sum() };
    let mut f = merit(&k);
    let mut qp_residual = 0.0;
    let mut iterations = 0;

    for _ in 0..MAX_OUTER {
        iterations += 1;
        // Jacobian rows: d kappa_i / d a_j for j in nbrs(i)
        let mut jac = Vec::with_capacity(n);
        for i in pb.rows() {
            let nb = pb.nbrs(i);
            let mut row = [0.0; 3];
            for (slot, &j) in nb.iter().enumerate() {
                let keep = a[j];
                a[j] = keep + FD_STEP;
                let kp = pb.kappa_at(&a, i);
                a[j] = keep - FD_STEP;
                let km = pb.kappa_at(&a, i);
                a[j] = keep;
                row[slot] = (kp - km) / (2.0 * FD_STEP);
            }
            jac.push((i, nb, row));
        }
        let mut scale = 0.0f64;
        {
            let mut diag = vec![0.0; n];
            for (_, nb, row) in &jac {
                for p in 0..3 {
                    diag[nb[p]] += row[p] * row[p];
                }
            }
            for d in diag {
                scale = scale.max(d);
            }
        }
        if scale <= 0.0 {
            break;
        }
        let dlo: Vec<f64> = (0..n).map(|i| lo[i] - a[i]).collect();
        let dhi: Vec<f64> = (0..n).map(|i| hi[i] - a[i]).collect();
        // Rows whose curvature exceeds the ceiling, now or in the predicted
        // step, carry the penalty. The set only grows, so this settles.
        let mut active: Vec<bool> = jac.iter().map(|(i, _, _)| k[*i].abs() > kcap).collect();
        let mut sol;
        loop {
            let mut trip = Vec::with_capacity(9 * n + n);
            let mut g = vec![0.0; n];
            for ((i, nb, row), &act) in jac.iter().zip(&active) {
                let ki = k[*i];
                let w = if act { 1.0 + PEAK_WEIGHT } else { 1.0 };
                let rhs = ki + if act { PEAK_WEIGHT * (ki - kcap * ki.signum()) } else { 0.0 };
                for p in 0..3 {
                    g[nb[p]] += row[p] * rhs / scale;
                    for q in 0..3 {
                        trip.push((nb[p], nb[q], w * row[p] * row[q] / scale));
                    }
                }
            }
            for i in 0..n {
                trip.push((i, i, DAMPING));
            }
            let h = assemble(n, &trip);
            sol = solve_box_qp(&h, &g, &dlo, &dhi, None)?;
            let mut grew = false;
            for ((i, nb, row), act) in jac.iter().zip(active.iter_mut()) {
                let pred = k[*i] + (0..3).map(|p| row[p] * sol.x[nb[p]]).sum::<f64>();
                if !*act && pred.abs() > kcap {
                    *act = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        qp_residual = sol.residual;

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-6 {
            let trial: Vec<f64> = (0..n).map(|i| (a[i] + t * sol.x[i]).clamp(lo[i], hi[i])).collect();
            let kt = pb.curvature(&trial);
            let ft = merit(&kt);
            if ft < f && sum_sq(&kt) <= f0 && max_abs(&kt) <= kmax0 + 1e-9 {
                accepted = Some((trial, kt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((na, nk, nf)) = accepted else { break };
        let step = (0..n).map(|i| (na[i] - a[i]).abs()).fold(0.0, f64::max);
        let rel = (f - nf) / f.max(f64::MIN_POSITIVE);
        a = na;
        k = nk;
        f = nf;
        if step < 1e-9 || rel < 1e-12 {
            break;
        }
    }
    let path = (0..n).map(|i| pb.point(&a, i)).collect();
    let objective = sum_sq(&k);
    Ok(MinCurvatureResult {
        offsets: a,
        path,
        curvature: k,
        objective,
        centerline_objective: f0,
        iterations,
        qp_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::shapes;

    #[test]
    fn straight_stays_on_centerline() {
        let b = shapes::straight(200.0, 12.0, 2.0).unwrap();
        let r = optimize_min_curvature(&b, 1.5).unwrap();
        assert!(r.offsets.iter().all(|a| a.abs() < 1e-12));
        assert!(max_abs(&r.curvature) < 1e-12);
    }

    #[test]
    fn annulus_reaches_outer_circle() {
        let b = shapes::annulus(40.0, 50.0, 2.0).unwrap();
        let r = optimize_min_curvature(&b, 1.0).unwrap();
        for p in &r.path {
            assert!((p.norm() - 49.0).abs() < 0.05, "{}", p.norm());
        }
        assert!(max_abs(&r.curvature) < 1.0 / 45.0);
        assert!(r.objective <= r.centerline_objective);
    }

    #[test]
    fn infeasible_margin() {
        let b = shapes::annulus(40.0, 50.0, 2.0).unwrap();
        assert!(matches!(optimize_min_curvature(&b, 5.0), Err(TrackError::Constraint(_))));
    }
}
