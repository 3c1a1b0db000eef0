//! General banded LU with partial pivoting (the LAPACK `gbsv` scheme).

/// Square matrix stored by diagonals with `kl` sub- and `ku`
/// super-diagonals. Pivoting needs `kl` extra super-diagonals of storage.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major rows of width 2*kl + ku + 1; column j of row i lives at
    // offset j + kl - i + kl ... see `idx`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, data: vec![0.0; n * width] }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // column j - i + kl within row i; valid for i - kl <= j <= i + kl + ku
        i * self.width() + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Solves `A x = b` in place, consuming the matrix. Returns `None` if a
    /// zero pivot is met.
    pub fn solve(mut self, b: &mut [f64]) -> Option<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let kl = self.kl;
        let kmax = kl + self.ku; // upper bandwidth after pivoting
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            // pivot search in column k
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            let jmax = (k + kmax).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let c = self.get(p, j);
                    let (ia, ic) = (self.idx(k, j), self.idx(p, j));
                    self.data[ia] = c;
                    self.data[ic] = a;
                }
                b.swap(k, p);
            }
            let piv = self.get(k, k);
            for i in (k + 1)..=last {
                let f = self.get(i, k) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in k..=jmax {
                    let v = self.get(k, j);
                    if v != 0.0 {
                        let ii = self.idx(i, j);
                        self.data[ii] -= f * v;
                    }
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kmax).min(n - 1);
            let mut s = b[k];
            for j in (k + 1)..=jmax {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Some(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let n = 12;
        let (kl, ku) = (3, 2);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // deliberately small diagonal to force row swaps
                let v = if i == j { 0.01 * (i as f64 + 1.0) } else { ((i * 7 + j * 3) % 5) as f64 - 2.0 };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        band.solve(&mut x).unwrap();
        let xd = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9, "{i}: {} vs {}", x[i], xd[i]);
        }
    }

    #[test]
    fn singular_reports_none() {
        let band = BandMatrix::zeros(3, 1, 1);
        let mut b = vec![1.0; 3];
        assert!(band.solve(&mut b).is_none());
    }
}
