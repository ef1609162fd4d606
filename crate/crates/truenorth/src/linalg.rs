//! Symmetric banded linear algebra for the path solvers.
//!
//! The joint-path normal equations couple each frame only to its two
//! successors, so the Gauss-Newton Hessian is banded with a bandwidth of a
//! few frame widths. A banded Cholesky keeps long clips tractable where a
//! dense factorization would not be.

use crate::error::{Error, Result};

/// Symmetric positive-definite matrix stored as its lower band.
///
/// `band[r * (bandwidth + 1) + (c - r + bandwidth)]` holds element `(r, c)`
/// for `r - bandwidth <= c <= r`.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    dim: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(dim.saturating_sub(1));
        SymBandMatrix {
            dim,
            bandwidth,
            band: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.bandwidth);
        r * (self.bandwidth + 1) + (c + self.bandwidth - r)
    }

    /// Adds `v` to the element `(r, c)`; only the lower triangle is stored,
    /// so callers pass each symmetric pair once with `r >= c`.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(
            r - c <= self.bandwidth,
            "entry ({r}, {c}) outside bandwidth {}",
            self.bandwidth
        );
        let i = self.idx(r, c);
        self.band[i] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.bandwidth {
            0.0
        } else {
            self.band[self.idx(r, c)]
        }
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for r in 0..self.dim {
            let i = self.idx(r, r);
            self.band[i] += v;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.band[self.idx(r, r)]).collect()
    }

    /// In-place banded Cholesky factorization (`A = L Lᵀ`).
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let bw = self.bandwidth;
        for j in 0..self.dim {
            let start = j.saturating_sub(bw);
            let jj = self.idx(j, j);
            let mut d = self.band[jj];
            for k in start..j {
                let l = self.band[self.idx(j, k)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NoConvergence(format!(
                    "banded Cholesky pivot {d:.3e} at row {j}; system not positive definite"
                )));
            }
            let d = d.sqrt();
            self.band[jj] = d;
            let end = (j + bw + 1).min(self.dim);
            for i in (j + 1)..end {
                let start_i = i.saturating_sub(bw);
                let ij = self.idx(i, j);
                let mut s = self.band[ij];
                for k in start_i.max(start)..j {
                    s -= self.band[self.idx(i, k)] * self.band[self.idx(j, k)];
                }
                self.band[ij] = s / d;
            }
        }
        Ok(BandCholesky { m: self })
    }
}

pub struct BandCholesky {
    m: SymBandMatrix,
}

impl BandCholesky {
    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.m.dim);
        let bw = self.m.bandwidth;
        let n = self.m.dim;
        let mut x = b.to_vec();
        // Forward: L y = b
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for k in start..i {
                s -= self.m.band[self.m.idx(i, k)] * x[k];
            }
            x[i] = s / self.m.band[self.m.idx(i, i)];
        }
        // Backward: Lᵀ x = y
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = x[i];
            for k in (i + 1)..end {
                s -= self.m.band[self.m.idx(k, i)] * x[k];
            }
            x[i] = s / self.m.band[self.m.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;

    fn random_banded_spd(n: usize, bw: usize, seed: u64) -> (DMatrix<f64>, SymBandMatrix) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for c in r.saturating_sub(bw)..=r {
                let v = rng.random_range(-1.0..1.0);
                dense[(r, c)] = v;
                dense[(c, r)] = v;
            }
        }
        // Diagonal dominance makes it positive definite.
        for r in 0..n {
            dense[(r, r)] = dense[(r, r)].abs() + 2.0 * (bw as f64 + 1.0);
        }
        let mut band = SymBandMatrix::zeros(n, bw);
        for r in 0..n {
            for c in r.saturating_sub(bw)..=r {
                band.add(r, c, dense[(r, c)]);
            }
        }
        (dense, band)
    }

    #[test]
    fn matches_dense_solution() {
        for (n, bw, seed) in [(12, 3, 1u64), (40, 7, 2), (9, 8, 3), (5, 0, 4)] {
            let (dense, band) = random_banded_spd(n, bw, seed);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = band.cholesky().unwrap().solve(&b);
            let expect = dense
                .clone()
                .cholesky()
                .unwrap()
                .solve(&DVector::from_column_slice(&b));
            for i in 0..n {
                assert!(
                    (x[i] - expect[i]).abs() < 1e-10,
                    "n={n} bw={bw} i={i}: {} vs {}",
                    x[i],
                    expect[i]
                );
            }
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let mut band = SymBandMatrix::zeros(3, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, -5.0);
        band.add(2, 2, 1.0);
        assert!(band.cholesky().is_err());
    }
}
