//! Matrix backends for nodal analysis.

use crate::error::{Error, Result};

/// Receives Jacobian entries from branch stamps.
pub trait Stamp {
    fn add(&mut self, row: usize, col: usize, value: f64);
}

/// Square band matrix with equal lower and upper bandwidth.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw, "({i},{j}) outside band {}", self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.bw < i || j > i + self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place LU without pivoting followed by a solve; `rhs` is overwritten
    /// with the solution. Nodal matrices of passive networks are diagonally
    /// dominant, so no pivoting is needed.
    pub fn factor_solve(&mut self, rhs: &mut [f64]) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular(k));
            }
            let end = (k + bw).min(n - 1);
            for i in k + 1..=end {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..=end {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
                rhs[i] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let end = (k + bw).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=end {
                s -= self.data[self.idx(k, j)] * rhs[j];
            }
            rhs[k] = s / self.data[self.idx(k, k)];
        }
        Ok(())
    }
}

impl Stamp for BandMatrix {
    #[inline]
    fn add(&mut self, row: usize, col: usize, value: f64) {
        let i = self.idx(row, col);
        self.data[i] += value;
    }
}

/// Dense backend used by the reference solver.
pub struct DenseMatrix(pub nalgebra::DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(nalgebra::DMatrix::zeros(n, n))
    }

    pub fn solve(self, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = nalgebra::DVector::from_column_slice(rhs);
        self.0
            .lu()
            .solve(&b)
            .map(|x| x.as_slice().to_vec())
            .ok_or(Error::Singular(0))
    }
}

impl Stamp for DenseMatrix {
    fn add(&mut self, row: usize, col: usize, value: f64) {
        self.0[(row, col)] += value;
    }
}

/// Collects stamps as triplets; used for structural checks.
#[derive(Debug, Default, Clone)]
pub struct Triplets(pub Vec<(usize, usize, f64)>);

impl Stamp for Triplets {
    fn add(&mut self, row: usize, col: usize, value: f64) {
        self.0.push((row, col, value));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_solve_matches_dense() {
        let n = 9;
        let bw = 2;
        let mut band = BandMatrix::new(n, bw);
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let v = if i == j {
                    10.0 + i as f64
                } else {
                    -1.0 / (1.0 + (i + 2 * j) as f64)
                };
                band.add(i, j, v);
                dense.add(i, j, v);
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expected = dense.solve(&rhs).unwrap();
        let mut x = rhs.clone();
        band.factor_solve(&mut x).unwrap();
        for (a, b) in x.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_band_reports_pivot() {
        let mut band = BandMatrix::new(3, 1);
        band.add(0, 0, 1.0);
        band.add(2, 2, 1.0);
        let mut rhs = vec![1.0; 3];
        assert!(matches!(band.factor_solve(&mut rhs), Err(Error::Singular(1))));
    }
}
