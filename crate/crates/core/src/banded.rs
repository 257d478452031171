//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `dgbtrf` band layout: a matrix with `kl`
//! subdiagonals and `ku` superdiagonals is stored column-wise in an array
//! with `2*kl + ku + 1` rows, the extra `kl` rows absorbing the fill-in
//! created by row interchanges.

use crate::{Error, Float, Result};

#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major: entry (i, j) lives at `ab[j * ldab + kl + ku + i - j]`.
    ab: Vec<T>,
}

impl<T: Float> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![T::zero(); ldab * n],
        }
    }

    pub fn reset(&mut self) {
        for a in &mut self.ab {
            *a = T::zero();
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Valid inside the band plus the kl rows of pivoting fill above it.
        debug_assert!(i <= j + self.kl && j <= i + self.kl + self.ku);
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.idx(i, j);
        self.ab[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        let k = self.idx(i, j);
        self.ab[k] += value;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.ab[self.idx(i, j)]
    }

    /// In-place LU with partial pivoting; returns the pivot rows.
    pub fn factor(&mut self) -> Result<Vec<usize>> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        // After pivoting the upper bandwidth grows to kl + ku.
        let kv = kl + ku;
        let mut pivots = vec![0usize; n];

        for k in 0..n {
            let row_end = (k + kl).min(n - 1);
            // Pivot search in column k.
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=row_end {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            pivots[k] = piv;

            let col_end = (k + kv).min(n - 1);
            if piv != k {
                for j in k..=col_end {
                    let a = self.get(k, j);
                    let b = self.get(piv, j);
                    self.set(k, j, b);
                    self.set(piv, j, a);
                }
            }

            let diag = self.get(k, k);
            for i in k + 1..=row_end {
                let mult = self.get(i, k) / diag;
                self.set(i, k, mult);
                for j in k + 1..=col_end {
                    let val = self.get(i, j) - mult * self.get(k, j);
                    self.set(i, j, val);
                }
            }
        }
        Ok(pivots)
    }

    /// Solves `A x = b` in place using a completed factorization.
    pub fn solve(&self, pivots: &[usize], b: &mut [T]) {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;

        for k in 0..n {
            let piv = pivots[k];
            if piv != k {
                b.swap(k, piv);
            }
            let row_end = (k + kl).min(n - 1);
            for i in k + 1..=row_end {
                let mult = self.get(i, k);
                b[i] = b[i] - mult * b[k];
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + kv).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=col_end {
                acc -= self.get(k, j) * b[j];
            }
            b[k] = acc / self.get(k, k);
        }
    }
}
