//! Three-point finite-difference stencils on a nonuniform radial mesh.
//!
//! Interior weights are the standard nonuniform central formulas, exact for
//! quadratics (so the first derivative of `r -> r` is reproduced exactly and
//! the second derivative of `r -> r^2` returns 2 up to rounding). End nodes
//! carry one-sided three-point first-derivative weights of the same order.

use crate::mesh::RadialMesh;
use crate::{lit, Float};

/// Precomputed derivative weights for one mesh.
#[derive(Debug, Clone)]
pub struct SpatialOperators<T> {
    /// First-derivative weights over `(i-1, i, i+1)` for interior node `i`.
    d1: Vec<[T; 3]>,
    /// Second-derivative weights over `(i-1, i, i+1)` for interior node `i`.
    d2: Vec<[T; 3]>,
    /// One-sided first-derivative weights over the first three nodes.
    d1_first: [T; 3],
    /// One-sided first-derivative weights over the last three nodes.
    d1_last: [T; 3],
    n: usize,
}

impl<T: Float> SpatialOperators<T> {
    pub fn new(mesh: &RadialMesh<T>) -> Self {
        let r = mesh.nodes();
        let n = r.len();
        let two = lit::<T>(2.0);

        let mut d1 = Vec::with_capacity(n.saturating_sub(2));
        let mut d2 = Vec::with_capacity(n.saturating_sub(2));
        for i in 1..n - 1 {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            let hs = hm + hp;
            d1.push([
                -hp / (hm * hs),
                (hp - hm) / (hm * hp),
                hm / (hp * hs),
            ]);
            d2.push([two / (hm * hs), -two / (hm * hp), two / (hp * hs)]);
        }

        let h1 = r[1] - r[0];
        let h2 = r[2] - r[1];
        let d1_first = [
            -(two * h1 + h2) / (h1 * (h1 + h2)),
            (h1 + h2) / (h1 * h2),
            -h1 / (h2 * (h1 + h2)),
        ];
        let g1 = r[n - 1] - r[n - 2];
        let g2 = r[n - 2] - r[n - 3];
        let d1_last = [
            g1 / (g2 * (g1 + g2)),
            -(g1 + g2) / (g1 * g2),
            (two * g1 + g2) / (g1 * (g1 + g2)),
        ];

        Self {
            d1,
            d2,
            d1_first,
            d1_last,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First derivative at interior node `i` (`1 <= i <= n-2`).
    #[inline]
    pub fn d1_at(&self, f: &[T], i: usize) -> T {
        let w = &self.d1[i - 1];
        w[0] * f[i - 1] + w[1] * f[i] + w[2] * f[i + 1]
    }

    /// Second derivative at interior node `i` (`1 <= i <= n-2`).
    #[inline]
    pub fn d2_at(&self, f: &[T], i: usize) -> T {
        let w = &self.d2[i - 1];
        w[0] * f[i - 1] + w[1] * f[i] + w[2] * f[i + 1]
    }

    /// One-sided first derivative at the first node.
    #[inline]
    pub fn d1_first(&self, f: &[T]) -> T {
        self.d1_first[0] * f[0] + self.d1_first[1] * f[1] + self.d1_first[2] * f[2]
    }

    /// One-sided first derivative at the last node.
    #[inline]
    pub fn d1_last(&self, f: &[T]) -> T {
        let n = self.n;
        self.d1_last[0] * f[n - 3] + self.d1_last[1] * f[n - 2] + self.d1_last[2] * f[n - 1]
    }

    /// Fills `out` with the first derivative at every node (one-sided ends).
    pub fn derivative_profile(&self, f: &[T], out: &mut [T]) {
        let n = self.n;
        out[0] = self.d1_first(f);
        for i in 1..n - 1 {
            out[i] = self.d1_at(f, i);
        }
        out[n - 1] = self.d1_last(f);
    }
}
