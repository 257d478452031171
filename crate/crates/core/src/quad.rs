//! Adaptive quadrature for the special-function integrals.

use crate::{lit, Float};

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute accuracy
/// `tol`. Suitable for the smooth positive integrands used here.
pub(crate) fn integrate<T: Float, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let m = (a + b) / two;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / six * (fa + lit::<T>(4.0) * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Float, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / six * (fa + lit::<T>(4.0) * flm + fm);
    let right = (b - m) / six * (fm + lit::<T>(4.0) * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= lit::<T>(15.0) * tol {
        left + right + delta / lit::<T>(15.0)
    } else {
        let half_tol = tol / two;
        simpson_rec(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
}
