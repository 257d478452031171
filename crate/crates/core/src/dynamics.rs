//! Right-hand sides of the three PDE formulations on a nonuniform mesh,
//! the energy functional and gradient norms.
//!
//! All formulations share the radial Laplacian `D = d_rr + (1/r) d_r` built
//! from the three-point stencils. Boundary rows are Dirichlet (zero rate);
//! at the pole the finite-energy condition `u = v = 0` pins the whole node,
//! see [`rhs_3comp`].

use crate::mesh::RadialMesh;
use crate::state::{EulerField, LLGParams, MagnetizationField};
use crate::stencil::SpatialOperators;
use crate::{lit, Float};

/// Default regularization scale for `1/sin(theta)` in the Euler-angle form.
pub const EULER_REGULARIZATION: f64 = 1e-8;

/// Rates of the Euler-angle formulation, with a count of nodes where the
/// `1/sin(theta)` regularization was active.
#[derive(Debug, Clone)]
pub struct EulerRates<T> {
    pub theta_t: Vec<T>,
    pub phi_t: Vec<T>,
    pub regularized_nodes: usize,
}

/// `|grad m| = sqrt(u_r^2 + v_r^2 + w_r^2)` per node (one-sided at the ends).
pub fn grad_profile<T: Float>(
    field: &MagnetizationField<T>,
    ops: &SpatialOperators<T>,
    out: &mut [T],
) {
    let n = ops.len();
    let du0 = ops.d1_first(&field.u);
    let dv0 = ops.d1_first(&field.v);
    let dw0 = ops.d1_first(&field.w);
    out[0] = (du0 * du0 + dv0 * dv0 + dw0 * dw0).sqrt();
    for i in 1..n - 1 {
        let du = ops.d1_at(&field.u, i);
        let dv = ops.d1_at(&field.v, i);
        let dw = ops.d1_at(&field.w, i);
        out[i] = (du * du + dv * dv + dw * dw).sqrt();
    }
    let dun = ops.d1_last(&field.u);
    let dvn = ops.d1_last(&field.v);
    let dwn = ops.d1_last(&field.w);
    out[n - 1] = (dun * dun + dvn * dvn + dwn * dwn).sqrt();
}

/// `|grad m| = |theta_r|` per node for the radially symmetric form.
pub fn grad_profile_radial<T: Float>(theta: &[T], ops: &SpatialOperators<T>, out: &mut [T]) {
    let n = ops.len();
    out[0] = ops.d1_first(theta).abs();
    for i in 1..n - 1 {
        out[i] = ops.d1_at(theta, i).abs();
    }
    out[n - 1] = ops.d1_last(theta).abs();
}

/// Maximum of `|grad m|` over the mesh.
pub fn gradient_norm_inf<T: Float>(field: &MagnetizationField<T>, mesh: &RadialMesh<T>) -> T {
    let ops = SpatialOperators::new(mesh);
    let mut grad = vec![T::zero(); mesh.len()];
    grad_profile(field, &ops, &mut grad);
    grad.iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a })
}

/// Rates of the three-component formulation.
///
/// Interior nodes evaluate
///
/// ```text
/// u_t = alpha (v Dw - (Dv - n^2 v / r^2) w) + beta (Du - n^2 u / r^2 + A u)
/// v_t = alpha (-u Dw + (Du - n^2 u / r^2) w) + beta (Dv - n^2 v / r^2 + A v)
/// w_t = alpha (u Dv - v Du)                  + beta (Dw + A w)
/// ```
///
/// with `A = u_r^2 + v_r^2 + w_r^2 + n^2 (u^2 + v^2)/r^2`. Boundary rows are
/// Dirichlet. The pole row is pinned as well: the finite-energy condition
/// forces `u = v = 0` there, and `|m| = 1` then fixes `w(0) = +-1`, so no
/// singular `n^2/r^2` term is ever evaluated at `r = 0`.
pub fn rhs_3comp<T: Float>(
    field: &MagnetizationField<T>,
    mesh: &RadialMesh<T>,
    ops: &SpatialOperators<T>,
    params: &LLGParams<T>,
    u_t: &mut [T],
    v_t: &mut [T],
    w_t: &mut [T],
) {
    let n = mesh.len();
    let r = mesh.nodes();
    let alpha = params.alpha();
    let beta = params.beta();
    let n2 = params.index_scalar() * params.index_scalar();

    u_t[0] = T::zero();
    v_t[0] = T::zero();
    w_t[0] = T::zero();
    u_t[n - 1] = T::zero();
    v_t[n - 1] = T::zero();
    w_t[n - 1] = T::zero();

    for i in 1..n - 1 {
        let inv_r = T::one() / r[i];
        let inv_r2 = inv_r * inv_r;

        let ur = ops.d1_at(&field.u, i);
        let vr = ops.d1_at(&field.v, i);
        let wr = ops.d1_at(&field.w, i);
        let lap_u = ops.d2_at(&field.u, i) + ur * inv_r;
        let lap_v = ops.d2_at(&field.v, i) + vr * inv_r;
        let lap_w = ops.d2_at(&field.w, i) + wr * inv_r;

        let u = field.u[i];
        let v = field.v[i];
        let w = field.w[i];

        let lu = lap_u - n2 * u * inv_r2;
        let lv = lap_v - n2 * v * inv_r2;
        let a = ur * ur + vr * vr + wr * wr + n2 * (u * u + v * v) * inv_r2;

        u_t[i] = alpha * (v * lap_w - lv * w) + beta * (lu + a * u);
        v_t[i] = alpha * (-u * lap_w + lu * w) + beta * (lv + a * v);
        w_t[i] = alpha * (u * lap_v - v * lap_u) + beta * (lap_w + a * w);
    }
}

/// Rates of the Euler-angle formulation.
///
/// The implicit system
///
/// ```text
/// beta theta_t + alpha sin(theta) phi_t          = F_theta
/// beta phi_t   - (alpha / sin(theta)) theta_t    = F_phi
/// ```
///
/// is inverted using `alpha^2 + beta^2 = 1`:
///
/// ```text
/// theta_t = beta F_theta - alpha sin(theta) F_phi
/// phi_t   = beta F_phi   + alpha F_theta / sin(theta)
/// ```
///
/// Every `1/sin(theta)` is replaced by `sin/(sin^2 + delta^2)`; nodes where
/// that substitution is materially active are counted in the result, never
/// silently absorbed.
pub fn rhs_euler<T: Float>(
    field: &EulerField<T>,
    mesh: &RadialMesh<T>,
    params: &LLGParams<T>,
) -> EulerRates<T> {
    rhs_euler_regularized(field, mesh, params, lit(EULER_REGULARIZATION))
}

pub fn rhs_euler_regularized<T: Float>(
    field: &EulerField<T>,
    mesh: &RadialMesh<T>,
    params: &LLGParams<T>,
    delta: T,
) -> EulerRates<T> {
    let n = mesh.len();
    let r = mesh.nodes();
    let ops = SpatialOperators::new(mesh);
    let alpha = params.alpha();
    let beta = params.beta();
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let flag_level = lit::<T>(1e-6);

    let mut theta_t = vec![T::zero(); n];
    let mut phi_t = vec![T::zero(); n];
    let mut regularized = 0usize;

    for i in 1..n - 1 {
        let inv_r = T::one() / r[i];
        let theta = field.theta[i];
        let (s, c) = theta.sin_cos();
        let sin2t = two * s * c;
        if s.abs() < flag_level {
            regularized += 1;
        }
        let inv_sin = s / (s * s + delta * delta);

        let th_r = ops.d1_at(&field.theta, i);
        let th_rr = ops.d2_at(&field.theta, i);
        let ph_r = ops.d1_at(&field.phi, i);
        let ph_rr = ops.d2_at(&field.phi, i);

        let f_theta = th_rr + th_r * inv_r - half * sin2t * (inv_r * inv_r + ph_r * ph_r);
        // sin(2 theta)/sin^2(theta) = 2 cos(theta)/sin(theta), regularized.
        let f_phi = ph_rr + ph_r * inv_r + two * c * inv_sin * ph_r * th_r;

        theta_t[i] = beta * f_theta - alpha * s * f_phi;
        phi_t[i] = beta * f_phi + alpha * f_theta * inv_sin;
    }

    EulerRates {
        theta_t,
        phi_t,
        regularized_nodes: regularized,
    }
}

/// Rates of the radially symmetric single-angle form:
/// `theta_t = theta_rr + theta_r / r - sin(2 theta) / (2 r^2)`.
pub fn rhs_radial<T: Float>(
    theta: &[T],
    mesh: &RadialMesh<T>,
    ops: &SpatialOperators<T>,
    out: &mut [T],
) {
    let n = mesh.len();
    let r = mesh.nodes();
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    out[0] = T::zero();
    out[n - 1] = T::zero();
    for i in 1..n - 1 {
        let inv_r = T::one() / r[i];
        let th_r = ops.d1_at(theta, i);
        let th_rr = ops.d2_at(theta, i);
        out[i] = th_rr + th_r * inv_r - half * (two * theta[i]).sin() * inv_r * inv_r;
    }
}

/// Energy of an Euler-angle state:
/// `E = pi * integral of [theta_r^2 + sin^2(theta) (phi_r^2 + 1/r^2)] r dr`.
///
/// The integrand at `r = 0` vanishes: `theta_r^2 * r -> 0` and
/// `sin^2(theta)/r -> 0` because `theta(0)` is a multiple of pi.
pub fn energy<T: Float>(field: &EulerField<T>, mesh: &RadialMesh<T>) -> T {
    let n = mesh.len();
    let r = mesh.nodes();
    let ops = SpatialOperators::new(mesh);
    let mut integrand = vec![T::zero(); n];
    for i in 1..n {
        let th_r = if i < n - 1 {
            ops.d1_at(&field.theta, i)
        } else {
            ops.d1_last(&field.theta)
        };
        let ph_r = if i < n - 1 {
            ops.d1_at(&field.phi, i)
        } else {
            ops.d1_last(&field.phi)
        };
        let s = field.theta[i].sin();
        let inv_r = T::one() / r[i];
        integrand[i] = (th_r * th_r + s * s * (ph_r * ph_r + inv_r * inv_r)) * r[i];
    }
    T::PI() * mesh.trapezoid(&integrand)
}

/// Energy of a three-component state with equivariance index `n`:
/// `E = pi * integral of [u_r^2 + v_r^2 + w_r^2 + n^2 (u^2+v^2)/r^2] r dr`.
pub fn energy_field<T: Float>(
    field: &MagnetizationField<T>,
    mesh: &RadialMesh<T>,
    index: u32,
) -> T {
    let n = mesh.len();
    let r = mesh.nodes();
    let ops = SpatialOperators::new(mesh);
    let n2 = lit::<T>(index as f64) * lit::<T>(index as f64);
    let mut integrand = vec![T::zero(); n];
    for i in 1..n {
        let (du, dv, dw) = if i < n - 1 {
            (
                ops.d1_at(&field.u, i),
                ops.d1_at(&field.v, i),
                ops.d1_at(&field.w, i),
            )
        } else {
            (
                ops.d1_last(&field.u),
                ops.d1_last(&field.v),
                ops.d1_last(&field.w),
            )
        };
        let angular = n2 * (field.u[i] * field.u[i] + field.v[i] * field.v[i]) / r[i];
        integrand[i] = (du * du + dv * dv + dw * dw) * r[i] + angular;
    }
    T::PI() * mesh.trapezoid(&integrand)
}
