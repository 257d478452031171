//! Moving-mesh machinery: radial meshes on `[0, 1]`, the arclength-type
//! monitor function with smoothing and flooring, mesh motion by a relaxation
//! step of an MMPDE law, the Sundman rescaling between computational and
//! physical time, and monotone cubic interpolation of fields between meshes.

use crate::state::MagnetizationField;
use crate::stencil::SpatialOperators;
use crate::{dynamics, lit, Error, Float, Result};

/// Minimum admissible gap between adjacent nodes.
const MIN_GAP: f64 = 1e-14;

/// Monotone node set on `[0, 1]` with `r_0 = 0` and `r_{N-1} = 1`.
///
/// The computational coordinate of node `i` is implicitly `xi_i = i/(N-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh<T> {
    nodes: Vec<T>,
}

impl<T: Float> RadialMesh<T> {
    /// Uniform mesh with `n` nodes.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 4, "mesh needs at least 4 nodes");
        let nm1 = lit::<T>((n - 1) as f64);
        let mut nodes: Vec<T> = (0..n).map(|i| lit::<T>(i as f64) / nm1).collect();
        nodes[0] = T::zero();
        nodes[n - 1] = T::one();
        Self { nodes }
    }

    /// Validates and adopts an explicit node set.
    pub fn from_nodes(mut nodes: Vec<T>) -> Result<Self> {
        let n = nodes.len();
        if n < 4 {
            return Err(Error::InvalidMesh("mesh needs at least 4 nodes".into()));
        }
        let tol = lit::<T>(1e-12);
        if nodes[0].abs() > tol {
            return Err(Error::InvalidMesh(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if (nodes[n - 1] - T::one()).abs() > tol {
            return Err(Error::InvalidMesh(format!(
                "last node must be 1, got {}",
                nodes[n - 1]
            )));
        }
        nodes[0] = T::zero();
        nodes[n - 1] = T::one();
        let gap = lit::<T>(MIN_GAP);
        for i in 0..n - 1 {
            if nodes[i + 1] - nodes[i] <= gap {
                return Err(Error::InvalidMesh(format!(
                    "nodes not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_spacing(&self) -> T {
        let mut best = T::infinity();
        for i in 0..self.len() - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            if h < best {
                best = h;
            }
        }
        best
    }

    /// Trapezoidal integral of nodal values over the mesh.
    pub fn trapezoid(&self, f: &[T]) -> T {
        let mut acc = T::zero();
        let half = lit::<T>(0.5);
        for i in 0..self.len() - 1 {
            acc += half * (f[i] + f[i + 1]) * (self.nodes[i + 1] - self.nodes[i]);
        }
        acc
    }
}

/// Weight of the integral term inside the monitor function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralWeight {
    /// Plain radial measure `dr`.
    Dr,
    /// Area measure `r dr`.
    RDr,
}

/// Smoothed, floored monitor values per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorField<T> {
    values: Vec<T>,
}

impl<T: Float> MonitorField<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .fold(T::neg_infinity(), |a, &b| if b > a { b } else { a })
    }
}

/// Mesh/monitor configuration knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig<T> {
    pub n_nodes: usize,
    /// Relaxation time of the mesh motion, in computational time.
    pub tau_mm: T,
    pub smooth_passes: usize,
    /// Floor is `floor_abs + floor_rel * max(M)`.
    pub monitor_floor_abs: T,
    pub monitor_floor_rel: T,
    pub integral_weight: IntegralWeight,
}

impl<T: Float> Default for MeshConfig<T> {
    fn default() -> Self {
        Self {
            n_nodes: 201,
            tau_mm: lit(1e-2),
            smooth_passes: 4,
            monitor_floor_abs: lit(1e-8),
            monitor_floor_rel: lit(1e-3),
            integral_weight: IntegralWeight::Dr,
        }
    }
}

/// Monitor from a magnetization field: `M_i = |grad m|_i + integral`,
/// smoothed and floored.
pub fn monitor<T: Float>(
    field: &MagnetizationField<T>,
    mesh: &RadialMesh<T>,
    cfg: &MeshConfig<T>,
) -> MonitorField<T> {
    let ops = SpatialOperators::new(mesh);
    let mut grad = vec![T::zero(); mesh.len()];
    dynamics::grad_profile(field, &ops, &mut grad);
    monitor_from_grad(&grad, mesh, cfg)
}

/// Monitor from a precomputed `|grad m|` profile.
pub fn monitor_from_grad<T: Float>(
    grad: &[T],
    mesh: &RadialMesh<T>,
    cfg: &MeshConfig<T>,
) -> MonitorField<T> {
    let integral = match cfg.integral_weight {
        IntegralWeight::Dr => mesh.trapezoid(grad),
        IntegralWeight::RDr => {
            let weighted: Vec<T> = grad
                .iter()
                .zip(mesh.nodes())
                .map(|(&g, &r)| g * r)
                .collect();
            mesh.trapezoid(&weighted)
        }
    };
    let mut values: Vec<T> = grad.iter().map(|&g| g + integral).collect();

    // (1/4, 1/2, 1/4) averaging; end weights (3/4, 1/4) preserve the node sum.
    let quarter = lit::<T>(0.25);
    let half = lit::<T>(0.5);
    let three_quarter = lit::<T>(0.75);
    let n = values.len();
    let mut scratch = vec![T::zero(); n];
    for _ in 0..cfg.smooth_passes {
        scratch[0] = three_quarter * values[0] + quarter * values[1];
        for i in 1..n - 1 {
            scratch[i] = quarter * values[i - 1] + half * values[i] + quarter * values[i + 1];
        }
        scratch[n - 1] = quarter * values[n - 2] + three_quarter * values[n - 1];
        std::mem::swap(&mut values, &mut scratch);
    }

    let max = values
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a });
    let floor = cfg.monitor_floor_abs + cfg.monitor_floor_rel * max;
    for value in &mut values {
        if *value < floor {
            *value = floor;
        }
    }
    MonitorField { values }
}

/// Sundman rescaling: physical step for one computational step `ds` is
/// `dt = ds / max(M)`.
pub fn sundman_dt<T: Float>(monitor: &MonitorField<T>, ds: T) -> T {
    debug_assert!(ds > T::zero(), "ds must be positive");
    ds / monitor.max()
}

/// One relaxation step of the mesh-motion law `r_s = (M r_xi)_xi / tau_mm`.
///
/// The step is taken implicitly (backward Euler in `s` with the monitor
/// frozen), which keeps the relaxation stable for stiff monitors at any
/// `ds`; boundary nodes stay pinned at 0 and 1. A fixed point is reached
/// exactly when the per-cell quantities `M_{i+1/2} (r_{i+1} - r_i)` are
/// equal, i.e. at equidistribution of the trapezoidal monitor masses.
pub fn move_mesh<T: Float>(
    mesh: &RadialMesh<T>,
    monitor: &MonitorField<T>,
    ds: T,
    cfg: &MeshConfig<T>,
) -> Result<RadialMesh<T>> {
    debug_assert!(ds >= T::zero(), "ds must be nonnegative");
    if ds == T::zero() {
        return Ok(mesh.clone());
    }
    let n = mesh.len();
    assert_eq!(monitor.len(), n, "monitor/mesh length mismatch");
    let r = mesh.nodes();
    let m = monitor.values();
    let half = lit::<T>(0.5);

    let dxi = T::one() / lit::<T>((n - 1) as f64);
    let mu = ds / (cfg.tau_mm * dxi * dxi);

    // Tridiagonal system (I - mu D (M at midpoints) D^T) r_new = r_old with
    // Dirichlet end rows; strictly diagonally dominant, Thomas is stable.
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::one(); n];
    let mut upper = vec![T::zero(); n];
    let mut rhs = r.to_vec();
    for i in 1..n - 1 {
        let m_minus = half * (m[i - 1] + m[i]);
        let m_plus = half * (m[i] + m[i + 1]);
        lower[i] = -mu * m_minus;
        diag[i] = T::one() + mu * (m_minus + m_plus);
        upper[i] = -mu * m_plus;
    }
    rhs[0] = T::zero();
    rhs[n - 1] = T::one();

    for i in 1..n {
        let factor = lower[i] / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] = rhs[i] - factor * rhs[i - 1];
    }
    let mut new_nodes = vec![T::zero(); n];
    new_nodes[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        new_nodes[i] = (rhs[i] - upper[i] * new_nodes[i + 1]) / diag[i];
    }
    new_nodes[0] = T::zero();
    new_nodes[n - 1] = T::one();

    let gap = lit::<T>(MIN_GAP);
    for i in 0..n - 1 {
        if new_nodes[i + 1] - new_nodes[i] <= gap {
            return Err(Error::MeshTangled);
        }
    }
    Ok(RadialMesh { nodes: new_nodes })
}

/// Interpolates each field component onto a new mesh with monotone cubics and
/// projects the result back onto the sphere. Boundary values carry over
/// exactly.
pub fn interpolate_field<T: Float>(
    field: &MagnetizationField<T>,
    old_mesh: &RadialMesh<T>,
    new_mesh: &RadialMesh<T>,
) -> Result<MagnetizationField<T>> {
    let u = interpolate_scalar(&field.u, old_mesh, new_mesh);
    let v = interpolate_scalar(&field.v, old_mesh, new_mesh);
    let w = interpolate_scalar(&field.w, old_mesh, new_mesh);
    let mut out = MagnetizationField { u, v, w };
    out.project_in_place()?;
    Ok(out)
}

/// Monotone piecewise-cubic interpolation of one nodal profile onto a new
/// mesh. The limited slopes avoid overshoot near steep fronts; linear data
/// are reproduced exactly.
pub fn interpolate_scalar<T: Float>(
    values: &[T],
    old_mesh: &RadialMesh<T>,
    new_mesh: &RadialMesh<T>,
) -> Vec<T> {
    let x = old_mesh.nodes();
    let slopes = pchip_slopes(x, values);
    let mut out = Vec::with_capacity(new_mesh.len());
    for &xq in new_mesh.nodes() {
        out.push(pchip_eval(x, values, &slopes, xq));
    }
    let n = out.len();
    out[0] = values[0];
    out[n - 1] = values[values.len() - 1];
    out
}

/// Shape-preserving slopes (Fritsch-Carlson weighted harmonic means with
/// limited one-sided end slopes).
fn pchip_slopes<T: Float>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    let mut h = Vec::with_capacity(n - 1);
    let mut delta = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let hi = x[i + 1] - x[i];
        h.push(hi);
        delta.push((y[i + 1] - y[i]) / hi);
    }

    let mut d = vec![T::zero(); n];
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= T::zero() {
            d[i] = T::zero();
        } else {
            let w1 = two * h[i] + h[i - 1];
            let w2 = h[i] + two * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }

    d[0] = edge_slope(h[0], h[1], delta[0], delta[1], three);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3], three);
    d
}

fn edge_slope<T: Float>(h0: T, h1: T, d0: T, d1: T, three: T) -> T {
    let two = three - T::one();
    let mut d = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= T::zero() {
        d = T::zero();
    } else if d0 * d1 <= T::zero() && d.abs() > three * d0.abs() {
        d = three * d0;
    }
    d
}

fn pchip_eval<T: Float>(x: &[T], y: &[T], d: &[T], xq: T) -> T {
    let n = x.len();
    if xq <= x[0] {
        return y[0] + d[0] * (xq - x[0]);
    }
    if xq >= x[n - 1] {
        return y[n - 1] + d[n - 1] * (xq - x[n - 1]);
    }
    // Largest k with x[k] <= xq.
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x[mid] <= xq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = x[lo + 1] - x[lo];
    let t = (xq - x[lo]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * y[lo] + h10 * h * d[lo] + h01 * y[lo + 1] + h11 * h * d[lo + 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_construction_validates() {
        assert!(RadialMesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(RadialMesh::from_nodes(vec![0.1, 0.5, 0.7, 1.0]).is_err());
        assert!(RadialMesh::from_nodes(vec![0.0, 0.5, 0.7, 0.9]).is_err());
        let m = RadialMesh::from_nodes(vec![0.0, 0.2, 0.7, 1.0]).unwrap();
        assert_eq!(m.nodes()[0], 0.0);
        assert_eq!(m.nodes()[3], 1.0);
    }

    #[test]
    fn constant_grad_gives_floored_constant_monitor() {
        let mesh = RadialMesh::<f64>::uniform(21);
        let cfg = MeshConfig::default();
        let grad = vec![0.0; 21];
        let m = monitor_from_grad(&grad, &mesh, &cfg);
        for &v in m.values() {
            assert_eq!(v, cfg.monitor_floor_abs);
        }
    }

    #[test]
    fn monitor_adds_total_variation_constant() {
        // theta = 2 arctan(r/R): |theta_r| peaks at 2/R at the origin and its
        // integral is theta(1) - theta(0).
        let r_scale = 0.01f64;
        let n = 801;
        let mesh = RadialMesh::<f64>::uniform(n);
        let grad: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&r| 2.0 / r_scale / (1.0 + (r / r_scale).powi(2)))
            .collect();
        let cfg = MeshConfig {
            smooth_passes: 0,
            ..MeshConfig::default()
        };
        let m = monitor_from_grad(&grad, &mesh, &cfg);
        let expected_peak = 2.0 / r_scale + 2.0 * (1.0f64 / r_scale).atan();
        let peak = m.max();
        assert!(
            (peak - expected_peak).abs() / expected_peak < 0.02,
            "peak {peak} vs {expected_peak}"
        );
    }

    #[test]
    fn smoothing_preserves_monitor_integral() {
        let mesh = RadialMesh::<f64>::uniform(101);
        let grad: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&r| 30.0 / (1.0 + 400.0 * r * r))
            .collect();
        let base = MeshConfig {
            smooth_passes: 0,
            ..MeshConfig::default()
        };
        let m0 = monitor_from_grad(&grad, &mesh, &base);
        let mut prev = m0.values().to_vec();
        for passes in 1..=4 {
            let cfg = MeshConfig {
                smooth_passes: passes,
                ..base
            };
            let m = monitor_from_grad(&grad, &mesh, &cfg);
            let before = mesh.trapezoid(&prev);
            let after = mesh.trapezoid(m.values());
            assert!(
                (after - before).abs() / before < 0.01,
                "pass {passes}: {before} -> {after}"
            );
            prev = m.values().to_vec();
        }
    }

    #[test]
    fn sundman_dt_scales_inversely_with_monitor() {
        let m = MonitorField {
            values: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(sundman_dt(&m, 0.5), 0.5);
        let m2 = MonitorField {
            values: vec![1.0, 2.0, 1.0],
        };
        assert_eq!(sundman_dt(&m2, 0.5), 0.25);
    }

    #[test]
    fn uniform_mesh_is_fixed_point_of_constant_monitor() {
        let mesh = RadialMesh::<f64>::uniform(51);
        let m = MonitorField {
            values: vec![2.5; 51],
        };
        let cfg = MeshConfig::default();
        let moved = move_mesh(&mesh, &m, 0.1, &cfg).unwrap();
        for (a, b) in mesh.nodes().iter().zip(moved.nodes()) {
            assert!((a - b).abs() < 1e-12);
        }
        let unmoved = move_mesh(&mesh, &m, 0.0, &cfg).unwrap();
        assert_eq!(mesh, unmoved);
    }

    #[test]
    fn relaxation_reaches_equidistribution() {
        // Monitor concentrated at the origin; iterate to steady state and
        // compare per-cell masses and the de Boor node placement.
        let n = 81;
        let mfun = |r: f64| 1.0 + 50.0 / (1.0 + 2500.0 * r * r);
        let cfg = MeshConfig::default();
        let mut mesh = RadialMesh::<f64>::uniform(n);
        for _ in 0..4000 {
            let values: Vec<f64> = mesh.nodes().iter().map(|&r| mfun(r)).collect();
            let m = MonitorField { values };
            mesh = move_mesh(&mesh, &m, 5e-3, &cfg).unwrap();
        }

        // Per-cell mass spread within 5%.
        let values: Vec<f64> = mesh.nodes().iter().map(|&r| mfun(r)).collect();
        let masses: Vec<f64> = (0..n - 1)
            .map(|i| {
                0.5 * (values[i] + values[i + 1]) * (mesh.nodes()[i + 1] - mesh.nodes()[i])
            })
            .collect();
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        for m in &masses {
            assert!((m - mean).abs() / mean < 0.05, "mass {m} vs mean {mean}");
        }

        // de Boor oracle: invert the cumulative integral of M on a dense grid.
        let dense = 20001;
        let mut cum = vec![0.0f64; dense];
        for i in 1..dense {
            let a = (i - 1) as f64 / (dense - 1) as f64;
            let b = i as f64 / (dense - 1) as f64;
            cum[i] = cum[i - 1] + 0.5 * (mfun(a) + mfun(b)) * (b - a);
        }
        let total = cum[dense - 1];
        let mut worst = 0.0f64;
        for (i, &node) in mesh.nodes().iter().enumerate() {
            let target = total * i as f64 / (n - 1) as f64;
            let k = cum.partition_point(|&c| c < target).min(dense - 1);
            let oracle = k as f64 / (dense - 1) as f64;
            worst = worst.max((node - oracle).abs());
        }
        assert!(worst < 0.01, "max node deviation from de Boor oracle {worst}");
    }

    #[test]
    fn interpolation_is_exact_on_identical_meshes_and_linears() {
        let mesh = RadialMesh::<f64>::uniform(31);
        let values: Vec<f64> = mesh.nodes().iter().map(|&r| (5.0 * r).sin()).collect();
        let same = interpolate_scalar(&values, &mesh, &mesh);
        for (a, b) in values.iter().zip(&same) {
            assert!((a - b).abs() < 1e-15);
        }

        let other = RadialMesh::from_nodes(
            (0..41)
                .map(|i| {
                    let s = i as f64 / 40.0;
                    s * s * (2.0 - s)
                })
                .map(|r| r.min(1.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let linear: Vec<f64> = mesh.nodes().iter().map(|&r| 3.0 - 2.0 * r).collect();
        let out = interpolate_scalar(&linear, &mesh, &other);
        for (x, y) in other.nodes().iter().zip(&out) {
            assert!((y - (3.0 - 2.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_of_steep_profile_matches_dense_oracle() {
        // Resample theta = 2 arctan(r/0.05) from a uniform to an adapted mesh
        // and back; compare against direct evaluation.
        let r_scale = 0.05f64;
        let profile = |r: f64| 2.0 * (r / r_scale).atan();
        let uniform = RadialMesh::<f64>::uniform(201);
        let values: Vec<f64> = uniform.nodes().iter().map(|&r| profile(r)).collect();

        // Adapted mesh: equidistribute the profile's own arclength monitor.
        let cfg = MeshConfig::default();
        let mut adapted = uniform.clone();
        for _ in 0..2000 {
            let mvals: Vec<f64> = adapted
                .nodes()
                .iter()
                .map(|&r| 1.0 + (2.0 / r_scale) / (1.0 + (r / r_scale).powi(2)))
                .collect();
            let m = MonitorField { values: mvals };
            adapted = move_mesh(&adapted, &m, 5e-3, &cfg).unwrap();
        }

        let there = interpolate_scalar(&values, &uniform, &adapted);
        let mut worst = 0.0f64;
        for (x, y) in adapted.nodes().iter().zip(&there) {
            worst = worst.max((y - profile(*x)).abs());
        }
        // Interpolation error bound ~ C h^2 |theta''|; h = 1/200 near origin.
        assert!(worst < 5e-3, "sup error vs dense oracle {worst}");

        let back = interpolate_scalar(&there, &adapted, &uniform);
        let mut worst_back = 0.0f64;
        for (x, y) in uniform.nodes().iter().zip(&back) {
            worst_back = worst_back.max((y - profile(*x)).abs());
        }
        assert!(worst_back < 1e-2, "round-trip sup error {worst_back}");
    }

    #[test]
    fn field_interpolation_keeps_unit_norm_and_pole() {
        let mesh = RadialMesh::<f64>::uniform(41);
        let theta: Vec<f64> = mesh.nodes().iter().map(|&r| 2.0 * (2.0 * r).atan()).collect();
        let field = MagnetizationField {
            u: theta.iter().map(|t| t.sin()).collect(),
            v: vec![0.0; 41],
            w: theta.iter().map(|t| t.cos()).collect(),
        };
        let other = RadialMesh::from_nodes(
            (0..41)
                .map(|i| (i as f64 / 40.0).powf(1.3))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let out = interpolate_field(&field, &mesh, &other).unwrap();
        assert!(out.max_norm_deviation() < 1e-15);
        assert_eq!(out.u[0], 0.0);
        assert_eq!(out.v[0], 0.0);
    }
}
