//! Initial-data families and boundary conditions, plus a numerical
//! topological-degree checker for the sphere-covering constructions.

use crate::mesh::RadialMesh;
use crate::state::{EulerField, MagnetizationField};
use crate::{lit, Error, Float, Result};

/// Inverse stereographic projection of the plane onto the sphere:
/// `T(x, y) = (2x, 2y, -1 + x^2 + y^2) / (1 + x^2 + y^2)`.
///
/// Unit norm holds by construction; `|arguments| -> infinity` approaches the
/// north pole `(0, 0, 1)`.
#[inline]
pub fn stereographic<T: Float>(x: T, y: T) -> [T; 3] {
    let two = lit::<T>(2.0);
    let q = x * x + y * y;
    let denom = T::one() + q;
    [two * x / denom, two * y / denom, (q - T::one()) / denom]
}

/// Linear polar-angle data `theta(r) = (4/3) pi r`, `phi = 0`.
pub fn theta_linear<T: Float>(mesh: &RadialMesh<T>) -> EulerField<T> {
    let coeff = lit::<T>(4.0 / 3.0) * T::PI();
    EulerField {
        theta: mesh.nodes().iter().map(|&r| coeff * r).collect(),
        phi: vec![T::zero(); mesh.len()],
    }
}

/// Three-component version of [`theta_linear`]:
/// `u = v = sin((4/3) pi r)/sqrt(2)`, `w = cos((4/3) pi r)`.
pub fn theta_linear_field<T: Float>(mesh: &RadialMesh<T>) -> MagnetizationField<T> {
    let coeff = lit::<T>(4.0 / 3.0) * T::PI();
    let inv_sqrt2 = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut u = Vec::with_capacity(mesh.len());
    let mut v = Vec::with_capacity(mesh.len());
    let mut w = Vec::with_capacity(mesh.len());
    for &r in mesh.nodes() {
        let (s, c) = (coeff * r).sin_cos();
        u.push(s * inv_sqrt2);
        v.push(s * inv_sqrt2);
        w.push(c);
    }
    u[0] = T::zero();
    v[0] = T::zero();
    w[0] = T::one();
    MagnetizationField { u, v, w }
}

/// Sphere-covering family from stereographic projection:
/// `x = tan(-pi/2 + r pi)`, `y = tan(-pi/2 + gamma pi)`.
///
/// The tangent singularities at `r in {0, 1}` (and `gamma in {0, 1}`) are
/// taken by their limits - the north pole - rather than evaluated.
pub fn gamma_family<T: Float>(mesh: &RadialMesh<T>, gamma: T) -> Result<MagnetizationField<T>> {
    if gamma < T::zero() || gamma > T::one() {
        return Err(Error::Precondition(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let n = mesh.len();
    let north = [T::zero(), T::zero(), T::one()];
    if gamma == T::zero() || gamma == T::one() {
        return Ok(MagnetizationField::uniform(n, north));
    }
    let half_pi = T::FRAC_PI_2();
    let y = (gamma * T::PI() - half_pi).tan();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &r in mesh.nodes() {
        let m = if r == T::zero() || r == T::one() {
            north
        } else {
            let x = (r * T::PI() - half_pi).tan();
            stereographic(x, y)
        };
        u.push(m[0]);
        v.push(m[1]);
        w.push(m[2]);
    }
    Ok(MagnetizationField { u, v, w })
}

/// Which member of the degree-1 initial-data family to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degree1Variant<T> {
    /// Boundary value away from the poles; `theta_b in [0, pi)`.
    Generic { theta_b: T },
    /// Boundary value at the north pole.
    North,
}

/// One member (parameter `s in [0, 1]`) of a one-parameter family of initial
/// data sweeping a degree-1 cover of the sphere.
pub fn degree1_family<T: Float>(
    mesh: &RadialMesh<T>,
    s: T,
    variant: Degree1Variant<T>,
) -> Result<MagnetizationField<T>> {
    if s < T::zero() || s > T::one() {
        return Err(Error::Precondition(format!(
            "family parameter s must lie in [0, 1], got {s}"
        )));
    }
    let n = mesh.len();
    let north = [T::zero(), T::zero(), T::one()];
    let half = lit::<T>(0.5);

    let nodes = mesh.nodes();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    match variant {
        Degree1Variant::Generic { theta_b } => {
            if theta_b < T::zero() || theta_b >= T::PI() {
                return Err(Error::Precondition(format!(
                    "theta_b must lie in [0, pi), got {theta_b}"
                )));
            }
            let x_b = ((T::PI() - theta_b) * half).tan();
            let (sin_s, cos_s) = (T::TAU() * s).sin_cos();
            for &r in nodes {
                let m = if r == T::zero() {
                    north
                } else {
                    let spread = (T::one() - r) / r;
                    stereographic(x_b + x_b * cos_s * spread, x_b * sin_s * spread)
                };
                u.push(m[0]);
                v.push(m[1]);
                w.push(m[2]);
            }
        }
        Degree1Variant::North => {
            if s == T::zero() || s == T::one() {
                return Ok(MagnetizationField::uniform(n, north));
            }
            let y = ((s - half) * T::PI()).tan();
            for &r in nodes {
                let m = if r == T::zero() || r == T::one() {
                    north
                } else {
                    stereographic(((r - half) * T::PI()).tan(), y)
                };
                u.push(m[0]);
                v.push(m[1]);
                w.push(m[2]);
            }
        }
    }
    Ok(MagnetizationField { u, v, w })
}

/// Topological degree of a family of sphere maps sampled on an `(r, s)` grid
/// (rows indexed by `r`, columns by the periodic parameter `s`).
///
/// The grid is triangulated, each triangle contributes its signed solid
/// angle `Omega = 2 atan2(a . (b x c), 1 + a.b + b.c + c.a)`, and the degree
/// is the total over `4 pi`. The orientation convention makes the canonical
/// north-pole covering family come out at `+1`. Sampling must be fine
/// enough that adjacent images stay within geodesic distance `pi/2`.
pub fn degree<T: Float>(samples: &[Vec<[T; 3]>]) -> Result<i32> {
    let nr = samples.len();
    if nr < 3 {
        return Err(Error::Precondition("need at least 3 rows".into()));
    }
    let ns = samples[0].len();
    if ns < 3 {
        return Err(Error::Precondition("need at least 3 columns".into()));
    }
    for row in samples {
        if row.len() != ns {
            return Err(Error::Precondition("ragged sample grid".into()));
        }
    }

    let limit = T::FRAC_PI_2();
    let geodesic = |a: &[T; 3], b: &[T; 3]| -> T {
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        dot.min(T::one()).max(-T::one()).acos()
    };
    let mut max_gap = T::zero();
    for i in 0..nr {
        for j in 0..ns {
            let here = &samples[i][j];
            if i + 1 < nr {
                let g = geodesic(here, &samples[i + 1][j]);
                if g > max_gap {
                    max_gap = g;
                }
            }
            let g = geodesic(here, &samples[i][(j + 1) % ns]);
            if g > max_gap {
                max_gap = g;
            }
        }
    }
    if max_gap > limit {
        return Err(Error::InsufficientResolution {
            gap: max_gap.to_f64().unwrap_or(f64::NAN),
            limit: limit.to_f64().unwrap_or(f64::NAN),
        });
    }

    let solid_angle = |a: &[T; 3], b: &[T; 3], c: &[T; 3]| -> T {
        let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        let denom = T::one()
            + (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            + (b[0] * c[0] + b[1] * c[1] + b[2] * c[2])
            + (c[0] * a[0] + c[1] * a[1] + c[2] * a[2]);
        lit::<T>(2.0) * triple.atan2(denom)
    };

    let mut total = T::zero();
    for i in 0..nr - 1 {
        for j in 0..ns {
            let jn = (j + 1) % ns;
            let a = &samples[i][j];
            let b = &samples[i + 1][j];
            let c = &samples[i + 1][jn];
            let d = &samples[i][jn];
            // Orientation fixed so the canonical covering family is +1.
            total += solid_angle(a, c, b) + solid_angle(a, d, c);
        }
    }
    let deg = total / (lit::<T>(4.0) * T::PI());
    let rounded = deg.round();
    if (deg - rounded).abs() > lit(0.1) {
        return Err(Error::Precondition(format!(
            "degree sum {deg} too far from an integer; sampling inadequate"
        )));
    }
    Ok(rounded.to_f64().unwrap_or(0.0) as i32)
}

/// Samples a degree-checkable grid out of a closure `(r_index, s_index) ->
/// point`, convenience for the family constructors.
pub fn sample_family<T: Float, F>(nr: usize, ns: usize, f: F) -> Vec<Vec<[T; 3]>>
where
    F: Fn(usize, usize) -> [T; 3],
{
    (0..nr)
        .map(|i| (0..ns).map(|j| f(i, j)).collect())
        .collect()
}

/// Initial-data selector used by configuration front ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData<T> {
    ThetaLinear,
    GammaFamily { gamma: T },
    Degree1Generic { theta_b: T, s: T },
    Degree1North { s: T },
}

impl<T: Float> InitialData<T> {
    /// Builds the three-component field for this selector.
    pub fn build_field(&self, mesh: &RadialMesh<T>) -> Result<MagnetizationField<T>> {
        match *self {
            InitialData::ThetaLinear => Ok(theta_linear_field(mesh)),
            InitialData::GammaFamily { gamma } => gamma_family(mesh, gamma),
            InitialData::Degree1Generic { theta_b, s } => {
                degree1_family(mesh, s, Degree1Variant::Generic { theta_b })
            }
            InitialData::Degree1North { s } => degree1_family(mesh, s, Degree1Variant::North),
        }
    }

    /// Builds the polar-angle profile for the radially symmetric solver;
    /// only the linear family is radial.
    pub fn build_radial(&self, mesh: &RadialMesh<T>) -> Result<Vec<T>> {
        match *self {
            InitialData::ThetaLinear => Ok(theta_linear(mesh).theta),
            _ => Err(Error::Precondition(
                "the radial solver supports only the linear polar-angle family".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn stereographic_points_and_norm() {
        let south = stereographic(0.0f64, 0.0);
        assert_eq!(south, [0.0, 0.0, -1.0]);
        let e1 = stereographic(1.0f64, 0.0);
        assert!((e1[0] - 1.0).abs() < 1e-15);
        assert!(e1[1].abs() < 1e-15);
        assert!(e1[2].abs() < 1e-15);

        // Deterministic sweep standing in for random inputs.
        for i in 0..40 {
            for j in 0..25 {
                let x = -8.0 + 16.0 * i as f64 / 39.0;
                let y = -6.0 + 12.0 * j as f64 / 24.0;
                let m = stereographic(x, y);
                let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                assert!((norm - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn theta_linear_profile_and_field() {
        let mesh = RadialMesh::<f64>::uniform(201);
        let euler = theta_linear(&mesh);
        assert_eq!(euler.theta[0], 0.0);
        assert!((euler.theta[200] - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!(euler.theta[200] > PI);

        let field = theta_linear_field(&mesh);
        for (i, &r) in mesh.nodes().iter().enumerate() {
            let expect = (4.0 / 3.0 * PI * r).sin() / 2f64.sqrt();
            assert!((field.u[i] - expect).abs() < 1e-14);
            assert!((field.v[i] - expect).abs() < 1e-14);
            assert!((field.w[i] - (4.0 / 3.0 * PI * r).cos()).abs() < 1e-14);
        }
        assert!(field.max_norm_deviation() < 1e-14);
    }

    #[test]
    fn gamma_family_limits_and_symmetry() {
        let mesh = RadialMesh::<f64>::uniform(201);
        let f = gamma_family(&mesh, 0.5).unwrap();
        assert_eq!(f.node(0), [0.0, 0.0, 1.0]);
        assert_eq!(f.node(200), [0.0, 0.0, 1.0]);
        // r = 1/2 lands on the south pole.
        assert!((f.w[100] + 1.0).abs() < 1e-12);
        // v vanishes identically at gamma = 1/2.
        for i in 0..201 {
            assert!(f.v[i].abs() <= 1e-14);
        }
        assert!(f.max_norm_deviation() < 1e-14);

        // Mirror symmetry gamma <-> 1 - gamma flips v.
        let a = gamma_family(&mesh, 0.3).unwrap();
        let b = gamma_family(&mesh, 0.7).unwrap();
        for i in 0..201 {
            assert!((a.u[i] - b.u[i]).abs() < 1e-12);
            assert!((a.v[i] + b.v[i]).abs() < 1e-12);
            assert!((a.w[i] - b.w[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn degree1_generic_boundary_values() {
        let mesh = RadialMesh::<f64>::uniform(101);
        let theta_b = 2.0 * PI / 3.0;
        for s in [0.0, 0.25, 0.6] {
            let f = degree1_family(&mesh, s, Degree1Variant::Generic { theta_b }).unwrap();
            assert_eq!(f.node(0), [0.0, 0.0, 1.0]);
            // Boundary z-component is cos(theta_b) for every s.
            assert!(
                (f.w[100] - theta_b.cos()).abs() < 1e-12,
                "s {s}: w(1) = {}",
                f.w[100]
            );
            assert!(f.max_norm_deviation() < 1e-14);
        }
    }

    #[test]
    fn degree1_north_center_hits_south_pole() {
        let mesh = RadialMesh::<f64>::uniform(101);
        let f = degree1_family(&mesh, 0.5, Degree1Variant::North).unwrap();
        assert_eq!(f.node(0), [0.0, 0.0, 1.0]);
        assert_eq!(f.node(100), [0.0, 0.0, 1.0]);
        assert!((f.w[50] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_of_north_family_is_one() {
        let build = |nr: usize, ns: usize| -> Vec<Vec<[f64; 3]>> {
            let mesh = RadialMesh::<f64>::uniform(nr);
            sample_family(nr, ns, |i, j| {
                let s = j as f64 / ns as f64;
                let f = degree1_family(&mesh, s, Degree1Variant::North).unwrap();
                f.node(i)
            })
        };
        assert_eq!(degree(&build(201, 201)).unwrap(), 1);
        // Invariant under resampling.
        assert_eq!(degree(&build(101, 101)).unwrap(), 1);
    }

    #[test]
    fn degree_of_constant_family_is_zero() {
        let grid = sample_family(51, 51, |_, _| [0.0f64, 0.0, 1.0]);
        assert_eq!(degree(&grid).unwrap(), 0);
    }

    #[test]
    fn degree_of_gamma_sweep_is_one() {
        let nr = 201;
        let ns = 201;
        let mesh = RadialMesh::<f64>::uniform(nr);
        let fields: Vec<_> = (0..ns)
            .map(|j| gamma_family(&mesh, j as f64 / ns as f64).unwrap())
            .collect();
        let grid = sample_family(nr, ns, |i, j| fields[j].node(i));
        assert_eq!(degree(&grid).unwrap(), 1);

        let coarse_mesh = RadialMesh::<f64>::uniform(101);
        let coarse_fields: Vec<_> = (0..101)
            .map(|j| gamma_family(&coarse_mesh, j as f64 / 101.0).unwrap())
            .collect();
        let coarse = sample_family(101, 101, |i, j| coarse_fields[j].node(i));
        assert_eq!(degree(&coarse).unwrap(), 1);
    }

    #[test]
    fn degree_refuses_coarse_sampling() {
        let mesh = RadialMesh::<f64>::uniform(5);
        let grid = sample_family(5, 5, |i, j| {
            let s = j as f64 / 5.0;
            let f = degree1_family(&mesh, s, Degree1Variant::North).unwrap();
            f.node(i)
        });
        assert!(matches!(
            degree(&grid),
            Err(Error::InsufficientResolution { .. })
        ));
    }

    #[test]
    fn generic_family_covers_with_degree_magnitude_one() {
        // The generic construction winds the opposite way; magnitude 1.
        let nr = 201;
        let ns = 201;
        let mesh = RadialMesh::<f64>::uniform(nr);
        let fields: Vec<_> = (0..ns)
            .map(|j| {
                degree1_family(
                    &mesh,
                    j as f64 / ns as f64,
                    Degree1Variant::Generic { theta_b: 0.4 * PI },
                )
                .unwrap()
            })
            .collect();
        let grid = sample_family(nr, ns, |i, j| fields[j].node(i));
        assert_eq!(degree(&grid).unwrap().abs(), 1);
    }
}
