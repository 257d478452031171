//! State representations shared by every other module: Cartesian-on-sphere
//! fields, Euler-angle fields, equation parameters and the exact conversions
//! between the representations.

use crate::{lit, Error, Float, Result};

/// Parameters `(alpha, beta, n)` of the equivariant flow.
///
/// `alpha` weighs the precession term, `beta >= 0` the damping term; the pair
/// is renormalized on construction so that `alpha^2 + beta^2 = 1`. `n >= 1`
/// is the equivariance index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LLGParams<T> {
    alpha: T,
    beta: T,
    n: u32,
}

impl<T: Float> LLGParams<T> {
    pub fn new(alpha: T, beta: T, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams(
                "equivariance index n must be >= 1".into(),
            ));
        }
        if beta < T::zero() {
            return Err(Error::InvalidParams(format!(
                "damping coefficient beta must be >= 0, got {beta}"
            )));
        }
        let norm = alpha.hypot(beta);
        if norm < lit(1e-30) {
            return Err(Error::InvalidParams(
                "(alpha, beta) must not both vanish".into(),
            ));
        }
        Ok(Self {
            alpha: alpha / norm,
            beta: beta / norm,
            n,
        })
    }

    /// Pure heat-flow limit: `alpha = 0`, `beta = 1`.
    pub fn heat_flow(n: u32) -> Self {
        Self {
            alpha: T::zero(),
            beta: T::one(),
            n,
        }
    }

    /// Conservative (Schroedinger map) limit: `alpha = 1`, `beta = 0`.
    pub fn schroedinger(n: u32) -> Self {
        Self {
            alpha: T::one(),
            beta: T::zero(),
            n,
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn index(&self) -> u32 {
        self.n
    }

    pub fn index_scalar(&self) -> T {
        lit(self.n as f64)
    }
}

/// Direction field `(u, v, w)` sampled on the nodes of a radial mesh.
///
/// Each node triple is a point on the unit sphere (up to projection
/// tolerance); the node at `r = 0` must satisfy `u = v = 0` for finite
/// energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationField<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub w: Vec<T>,
}

impl<T: Float> MagnetizationField<T> {
    pub fn new(u: Vec<T>, v: Vec<T>, w: Vec<T>) -> Result<Self> {
        if u.len() != v.len() || u.len() != w.len() {
            return Err(Error::InvalidParams(
                "component arrays must have equal length".into(),
            ));
        }
        if u.len() < 4 {
            return Err(Error::InvalidParams(
                "field needs at least 4 nodes".into(),
            ));
        }
        Ok(Self { u, v, w })
    }

    /// Constant field, e.g. the north pole `(0, 0, 1)` at every node.
    pub fn uniform(len: usize, value: [T; 3]) -> Self {
        Self {
            u: vec![value[0]; len],
            v: vec![value[1]; len],
            w: vec![value[2]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn node(&self, i: usize) -> [T; 3] {
        [self.u[i], self.v[i], self.w[i]]
    }

    /// Normalizes every node triple onto the unit sphere.
    ///
    /// A near-zero triple signals a failed step and is reported as
    /// [`Error::DegenerateNode`] rather than silently rescaled.
    pub fn project_to_sphere(&self) -> Result<Self> {
        let mut out = self.clone();
        out.project_in_place()?;
        Ok(out)
    }

    pub fn project_in_place(&mut self) -> Result<()> {
        let floor = lit::<T>(1e-6);
        for i in 0..self.len() {
            let norm = (self.u[i] * self.u[i] + self.v[i] * self.v[i] + self.w[i] * self.w[i])
                .sqrt();
            if norm < floor {
                return Err(Error::DegenerateNode { node: i });
            }
            self.u[i] /= norm;
            self.v[i] /= norm;
            self.w[i] /= norm;
        }
        Ok(())
    }

    /// Largest deviation of any node norm from 1.
    pub fn max_norm_deviation(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.len() {
            let norm = (self.u[i] * self.u[i] + self.v[i] * self.v[i] + self.w[i] * self.w[i])
                .sqrt();
            let dev = (norm - T::one()).abs();
            if dev > worst {
                worst = dev;
            }
        }
        worst
    }

    /// Per-node principal Euler angles `(theta in [0, pi], phi in (-pi, pi])`.
    pub fn to_euler_principal(&self) -> EulerField<T> {
        let mut theta = Vec::with_capacity(self.len());
        let mut phi = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (th, ph) = euler_angles_principal([self.u[i], self.v[i], self.w[i]]);
            theta.push(th);
            phi.push(ph);
        }
        EulerField { theta, phi }
    }
}

/// Euler-angle field `(theta, phi)` per mesh node.
///
/// `theta` is stored unwrapped: values outside `[0, pi]` are meaningful and
/// arise after continuation past blowup (`theta(0) = 2 pi`). The principal
/// per-node inverse of [`euler_to_cartesian`] is [`cartesian_to_euler`].
#[derive(Debug, Clone, PartialEq)]
pub struct EulerField<T> {
    pub theta: Vec<T>,
    pub phi: Vec<T>,
}

impl<T: Float> EulerField<T> {
    pub fn new(theta: Vec<T>, phi: Vec<T>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::InvalidParams(
                "theta and phi must have equal length".into(),
            ));
        }
        Ok(Self { theta, phi })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn to_magnetization(&self) -> MagnetizationField<T> {
        let mut u = Vec::with_capacity(self.len());
        let mut v = Vec::with_capacity(self.len());
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let m = euler_to_cartesian(self.theta[i], self.phi[i]);
            u.push(m[0]);
            v.push(m[1]);
            w.push(m[2]);
        }
        MagnetizationField { u, v, w }
    }
}

/// Boundary condition at `r = 1` in Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCondition<T> {
    pub theta_b: T,
    pub phi_b: T,
}

impl<T: Float> BoundaryCondition<T> {
    pub fn new(theta_b: T, phi_b: T) -> Result<Self> {
        if theta_b < T::zero() || theta_b >= T::TAU() {
            return Err(Error::InvalidParams(format!(
                "theta_b must lie in [0, 2 pi), got {theta_b}"
            )));
        }
        Ok(Self { theta_b, phi_b })
    }

    /// Slope of the unique equilibrium `theta = 2 arctan(q r)` matching this
    /// boundary value; undefined at `theta_b = pi`.
    pub fn equilibrium_slope(&self) -> Option<T> {
        if (self.theta_b - T::PI()).abs() < lit(1e-12) {
            None
        } else {
            Some((self.theta_b / lit(2.0)).tan())
        }
    }

    pub fn unit_vector(&self) -> [T; 3] {
        euler_to_cartesian(self.theta_b, self.phi_b)
    }
}

/// Point on the sphere from Euler angles:
/// `(cos phi sin theta, sin phi sin theta, cos theta)`.
#[inline]
pub fn euler_to_cartesian<T: Float>(theta: T, phi: T) -> [T; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [cp * st, sp * st, ct]
}

/// Principal Euler angles of a unit vector.
///
/// Returns `theta in [0, pi]` and `phi in (-pi, pi]`, with the convention
/// `phi = 0` at the poles where the azimuth is undefined. The input must be
/// a unit vector to within `1e-9`.
pub fn cartesian_to_euler<T: Float>(m: [T; 3]) -> Result<(T, T)> {
    let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if (norm - T::one()).abs() > lit(1e-9) {
        return Err(Error::NonUnitVector {
            node: 0,
            norm: norm.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(euler_angles_principal(m))
}

#[inline]
fn euler_angles_principal<T: Float>(m: [T; 3]) -> (T, T) {
    let s = (m[0] * m[0] + m[1] * m[1]).sqrt();
    let theta = s.atan2(m[2]);
    let phi = if s < lit(1e-12) {
        T::zero()
    } else {
        m[1].atan2(m[0])
    };
    (theta, phi)
}
