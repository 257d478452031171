//! Reduced ODE systems and special functions predicting the near-blowup
//! behaviour independently of the PDE: the slow-time amplitude equation, the
//! matched system it feeds, the fast separatrix rotation, and the closed
//! forms for equivariance index `n >= 2`.

use num_complex::Complex;

use crate::mesh::RadialMesh;
use crate::ode;
use crate::state::LLGParams;
use crate::stencil::SpatialOperators;
use crate::{lit, quad, Error, Float, Result};

/// One sample of the slow-time amplitude trajectory. `sigma` and its
/// derivatives are `(real, imaginary)` pairs; the second derivative comes
/// from the equation itself, not from differencing.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSample<T> {
    pub tau: T,
    pub sigma: [T; 2],
    pub dsigma: [T; 2],
    pub ddsigma: [T; 2],
}

/// Integrates the amplitude equation `(sigma'' - sigma') tau = sigma`
/// componentwise from `tau0 > 0` to `tau_end` at relative tolerance `1e-10`.
///
/// The general solution mixes a growing branch `~ tau e^tau` and a decaying
/// branch `~ 1/tau`; callers integrate over bounded windows so the growing
/// branch stays representable.
pub fn sigma_ode<T: Float>(
    tau0: T,
    sigma0: [T; 2],
    dsigma0: [T; 2],
    tau_end: T,
) -> Result<Vec<SigmaSample<T>>> {
    if tau0 <= T::zero() {
        return Err(Error::Precondition("tau0 must be positive".into()));
    }
    if tau_end <= T::zero() {
        return Err(Error::Precondition("tau_end must be positive".into()));
    }
    let rhs = |tau: T, y: &[T]| -> Vec<T> {
        // y = [sr, dsr, si, dsi]
        vec![
            y[1],
            y[1] + y[0] / tau,
            y[3],
            y[3] + y[2] / tau,
        ]
    };
    let y0 = vec![sigma0[0], dsigma0[0], sigma0[1], dsigma0[1]];
    let points = ode::integrate(rhs, tau0, y0, tau_end, lit(1e-10), lit(1e-12))?;
    Ok(points
        .into_iter()
        .map(|p| {
            let tau = p.t;
            SigmaSample {
                tau,
                sigma: [p.y[0], p.y[2]],
                dsigma: [p.y[1], p.y[3]],
                ddsigma: [p.y[1] + p.y[0] / tau, p.y[3] + p.y[2] / tau],
            }
        })
        .collect())
}

/// Residual of the amplitude equation for a supplied closed form; exact
/// solutions give zero up to rounding.
pub fn sigma_residual<T: Float>(tau: T, sigma: T, dsigma: T, ddsigma: T) -> T {
    (ddsigma - dsigma) * tau - sigma
}

/// One sample of the matched reduced system: the algebraic rate factor `p`,
/// the shifted azimuth `c_tilde`, and the consistency residuals of the two
/// evolution equations of the system (both vanish along exact trajectories
/// of the amplitude equation).
#[derive(Debug, Clone, Copy)]
pub struct ReducedState<T> {
    pub tau: T,
    pub sigma_r: T,
    pub sigma_i: T,
    pub p: T,
    pub c_tilde: T,
    pub residual_rate: T,
    pub residual_angle: T,
}

/// Evaluates the matched system along an amplitude trajectory:
/// `p = 2 |sigma'|`, `c_tilde = arg(sigma')`, with the residuals of
/// `(tau/4) p (p' - p) = Re(sigma conj(sigma'))` and
/// `(tau/4) p^2 c_tilde' = Im(conj(sigma') sigma)`.
pub fn reduced_system<T: Float>(trajectory: &[SigmaSample<T>]) -> Result<Vec<ReducedState<T>>> {
    let two = lit::<T>(2.0);
    let quarter = lit::<T>(0.25);
    let mut out = Vec::with_capacity(trajectory.len());
    for s in trajectory {
        let speed2 = s.dsigma[0] * s.dsigma[0] + s.dsigma[1] * s.dsigma[1];
        if speed2 == T::zero() {
            return Err(Error::UndefinedAngle);
        }
        let speed = speed2.sqrt();
        let p = two * speed;
        let c_tilde = s.dsigma[1].atan2(s.dsigma[0]);
        // dp/dtau and dC/dtau from the chain rule through sigma''.
        let dp = two * (s.dsigma[0] * s.ddsigma[0] + s.dsigma[1] * s.ddsigma[1]) / speed;
        let dc = (s.dsigma[0] * s.ddsigma[1] - s.dsigma[1] * s.ddsigma[0]) / speed2;
        let residual_rate = quarter * s.tau * p * (dp - p)
            - (s.sigma[0] * s.dsigma[0] + s.sigma[1] * s.dsigma[1]);
        let residual_angle =
            quarter * s.tau * p * p * dc - (s.sigma[1] * s.dsigma[0] - s.sigma[0] * s.dsigma[1]);
        out.push(ReducedState {
            tau: s.tau,
            sigma_r: s.sigma[0],
            sigma_i: s.sigma[1],
            p,
            c_tilde,
            residual_rate,
            residual_angle,
        });
    }
    Ok(out)
}

/// Fast-rotation state near blowup; the fast scale is
/// `eps^2 = R ln(1/R) / q0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixState<T> {
    pub c_tilde: T,
    pub r_scale: T,
    pub q0: T,
    pub eps: T,
    pub t_fast: T,
}

impl<T: Float> SeparatrixState<T> {
    pub fn new(c_tilde: T, r_scale: T, q0: T) -> Result<Self> {
        if r_scale <= T::zero() || r_scale >= T::one() {
            return Err(Error::Precondition("scale must lie in (0, 1)".into()));
        }
        if q0 <= T::zero() {
            return Err(Error::Precondition("outer slope must be positive".into()));
        }
        let eps = (r_scale * (T::one() / r_scale).ln() / q0).sqrt();
        Ok(Self {
            c_tilde,
            r_scale,
            q0,
            eps,
            t_fast: T::zero(),
        })
    }
}

/// One output point of the separatrix rotation: fast time, numerical angle,
/// closed-form angle.
#[derive(Debug, Clone, Copy)]
pub struct SeparatrixPoint<T> {
    pub t_fast: T,
    pub numeric: T,
    pub closed_form: T,
}

/// Solution of `dC/dt = sin C` from `C(0) = c0` over `t_range`, with the
/// matching closed form `+-[pi/2 + arctan(sinh(t + t_shift))]` fitted
/// through the initial value.
#[derive(Debug, Clone)]
pub struct SeparatrixSolution<T> {
    pub points: Vec<SeparatrixPoint<T>>,
    pub sup_error: T,
}

pub fn separatrix_ode<T: Float>(c0: T, t_range: (T, T)) -> Result<SeparatrixSolution<T>> {
    if t_range.1 < t_range.0 || t_range.0 > T::zero() || t_range.1 < T::zero() {
        return Err(Error::Precondition(
            "time range must contain 0 with t_lo <= t_hi".into(),
        ));
    }
    let tau = T::TAU();
    let pi = T::PI();
    // Principal part in (-pi, pi]; the 2 pi k offset rides along unchanged.
    let reduced = c0 - tau * ((c0 - lit::<T>(1e-300)) / tau).round();
    let offset = c0 - reduced;

    let closed: Box<dyn Fn(T) -> T> = if reduced.abs() < lit(1e-14)
        || (reduced.abs() - pi).abs() < lit(1e-14)
    {
        Box::new(move |_t: T| c0)
    } else {
        let sign = reduced.signum();
        let shift = (reduced.abs() - T::FRAC_PI_2()).tan().asinh();
        Box::new(move |t: T| offset + sign * (T::FRAC_PI_2() + (t + shift).sinh().atan()))
    };

    let rhs = |_t: T, y: &[T]| vec![y[0].sin()];
    let mut points_map = Vec::new();
    // Integrate each direction from 0.
    let forward = ode::integrate(rhs, T::zero(), vec![c0], t_range.1, lit(1e-11), lit(1e-13))?;
    let backward = ode::integrate(rhs, T::zero(), vec![c0], t_range.0, lit(1e-11), lit(1e-13))?;
    for p in backward.into_iter().rev() {
        points_map.push((p.t, p.y[0]));
    }
    for p in forward.into_iter().skip(1) {
        points_map.push((p.t, p.y[0]));
    }

    let mut sup_error = T::zero();
    let points: Vec<SeparatrixPoint<T>> = points_map
        .into_iter()
        .map(|(t, numeric)| {
            let cf = closed(t);
            let err = (numeric - cf).abs();
            if err > sup_error {
                sup_error = err;
            }
            SeparatrixPoint {
                t_fast: t,
                numeric,
                closed_form: cf,
            }
        })
        .collect();
    Ok(SeparatrixSolution { points, sup_error })
}

/// Closed-form constant `E_n = pi / (2 n^2 sin(pi/n))` for `n >= 2`.
pub fn en_closed<T: Float>(n: u32) -> Result<T> {
    if n < 2 {
        return Err(Error::Precondition("n must be >= 2".into()));
    }
    let nf = lit::<T>(n as f64);
    Ok(T::PI() / (lit::<T>(2.0) * nf * nf * (T::PI() / nf).sin()))
}

/// Companion quadrature of `integral_0^inf s^(2n+1) / (1 + s^(2n))^2 ds`.
///
/// The tail is folded onto `[0, 1]` by `s -> 1/s`, leaving the smooth
/// integrand `(s^(2n+1) + s^(2n-3)) / (1 + s^(2n))^2`.
pub fn en_quadrature<T: Float>(n: u32) -> Result<T> {
    if n < 2 {
        return Err(Error::Precondition("n must be >= 2".into()));
    }
    let p = 2.0 * n as f64;
    let f = move |s: T| {
        let sp = s.powf(lit(p));
        let denom = (T::one() + sp) * (T::one() + sp);
        (sp * s + s.powf(lit(p - 3.0))) / denom
    };
    Ok(quad::integrate(&f, T::zero(), T::one(), lit(1e-13)))
}

/// First-order inner azimuth correction slope
/// `phi1'(xi) = [(xi^-2n + 2 + xi^2n) / xi] * integral_0^xi s^(2n+1)/(1+s^(2n))^2 ds`,
/// with `phi1'(0) = 0`.
pub fn phi1_inner<T: Float>(xi: T, n: u32) -> Result<T> {
    if n < 2 {
        return Err(Error::Precondition("n must be >= 2".into()));
    }
    if xi < T::zero() {
        return Err(Error::Precondition("xi must be nonnegative".into()));
    }
    let p = 2.0 * n as f64;
    if xi <= lit(1e-3) {
        // Leading behaviour xi/(2n + 2); corrections are O(xi^(2n+1)).
        return Ok(xi / lit::<T>(p + 2.0));
    }
    let f = move |s: T| {
        let sp = s.powf(lit(p));
        let denom = (T::one() + sp) * (T::one() + sp);
        sp * s / denom
    };
    let integral = quad::integrate(&f, T::zero(), xi, lit(1e-13));
    let xp = xi.powf(lit(p));
    Ok((T::one() / xp + lit::<T>(2.0) + xp) / xi * integral)
}

/// Why the higher-index reduced integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HigherNStop {
    TimeEnd,
    /// The inner scale collapsed below the floor (blowup branch).
    ScaleVanished,
    /// The inner scale grew past the cap (expanding branch).
    ScaleEscaped,
    /// The angle reached a different multiple of pi than it started at.
    AngleReachedMultipleOfPi,
}

/// Trajectory of the `(R, C_tilde)` system for `n >= 2`.
#[derive(Debug, Clone)]
pub struct HigherNTrajectory<T> {
    /// `(t, r_scale, c_tilde)` samples.
    pub points: Vec<(T, T, T)>,
    pub stop: HigherNStop,
}

/// Integrates the reduced system for `n >= 2`:
/// `C' = (n q0 / E_n) R^(n-2) sin C`, `R' = -(q0 / E_n) R^(n-1) cos C`,
/// with event detection for scale collapse/escape and for the angle locking
/// onto a new multiple of pi.
pub fn higher_n_system<T: Float>(
    r0: T,
    c0: T,
    n: u32,
    q0: T,
    t_end: T,
) -> Result<HigherNTrajectory<T>> {
    if r0 <= T::zero() {
        return Err(Error::Precondition("initial scale must be positive".into()));
    }
    if q0 <= T::zero() {
        return Err(Error::Precondition("outer slope must be positive".into()));
    }
    let e_n = en_closed::<T>(n)?;
    let nf = lit::<T>(n as f64);
    let rate_c = nf * q0 / e_n;
    let rate_r = q0 / e_n;
    let floor = lit::<T>(1e-10);
    let cap = lit::<T>(1e3);
    let pi = T::PI();
    let start_multiple = (c0 / pi).round();

    let rhs = move |_t: T, y: &[T]| -> Vec<T> {
        let r = y[0].max(T::zero());
        let c = y[1];
        let rn2 = if n == 2 { T::one() } else { r.powi(n as i32 - 2) };
        let rn1 = r.powi(n as i32 - 1);
        vec![-rate_r * rn1 * c.cos(), rate_c * rn2 * c.sin()]
    };

    let mut stop = HigherNStop::TimeEnd;
    let halt = |_t: T, y: &[T]| -> bool {
        let r = y[0];
        let c = y[1];
        if r <= floor || r >= cap {
            return true;
        }
        let nearest = (c / pi).round();
        nearest != start_multiple && (c - nearest * pi).abs() < lit(1e-8)
    };
    let mut f = rhs;
    let points = ode::integrate_until(
        &mut f,
        T::zero(),
        vec![r0, c0],
        t_end,
        lit(1e-11),
        lit(1e-13),
        halt,
    )?;

    if let Some(last) = points.last() {
        let r = last.y[0];
        let c = last.y[1];
        if r <= floor {
            stop = HigherNStop::ScaleVanished;
        } else if r >= cap {
            stop = HigherNStop::ScaleEscaped;
        } else {
            let nearest = (c / pi).round();
            if nearest != start_multiple && (c - nearest * pi).abs() < lit(1e-8) {
                stop = HigherNStop::AngleReachedMultipleOfPi;
            }
        }
    }
    Ok(HigherNTrajectory {
        points: points.into_iter().map(|p| (p.t, p.y[0], p.y[1])).collect(),
        stop,
    })
}

/// Tangent-plane linearization rates `(beta - i alpha)(z'' + z'/r - z/r^2)`
/// at interior nodes (Dirichlet ends).
pub fn tangent_plane_rhs<T: Float>(
    z: &[Complex<T>],
    mesh: &RadialMesh<T>,
    params: &LLGParams<T>,
) -> Vec<Complex<T>> {
    let n = mesh.len();
    assert_eq!(z.len(), n, "state/mesh length mismatch");
    let ops = SpatialOperators::new(mesh);
    let r = mesh.nodes();
    let coeff = Complex::new(params.beta(), -params.alpha());
    let re: Vec<T> = z.iter().map(|c| c.re).collect();
    let im: Vec<T> = z.iter().map(|c| c.im).collect();

    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for i in 1..n - 1 {
        let inv_r = T::one() / r[i];
        let lap_re = ops.d2_at(&re, i) + ops.d1_at(&re, i) * inv_r - re[i] * inv_r * inv_r;
        let lap_im = ops.d2_at(&im, i) + ops.d1_at(&im, i) * inv_r - im[i] * inv_r * inv_r;
        out[i] = coeff * Complex::new(lap_re, lap_im);
    }
    out
}
