//! Extracts blowup structure from trajectories: the inner bubble scale and
//! orientation, the blowup-rate fit, outcome classification by rotation
//! sign, the inner/outer azimuth split, and the continuation of a blowup
//! state past the singular time.

use crate::integrator::{RunResult, SimField, SimState, Termination};
use crate::state::{EulerField, LLGParams};
use crate::{lit, Error, Float, Result};

/// Inner-profile fit: `theta(r) ~ 2 arctan(r / r_scale)` with bubble azimuth
/// `azimuth` and normalized sup residual `residual`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleFit<T> {
    pub r_scale: T,
    pub azimuth: T,
    pub residual: T,
}

/// Knobs of the bubble fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings<T> {
    /// Smallest gradient at which a core is considered present.
    pub grad_min: T,
    /// Fit window in multiples of the bubble scale.
    pub window: T,
    /// Largest acceptable normalized sup residual.
    pub residual_max: T,
}

impl<T: Float> Default for FitSettings<T> {
    fn default() -> Self {
        Self {
            grad_min: lit(10.0),
            window: lit(10.0),
            residual_max: lit(0.2),
        }
    }
}

/// Fits the rescaled harmonic-map profile to nodal `(theta, azimuth)` data.
///
/// `amp` is the transverse amplitude `sqrt(u^2 + v^2)` used to weight the
/// circular mean of the azimuth (pole nodes carry no azimuth information).
/// The initial guess is `r_scale = 2 / grad_inf`, refined by Gauss-Newton
/// least squares over the window `r <= window * r_scale`.
pub fn fit_bubble_profile<T: Float>(
    r: &[T],
    theta: &[T],
    azimuth: &[T],
    amp: &[T],
    grad_inf: T,
    cfg: &FitSettings<T>,
) -> Result<BubbleFit<T>> {
    if grad_inf < cfg.grad_min {
        return Err(Error::Precondition(format!(
            "no core to fit: grad_inf = {grad_inf} below {}",
            cfg.grad_min
        )));
    }
    let two = lit::<T>(2.0);
    let mut r_scale = two / grad_inf;

    // Two passes: refit after the window adapts to the refined scale.
    for _ in 0..2 {
        let win = cfg.window * r_scale;
        let m = r.partition_point(|&x| x <= win).max(2);
        if m < 5 {
            return Err(Error::Precondition(
                "fewer than 5 nodes inside the fit window".into(),
            ));
        }
        // Gauss-Newton on the single parameter r_scale.
        for _ in 0..30 {
            let mut num = T::zero();
            let mut den = T::zero();
            for i in 0..m {
                let model = two * (r[i] / r_scale).atan();
                let res = theta[i] - model;
                let g = -two * r[i] / (r_scale * r_scale + r[i] * r[i]);
                num += g * res;
                den += g * g;
            }
            if den == T::zero() {
                break;
            }
            let mut delta = num / den;
            let cap = r_scale * lit::<T>(0.5);
            if delta > cap {
                delta = cap;
            }
            if delta < -cap {
                delta = -cap;
            }
            r_scale += delta;
            if delta.abs() <= r_scale * lit::<T>(1e-14) {
                break;
            }
        }
    }

    let win = cfg.window * r_scale;
    let m = r.partition_point(|&x| x <= win).max(2);
    let mut sup_res = T::zero();
    let mut sup_model = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    for i in 0..m {
        let model = two * (r[i] / r_scale).atan();
        let res = (theta[i] - model).abs();
        if res > sup_res {
            sup_res = res;
        }
        if model > sup_model {
            sup_model = model;
        }
        cx += amp[i] * azimuth[i].cos();
        cy += amp[i] * azimuth[i].sin();
    }
    let residual = sup_res / sup_model.max(lit(1e-30));
    if residual > cfg.residual_max {
        return Err(Error::FitRejected {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            max: cfg.residual_max.to_f64().unwrap_or(f64::NAN),
        });
    }
    if cx == T::zero() && cy == T::zero() {
        return Err(Error::UndefinedAngle);
    }
    Ok(BubbleFit {
        r_scale,
        azimuth: cy.atan2(cx),
        residual,
    })
}

/// Convenience wrapper over a full simulation state.
pub fn fit_bubble<T: Float>(state: &SimState<T>, cfg: &FitSettings<T>) -> Result<BubbleFit<T>> {
    let theta = state.field.theta_profile();
    let azimuth = state.field.azimuth_profile();
    let amp = state.field.transverse_profile();
    fit_bubble_profile(
        state.mesh.nodes(),
        &theta,
        &azimuth,
        &amp,
        state.grad_inf(),
        cfg,
    )
}

/// Candidate laws for the collapse of the bubble scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `R = kappa (T - t) / ln^2(T - t)`.
    LogCorrected,
    /// `R = kappa sqrt(T - t)`.
    Similarity,
    /// `R = kappa (T - t)`.
    Linear,
}

/// Result of a rate fit over the trailing window of an `(t, R)` series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit<T> {
    pub kappa: T,
    pub t_blowup: T,
    pub window: (T, T),
    /// RMS residual in log R.
    pub residual: T,
    pub model: RateModel,
}

/// Nonlinear least squares of `log R` against the chosen rate law.
///
/// For fixed blowup time the amplitude is profiled out in closed form, so
/// the search reduces to a deterministic one-dimensional scan plus golden
/// refinement over `T`.
pub fn fit_rate<T: Float>(series: &[(T, T)], model: RateModel) -> Result<RateFit<T>> {
    let n = series.len();
    if n < 20 {
        return Err(Error::Precondition(format!(
            "rate fit needs at least 20 samples, got {n}"
        )));
    }
    let r_first = series[0].1;
    let r_last = series[n - 1].1;
    if r_first <= T::zero() || r_last <= T::zero() {
        return Err(Error::Precondition("scales must be positive".into()));
    }
    if r_first / r_last < lit(100.0) {
        return Err(Error::Precondition(
            "rate fit needs at least two decades of scale decrease".into(),
        ));
    }
    for k in 1..n {
        if series[k].1 >= series[k - 1].1 {
            return Err(Error::Precondition(
                "scale series must decrease monotonically".into(),
            ));
        }
    }

    let t_first = series[0].0;
    let t_last = series[n - 1].0;
    let span = t_last - t_first;
    if span <= T::zero() {
        return Err(Error::Precondition("times must increase".into()));
    }
    let y: Vec<T> = series.iter().map(|&(_, r)| r.ln()).collect();

    let sse = |delta: T| -> T {
        let t_blow = t_last + delta;
        let mut gs = Vec::with_capacity(n);
        for &(t, _) in series {
            let x = t_blow - t;
            if x <= T::zero() {
                return T::infinity();
            }
            let lx = x.ln();
            let g = match model {
                RateModel::LogCorrected => {
                    if lx.abs() < lit(0.05) {
                        return T::infinity();
                    }
                    lx - lit::<T>(2.0) * lx.abs().ln()
                }
                RateModel::Similarity => lit::<T>(0.5) * lx,
                RateModel::Linear => lx,
            };
            gs.push(g);
        }
        let mean_resid = {
            let sum: T = y.iter().zip(&gs).map(|(&yv, &g)| yv - g).sum();
            sum / lit::<T>(n as f64)
        };
        y.iter()
            .zip(&gs)
            .map(|(&yv, &g)| {
                let d = yv - g - mean_resid;
                d * d
            })
            .sum()
    };

    // Log-spaced scan of delta = T - t_last over eight decades, then golden
    // section within the best bracket.
    let grid = 400usize;
    let lo = (span * lit::<T>(1e-7)).max(lit(1e-300));
    let hi = span * lit::<T>(10.0);
    let ratio = (hi / lo).ln() / lit::<T>((grid - 1) as f64);
    let mut best_idx = 0usize;
    let mut best_val = T::infinity();
    let deltas: Vec<T> = (0..grid)
        .map(|i| lo * (ratio * lit::<T>(i as f64)).exp())
        .collect();
    for (i, &d) in deltas.iter().enumerate() {
        let v = sse(d);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    if !best_val.is_finite() {
        return Err(Error::Precondition(
            "rate model cannot represent the sample window".into(),
        ));
    }
    let mut a = deltas[best_idx.saturating_sub(1)];
    let mut b = deltas[(best_idx + 1).min(grid - 1)];
    let gold = lit::<T>(0.618_033_988_749_894_8);
    for _ in 0..80 {
        let c = b - gold * (b - a);
        let d = a + gold * (b - a);
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let delta = (a + b) * lit::<T>(0.5);
    let t_blow = t_last + delta;

    // Recover the profiled amplitude.
    let mut mean_resid = T::zero();
    for &(t, r) in series {
        let x = t_blow - t;
        let lx = x.ln();
        let g = match model {
            RateModel::LogCorrected => lx - lit::<T>(2.0) * lx.abs().ln(),
            RateModel::Similarity => lit::<T>(0.5) * lx,
            RateModel::Linear => lx,
        };
        mean_resid += r.ln() - g;
    }
    mean_resid /= lit::<T>(n as f64);

    Ok(RateFit {
        kappa: mean_resid.exp(),
        t_blowup: t_blow,
        window: (t_first, t_last),
        residual: (sse(delta) / lit::<T>(n as f64)).sqrt(),
        model,
    })
}

/// Outcome tag of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeTag {
    Blowup,
    DecayPlus,
    DecayMinus,
    Undetermined,
}

/// Classification of a finished run with its evidence.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<T> {
    pub tag: OutcomeTag,
    pub peak_grad: T,
    pub delta_phi: Option<T>,
}

/// Classification knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifySettings<T> {
    /// Gradient level above which a sample belongs to the bubble episode.
    pub episode_floor: T,
    /// Rotations smaller than this are not committed to either sign.
    pub undetermined_band: T,
    /// Minimum number of fitted samples inside the episode.
    pub min_fits: usize,
}

impl<T: Float> Default for ClassifySettings<T> {
    fn default() -> Self {
        Self {
            episode_floor: lit(10.0),
            undetermined_band: lit(std::f64::consts::FRAC_PI_4),
            min_fits: 10,
        }
    }
}

/// Measured bubble rotation over the high-gradient episode.
#[derive(Debug, Clone, Copy)]
pub struct Rotation<T> {
    pub delta_phi: T,
    /// Number of episode samples without a usable fit (bridged by unwrap).
    pub gaps: usize,
}

/// Unwrapped change of the fitted bubble azimuth across the episode around
/// the gradient peak.
pub fn rotation_angle<T: Float>(
    run: &RunResult<T>,
    cfg: &ClassifySettings<T>,
) -> Result<Rotation<T>> {
    let samples = &run.samples;
    if samples.is_empty() {
        return Err(Error::Precondition("empty trajectory".into()));
    }
    let peak_idx = samples
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.grad_inf
                .partial_cmp(&b.1.grad_inf)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);

    // Contiguous episode around the peak with grad above the floor.
    let mut start = peak_idx;
    while start > 0 && samples[start - 1].grad_inf >= cfg.episode_floor {
        start -= 1;
    }
    let mut end = peak_idx;
    while end + 1 < samples.len() && samples[end + 1].grad_inf >= cfg.episode_floor {
        end += 1;
    }

    let mut angles = Vec::new();
    let mut gaps = 0usize;
    for sample in &samples[start..=end] {
        match &sample.bubble {
            Some(fit) => angles.push(fit.azimuth),
            None => gaps += 1,
        }
    }
    if angles.len() < cfg.min_fits {
        return Err(Error::Precondition(format!(
            "rotation needs at least {} fitted samples, found {}",
            cfg.min_fits,
            angles.len()
        )));
    }

    let mut unwrapped = angles[0];
    let first = unwrapped;
    let tau = T::TAU();
    for pair in angles.windows(2) {
        let mut d = pair[1] - pair[0];
        d = d - tau * (d / tau).round();
        unwrapped += d;
    }
    Ok(Rotation {
        delta_phi: unwrapped - first,
        gaps,
    })
}

/// Classifies a finished trajectory.
///
/// Gradient-threshold termination is blowup; equilibrium termination is
/// decay, signed by the net bubble rotation; small rotations stay
/// undetermined.
pub fn classify<T: Float>(run: &RunResult<T>, cfg: &ClassifySettings<T>) -> Result<Outcome<T>> {
    let peak = run.peak_grad();
    match &run.termination {
        Termination::GradientThreshold => {
            let delta_phi = rotation_angle(run, cfg).ok().map(|r| r.delta_phi);
            Ok(Outcome {
                tag: OutcomeTag::Blowup,
                peak_grad: peak,
                delta_phi,
            })
        }
        Termination::Equilibrium => {
            let rotation = rotation_angle(run, cfg)?;
            let tag = if rotation.delta_phi.abs() < cfg.undetermined_band {
                OutcomeTag::Undetermined
            } else if rotation.delta_phi > T::zero() {
                OutcomeTag::DecayPlus
            } else {
                OutcomeTag::DecayMinus
            };
            Ok(Outcome {
                tag,
                peak_grad: peak,
                delta_phi: Some(rotation.delta_phi),
            })
        }
        other => Err(Error::Precondition(format!(
            "cannot classify a trajectory terminated by {other:?}"
        ))),
    }
}

/// Angle between the sphere bubbling off and the remaining solution:
/// `pi - arctan(alpha / beta)` (with the `pi/2` convention at `beta = 0`).
pub fn predicted_angle<T: Float>(params: &LLGParams<T>) -> T {
    if params.beta() == T::zero() {
        T::PI() - T::FRAC_PI_2()
    } else {
        T::PI() - (params.alpha() / params.beta()).atan()
    }
}

/// Measured azimuths of the solution at the bubble scale and in the remote
/// region, plus their separation (a rotation-invariant quantity).
#[derive(Debug, Clone, Copy)]
pub struct AngleSplit<T> {
    pub inner: T,
    pub outer: T,
    pub separation: T,
}

/// Resultant-vector azimuths over the inner window `r <= 10 R` and the
/// remote window `r >= max(0.2, 50 R)`.
pub fn azimuth_split<T: Float>(state: &SimState<T>, r_scale: T) -> Result<AngleSplit<T>> {
    let azimuth = state.field.azimuth_profile();
    let amp = state.field.transverse_profile();
    let r = state.mesh.nodes();

    let resultant = |lo: T, hi: T| -> Option<T> {
        let mut cx = T::zero();
        let mut cy = T::zero();
        for i in 0..r.len() {
            if r[i] >= lo && r[i] <= hi {
                cx += amp[i] * azimuth[i].cos();
                cy += amp[i] * azimuth[i].sin();
            }
        }
        if cx == T::zero() && cy == T::zero() {
            None
        } else {
            Some(cy.atan2(cx))
        }
    };

    let ten = lit::<T>(10.0);
    let inner = resultant(T::zero(), ten * r_scale).ok_or(Error::UndefinedAngle)?;
    let outer_lo = (lit::<T>(50.0) * r_scale).max(lit(0.2));
    let outer = resultant(outer_lo, T::one()).ok_or(Error::UndefinedAngle)?;
    let mut separation = outer - inner;
    let tau = T::TAU();
    separation = separation - tau * (separation / tau).round();
    Ok(AngleSplit {
        inner,
        outer,
        separation: separation.abs(),
    })
}

/// Reconstructs continuous (unwrapped) Euler-angle profiles along the radius
/// from principal per-node values.
///
/// At each node the representation ambiguity `(theta, phi) ~ (-theta, phi +
/// pi) ~ (theta + 2 pi k, phi + 2 pi m)` is resolved by continuity with the
/// previous node; near the poles, where the azimuth carries no information,
/// the previous azimuth is carried forward.
pub fn unwrap_profile<T: Float>(theta_p: &[T], phi_p: &[T], amp: &[T]) -> (Vec<T>, Vec<T>) {
    let n = theta_p.len();
    let pi = T::PI();
    let tau = T::TAU();
    let mut theta = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    // Pole start: snap to the nearest multiple of pi.
    let theta0 = (theta_p[0] / pi).round() * pi;
    theta.push(theta0);
    phi.push(phi_p[0]);

    for i in 1..n {
        let tp = theta_p[i];
        let pp = phi_p[i];
        let t_prev = theta[i - 1];
        let p_prev = phi[i - 1];

        // Branch A keeps the azimuth, branch B flips theta and shifts phi by pi.
        let theta_a = tp + tau * ((t_prev - tp) / tau).round();
        let theta_b = -tp + tau * ((t_prev + tp) / tau).round();
        let nearest = |target: T, base: T| base + tau * ((target - base) / tau).round();
        let phi_a = nearest(p_prev, pp);
        let phi_b = nearest(p_prev, pp + pi);

        if amp[i] < lit(1e-9) {
            // Azimuth undefined: choose theta branch only, keep phi.
            let (th, _) = if (theta_a - t_prev).abs() <= (theta_b - t_prev).abs() {
                (theta_a, phi_a)
            } else {
                (theta_b, phi_b)
            };
            theta.push(th);
            phi.push(p_prev);
        } else {
            let weight = amp[i].min(T::one());
            let da = (theta_a - t_prev).abs() + weight * (phi_a - p_prev).abs();
            let db = (theta_b - t_prev).abs() + weight * (phi_b - p_prev).abs();
            if da <= db {
                theta.push(theta_a);
                phi.push(phi_a);
            } else {
                theta.push(theta_b);
                phi.push(phi_b);
            }
        }
    }
    (theta, phi)
}

/// Result of continuing a blowup state past the singular time.
#[derive(Debug, Clone)]
pub struct Continuation<T> {
    /// The continued simulation state (re-attached bubble, reversed
    /// orientation).
    pub state: SimState<T>,
    /// Unwrapped Euler-angle profile of the continued state
    /// (`theta(0) = 2 pi`).
    pub euler: EulerField<T>,
    /// Energy of the input state (bubble still attached).
    pub energy_pre: T,
    /// Energy at the singular instant, with the bubble removed.
    pub energy_detached: T,
    /// Energy of the continued state.
    pub energy_post: T,
}

/// Continues a blowup state past the singular time by re-attaching the
/// bubble rotated over an angle `pi`.
///
/// The polar angle is rebuilt as `2 pi - 2 arctan(r / R)` inside `r <= 5 R`,
/// blended C1-continuously (smoothstep) into the outer solution over
/// `[5 R, 10 R]`; the azimuth profile is untouched, the `pi` shift at bubble
/// scale being carried by the sign of `sin(theta)` as `theta` sweeps past
/// `pi`. The detached reference state (outer solution with the bubble
/// removed, `theta -> pi` at the origin) is built the same way to expose the
/// energy bookkeeping of the singular instant.
pub fn continue_past_blowup<T: Float>(
    state: &SimState<T>,
    fit: &BubbleFit<T>,
    params: &LLGParams<T>,
) -> Result<Continuation<T>> {
    let r_scale = fit.r_scale;
    let five = lit::<T>(5.0);
    let ten = lit::<T>(10.0);
    let r_inner = five * r_scale;
    let r_cut = ten * r_scale;
    if r_cut > lit(0.25) {
        return Err(Error::Precondition(format!(
            "bubble scale {r_scale} too large to re-attach (cut radius {r_cut})"
        )));
    }

    let r = state.mesh.nodes();
    let theta_principal = state.field.theta_profile();
    let phi_principal = state.field.azimuth_profile();
    let amp = state.field.transverse_profile();
    let (theta_u, phi_u) = unwrap_profile(&theta_principal, &phi_principal, &amp);

    let pi = T::PI();
    let two = lit::<T>(2.0);
    let tau = T::TAU();
    let smooth = |x: T| x * x * (lit::<T>(3.0) - two * x);

    let mut theta_new = Vec::with_capacity(r.len());
    let mut theta_det = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        let reversed = tau - two * (r[i] / r_scale).atan();
        if r[i] <= r_inner {
            theta_new.push(reversed);
            theta_det.push(pi);
        } else if r[i] < r_cut {
            let omega = smooth((r[i] - r_inner) / (r_cut - r_inner));
            theta_new.push((T::one() - omega) * reversed + omega * theta_u[i]);
            theta_det.push((T::one() - omega) * pi + omega * theta_u[i]);
        } else {
            theta_new.push(theta_u[i]);
            theta_det.push(theta_u[i]);
        }
    }

    let energy_pre = state.field.energy(&state.mesh, params.index());

    let build = |theta: &[T]| -> Result<SimField<T>> {
        match &state.field {
            SimField::Radial { phi, .. } => Ok(SimField::Radial {
                theta: theta.to_vec(),
                phi: *phi,
            }),
            SimField::Cartesian(_) => {
                let mut u = Vec::with_capacity(theta.len());
                let mut v = Vec::with_capacity(theta.len());
                let mut w = Vec::with_capacity(theta.len());
                for i in 0..theta.len() {
                    let m = crate::state::euler_to_cartesian(theta[i], phi_u[i]);
                    u.push(m[0]);
                    v.push(m[1]);
                    w.push(m[2]);
                }
                // Exact pole values.
                u[0] = T::zero();
                v[0] = T::zero();
                w[0] = theta[0].cos().signum();
                let mut field = crate::state::MagnetizationField::new(u, v, w)?;
                field.project_in_place()?;
                Ok(SimField::Cartesian(field))
            }
        }
    };

    let field_new = build(&theta_new)?;
    let field_det = build(&theta_det)?;
    let energy_post = field_new.energy(&state.mesh, params.index());
    let energy_detached = field_det.energy(&state.mesh, params.index());

    let euler = EulerField {
        theta: theta_new,
        phi: phi_u,
    };
    let state_new = SimState {
        field: field_new,
        mesh: state.mesh.clone(),
        t: state.t,
        s: state.s,
        step_count: state.step_count,
        flags: state.flags,
    };
    Ok(Continuation {
        state: state_new,
        euler,
        energy_pre,
        energy_detached,
        energy_post,
    })
}

/// Renormalized-energy series around a blowup time with its monotonicity
/// report.
#[derive(Debug, Clone)]
pub struct RenormalizedEnergy<T> {
    pub series: Vec<(T, T)>,
    /// Drop of the raw energy across the singular time.
    pub jump: T,
    pub monotone: bool,
    pub jump_at_least_bubble: bool,
    pub pass: bool,
}

/// Builds the renormalized energy `e_bar` (raw energy with `+4 pi` exactly at
/// the singular time) and reports whether it is monotone and whether the raw
/// energy lost at least one bubble (`4 pi`, within `jump_tol`) at the jump.
pub fn renormalized_energy<T: Float>(
    series: &[(T, T)],
    t_blowup: T,
    jump_tol: T,
) -> Result<RenormalizedEnergy<T>> {
    let eps = lit::<T>(1e-12) * (T::one() + t_blowup.abs());
    let before = series.iter().filter(|&&(t, _)| t < t_blowup - eps).count();
    let after = series.iter().filter(|&&(t, _)| t > t_blowup + eps).count();
    if before == 0 || after == 0 {
        return Err(Error::Precondition(
            "energy series must sample both sides of the blowup time".into(),
        ));
    }

    let bubble = lit::<T>(4.0) * T::PI();
    let mut renorm = Vec::with_capacity(series.len());
    let mut last_before = T::zero();
    let mut first_after = None;
    for &(t, e) in series {
        if t < t_blowup - eps {
            last_before = e;
            renorm.push((t, e));
        } else if t > t_blowup + eps {
            if first_after.is_none() {
                first_after = Some(e);
            }
            renorm.push((t, e));
        } else {
            renorm.push((t, e + bubble));
        }
    }
    let jump = last_before - first_after.unwrap_or(last_before);

    let mut monotone = true;
    for pair in renorm.windows(2) {
        let slack = lit::<T>(1e-8) * (T::one() + pair[0].1.abs());
        if pair[1].1 > pair[0].1 + slack {
            monotone = false;
            break;
        }
    }
    let jump_ok = jump >= bubble - jump_tol;
    Ok(RenormalizedEnergy {
        series: renorm,
        jump,
        monotone,
        jump_at_least_bubble: jump_ok,
        pass: monotone && jump_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RadialMesh;

    const PI: f64 = std::f64::consts::PI;

    fn bubble_profile(n: usize, r_scale: f64, azimuth: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        // Mesh graded toward the origin so the core is resolved for any scale.
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                let g = (s * (1.0 / r_scale).ln().max(1.0) * 1.5).exp_m1()
                    / ((1.0 / r_scale).ln().max(1.0) * 1.5).exp_m1();
                g
            })
            .collect();
        let theta: Vec<f64> = nodes.iter().map(|&r| 2.0 * (r / r_scale).atan()).collect();
        let phi = vec![azimuth; n];
        let amp: Vec<f64> = theta.iter().map(|t| t.sin().abs()).collect();
        (nodes, theta, phi, amp)
    }

    #[test]
    fn fit_recovers_exact_model() {
        let (r, theta, phi, amp) = bubble_profile(401, 0.01, 0.3);
        let cfg = FitSettings::default();
        let fit = fit_bubble_profile(&r, &theta, &phi, &amp, 2.0 / 0.01, &cfg).unwrap();
        assert!((fit.r_scale - 0.01).abs() < 1e-6 * 0.01, "R {}", fit.r_scale);
        assert!((fit.azimuth - 0.3).abs() < 1e-6, "C {}", fit.azimuth);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_recovers_model_across_scales() {
        let cfg = FitSettings::default();
        for &scale in &[1e-1, 1e-3, 1e-6] {
            let (r, theta, phi, amp) = bubble_profile(2001, scale, -1.2);
            let fit = fit_bubble_profile(&r, &theta, &phi, &amp, 2.0 / scale, &cfg).unwrap();
            assert!(
                (fit.r_scale - scale).abs() < 1e-6 * scale,
                "scale {scale}: fitted {}",
                fit.r_scale
            );
            assert!((fit.azimuth + 1.2).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_requires_a_core() {
        let (r, theta, phi, amp) = bubble_profile(101, 0.5, 0.0);
        let cfg = FitSettings::default();
        assert!(matches!(
            fit_bubble_profile(&r, &theta, &phi, &amp, 1.0, &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rate_fit_recovers_synthetic_law() {
        // R(t) = 3 (T - t)/ln^2(T - t), T = 1, sampled close to blowup.
        let t_blow = 1.0f64;
        let kappa = 3.0f64;
        let n = 60;
        let series: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = 10f64.powf(-1.0 - 8.0 * i as f64 / (n - 1) as f64);
                let t = t_blow - x;
                (t, kappa * x / x.ln().powi(2))
            })
            .collect();
        let fit = fit_rate(&series, RateModel::LogCorrected).unwrap();
        assert!((fit.kappa - kappa).abs() / kappa < 0.01, "kappa {}", fit.kappa);
        assert!((fit.t_blowup - t_blow).abs() < 0.01, "T {}", fit.t_blowup);
        assert!(fit.residual < 1e-3);
    }

    #[test]
    fn rate_fit_discriminates_models() {
        // Pure-similarity data: the square-root law must fit far better than
        // the log-corrected law, and vice versa.
        let t_blow = 1.0f64;
        let n = 60;
        let sqrt_series: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = 10f64.powf(-1.0 - 8.0 * i as f64 / (n - 1) as f64);
                (t_blow - x, 2.0 * x.sqrt())
            })
            .collect();
        let good = fit_rate(&sqrt_series, RateModel::Similarity).unwrap();
        let bad = fit_rate(&sqrt_series, RateModel::LogCorrected).unwrap();
        assert!(
            bad.residual > 10.0 * good.residual,
            "similarity data: {} vs {}",
            good.residual,
            bad.residual
        );

        let log_series: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = 10f64.powf(-1.0 - 8.0 * i as f64 / (n - 1) as f64);
                (t_blow - x, 3.0 * x / x.ln().powi(2))
            })
            .collect();
        let good = fit_rate(&log_series, RateModel::LogCorrected).unwrap();
        let bad = fit_rate(&log_series, RateModel::Similarity).unwrap();
        assert!(bad.residual > 10.0 * good.residual);
    }

    #[test]
    fn rate_fit_rejects_bad_series() {
        let increasing: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, 1.0 + i as f64)).collect();
        assert!(fit_rate(&increasing, RateModel::LogCorrected).is_err());
        let shallow: Vec<(f64, f64)> = (0..30)
            .map(|i| (i as f64, 1.0 - 0.01 * i as f64))
            .collect();
        assert!(fit_rate(&shallow, RateModel::LogCorrected).is_err());
    }

    #[test]
    fn rate_fit_is_scale_equivariant() {
        let t_blow = 1.0f64;
        let n = 50;
        let series: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = 10f64.powf(-1.0 - 7.0 * i as f64 / (n - 1) as f64);
                (t_blow - x, 3.0 * x / x.ln().powi(2))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, r)| (2.0 * t, r)).collect();
        let base = fit_rate(&series, RateModel::LogCorrected).unwrap();
        let shifted = fit_rate(&scaled, RateModel::LogCorrected).unwrap();
        assert!(
            (shifted.t_blowup - 2.0 * base.t_blowup).abs() < 0.05,
            "{} vs {}",
            shifted.t_blowup,
            2.0 * base.t_blowup
        );
        // Residual ranking against the alternative model is unchanged.
        let base_alt = fit_rate(&series, RateModel::Similarity).unwrap();
        let shifted_alt = fit_rate(&scaled, RateModel::Similarity).unwrap();
        assert!(base.residual < base_alt.residual);
        assert!(shifted.residual < shifted_alt.residual);
    }

    #[test]
    fn predicted_angle_limits() {
        let heat = LLGParams::<f64>::heat_flow(1);
        assert!((predicted_angle(&heat) - PI).abs() < 1e-15);
        let mixed = LLGParams::new(1.0, 1.0, 1).unwrap();
        assert!((predicted_angle(&mixed) - 3.0 * PI / 4.0).abs() < 1e-15);
        let cons = LLGParams::<f64>::schroedinger(1);
        assert!((predicted_angle(&cons) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn synthetic_rotation_is_pi() {
        // C(t) = arctan(sinh(t)) + pi/2 sweeps exactly pi.
        use crate::integrator::{RunResult, Sample, SimField, SimState, Termination};
        let n = 41;
        let mesh = RadialMesh::<f64>::uniform(n);
        let samples: Vec<Sample<f64>> = (0..200)
            .map(|k| {
                let t = -10.0 + 20.0 * k as f64 / 199.0;
                Sample {
                    step: k as u64,
                    t,
                    dt: 0.1,
                    grad_inf: 100.0,
                    energy: 1.0,
                    bubble: Some(BubbleFit {
                        r_scale: 0.01,
                        azimuth: t.sinh().atan() + PI / 2.0,
                        residual: 0.0,
                    }),
                }
            })
            .collect();
        let state = SimState::new(
            SimField::Radial {
                theta: vec![0.0; n],
                phi: 0.0,
            },
            mesh,
        );
        let run = RunResult {
            samples,
            snapshots: vec![],
            termination: Termination::Equilibrium,
            final_state: state,
        };
        let cfg = ClassifySettings::default();
        let rot = rotation_angle(&run, &cfg).unwrap();
        assert!((rot.delta_phi - PI).abs() < 0.02, "{}", rot.delta_phi);
        let outcome = classify(&run, &cfg).unwrap();
        assert_eq!(outcome.tag, OutcomeTag::DecayPlus);
    }

    #[test]
    fn unwrap_recovers_winding_profile() {
        // theta = 2 pi r winds through the south pole once.
        let n = 201;
        let mesh = RadialMesh::<f64>::uniform(n);
        let theta_true: Vec<f64> = mesh.nodes().iter().map(|&r| 2.0 * PI * r).collect();
        let phi_true = 0.4f64;
        let principal: Vec<(f64, f64)> = theta_true
            .iter()
            .map(|&t| {
                let m = crate::state::euler_to_cartesian(t, phi_true);
                let s = (m[0] * m[0] + m[1] * m[1]).sqrt();
                let th = s.atan2(m[2]);
                let ph = if s < 1e-12 { 0.0 } else { m[1].atan2(m[0]) };
                (th, ph)
            })
            .collect();
        let theta_p: Vec<f64> = principal.iter().map(|p| p.0).collect();
        let phi_p: Vec<f64> = principal.iter().map(|p| p.1).collect();
        let amp: Vec<f64> = theta_true.iter().map(|t| t.sin().abs()).collect();
        let (theta_u, _) = unwrap_profile(&theta_p, &phi_p, &amp);
        for (a, b) in theta_u.iter().zip(&theta_true) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn renormalized_energy_reports() {
        let bubble = 4.0 * PI;
        // Continuous decreasing energy with an exact 4 pi drop at T = 1.
        let mut series: Vec<(f64, f64)> = Vec::new();
        for k in 0..50 {
            let t = k as f64 / 49.0 * 0.99;
            series.push((t, 30.0 - 2.0 * t));
        }
        for k in 0..50 {
            let t = 1.01 + k as f64 / 49.0;
            series.push((t, 30.0 - 2.0 * 1.0 - bubble - 2.0 * (t - 1.0)));
        }
        let report = renormalized_energy(&series, 1.0, 0.05 * bubble).unwrap();
        assert!(report.pass, "jump {}", report.jump);

        // Jump smaller than a bubble: fail.
        let mut small: Vec<(f64, f64)> = Vec::new();
        for k in 0..50 {
            let t = k as f64 / 49.0 * 0.99;
            small.push((t, 30.0 - 2.0 * t));
        }
        for k in 0..50 {
            let t = 1.01 + k as f64 / 49.0;
            small.push((t, 30.0 - 2.0 - 0.5 * bubble - 2.0 * (t - 1.0)));
        }
        let report = renormalized_energy(&small, 1.0, 0.05 * bubble).unwrap();
        assert!(!report.pass);

        // No jump at all: fail.
        let flat: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = 2.0 * k as f64 / 99.0;
                (t, 30.0 - 2.0 * t)
            })
            .collect();
        let report = renormalized_energy(&flat, 1.0, 0.05 * bubble).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn continuation_bookkeeping_on_radial_bubble() {
        // Radial state carrying an attached bubble at scale 1e-3 over a
        // graded mesh.
        let r_scale = 1e-3f64;
        let n = 401;
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                (s * 12.0).exp_m1() / 12f64.exp_m1()
            })
            .collect();
        let mesh = RadialMesh::from_nodes(nodes).unwrap();
        // theta: bubble plus outer tail up to 4 pi / 3 at r = 1.
        let theta: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&r| 2.0 * (r / r_scale).atan() + (4.0 * PI / 3.0 - PI) * r)
            .collect();
        let state = SimState::new(
            SimField::Radial {
                theta,
                phi: 0.25,
            },
            mesh,
        );
        let params = LLGParams::heat_flow(1);
        let cfg = FitSettings::default();
        let fit = fit_bubble(&state, &cfg).unwrap();
        assert!((fit.r_scale - r_scale).abs() / r_scale < 0.05);

        let cont = continue_past_blowup(&state, &fit, &params).unwrap();
        // theta(0) = 2 pi in the unwrapped bookkeeping.
        assert!((cont.euler.theta[0] - 2.0 * PI).abs() < 1e-12);
        // Azimuth at bubble scale flipped by pi.
        let az = cont.state.field.azimuth_profile();
        let r = cont.state.mesh.nodes();
        let k = r.partition_point(|&x| x <= 2.0 * r_scale) - 1;
        let shift = (az[k] - 0.25 - PI).rem_euclid(2.0 * PI);
        assert!(shift.min(2.0 * PI - shift) < 1e-6, "azimuth {}", az[k]);
        // Energy bookkeeping: post - detached = one bubble.
        let gained = cont.energy_post - cont.energy_detached;
        assert!(
            (gained - 4.0 * PI).abs() < 0.1 * 4.0 * PI,
            "energy gained {gained}"
        );
        // And the continued state is close in energy to the input.
        assert!((cont.energy_post - cont.energy_pre).abs() / cont.energy_pre < 0.1);
    }
}
