//! Advances the coupled (field, mesh, time) system in computational time.
//!
//! Each step runs the pipeline: monitor evaluation -> Sundman rescaling
//! `dt = ds / max(M)` -> one PDE substep -> sphere projection -> one mesh
//! relaxation step -> interpolation onto the moved mesh. The PDE substep is
//! a two-stage linearly-implicit Rosenbrock W-pair (second order, L-stable,
//! embedded first-order error estimate) with a banded finite-difference
//! Jacobian, so the Sundman step alone dictates the time resolution; the
//! diffusive and precessional stiffness of the refined core imposes no step
//! restriction. A rejected step halves `ds` and retries; repeated rejection
//! is an explicit failure, never a silent stall.

use crate::banded::BandedMatrix;
use crate::diagnostics::{fit_bubble_profile, BubbleFit, FitSettings};
use crate::dynamics;
use crate::mesh::{self, MeshConfig, RadialMesh};
use crate::state::{LLGParams, MagnetizationField};
use crate::stencil::SpatialOperators;
use crate::{lit, Error, Float, Result};

/// Rosenbrock coefficient: both stage solves share `(I - gamma dt J)`;
/// this root of `gamma^2 - 2 gamma + 1/2` makes the pair L-stable.
fn ros_gamma<T: Float>() -> T {
    T::one() + lit::<T>(std::f64::consts::FRAC_1_SQRT_2)
}

/// PDE state: the canonical three-component representation, or the single
/// polar angle for the radially symmetric reduction (`phi` constant).
#[derive(Debug, Clone, PartialEq)]
pub enum SimField<T> {
    Cartesian(MagnetizationField<T>),
    Radial { theta: Vec<T>, phi: T },
}

impl<T: Float> SimField<T> {
    pub fn len(&self) -> usize {
        match self {
            SimField::Cartesian(f) => f.len(),
            SimField::Radial { theta, .. } => theta.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of unknowns in the flat state vector.
    fn dim(&self) -> usize {
        match self {
            SimField::Cartesian(_) => 3 * self.len(),
            SimField::Radial { .. } => self.len(),
        }
    }

    /// Jacobian half-bandwidth of the flat right-hand side.
    fn bandwidth(&self) -> usize {
        match self {
            SimField::Cartesian(_) => 5,
            SimField::Radial { .. } => 1,
        }
    }

    fn flatten(&self, out: &mut [T]) {
        match self {
            SimField::Cartesian(f) => {
                for i in 0..f.len() {
                    out[3 * i] = f.u[i];
                    out[3 * i + 1] = f.v[i];
                    out[3 * i + 2] = f.w[i];
                }
            }
            SimField::Radial { theta, .. } => out.copy_from_slice(theta),
        }
    }

    fn unflatten(&mut self, y: &[T]) {
        match self {
            SimField::Cartesian(f) => {
                for i in 0..f.u.len() {
                    f.u[i] = y[3 * i];
                    f.v[i] = y[3 * i + 1];
                    f.w[i] = y[3 * i + 2];
                }
            }
            SimField::Radial { theta, .. } => theta.copy_from_slice(y),
        }
    }

    fn project(&mut self) -> Result<()> {
        match self {
            SimField::Cartesian(f) => f.project_in_place(),
            SimField::Radial { .. } => Ok(()),
        }
    }

    pub fn grad_profile(&self, ops: &SpatialOperators<T>, out: &mut [T]) {
        match self {
            SimField::Cartesian(f) => dynamics::grad_profile(f, ops, out),
            SimField::Radial { theta, .. } => dynamics::grad_profile_radial(theta, ops, out),
        }
    }

    pub fn energy(&self, mesh: &RadialMesh<T>, index: u32) -> T {
        match self {
            SimField::Cartesian(f) => dynamics::energy_field(f, mesh, index),
            SimField::Radial { theta, phi } => {
                let euler = crate::state::EulerField {
                    theta: theta.clone(),
                    phi: vec![*phi; theta.len()],
                };
                dynamics::energy(&euler, mesh)
            }
        }
    }

    /// Polar-angle profile for diagnostics (principal values for the
    /// three-component representation).
    pub fn theta_profile(&self) -> Vec<T> {
        match self {
            SimField::Cartesian(f) => (0..f.len())
                .map(|i| {
                    let s = (f.u[i] * f.u[i] + f.v[i] * f.v[i]).sqrt();
                    s.atan2(f.w[i])
                })
                .collect(),
            SimField::Radial { theta, .. } => theta.clone(),
        }
    }

    /// Azimuth profile `atan2(v, u)` (for the radial state this folds the
    /// sign of `sin(theta)` into the angle, matching the tangent-plane
    /// coordinates near the south pole).
    pub fn azimuth_profile(&self) -> Vec<T> {
        match self {
            SimField::Cartesian(f) => (0..f.len()).map(|i| f.v[i].atan2(f.u[i])).collect(),
            SimField::Radial { theta, phi } => theta
                .iter()
                .map(|&t| (t.sin() * phi.sin()).atan2(t.sin() * phi.cos()))
                .collect(),
        }
    }

    /// In-plane amplitude `sqrt(u^2 + v^2) = |sin(theta)|` per node.
    pub fn transverse_profile(&self) -> Vec<T> {
        match self {
            SimField::Cartesian(f) => (0..f.len())
                .map(|i| (f.u[i] * f.u[i] + f.v[i] * f.v[i]).sqrt())
                .collect(),
            SimField::Radial { theta, .. } => theta.iter().map(|&t| t.sin().abs()).collect(),
        }
    }

    fn interpolate(&self, old_mesh: &RadialMesh<T>, new_mesh: &RadialMesh<T>) -> Result<Self> {
        match self {
            SimField::Cartesian(f) => Ok(SimField::Cartesian(mesh::interpolate_field(
                f, old_mesh, new_mesh,
            )?)),
            SimField::Radial { theta, phi } => Ok(SimField::Radial {
                theta: mesh::interpolate_scalar(theta, old_mesh, new_mesh),
                phi: *phi,
            }),
        }
    }
}

/// Diagnostic counters accumulated along a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiagFlags {
    pub rejected_steps: u64,
    pub regularized_nodes: u64,
}

/// Full simulation state at one instant.
#[derive(Debug, Clone)]
pub struct SimState<T> {
    pub field: SimField<T>,
    pub mesh: RadialMesh<T>,
    /// Physical time.
    pub t: T,
    /// Computational time.
    pub s: T,
    pub step_count: u64,
    pub flags: DiagFlags,
}

impl<T: Float> SimState<T> {
    pub fn new(field: SimField<T>, mesh: RadialMesh<T>) -> Self {
        assert_eq!(field.len(), mesh.len(), "field/mesh length mismatch");
        Self {
            field,
            mesh,
            t: T::zero(),
            s: T::zero(),
            step_count: 0,
            flags: DiagFlags::default(),
        }
    }

    pub fn grad_inf(&self) -> T {
        let ops = SpatialOperators::new(&self.mesh);
        let mut grad = vec![T::zero(); self.mesh.len()];
        self.field.grad_profile(&ops, &mut grad);
        grad.iter()
            .fold(T::zero(), |a, &b| if b > a { b } else { a })
    }

    pub fn energy(&self, index: u32) -> T {
        self.field.energy(&self.mesh, index)
    }
}

/// Integrator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub mesh: MeshConfig<T>,
    /// Base (and maximum) computational step.
    pub ds: T,
    pub rtol: T,
    pub atol: T,
    /// Maximum number of ds halvings within one step before giving up.
    pub max_halvings: u32,
    /// Abort if the energy increases beyond tolerance while `beta > 0`.
    pub energy_guard: bool,
    pub fit: FitSettings<T>,
    /// Trajectory sampling cadence in steps.
    pub sample_every: u64,
    /// Defensive global cap on the number of steps.
    pub hard_max_steps: u64,
}

impl<T: Float> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            ds: lit(1e-2),
            rtol: lit(1e-6),
            atol: lit(1e-9),
            max_halvings: 20,
            energy_guard: true,
            fit: FitSettings::default(),
            sample_every: 4,
            hard_max_steps: 20_000_000,
        }
    }
}

/// Stopping criteria; at least one must be set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopSpec<T> {
    pub grad_inf: Option<T>,
    pub t_max: Option<T>,
    pub max_steps: Option<u64>,
    /// Equilibrium detector: stop when the sup rate norm drops below this.
    pub eq_tol: Option<T>,
}

impl<T: Float> StopSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grad_inf.is_none()
            && self.t_max.is_none()
            && self.max_steps.is_none()
            && self.eq_tol.is_none()
        {
            return Err(Error::Precondition(
                "stop specification must contain at least one criterion".into(),
            ));
        }
        Ok(())
    }
}

/// Which criterion ended a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    GradientThreshold,
    TimeLimit,
    MaxSteps,
    Equilibrium,
    /// The stepper could not continue; the partial trajectory is attached to
    /// the result carrying this termination.
    SolverFailure(String),
}

/// One trajectory sample.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub step: u64,
    pub t: T,
    pub dt: T,
    pub grad_inf: T,
    pub energy: T,
    pub bubble: Option<BubbleFit<T>>,
}

/// Outcome of [`run_until`].
#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub samples: Vec<Sample<T>>,
    /// First state whose gradient crossed each decade threshold `10^k`.
    pub snapshots: Vec<(i32, SimState<T>)>,
    pub termination: Termination,
    pub final_state: SimState<T>,
}

impl<T: Float> RunResult<T> {
    pub fn peak_grad(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.grad_inf)
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// Per-step statistics.
#[derive(Debug, Clone, Copy)]
pub struct StepStats<T> {
    pub ds_used: T,
    pub ds_next: T,
    pub dt: T,
    pub error_estimate: T,
    pub rejections: u32,
    pub grad_inf: T,
    pub monitor_max: T,
}

struct RosWorkspace<T> {
    f0: Vec<T>,
    f1: Vec<T>,
    ypert: Vec<T>,
    fpert: Vec<T>,
    k1: Vec<T>,
    k2: Vec<T>,
    ynew: Vec<T>,
    w: BandedMatrix<T>,
}

impl<T: Float> RosWorkspace<T> {
    fn new(dim: usize, bw: usize) -> Self {
        Self {
            f0: vec![T::zero(); dim],
            f1: vec![T::zero(); dim],
            ypert: vec![T::zero(); dim],
            fpert: vec![T::zero(); dim],
            k1: vec![T::zero(); dim],
            k2: vec![T::zero(); dim],
            ynew: vec![T::zero(); dim],
            w: BandedMatrix::zeros(dim, bw, bw),
        }
    }
}

/// Flat right-hand-side adapter over the two field representations.
struct FlatSystem<'a, T: Float> {
    scratch: SimField<T>,
    mesh: &'a RadialMesh<T>,
    ops: &'a SpatialOperators<T>,
    params: &'a LLGParams<T>,
    ut: Vec<T>,
    vt: Vec<T>,
    wt: Vec<T>,
}

impl<'a, T: Float> FlatSystem<'a, T> {
    fn new(
        template: &SimField<T>,
        mesh: &'a RadialMesh<T>,
        ops: &'a SpatialOperators<T>,
        params: &'a LLGParams<T>,
    ) -> Self {
        let n = template.len();
        Self {
            scratch: template.clone(),
            mesh,
            ops,
            params,
            ut: vec![T::zero(); n],
            vt: vec![T::zero(); n],
            wt: vec![T::zero(); n],
        }
    }

    fn eval(&mut self, y: &[T], out: &mut [T]) {
        self.scratch.unflatten(y);
        match &self.scratch {
            SimField::Cartesian(f) => {
                dynamics::rhs_3comp(
                    f,
                    self.mesh,
                    self.ops,
                    self.params,
                    &mut self.ut,
                    &mut self.vt,
                    &mut self.wt,
                );
                for i in 0..f.len() {
                    out[3 * i] = self.ut[i];
                    out[3 * i + 1] = self.vt[i];
                    out[3 * i + 2] = self.wt[i];
                }
            }
            SimField::Radial { theta, .. } => {
                dynamics::rhs_radial(theta, self.mesh, self.ops, out);
            }
        }
    }

    /// Sup norm of the physical rate at the current state.
    fn rate_inf(&mut self, field: &SimField<T>) -> T {
        let dim = field.dim();
        let mut y = vec![T::zero(); dim];
        let mut rate = vec![T::zero(); dim];
        field.flatten(&mut y);
        self.eval(&y, &mut rate);
        rate.iter()
            .fold(T::zero(), |a, &b| if b.abs() > a { b.abs() } else { a })
    }
}

/// One Rosenbrock substep of `y' = F(y)`; returns the weighted RMS error of
/// the embedded pair (acceptance means `err <= 1`).
fn ros2_substep<T: Float>(
    y: &[T],
    dt: T,
    bw: usize,
    sys: &mut FlatSystem<'_, T>,
    ws: &mut RosWorkspace<T>,
    rtol: T,
    atol: T,
) -> Result<T> {
    let dim = y.len();
    let gamma = ros_gamma::<T>();
    let gdt = gamma * dt;

    sys.eval(y, &mut ws.f0);

    // Banded finite-difference Jacobian, assembled directly as W = I - gamma dt J.
    ws.w.reset();
    let stride = 2 * bw + 1;
    let sqrt_eps = T::epsilon().sqrt();
    for color in 0..stride.min(dim) {
        ws.ypert.copy_from_slice(y);
        let mut any = false;
        let mut j = color;
        while j < dim {
            let delta = sqrt_eps * y[j].abs().max(T::one());
            ws.ypert[j] += delta;
            any = true;
            j += stride;
        }
        if !any {
            continue;
        }
        sys.eval(&ws.ypert, &mut ws.fpert);
        let mut j = color;
        while j < dim {
            let delta = sqrt_eps * y[j].abs().max(T::one());
            let lo = j.saturating_sub(bw);
            let hi = (j + bw).min(dim - 1);
            for i in lo..=hi {
                let jac = (ws.fpert[i] - ws.f0[i]) / delta;
                if jac != T::zero() {
                    ws.w.set(i, j, -gdt * jac);
                }
            }
            j += stride;
        }
    }
    for i in 0..dim {
        ws.w.add(i, i, T::one());
    }
    let pivots = ws.w.factor()?;

    // Stage 1: (I - gamma dt J) k1 = dt F(y).
    for i in 0..dim {
        ws.k1[i] = dt * ws.f0[i];
    }
    ws.w.solve(&pivots, &mut ws.k1);

    // Stage 2: (I - gamma dt J) k2 = dt F(y + k1) - 2 k1.
    for i in 0..dim {
        ws.ypert[i] = y[i] + ws.k1[i];
    }
    sys.eval(&ws.ypert, &mut ws.f1);
    let two = lit::<T>(2.0);
    for i in 0..dim {
        ws.k2[i] = dt * ws.f1[i] - two * ws.k1[i];
    }
    ws.w.solve(&pivots, &mut ws.k2);

    // y_new = y + (3 k1 + k2)/2; embedded first-order solution y + k1.
    let half = lit::<T>(0.5);
    let three_half = lit::<T>(1.5);
    let mut err_acc = T::zero();
    for i in 0..dim {
        ws.ynew[i] = y[i] + three_half * ws.k1[i] + half * ws.k2[i];
        let err = half * (ws.k1[i] + ws.k2[i]);
        let scale = atol + rtol * y[i].abs().max(ws.ynew[i].abs());
        let ratio = err / scale;
        err_acc += ratio * ratio;
    }
    let err = (err_acc / lit::<T>(dim as f64)).sqrt();
    Ok(err)
}

/// One full step (monitor -> Sundman dt -> PDE substep -> projection ->
/// mesh relaxation -> interpolation), with acceptance control on `ds`.
pub fn step<T: Float>(
    state: &SimState<T>,
    params: &LLGParams<T>,
    cfg: &SimConfig<T>,
    ds: T,
) -> Result<(SimState<T>, StepStats<T>)> {
    let dim = state.field.dim();
    let bw = state.field.bandwidth();
    let mut ws = RosWorkspace::new(dim, bw);
    step_with_workspace(state, params, cfg, ds, &mut ws)
}

fn step_with_workspace<T: Float>(
    state: &SimState<T>,
    params: &LLGParams<T>,
    cfg: &SimConfig<T>,
    ds: T,
    ws: &mut RosWorkspace<T>,
) -> Result<(SimState<T>, StepStats<T>)> {
    let ops = SpatialOperators::new(&state.mesh);
    let n = state.mesh.len();
    let mut grad = vec![T::zero(); n];
    state.field.grad_profile(&ops, &mut grad);
    let grad_inf = grad
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a });
    let monitor = mesh::monitor_from_grad(&grad, &state.mesh, &cfg.mesh);
    let monitor_max = monitor.max();

    let guard_energy = cfg.energy_guard && params.beta() > T::zero();
    let energy_before = if guard_energy {
        state.field.energy(&state.mesh, params.index())
    } else {
        T::zero()
    };

    let mut y = vec![T::zero(); state.field.dim()];
    state.field.flatten(&mut y);
    let bw = state.field.bandwidth();
    let mut sys = FlatSystem::new(&state.field, &state.mesh, &ops, params);

    let mut ds_try = ds;
    let mut rejections = 0u32;
    let mut last_energy_violation: Option<Error> = None;
    loop {
        let dt = mesh::sundman_dt(&monitor, ds_try);
        let attempt = ros2_substep(&y, dt, bw, &mut sys, ws, cfg.rtol, cfg.atol);

        let mut accept = false;
        let mut err = T::infinity();
        if let Ok(e) = attempt {
            if e.is_finite() && e <= T::one() {
                accept = true;
                err = e;
            } else {
                err = e;
            }
        }

        if accept {
            let mut field_new = state.field.clone();
            field_new.unflatten(&ws.ynew);
            match field_new.project() {
                Ok(()) => {
                    if guard_energy {
                        let energy_after = field_new.energy(&state.mesh, params.index());
                        let tol =
                            lit::<T>(1e-6) * (T::one() + energy_before.abs());
                        if energy_after > energy_before + tol {
                            // Dissipation violated: retry smaller; report if
                            // it persists down to the halving limit.
                            last_energy_violation = Some(Error::EnergyViolation {
                                t: state.t.to_f64().unwrap_or(f64::NAN),
                                before: energy_before.to_f64().unwrap_or(f64::NAN),
                                after: energy_after.to_f64().unwrap_or(f64::NAN),
                            });
                            accept = false;
                        }
                    }
                    if accept {
                        match mesh::move_mesh(&state.mesh, &monitor, ds_try, &cfg.mesh) {
                            Ok(mesh_new) => {
                                match field_new.interpolate(&state.mesh, &mesh_new) {
                                    Ok(field_final) => {
                                        let grow = lit::<T>(2.0)
                                            .min(lit::<T>(0.9) / err.sqrt().max(lit::<T>(1e-8)));
                                        let ds_next =
                                            (ds_try * grow.max(lit::<T>(0.1))).min(cfg.ds);
                                        let mut flags = state.flags;
                                        flags.rejected_steps += u64::from(rejections);
                                        let new_state = SimState {
                                            field: field_final,
                                            mesh: mesh_new,
                                            t: state.t + dt,
                                            s: state.s + ds_try,
                                            step_count: state.step_count + 1,
                                            flags,
                                        };
                                        let stats = StepStats {
                                            ds_used: ds_try,
                                            ds_next,
                                            dt,
                                            error_estimate: err,
                                            rejections,
                                            grad_inf,
                                            monitor_max,
                                        };
                                        return Ok((new_state, stats));
                                    }
                                    Err(_) => accept = false,
                                }
                            }
                            Err(_) => accept = false,
                        }
                    }
                }
                Err(_) => accept = false,
            }
        }

        if !accept {
            rejections += 1;
            if rejections > cfg.max_halvings {
                if let Some(violation) = last_energy_violation {
                    return Err(violation);
                }
                return Err(Error::StiffnessFailure {
                    t: state.t.to_f64().unwrap_or(f64::NAN),
                    ds: ds_try.to_f64().unwrap_or(f64::NAN),
                    rejections,
                });
            }
            ds_try = ds_try * lit::<T>(0.5);
        }
    }
}

/// Runs the stepper until a stopping criterion fires.
///
/// Solver failures do not lose the trajectory: they are reported through
/// [`Termination::SolverFailure`] with all samples collected so far.
pub fn run_until<T: Float>(
    state0: SimState<T>,
    params: &LLGParams<T>,
    cfg: &SimConfig<T>,
    stop: &StopSpec<T>,
) -> Result<RunResult<T>> {
    stop.validate()?;

    let mut state = state0;
    let dim = state.field.dim();
    let bw = state.field.bandwidth();
    let mut ws = RosWorkspace::new(dim, bw);
    let mut samples: Vec<Sample<T>> = Vec::new();
    let mut snapshots: Vec<(i32, SimState<T>)> = Vec::new();
    let mut next_decade = 1i32;
    let mut ds = cfg.ds;
    let mut last_dt = T::zero();

    loop {
        let sample_due = state.step_count % cfg.sample_every == 0;
        let mut grad_now: Option<T> = None;
        if sample_due {
            let sample = make_sample(&state, params, cfg, last_dt);
            grad_now = Some(sample.grad_inf);
            samples.push(sample);
        }

        // Snapshot the first state past each gradient decade.
        let grad_inf = match grad_now {
            Some(g) => g,
            None => state.grad_inf(),
        };
        while grad_inf >= lit::<T>(10f64.powi(next_decade)) {
            snapshots.push((next_decade, state.clone()));
            next_decade += 1;
        }

        // Stopping criteria on the current state.
        if let Some(limit) = stop.grad_inf {
            if grad_inf >= limit {
                ensure_final_sample(&mut samples, &state, params, cfg, last_dt);
                return Ok(RunResult {
                    samples,
                    snapshots,
                    termination: Termination::GradientThreshold,
                    final_state: state,
                });
            }
        }
        if let Some(t_max) = stop.t_max {
            if state.t >= t_max {
                ensure_final_sample(&mut samples, &state, params, cfg, last_dt);
                return Ok(RunResult {
                    samples,
                    snapshots,
                    termination: Termination::TimeLimit,
                    final_state: state,
                });
            }
        }
        if stop.max_steps.map_or(false, |m| state.step_count >= m)
            || state.step_count >= cfg.hard_max_steps
        {
            ensure_final_sample(&mut samples, &state, params, cfg, last_dt);
            return Ok(RunResult {
                samples,
                snapshots,
                termination: Termination::MaxSteps,
                final_state: state,
            });
        }
        if let Some(eq_tol) = stop.eq_tol {
            if sample_due && state.step_count > 0 {
                let ops = SpatialOperators::new(&state.mesh);
                let mut sys = FlatSystem::new(&state.field, &state.mesh, &ops, params);
                if sys.rate_inf(&state.field) < eq_tol {
                    ensure_final_sample(&mut samples, &state, params, cfg, last_dt);
                    return Ok(RunResult {
                        samples,
                        snapshots,
                        termination: Termination::Equilibrium,
                        final_state: state,
                    });
                }
            }
        }

        match step_with_workspace(&state, params, cfg, ds, &mut ws) {
            Ok((next, stats)) => {
                last_dt = stats.dt;
                ds = stats.ds_next;
                state = next;
            }
            Err(e) => {
                ensure_final_sample(&mut samples, &state, params, cfg, last_dt);
                return Ok(RunResult {
                    samples,
                    snapshots,
                    termination: Termination::SolverFailure(e.to_string()),
                    final_state: state,
                });
            }
        }
    }
}

fn make_sample<T: Float>(
    state: &SimState<T>,
    params: &LLGParams<T>,
    cfg: &SimConfig<T>,
    dt: T,
) -> Sample<T> {
    let ops = SpatialOperators::new(&state.mesh);
    let mut grad = vec![T::zero(); state.mesh.len()];
    state.field.grad_profile(&ops, &mut grad);
    let grad_inf = grad
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a });
    let energy = state.field.energy(&state.mesh, params.index());
    let bubble = if grad_inf >= cfg.fit.grad_min {
        let theta = state.field.theta_profile();
        let phi = state.field.azimuth_profile();
        let amp = state.field.transverse_profile();
        fit_bubble_profile(state.mesh.nodes(), &theta, &phi, &amp, grad_inf, &cfg.fit).ok()
    } else {
        None
    };
    Sample {
        step: state.step_count,
        t: state.t,
        dt,
        grad_inf,
        energy,
        bubble,
    }
}

fn ensure_final_sample<T: Float>(
    samples: &mut Vec<Sample<T>>,
    state: &SimState<T>,
    params: &LLGParams<T>,
    cfg: &SimConfig<T>,
    dt: T,
) {
    if samples.last().map_or(true, |s| s.step != state.step_count) {
        samples.push(make_sample(state, params, cfg, dt));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::MagnetizationField;

    fn north_state(n: usize) -> SimState<f64> {
        SimState::new(
            SimField::Cartesian(MagnetizationField::uniform(n, [0.0, 0.0, 1.0])),
            RadialMesh::uniform(n),
        )
    }

    #[test]
    fn constant_field_stays_fixed() {
        let params = LLGParams::heat_flow(1);
        let cfg = SimConfig::default();
        let state = north_state(41);
        let (next, stats) = step(&state, &params, &cfg, cfg.ds).unwrap();
        assert!(next.t > 0.0);
        assert_eq!(stats.rejections, 0);
        if let SimField::Cartesian(f) = &next.field {
            for i in 0..f.len() {
                assert!((f.u[i]).abs() < 1e-14);
                assert!((f.v[i]).abs() < 1e-14);
                assert!((f.w[i] - 1.0).abs() < 1e-14);
            }
        } else {
            panic!("unexpected representation");
        }
    }

    #[test]
    fn run_until_time_limit_on_constant_data() {
        let params = LLGParams::heat_flow(1);
        let cfg = SimConfig::default();
        let stop = StopSpec {
            t_max: Some(1.0),
            ..StopSpec::default()
        };
        let result = run_until(north_state(41), &params, &cfg, &stop).unwrap();
        assert_eq!(result.termination, Termination::TimeLimit);
        assert!(result.final_state.t >= 1.0);
        assert!(result.peak_grad() < 1e-12);
    }

    #[test]
    fn empty_stop_spec_is_rejected() {
        let params = LLGParams::heat_flow(1);
        let cfg = SimConfig::default();
        let result = run_until(north_state(41), &params, &cfg, &StopSpec::default());
        assert!(matches!(result, Err(Error::Precondition(_))));
    }

    #[test]
    fn unit_norm_holds_after_every_accepted_step() {
        // Start from a smooth non-equilibrium state and watch the constraint.
        let n = 101;
        let mesh = RadialMesh::uniform(n);
        let theta: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&r| 0.9 * std::f64::consts::PI * r)
            .collect();
        let field = MagnetizationField {
            u: theta.iter().map(|t| t.sin() / 2f64.sqrt()).collect(),
            v: theta.iter().map(|t| t.sin() / 2f64.sqrt()).collect(),
            w: theta.iter().map(|t| t.cos()).collect(),
        };
        let params = LLGParams::new(0.5, 3f64.sqrt() / 2.0, 1).unwrap();
        let cfg = SimConfig::default();
        let mut state = SimState::new(SimField::Cartesian(field), mesh);
        for _ in 0..50 {
            let (next, _) = step(&state, &params, &cfg, cfg.ds).unwrap();
            if let SimField::Cartesian(f) = &next.field {
                assert!(f.max_norm_deviation() < 1e-12);
                assert_eq!(f.u[0], 0.0);
                assert_eq!(f.v[0], 0.0);
            }
            state = next;
        }
        assert!(state.t > 0.0);
    }

    #[test]
    fn rosenbrock_substep_is_second_order_on_linear_system() {
        // y' = A y with a stiff 2x2 system; check the one-step error order.
        let mesh = RadialMesh::<f64>::uniform(4);
        let ops = SpatialOperators::new(&mesh);
        let params = LLGParams::heat_flow(1);
        // Reuse FlatSystem machinery indirectly: integrate the radial heat
        // profile instead (smooth, exact solution unknown) and check step
        // halving reduces the embedded error at second order.
        let n = 101;
        let mesh = RadialMesh::<f64>::uniform(n);
        let ops2 = SpatialOperators::new(&mesh);
        let theta: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&r| 0.5 * std::f64::consts::PI * r)
            .collect();
        let field = SimField::Radial {
            theta: theta.clone(),
            phi: 0.0,
        };
        let mut sys = FlatSystem::new(&field, &mesh, &ops2, &params);
        let mut ws = RosWorkspace::new(n, 1);

        let solution_at = |dt: f64, sys: &mut FlatSystem<f64>, ws: &mut RosWorkspace<f64>| {
            let mut y = theta.clone();
            let steps = (0.02 / dt).round() as usize;
            for _ in 0..steps {
                ros2_substep(&y, dt, 1, sys, ws, 1e-14, 1e-14).unwrap();
                y.copy_from_slice(&ws.ynew);
            }
            y
        };
        let coarse = solution_at(1e-3, &mut sys, &mut ws);
        let fine = solution_at(5e-4, &mut sys, &mut ws);
        let finest = solution_at(2.5e-4, &mut sys, &mut ws);
        let d1: f64 = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d2: f64 = fine
            .iter()
            .zip(&finest)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let order = (d1 / d2).log2();
        assert!(order > 1.7, "observed order {order} ({d1} vs {d2})");
        let _ = ops;
    }
}
