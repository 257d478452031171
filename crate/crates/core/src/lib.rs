//! Numerical laboratory for equivariant Landau-Lifshitz-Gilbert dynamics on
//! the unit disk.
//!
//! The crate simulates the equivariant LLG flow
//! `m_t = alpha m x Dm - beta m x (m x Dm)` for maps from the disk to the
//! sphere with an r-adaptive moving mesh and a Sundman time rescaling, tracks
//! finite-time blowup (bubble scale, rate, orientation), and integrates the
//! reduced ODE models that predict the near-blowup behaviour independently of
//! the PDE.
//!
//! Module map:
//!
//! * [`state`] - magnetization/Euler-angle representations, parameters and
//!   exact conversions between them.
//! * [`stencil`] - nonuniform three-point finite-difference operators.
//! * [`mesh`] - moving-mesh machinery: monitor function, MMPDE relaxation,
//!   Sundman rescaling and monotone interpolation between meshes.
//! * [`dynamics`] - right-hand sides of the three PDE formulations, energy
//!   and gradient norms.
//! * [`integrator`] - the coupled (field, mesh, time) stepper and run loop.
//! * [`initial`] - initial-data families and the topological degree checker.
//! * [`diagnostics`] - bubble/rate fits, outcome classification, rotation
//!   tracking and the post-blowup continuation.
//! * [`asymptotics`] - reduced ODE systems and special functions.
//!
//! All numerics are generic over the scalar type through the [`Float`] trait;
//! concrete `f64` aliases are exported at the crate root.

pub mod asymptotics;
mod banded;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod initial;
pub mod integrator;
pub mod mesh;
mod ode;
mod quad;
pub mod state;
pub mod stencil;

pub use error::{Error, Result};

/// Scalar type the whole crate is generic over (`f32` or `f64`).
pub trait Float:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Float for f32 {}
impl Float for f64 {}

/// Embeds an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn lit<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

pub type Params64 = state::LLGParams<f64>;
pub type Field64 = state::MagnetizationField<f64>;
pub type EulerField64 = state::EulerField<f64>;
pub type Mesh64 = mesh::RadialMesh<f64>;
pub type Monitor64 = mesh::MonitorField<f64>;
pub type SimState64 = integrator::SimState<f64>;
pub type SimConfig64 = integrator::SimConfig<f64>;
pub type StopSpec64 = integrator::StopSpec<f64>;
pub type RunResult64 = integrator::RunResult<f64>;
