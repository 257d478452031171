use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("vector at node {node} has norm {norm}, not a unit vector")]
    NonUnitVector { node: usize, norm: f64 },

    #[error("degenerate (near-zero) vector at node {node}; projection undefined")]
    DegenerateNode { node: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh tangled during relaxation step (monotonicity lost)")]
    MeshTangled,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sampling too coarse for degree computation: adjacent images {gap:.3} rad apart (limit {limit:.3})")]
    InsufficientResolution { gap: f64, limit: f64 },

    #[error("profile fit rejected: residual {residual:.3e} exceeds {max:.3e}")]
    FitRejected { residual: f64, max: f64 },

    #[error("step failed after {rejections} size reductions at t = {t:.6e} (ds = {ds:.3e}); solution too stiff to resolve")]
    StiffnessFailure { t: f64, ds: f64, rejections: u32 },

    #[error("energy increased beyond tolerance at t = {t:.6e}: {before:.9e} -> {after:.9e}")]
    EnergyViolation { t: f64, before: f64, after: f64 },

    #[error("angle undefined: zero amplitude")]
    UndefinedAngle,

    #[error("linear solve failed: singular pivot at row {row}")]
    SingularMatrix { row: usize },
}
