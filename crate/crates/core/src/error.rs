use thiserror::Error;

/// Every failure mode surfaced by the library.
///
/// Each variant maps to a stable code string (see [`Error::code`]) which the
/// command-line front end emits in its structured error objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("orientation violated: discrete derivative {min_derivative} <= -1")]
    OrientationViolation { min_derivative: f64 },
    #[error("displacement amplitude {amplitude} exceeds guard {guard}")]
    AmplitudeExceeded { amplitude: f64, guard: f64 },
    #[error("undersampled path: {0}")]
    UndersampledPath(String),
    #[error("unsupported base: {0}")]
    UnsupportedBase(String),
    #[error("invalid Euler number {euler} for base {base}")]
    InvalidEuler { base: String, euler: i64 },
    #[error("vector is not tangent at the given point (normal component {0:e})")]
    NotTangent(f64),
    #[error("base vector is not tangent at the projected point (normal component {0:e})")]
    BaseMismatch(f64),
    #[error("geodesic length {length} beyond injectivity guard {guard}")]
    BeyondInjectivityRadius { length: f64, guard: f64 },
    #[error("horizontal transport did not converge (endpoint error {0:e})")]
    NonconvergedOde(f64),
    #[error("projected shape leaves the convex ball (radius {radius}, guard {guard})")]
    OutsideConvexBall { radius: f64, guard: f64 },
    #[error("center-of-mass iteration did not converge after {iterations} steps (last step {last_step:e})")]
    Nonconvergence { iterations: usize, last_step: f64 },
    #[error("shape leaves the tubular neighborhood (distance {distance}, guard {guard})")]
    TubeRadiusExceeded { distance: f64, guard: f64 },
    #[error("nearest-point projection is not injective along the curve")]
    NonInjectiveProjection,
    #[error("fibers {0} and {1} straighten to the same base point")]
    BaseCollision(usize, usize),
    #[error("refinement residuals increased on two consecutive passes: {0:?}")]
    DivergingResiduals(Vec<f64>),
    #[error("winding vector {0:?} is not primitive")]
    NonPrimitive(Vec<i64>),
    #[error("fibers lost disjointness (min distance {min_distance:e}, threshold {threshold:e}, step {step})")]
    DisjointnessLost { min_distance: f64, threshold: f64, step: usize },
    #[error("degenerate spacing between consecutive curve samples")]
    DegenerateSpacing,
    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("curve self-intersects near samples {0} and {1}")]
    SelfIntersection(usize, usize),
    #[error("flow did not reach curvature tolerance by t = {t_max} (max curvature {max_kappa:e})")]
    TimeBudgetExceeded { t_max: f64, max_kappa: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::GridMismatch(_) => "GridMismatch",
            Error::OrientationViolation { .. } => "OrientationViolation",
            Error::AmplitudeExceeded { .. } => "AmplitudeExceeded",
            Error::UndersampledPath(_) => "UndersampledPath",
            Error::UnsupportedBase(_) => "UnsupportedBase",
            Error::InvalidEuler { .. } => "InvalidEuler",
            Error::NotTangent(_) => "NotTangent",
            Error::BaseMismatch(_) => "BaseMismatch",
            Error::BeyondInjectivityRadius { .. } => "BeyondInjectivityRadius",
            Error::NonconvergedOde(_) => "NonconvergedODE",
            Error::OutsideConvexBall { .. } => "OutsideConvexBall",
            Error::Nonconvergence { .. } => "Nonconvergence",
            Error::TubeRadiusExceeded { .. } => "TubeRadiusExceeded",
            Error::NonInjectiveProjection => "NonInjectiveProjection",
            Error::BaseCollision(..) => "BaseCollision",
            Error::DivergingResiduals(_) => "DivergingResiduals",
            Error::NonPrimitive(_) => "NonPrimitive",
            Error::DisjointnessLost { .. } => "DisjointnessLost",
            Error::DegenerateSpacing => "DegenerateSpacing",
            Error::CflViolation { .. } => "CFLViolation",
            Error::SelfIntersection(..) => "SelfIntersection",
            Error::TimeBudgetExceeded { .. } => "TimeBudgetExceeded",
            Error::InvalidInput(_) => "BadConfig",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
