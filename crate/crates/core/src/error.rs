use thiserror::Error;

/// Errors raised by the numerical kernels and the scan drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or invalid input; `location` names the offending field.
    #[error("input error at {location}: {message}")]
    Input { location: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// `‖f(x)‖` is at or below the floor, so `Φ` and the spherefication are undefined.
    #[error("on-zero-set: |f(x)| = {norm_f:e} <= floor {floor:e}")]
    OnZeroSet { norm_f: f64, floor: f64 },

    /// `Df_x` is rank deficient.
    #[error("critical point: sigma_min(Df) = {sigma_min:e} (sigma_max = {sigma_max:e})")]
    CriticalPoint { sigma_min: f64, sigma_max: f64 },

    /// The spherefication differential is rank deficient at `point`.
    #[error("d-regularity failure witness at {point:?}: sigma_min(DF) = {sigma_min:e}")]
    DRegularityFailure { point: Vec<f64>, sigma_min: f64 },

    /// The constrained lift system is inconsistent; the point is not in the
    /// transverse-generic subcase.
    #[error(
        "subcase misclassification: constrained lift residual {residual:e} exceeds {tolerance:e}"
    )]
    SubcaseMisclassification { residual: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("mu undefined: <grad H, w_f> = {inner:e}")]
    MuUndefined { inner: f64 },

    #[error("zero vector passed where a direction is required")]
    ZeroVector,

    #[error("empty sample set: {0}")]
    EmptySample(String),

    #[error("tube unreachable: {failures} of {attempts} seed attempts failed")]
    TubeUnreachable { failures: usize, attempts: usize },
}

impl Error {
    pub fn input(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Input {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
