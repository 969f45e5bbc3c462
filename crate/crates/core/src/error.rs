use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not hermitian: max |A - A^H| = {residual:e} exceeds {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("operator is not diagonal: max off-diagonal modulus {0:e}")]
    NotDiagonal(f64),

    #[error("operator trace {0} is not 1")]
    NotNormalized(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("squeezing |r| = {r} exceeds the safe limit {limit:.4} for n_max = {n_max}")]
    SqueezeTooLarge { r: f64, limit: f64, n_max: usize },

    #[error("normalization N = (1 - sum w)^-1 is undefined: puncture weights sum to {0} >= 1")]
    Unnormalizable(f64),

    #[error("invalid squeezed thermal base (nbar = {nbar}, r = {r}): e^(-2|r|) nbar - e^(-|r|) sinh|r| = {margin:e} must be > 0")]
    InvalidSqueezing { nbar: f64, r: f64, margin: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation too small: trace deficit {deficit:e} exceeds {tolerance:e}; try n_max >= {suggested}")]
    TraceDeficit {
        deficit: f64,
        tolerance: f64,
        suggested: usize,
    },

    #[error("quadrature did not converge: residual {residual:e} exceeds {tolerance:e}")]
    QuadratureNotConverged { residual: f64, tolerance: f64 },

    #[error("g2 undefined: mean photon number {0:e} vanishes")]
    UndefinedG2(f64),

    #[error("zero-eigenvalue witness undefined: {0}")]
    WitnessUndefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("operator is not positive semidefinite: min eigenvalue {0:e}")]
    Indefinite(f64),

    #[error("eigenvalue iteration did not converge")]
    EigenNotConverged,

    #[error("QND cascade cannot resolve: 2^l_max = {0} exceeds n_max = {1}")]
    Resolution(u64, usize),

    #[error("vacuum coherence |rho_0n| = {0:e} present; post-selection undefined")]
    VacuumCoherence(f64),

    #[error("nothing survives vacuum post-selection (rho_00 = 1)")]
    NothingSurvives,

    #[error("region too small: {0}")]
    RegionTooSmall(String),
}

impl Error {
    /// True when the error stems from the caller's input rather than from a
    /// numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(
            self,
            Error::EigenNotConverged | Error::QuadratureNotConverged { .. }
        )
    }
}
