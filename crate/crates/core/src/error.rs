use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis order {order} is not supported (must be even, {min}..={max})")]
    InvalidOrder { order: usize, min: usize, max: usize },

    #[error("degenerate interval [{lo}, {hi}]")]
    DegenerateBounds { lo: f64, hi: f64 },

    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("derivative order {alpha} is not supported by basis order {p}")]
    DerivativeOrder { p: usize, alpha: usize },

    #[error("refinement eigenproblem for derivative order {alpha} has no consistent solution (residual {residual:e})")]
    Eigenproblem { alpha: usize, residual: f64 },

    #[error("requested {requested} transform levels but the grid supports at most {available}")]
    TooManyLevels { requested: usize, available: usize },

    #[error("system size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("initial residual is zero")]
    ZeroResidual,

    #[error("Hessenberg least-squares problem is rank deficient at column {0}")]
    RankDeficient(usize),

    #[error("dense eigenvalue iteration did not converge")]
    EigenvalueFailure,

    #[error("rate fit needs positive errors, got {0}")]
    NonPositiveError(f64),

    #[error("rate fit needs at least two distinct levels")]
    TooFewLevels,

    #[error("invalid level range {start}..={end}")]
    LevelRange { start: usize, end: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    got: (usize, usize),
) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            expected,
            got,
        })
    }
}
