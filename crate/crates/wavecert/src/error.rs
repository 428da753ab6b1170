use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Numerical routines never panic on bad user input; they return one of
/// these instead. Variants carry enough context to print a one-line
/// diagnosis without a backtrace.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wave speed must be strictly positive, got {0}")]
    NonPositiveSpeed(f64),

    #[error("reflection coefficient singular: {name} = {value} makes 1 + {name} vanish")]
    UnitReflectionSingularity { name: &'static str, value: f64 },

    #[error("reflection coefficient has a pole at z = -1 (z = {z})")]
    ReflectionPole { z: f64 },

    #[error("{0}")]
    ModeMismatch(String),

    #[error("multiplier weights must be strictly positive, got {0}")]
    NonPositiveMultiplier(f64),

    #[error("decay rate must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error(
        "subgradient descent stalled before the iteration cap resolved feasibility \
         (best value {best:.3e}, resolution {resolution:.3e})"
    )]
    SolverStall { best: f64, resolution: f64 },

    #[error("not feasible at alpha = 0; no decay rate can be certified")]
    InfeasibleAtZero,

    #[error("{0}")]
    PreconditionViolated(String),

    #[error("|delta| is unbounded on the uncertainty box: z = -1 lies in [{z_lo}, {z_hi}]")]
    UnboundedDelta { z_lo: f64, z_hi: f64 },

    #[error("uncertainty bounds out of order: {0}")]
    BadBox(String),

    #[error("backstepping gain singular: 1 - K*c1 = 0 at k = {k}")]
    SingularGain { k: f64 },

    #[error("controller right boundary is not well posed: 1 + c2*h = {0} <= 0")]
    NonDissipativeBoundary(f64),

    #[error("initial data violates u(1) = v(0): mismatch {0:.3e}")]
    IncompatibleInitialConditions(f64),

    #[error("{0}")]
    InvalidSimConfig(String),

    #[error("perfect absorption (delta1*delta2 = 0): finite-time settling, no pole family")]
    PerfectAbsorption,

    #[error(
        "argument-principle count mismatch: contour winding {expected} vs {found} refined roots \
         ({detail})"
    )]
    WindingMismatch {
        expected: i64,
        found: usize,
        detail: String,
    },

    #[error("Newton refinement diverged from {start_re:.4}+{start_im:.4}i")]
    NewtonDivergence { start_re: f64, start_im: f64 },

    #[error("expression parse error: {0}")]
    BadExpression(String),

    #[error("config error: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
