use thiserror::Error;

/// Failure modes shared by every module in the crate.
///
/// Failure states that a caller is expected to branch on (certification
/// mismatches, sampling shortfalls, precision exhaustion) get their own
/// variants; one-off input problems are folded into `Domain` / `InvalidSpec`
/// with a message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),

    #[error("input outside the operation's domain: {0}")]
    Domain(String),

    #[error("rational (or near-rational to working precision) input: {0}")]
    NearRational(String),

    #[error("orbit left the analyticity annulus at step {step} (|Im z| = {im:.3e})")]
    AnnulusEscape { step: usize, im: f64 },

    #[error("orbit left the working domain at step {step}")]
    LeftDomain { step: usize },

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("no convergence after {steps} steps (last bracket width {width:.3e})")]
    NoConvergence { steps: usize, width: f64 },

    #[error("combinatorial certification failed: {0}")]
    Certification(String),

    #[error("floating-point precision exhausted: {0}")]
    Precision(String),

    #[error("too few usable samples: {got} < {need} ({context})")]
    TooFewSamples {
        got: usize,
        need: usize,
        context: String,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("orbit budget exceeded: needed {needed} points, cap is {cap}")]
    OrbitBudget { needed: usize, cap: usize },

    #[error("boundary tracing failed: {0}")]
    Tracing(String),

    #[error("point lies within vertex tolerance of a domain boundary")]
    BoundaryAmbiguous,

    #[error("inverse branch undefined: {0}")]
    InverseBranch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
