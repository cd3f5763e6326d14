use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not line up at a tape node.
    Shape { node: String, detail: String },
    /// `backward` was asked to start from a node that is not 1x1.
    NotScalar { node: usize, rows: usize, cols: usize },
    /// NaN or infinity in a value, an adjoint or a finite-difference probe.
    NonFinite { location: String },
    /// Parameter name registered twice in a store.
    DuplicateParam(String),
    /// Parameter name not present in a store.
    UnknownParam(String),
    /// A rollout left the admissible state region (|x| > 1e6 or non-finite).
    Divergence { step: usize, sequence: Option<usize> },
    /// Estimation window has the wrong length or channel count.
    WindowLength { expected: usize, got: usize },
    /// FF/LSTM estimator without its parameters.
    MissingParams(&'static str),
    /// Not enough samples for even one window.
    InfeasibleSplit { len: usize, needed: usize },
    /// FIT is undefined for a constant reference signal.
    UndefinedFit,
    /// Seed appears twice in a replicate list.
    DuplicateSeed(u64),
    /// Any other violated precondition.
    Contract(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { node, detail } => write!(f, "shape mismatch at {node}: {detail}"),
            Error::NotScalar { node, rows, cols } => {
                write!(f, "backward from node {node} requires a scalar, found {rows}x{cols}")
            }
            Error::NonFinite { location } => write!(f, "non-finite value at {location}"),
            Error::DuplicateParam(name) => write!(f, "duplicate parameter name `{name}`"),
            Error::UnknownParam(name) => write!(f, "unknown parameter `{name}`"),
            Error::Divergence { step, sequence: Some(s) } => {
                write!(f, "rollout diverged at step {step} of sequence {s}")
            }
            Error::Divergence { step, sequence: None } => {
                write!(f, "rollout diverged at step {step}")
            }
            Error::WindowLength { expected, got } => {
                write!(f, "window length mismatch: expected {expected}, got {got}")
            }
            Error::MissingParams(kind) => write!(f, "{kind} estimator requires parameters"),
            Error::InfeasibleSplit { len, needed } => {
                write!(f, "split of {len} samples is too short, need at least {needed}")
            }
            Error::UndefinedFit => write!(f, "FIT undefined: reference signal is constant"),
            Error::DuplicateSeed(seed) => write!(f, "duplicate seed {seed}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
