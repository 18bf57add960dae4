use thiserror::Error;

use crate::support::Triple;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support must contain at least one triple")]
    EmptySupport,

    #[error("support is not tight: {0} does not sum to {1}")]
    NotTight(Triple, i64),

    #[error("support is not symmetric under coordinate permutation {perm:?}: {triple} maps outside")]
    NotSymmetric { triple: Triple, perm: [usize; 3] },

    #[error("mirror through {target} does not preserve the support: {triple} maps outside")]
    MirrorNotPreserving { target: Triple, triple: Triple },

    #[error("distributions or tables live on different supports")]
    SupportMismatch,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("missing log value for {0}")]
    MissingValue(Triple),

    #[error("target {0} is not reachable from the previous support")]
    Unreachable(Triple),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: i64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("OPT1 did not converge: KKT residual {residual:.3e} after {iters} iterations")]
    Opt1NoConvergence {
        best: Box<Vec<f64>>,
        residual: f64,
        iters: usize,
    },

    #[error("OPT2 did not converge: marginal mismatch {mismatch:.3e} after {iters} iterations")]
    Opt2NoConvergence {
        best: Box<Vec<f64>>,
        mismatch: f64,
        iters: usize,
    },

    #[error("construction cannot certify any exponent below 3 at this power (margin at rho=3 is {margin:.6e})")]
    NonCertifying { margin: f64 },

    #[error("malformed certificate: {0}")]
    Certificate(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
