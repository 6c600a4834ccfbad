use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParam { name: &'static str, detail: String },

    #[error("no sign change on bracket [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("negative concentration {value:e} at z = {z}")]
    NegativeConcentration { z: f64, value: f64 },

    #[error("config error at line {line}: {detail}")]
    ConfigParse { line: usize, detail: String },

    #[error("config value out of range for `{key}`: {detail}")]
    ConfigRange { key: String, detail: String },

    #[error("empty branch set")]
    EmptyBranches,

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
