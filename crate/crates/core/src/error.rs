use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numeric overflow in {context}")]
    NumericOverflow { context: String },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("Picard iteration is not contracting: measured ratio {measured:.4} vs bound {bound:.4} after {iterations} iterations")]
    NonContraction {
        measured: f64,
        bound: f64,
        iterations: usize,
    },

    #[error("step at t = {time:.6} failed to converge (increment {increment:.3e} after {iterations} inner iterations); refine the time grid")]
    StepSize {
        time: f64,
        increment: f64,
        iterations: usize,
    },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
