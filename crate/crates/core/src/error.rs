use thiserror::Error;

/// Errors surfaced by kernels, dispatch and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("CPU feature `{0}` is not available on this host")]
    UnsupportedFeature(&'static str),

    #[error("unknown or unavailable kernel `{0}`")]
    UnsupportedKernel(String),

    #[error("bitsets differ in length: {left} vs {right} words")]
    LengthMismatch { left: usize, right: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_same_len(a: &[u64], b: &[u64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}
