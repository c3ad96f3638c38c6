use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("meshing error: {0}")]
    Meshing(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate potential gradient on element {element} (|grad| = {norm:e})")]
    DegenerateGradient { element: usize, norm: f64 },

    #[error("conductivity tensors do not commute (defect {defect:e})")]
    NonCommuting { defect: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("Newton failed at step {step} (t = {time}): increment {increment:e}, residual {residual:e}")]
    NewtonDivergence {
        step: usize,
        time: f64,
        increment: f64,
        residual: f64,
    },

    #[error("inclusion error: {0}")]
    Inclusion(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("provenance mismatch: expected config hash {expected}, found {found} in {path}")]
    Provenance {
        expected: String,
        found: String,
        path: PathBuf,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
