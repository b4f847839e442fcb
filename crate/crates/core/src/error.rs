use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{} invalid fields:\n{}", .0.len(), list_fields(.0))]
    InvalidFields(Vec<FieldIssue>),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("integrator step underflow at t = {time:.4e} s (dt = {dt:.3e} s)")]
    StepUnderflow { time: f64, dt: f64 },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("simulation failed at hdist {hdist}, trial {trial}: {source}")]
    Simulation {
        hdist: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One violated field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

fn list_fields(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Collects every violation instead of stopping at the first.
#[derive(Debug, Default)]
pub(crate) struct Issues(Vec<FieldIssue>);

impl Issues {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn require(&mut self, ok: bool, field: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }

    /// Merges the outcome of a validator that stops at its first error.
    pub fn absorb(&mut self, result: Result<()>) {
        match result {
            Ok(()) => {}
            Err(Error::Validation { field, message }) => self.push(field, message),
            Err(Error::InvalidFields(v)) => self.0.extend(v),
            Err(e) => self.push("<config>", e.to_string()),
        }
    }

    pub fn finish(mut self) -> Result<()> {
        match self.0.len() {
            0 => Ok(()),
            1 => {
                let i = self.0.pop().unwrap();
                Err(Error::Validation {
                    field: i.field,
                    message: i.message,
                })
            }
            _ => Err(Error::InvalidFields(self.0)),
        }
    }
}

impl Error {
    /// Violations carried by a validation error, if any.
    pub fn field_issues(&self) -> Vec<FieldIssue> {
        match self {
            Error::Validation { field, message } => vec![FieldIssue {
                field: field.clone(),
                message: message.clone(),
            }],
            Error::InvalidFields(v) => v.clone(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
