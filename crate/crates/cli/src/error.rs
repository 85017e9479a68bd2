use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot read {path}: {message}")]
    Input { path: String, message: String },

    #[error("numerical failure in {operation}: {source}")]
    Numerical {
        operation: String,
        #[source]
        source: specmult_core::Error,
    },

    #[error("non-finite value for {0}")]
    NonFinite(String),

    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl RunError {
    /// Process exit status: 2 for usage and configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Usage(_) | RunError::Input { .. } => 2,
            RunError::Numerical { .. } | RunError::NonFinite(_) | RunError::Output { .. } => 3,
        }
    }

    pub(crate) fn num(
        operation: impl Into<String>,
    ) -> impl FnOnce(specmult_core::Error) -> RunError {
        let operation = operation.into();
        move |source| RunError::Numerical { operation, source }
    }
}
