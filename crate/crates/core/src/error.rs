use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Network-level failure. Retriable; carries the workflow step when known.
    #[error("transport failure{}: {message}", step_suffix(*.step))]
    Transport { step: Option<usize>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("script error at {context}: {message}")]
    Script { context: String, message: String },

    #[error("step {step}: locator `{locator}` did not resolve on the current page")]
    LocatorNotFound { step: usize, locator: String },

    #[error("step {step}: unknown parameter `{name}`")]
    UnknownParam { step: usize, name: String },

    #[error("capture failed: {0}")]
    Capture(String),

    #[error("step {step}: captured features no longer reproduce ({detail}); re-run capture")]
    Stale { step: usize, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }

    pub(crate) fn script(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Script {
            context: context.into(),
            message: message.into(),
        }
    }
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at step {s}"),
        None => String::new(),
    }
}
