use thiserror::Error;

/// Errors raised by the mechanism engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate input for agent {agent_id}: {reason}")]
    Degenerate { agent_id: String, reason: String },

    #[error("numeric error{}: {reason} (residual norm {residual:e})", context_suffix(.context))]
    Numeric {
        context: Option<String>,
        reason: String,
        residual: f64,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" [{c}]"),
        None => String::new(),
    }
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn degenerate(agent_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Degenerate {
            agent_id: agent_id.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
