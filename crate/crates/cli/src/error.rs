//! Process-level error type carrying the documented exit code.

use vlk_core::chat::ChatError;
use vlk_core::dataset::DatasetError;
use vlk_core::editor::EditorError;
use vlk_core::evaluator::EvaluatorError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_UPSTREAM: i32 = 3;
pub const EXIT_DIGEST_MISMATCH: i32 = 4;
pub const EXIT_TRANSPORT: i32 = 5;
pub const EXIT_ACCEPTANCE: i32 = 6;

#[derive(Debug)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn config(message: String) -> AppError {
        AppError { code: EXIT_CONFIG, message }
    }

    pub fn missing_upstream(message: String) -> AppError {
        AppError { code: EXIT_MISSING_UPSTREAM, message }
    }

    pub fn digest_mismatch(message: String) -> AppError {
        AppError { code: EXIT_DIGEST_MISMATCH, message }
    }

    pub fn transport(message: String) -> AppError {
        AppError { code: EXIT_TRANSPORT, message }
    }

    pub fn acceptance(message: String) -> AppError {
        AppError { code: EXIT_ACCEPTANCE, message }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::config(e.to_string())
    }
}

impl From<vlk_core::model::ModelError> for AppError {
    fn from(e: vlk_core::model::ModelError) -> AppError {
        AppError::config(e.to_string())
    }
}

impl From<vlk_core::recorder::RecorderError> for AppError {
    fn from(e: vlk_core::recorder::RecorderError) -> AppError {
        AppError::config(e.to_string())
    }
}

impl From<vlk_core::locator::LocatorError> for AppError {
    fn from(e: vlk_core::locator::LocatorError) -> AppError {
        AppError::config(e.to_string())
    }
}

impl From<vlk_core::synthlab::SynthError> for AppError {
    fn from(e: vlk_core::synthlab::SynthError) -> AppError {
        match e {
            vlk_core::synthlab::SynthError::DigestMismatch { .. } => {
                AppError::digest_mismatch(e.to_string())
            }
            other => AppError::config(other.to_string()),
        }
    }
}

impl From<EditorError> for AppError {
    fn from(e: EditorError) -> AppError {
        match e {
            EditorError::DigestMismatch { .. } => AppError::digest_mismatch(e.to_string()),
            other => AppError::config(other.to_string()),
        }
    }
}

impl From<ChatError> for AppError {
    fn from(e: ChatError) -> AppError {
        match e {
            ChatError::Transport { .. } | ChatError::Protocol(_) => {
                AppError::transport(e.to_string())
            }
            ChatError::MissingCredential(_) => AppError::config(e.to_string()),
        }
    }
}

impl From<DatasetError> for AppError {
    fn from(e: DatasetError) -> AppError {
        match e {
            DatasetError::Chat(chat) => chat.into(),
            other => AppError::config(other.to_string()),
        }
    }
}

impl From<EvaluatorError> for AppError {
    fn from(e: EvaluatorError) -> AppError {
        match e {
            EvaluatorError::RunFailed { ref source, .. } => match source {
                ChatError::Transport { .. } | ChatError::Protocol(_) => {
                    AppError::transport(e.to_string())
                }
                ChatError::MissingCredential(_) => AppError::config(e.to_string()),
            },
            other => AppError::config(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> AppError {
        AppError::config(e.to_string())
    }
}
