use std::fmt;

use provchain_core::provenance::ProvenanceError;
use provchain_core::store::StoreError;
use provchain_core::LedgerError;
use serde::Serialize;

/// Error body returned by every endpoint and printed by the CLI. Ledger
/// rejections keep their ledger error code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "BadRequest", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(409, code, message)
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        let status = match e {
            LedgerError::UnknownContract(_) | LedgerError::UnknownBatch { .. } => 404,
            _ => 422,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self::new(500, "StorageFailure", e.to_string())
    }
}

impl From<ProvenanceError> for ApiError {
    fn from(e: ProvenanceError) -> Self {
        match e {
            ProvenanceError::UnknownBatch { .. } => Self::new(404, "UnknownBatch", e.to_string()),
            _ => Self::new(500, "Internal", e.to_string()),
        }
    }
}
