use thiserror::Error;

use crate::ident::{Address, BatchId};

/// Reasons a transaction is rejected. A rejected transaction changes nothing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("contract {0} is not deployed")]
    UnknownContract(Address),
    #[error("recipe source {0} is not a deployed contract of the required kind")]
    UnknownSource(Address),
    #[error("batch {batch} not found in contract {contract}")]
    UnknownBatch { contract: Address, batch: BatchId },
    #[error("amounts must be positive")]
    BadAmount,
    #[error("caller {0} does not own the token contract")]
    NotOwner(Address),
    #[error("caller {0} is not the certifier")]
    NotCertifier(Address),
    #[error("token contract {0} is already certified")]
    AlreadyCertified(Address),
    #[error("token contract {0} is not certified")]
    NotCertified(Address),
    #[error("expected one assignment per recipe entry ({expected}), got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("recipe entry {recipe_index} needs {required} units, draws sum to {drawn}")]
    QuantityMismatch {
        recipe_index: usize,
        required: u64,
        drawn: u64,
    },
    #[error("draw from {actual} does not match recipe source {expected}")]
    SourceMismatch { expected: Address, actual: Address },
    #[error("batch {batch} holds {available}, {requested} requested")]
    InsufficientBalance {
        batch: BatchId,
        available: u64,
        requested: u64,
    },
    #[error("caller {caller} does not own batch {batch}")]
    NotBatchOwner { caller: Address, batch: BatchId },
    #[error("batch {0} is depleted")]
    Depleted(BatchId),
    #[error("invalid split partition")]
    BadPartition,
    #[error("invalid merge: {0}")]
    BadMerge(&'static str),
    #[error("batch id {0} already exists in the contract")]
    IdCollision(BatchId),
    #[error("derived contract address {0} is already in use")]
    AddressCollision(Address),
    #[error("timestamp {got} precedes last accepted timestamp {last}")]
    TimestampRegression { last: u64, got: u64 },
    #[error("{0} is a contract address and cannot act as a participant")]
    InvalidParticipant(Address),
    #[error("amount arithmetic overflow")]
    Overflow,
}

impl LedgerError {
    /// Stable machine-readable code, used on the wire and in the log.
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::UnknownContract(_) => "UnknownContract",
            LedgerError::UnknownSource(_) => "UnknownSource",
            LedgerError::UnknownBatch { .. } => "UnknownBatch",
            LedgerError::BadAmount => "BadAmount",
            LedgerError::NotOwner(_) => "NotOwner",
            LedgerError::NotCertifier(_) => "NotCertifier",
            LedgerError::AlreadyCertified(_) => "AlreadyCertified",
            LedgerError::NotCertified(_) => "NotCertified",
            LedgerError::ArityMismatch { .. } => "ArityMismatch",
            LedgerError::QuantityMismatch { .. } => "QuantityMismatch",
            LedgerError::SourceMismatch { .. } => "SourceMismatch",
            LedgerError::InsufficientBalance { .. } => "InsufficientBalance",
            LedgerError::NotBatchOwner { .. } => "NotBatchOwner",
            LedgerError::Depleted(_) => "Depleted",
            LedgerError::BadPartition => "BadPartition",
            LedgerError::BadMerge(_) => "BadMerge",
            LedgerError::IdCollision(_) => "IdCollision",
            LedgerError::AddressCollision(_) => "AddressCollision",
            LedgerError::TimestampRegression { .. } => "TimestampRegression",
            LedgerError::InvalidParticipant(_) => "InvalidParticipant",
            LedgerError::Overflow => "Overflow",
        }
    }

    pub const ALL_CODES: &'static [&'static str] = &[
        "UnknownContract",
        "UnknownSource",
        "UnknownBatch",
        "BadAmount",
        "NotOwner",
        "NotCertifier",
        "AlreadyCertified",
        "NotCertified",
        "ArityMismatch",
        "QuantityMismatch",
        "SourceMismatch",
        "InsufficientBalance",
        "NotBatchOwner",
        "Depleted",
        "BadPartition",
        "BadMerge",
        "IdCollision",
        "AddressCollision",
        "TimestampRegression",
        "InvalidParticipant",
        "Overflow",
    ];
}
