//! Supply chain traceability ledger built on token recipes.
//!
//! Each product type is a token contract holding non-fungible batches.
//! Producers declare a recipe of inputs per unit of output; creating a batch
//! atomically consumes the declared input batches, so every product can be
//! traced back to its resources and every resource tracked forward into the
//! products that contain it.
//!
//! - [`ident`]: fixed-width identifiers, batch id derivation, slot packing
//! - [`ledger`]: the transactional state machine
//! - [`provenance`]: event log plus trace and track queries
//! - [`gas`]: structural gas model for deployment and batch creation
//! - [`store`]: write-ahead log, replay and state digests
//! - [`scenario`]: the wood and glue walkthrough

pub mod gas;
pub mod ident;
pub mod ledger;
pub mod provenance;
pub mod scenario;
pub mod store;

pub use ident::{Address, BatchId, ConsumedInput, Word32};
pub use ledger::{Ledger, LedgerError, Operation, Outcome, Receipt, Transaction};
pub use store::{DurableLedger, StateDigest};
