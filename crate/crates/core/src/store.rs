//! Write-ahead transaction log, deterministic replay and state digests.
//!
//! The log is line-delimited JSON with sorted keys, one record per submitted
//! transaction. Rejected transactions are logged too, so replay reproduces
//! error paths as well as accepted ones.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use tiny_keccak::{Hasher, Keccak};

use crate::gas::CostTable;
use crate::ident::{Address, IdentError, Word32};
use crate::ledger::{
    CertificateStatus, Ledger, LedgerConfig, LedgerError, LedgerState, Lineage, Operation,
    Receipt, RecipeSource, Transaction,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("log io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("record index {got} where {expected} was expected")]
    IndexGap { expected: u64, got: u64 },
    #[error("digest mismatch at record {index}: recorded {recorded}, replayed {replayed}")]
    DigestMismatch {
        index: u64,
        recorded: StateDigest,
        replayed: StateDigest,
    },
    #[error("outcome mismatch at record {index}: recorded {recorded}, replayed {replayed}")]
    OutcomeMismatch {
        index: u64,
        recorded: String,
        replayed: String,
    },
}

/// Keccak-256 over the canonical state serialization.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateDigest(pub Word32);

impl StateDigest {
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }
}

impl fmt::Display for StateDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for StateDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateDigest({})", self.to_hex())
    }
}

impl FromStr for StateDigest {
    type Err = IdentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(StateDigest)
    }
}

impl Serialize for StateDigest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateDigest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Word32::deserialize(deserializer).map(StateDigest)
    }
}

struct DigestWriter(Keccak);

impl DigestWriter {
    fn u64(&mut self, v: u64) {
        self.0.update(&v.to_be_bytes());
    }

    fn tag(&mut self, t: u8) {
        self.0.update(&[t]);
    }

    fn bytes(&mut self, b: &[u8]) {
        self.0.update(b);
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.update(s.as_bytes());
    }

    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }
}

/// Deterministic digest of the full ledger state. Maps are walked in
/// address order, strings and lists are length-prefixed.
pub fn state_digest(state: &LedgerState) -> StateDigest {
    let mut w = DigestWriter(Keccak::v256());
    w.bytes(b"provchain-state-v1");
    w.u64(state.height);
    w.u64(state.last_timestamp);

    w.len(state.participants.len());
    for p in &state.participants {
        w.bytes(p.as_bytes());
    }

    w.len(state.tokens.len());
    for (addr, token) in &state.tokens {
        w.bytes(addr.as_bytes());
        w.bytes(token.owner.as_bytes());
        w.str(&token.name);
        w.str(&token.unit_label);
        w.len(token.recipe.len());
        for input in &token.recipe {
            match input.source {
                RecipeSource::SpecificToken(a) => {
                    w.tag(0);
                    w.bytes(a.as_bytes());
                }
                RecipeSource::CertifiedBy(a) => {
                    w.tag(1);
                    w.bytes(a.as_bytes());
                }
            }
            w.u64(input.amount_per_unit);
        }
        w.len(token.batches.len());
        for (id, batch) in &token.batches {
            w.bytes(id.as_bytes());
            w.u64(batch.amount);
            w.bytes(batch.owner.as_bytes());
            w.u64(batch.created_at.event);
            w.u64(batch.created_at.seconds);
            match &batch.lineage {
                Lineage::Created { consumed_inputs } => {
                    w.tag(0);
                    w.len(consumed_inputs.len());
                    for c in consumed_inputs {
                        w.bytes(c.contract.as_bytes());
                        w.bytes(c.batch.as_bytes());
                        w.u64(c.amount);
                    }
                }
                Lineage::SplitFrom { parent } => {
                    w.tag(1);
                    w.bytes(parent.as_bytes());
                }
                Lineage::MergedFrom { parents } => {
                    w.tag(2);
                    w.len(parents.len());
                    for p in parents {
                        w.bytes(p.as_bytes());
                    }
                }
            }
        }
    }

    w.len(state.certificates.len());
    for (addr, cert) in &state.certificates {
        w.bytes(addr.as_bytes());
        w.bytes(cert.certifier.as_bytes());
        w.str(&cert.name);
        w.len(cert.certified.len());
        for (token, history) in &cert.certified {
            w.bytes(token.as_bytes());
            w.len(history.len());
            for entry in history {
                w.tag(match entry.status {
                    CertificateStatus::Active => 1,
                    CertificateStatus::Revoked => 0,
                });
                w.u64(entry.at.event);
                w.u64(entry.at.seconds);
            }
        }
    }

    let mut out = [0u8; 32];
    w.0.finalize(&mut out);
    StateDigest(Word32::new(out))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RecordOutcome {
    /// Identifiers created by the transaction.
    Accepted(Vec<String>),
    /// Ledger error code.
    Rejected(String),
}

impl RecordOutcome {
    pub fn from_result(result: &Result<Receipt, LedgerError>) -> Self {
        match result {
            Ok(receipt) => RecordOutcome::Accepted(receipt.outcome.ids()),
            Err(e) => RecordOutcome::Rejected(e.code().to_string()),
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, RecordOutcome::Accepted(_))
    }
}

impl fmt::Display for RecordOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordOutcome::Accepted(ids) => write!(f, "accepted{ids:?}"),
            RecordOutcome::Rejected(code) => write!(f, "rejected({code})"),
        }
    }
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub index: u64,
    #[serde(flatten)]
    pub tx: Transaction,
    pub outcome: RecordOutcome,
    /// State digest after the transaction.
    pub digest: StateDigest,
}

impl TransactionRecord {
    /// Canonical single-line JSON with lexicographically sorted keys.
    pub fn to_line(&self) -> String {
        // serde_json::Value keeps object keys in a BTreeMap
        let value = serde_json::to_value(self).expect("record serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn caller(&self) -> Address {
        self.tx.caller
    }

    pub fn operation(&self) -> &Operation {
        &self.tx.op
    }
}

/// Parses a whole log, checking that indices run contiguously from 0.
pub fn parse_log(text: &str) -> Result<Vec<TransactionRecord>, StoreError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = TransactionRecord::from_line(line).map_err(|e| StoreError::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let expected = records.len() as u64;
        if record.index != expected {
            return Err(StoreError::IndexGap {
                expected,
                got: record.index,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Re-executes every record, checking outcomes and digests as it goes.
pub fn replay(
    records: &[TransactionRecord],
    costs: &CostTable,
    config: LedgerConfig,
) -> Result<(Ledger, StateDigest), StoreError> {
    replay_with(records, costs, config, |_, _| {})
}

/// [`replay`] with a callback observing each record's replayed digest.
pub fn replay_with(
    records: &[TransactionRecord],
    costs: &CostTable,
    config: LedgerConfig,
    mut observe: impl FnMut(&TransactionRecord, StateDigest),
) -> Result<(Ledger, StateDigest), StoreError> {
    let mut ledger = Ledger::with_costs(costs.clone(), config);
    let mut digest = state_digest(ledger.state());
    for (i, record) in records.iter().enumerate() {
        if record.index != i as u64 {
            return Err(StoreError::IndexGap {
                expected: i as u64,
                got: record.index,
            });
        }
        let result = ledger.execute(&record.tx);
        let outcome = RecordOutcome::from_result(&result);
        if outcome != record.outcome {
            return Err(StoreError::OutcomeMismatch {
                index: record.index,
                recorded: record.outcome.to_string(),
                replayed: outcome.to_string(),
            });
        }
        if result.is_ok() {
            digest = state_digest(ledger.state());
        }
        if digest != record.digest {
            return Err(StoreError::DigestMismatch {
                index: record.index,
                recorded: record.digest,
                replayed: digest,
            });
        }
        observe(record, digest);
    }
    Ok((ledger, digest))
}

/// Append-only record store, optionally backed by a file.
pub struct Journal {
    records: Vec<TransactionRecord>,
    sink: Option<Box<dyn Write + Send + Sync>>,
    file: Option<File>,
    path: Option<PathBuf>,
}

impl fmt::Debug for Journal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Journal")
            .field("records", &self.records.len())
            .field("path", &self.path)
            .finish()
    }
}

impl Journal {
    pub fn in_memory() -> Self {
        Self {
            records: Vec::new(),
            sink: None,
            file: None,
            path: None,
        }
    }

    /// Journal that writes lines to an arbitrary sink.
    pub fn with_sink(sink: Box<dyn Write + Send + Sync>) -> Self {
        Self {
            sink: Some(sink),
            ..Self::in_memory()
        }
    }

    /// Opens (or creates) a log file and loads its records. A trailing line
    /// without a newline is a torn write from a crash and is truncated.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut records = Vec::new();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line_no = 0;
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            if !buf.ends_with('\n') {
                break;
            }
            let line = buf.trim_end();
            if !line.is_empty() {
                let record =
                    TransactionRecord::from_line(line).map_err(|e| StoreError::MalformedRecord {
                        line: line_no,
                        reason: e.to_string(),
                    })?;
                let expected = records.len() as u64;
                if record.index != expected {
                    return Err(StoreError::IndexGap {
                        expected,
                        got: record.index,
                    });
                }
                records.push(record);
            }
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok(Self {
            records,
            sink: None,
            file: Some(file),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn next_index(&self) -> u64 {
        self.records.len() as u64
    }

    /// Appends a record. For file-backed journals the line is flushed and
    /// synced before this returns.
    pub fn persist(&mut self, record: TransactionRecord) -> Result<(), StoreError> {
        let expected = self.next_index();
        if record.index != expected {
            return Err(StoreError::IndexGap {
                expected,
                got: record.index,
            });
        }
        let mut line = record.to_line();
        line.push('\n');
        if let Some(file) = self.file.as_mut() {
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        if let Some(sink) = self.sink.as_mut() {
            sink.write_all(line.as_bytes())?;
            sink.flush()?;
        }
        self.records.push(record);
        Ok(())
    }
}

/// A ledger whose every submitted transaction is persisted before it is
/// acknowledged.
#[derive(Debug)]
pub struct DurableLedger {
    ledger: Ledger,
    journal: Journal,
    digest: StateDigest,
}

impl DurableLedger {
    pub fn in_memory() -> Self {
        Self::from_journal(Journal::in_memory(), CostTable::default(), LedgerConfig::default())
            .expect("empty journal replays")
    }

    /// Restores state by replaying everything the journal holds.
    pub fn from_journal(
        journal: Journal,
        costs: CostTable,
        config: LedgerConfig,
    ) -> Result<Self, StoreError> {
        let (ledger, digest) = replay(journal.records(), &costs, config)?;
        Ok(Self {
            ledger,
            journal,
            digest,
        })
    }

    pub fn open(path: impl AsRef<Path>, costs: CostTable, config: LedgerConfig) -> Result<Self, StoreError> {
        Self::from_journal(Journal::open(path)?, costs, config)
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn digest(&self) -> StateDigest {
        self.digest
    }

    pub fn last_timestamp(&self) -> u64 {
        self.ledger.state().last_timestamp
    }

    /// Executes, persists, then acknowledges. The outer error is a storage
    /// failure, in which case the transaction is aborted and in-memory
    /// state is restored from the journal; the inner one is a ledger
    /// rejection, which is itself logged.
    pub fn submit(&mut self, tx: Transaction) -> Result<Result<Receipt, LedgerError>, StoreError> {
        let result = self.ledger.execute(&tx);
        let digest = if result.is_ok() {
            state_digest(self.ledger.state())
        } else {
            self.digest
        };
        let record = TransactionRecord {
            index: self.journal.next_index(),
            outcome: RecordOutcome::from_result(&result),
            tx,
            digest,
        };
        if let Err(e) = self.journal.persist(record) {
            if result.is_ok() {
                let (ledger, digest) = replay(
                    self.journal.records(),
                    self.ledger.costs(),
                    self.ledger.config(),
                )?;
                self.ledger = ledger;
                self.digest = digest;
            }
            return Err(e);
        }
        self.digest = digest;
        Ok(result)
    }
}
