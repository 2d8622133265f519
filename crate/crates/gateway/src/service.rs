//! The shared ledger behind the HTTP and CLI front ends: one serialized
//! writer and cheap snapshots for readers.

use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use provchain_core::gas::CostTable;
use provchain_core::ledger::LedgerConfig;
use provchain_core::scenario::{run_demo, DemoError, DemoSummary};
use provchain_core::store::{StateDigest, StoreError};
use provchain_core::{Address, DurableLedger, Ledger, LedgerError, Operation, Receipt, Transaction};

use crate::error::ApiError;

/// A consistent read view as of `records` journal entries.
#[derive(Debug)]
pub struct Snapshot {
    pub ledger: Ledger,
    pub digest: StateDigest,
    pub records: u64,
}

/// An acknowledged transaction.
#[derive(Debug, Clone)]
pub struct Submitted {
    pub index: u64,
    pub timestamp: u64,
    pub result: Result<Receipt, LedgerError>,
    pub digest: StateDigest,
}

pub struct Gateway {
    writer: Mutex<DurableLedger>,
    snapshot: RwLock<Arc<Snapshot>>,
}

const MAX_CLOCK_BUMPS: u32 = 64;

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Gateway {
    pub fn new(durable: DurableLedger) -> Self {
        let snapshot = Self::capture(&durable);
        Self {
            writer: Mutex::new(durable),
            snapshot: RwLock::new(Arc::new(snapshot)),
        }
    }

    /// Opens a log file, replaying it to restore state.
    pub fn open(path: impl AsRef<Path>, costs: CostTable, config: LedgerConfig) -> Result<Self, StoreError> {
        Ok(Self::new(DurableLedger::open(path, costs, config)?))
    }

    pub fn in_memory() -> Self {
        Self::new(DurableLedger::in_memory())
    }

    fn capture(durable: &DurableLedger) -> Snapshot {
        Snapshot {
            ledger: durable.ledger().clone(),
            digest: durable.digest(),
            records: durable.journal().next_index(),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, durable: &DurableLedger) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(Self::capture(durable));
    }

    /// Runs one transaction through the writer. Without an explicit
    /// timestamp the wall clock is used, clamped so time never runs
    /// backwards.
    pub fn submit(&self, caller: Address, timestamp: Option<u64>, op: Operation) -> Result<Submitted, ApiError> {
        let mut durable = self.writer.lock().expect("writer lock");
        let mut tx = Transaction::new(caller, timestamp.unwrap_or(0), op);
        if timestamp.is_none() {
            tx.timestamp = now().max(durable.last_timestamp());
            for _ in 0..MAX_CLOCK_BUMPS {
                match durable.ledger().check(&tx) {
                    Err(LedgerError::IdCollision(_)) => tx.timestamp += 1,
                    _ => break,
                }
            }
        }
        let timestamp = tx.timestamp;
        let index = durable.journal().next_index();
        let outcome = durable.submit(tx);
        self.publish(&durable);
        let result = outcome?;
        Ok(Submitted {
            index,
            timestamp,
            result,
            digest: durable.digest(),
        })
    }

    pub fn run_demo(&self, start_time: Option<u64>) -> Result<DemoSummary, ApiError> {
        let mut durable = self.writer.lock().expect("writer lock");
        let start = start_time.unwrap_or_else(now).max(durable.last_timestamp());
        let summary = run_demo(&mut durable, start);
        self.publish(&durable);
        summary.map_err(|e| match e {
            DemoError::NotEmpty => ApiError::conflict("NotEmpty", e.to_string()),
            DemoError::Ledger(e) => e.into(),
            DemoError::Store(e) => e.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mint(contract: Address) -> Operation {
        Operation::AddBatch {
            contract,
            amount: 5,
            assignments: vec![],
        }
    }

    fn deploy(g: &Gateway, owner: Address) -> Address {
        let op = Operation::DeployToken {
            name: "Logs".into(),
            unit_label: "logs".into(),
            recipe: vec![],
        };
        match g.submit(owner, Some(10), op).unwrap().result.unwrap().outcome {
            provchain_core::Outcome::Deployed { address } => address,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wall_clock_mints_in_one_second_get_distinct_times() {
        let g = Gateway::in_memory();
        let owner = Address::from_label("forester");
        let logs = deploy(&g, owner);
        let times: Vec<u64> = (0..5)
            .map(|_| {
                let s = g.submit(owner, None, mint(logs)).unwrap();
                assert!(s.result.is_ok());
                s.timestamp
            })
            .collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn explicit_timestamps_are_taken_as_given() {
        let g = Gateway::in_memory();
        let owner = Address::from_label("forester");
        let logs = deploy(&g, owner);
        assert!(g.submit(owner, Some(20), mint(logs)).unwrap().result.is_ok());
        let again = g.submit(owner, Some(20), mint(logs)).unwrap();
        assert_eq!(again.result.unwrap_err().code(), "IdCollision");
        assert_eq!(again.index, 2);
        assert_eq!(g.snapshot().records, 3);
    }

    #[test]
    fn snapshots_are_stable_after_later_writes() {
        let g = Gateway::in_memory();
        let owner = Address::from_label("forester");
        let before = g.snapshot();
        deploy(&g, owner);
        assert!(before.ledger.is_empty());
        assert_eq!(g.snapshot().records, 1);
        assert_ne!(g.snapshot().digest, before.digest);
    }
}
