mod common;

use std::fs;

use common::Workload;
use provchain_core::gas::CostTable;
use provchain_core::ledger::LedgerConfig;
use provchain_core::scenario::run_demo;
use provchain_core::store::{parse_log, replay, state_digest, StoreError};
use provchain_core::{DurableLedger, Ledger};

const EMPTY: &str = "d008af27bc759f233bdfdd7891dc80007442ba0057f19ffa84ed99dd7abe9178";

fn open(path: &std::path::Path) -> DurableLedger {
    DurableLedger::open(path, CostTable::default(), LedgerConfig::default()).unwrap()
}

#[test]
fn empty_log_gives_the_empty_digest() {
    let (ledger, digest) = replay(&[], &CostTable::default(), LedgerConfig::default()).unwrap();
    assert!(ledger.is_empty());
    assert_eq!(digest.to_hex(), EMPTY);
    assert_eq!(state_digest(Ledger::new().state()).to_hex(), EMPTY);
}

#[test]
fn demo_log_on_disk_replays_to_the_live_digest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.provlog");
    let live = {
        let mut ledger = open(&path);
        run_demo(&mut ledger, 1_000).unwrap();
        ledger.digest()
    };
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.lines().all(|l| l.starts_with("{\"caller\":")));
    let records = parse_log(&text).unwrap();
    let (_, first) = replay(&records, &CostTable::default(), LedgerConfig::default()).unwrap();
    let (_, second) = replay(&records, &CostTable::default(), LedgerConfig::default()).unwrap();
    assert_eq!(first, live);
    assert_eq!(second, live);
    assert_eq!(open(&path).digest(), live);
}

#[test]
fn rejected_records_replay_to_the_same_rejection() {
    let mut durable = DurableLedger::in_memory();
    let mut work = Workload::new(5, 0.5);
    for _ in 0..80 {
        let tx = work.next(durable.ledger());
        let _ = durable.submit(tx).unwrap();
    }
    let records = durable.journal().records();
    assert!(records.iter().any(|r| !r.outcome.is_accepted()));
    let (_, digest) = replay(records, &CostTable::default(), LedgerConfig::default()).unwrap();
    assert_eq!(digest, durable.digest());

    // flipping a recorded rejection is detected
    let mut tampered = records.to_vec();
    let i = tampered.iter().position(|r| !r.outcome.is_accepted()).unwrap();
    tampered[i].outcome = provchain_core::store::RecordOutcome::Accepted(vec![]);
    assert!(matches!(
        replay(&tampered, &CostTable::default(), LedgerConfig::default()),
        Err(StoreError::OutcomeMismatch { .. })
    ));
}

#[test]
fn gaps_and_garbage_fail_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.provlog");
    {
        let mut ledger = open(&path);
        run_demo(&mut ledger, 0).unwrap();
    }
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(3);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(
        DurableLedger::open(&path, CostTable::default(), LedgerConfig::default()),
        Err(StoreError::IndexGap { expected: 3, got: 4 })
    ));

    fs::write(&path, "not json\n").unwrap();
    assert!(matches!(
        DurableLedger::open(&path, CostTable::default(), LedgerConfig::default()),
        Err(StoreError::MalformedRecord { line: 1, .. })
    ));
}

#[test]
fn torn_tail_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("torn.provlog");
    let digest = {
        let mut ledger = open(&path);
        run_demo(&mut ledger, 0).unwrap();
        ledger.digest()
    };
    let mut bytes = fs::read(&path).unwrap();
    let intact = bytes.len();
    bytes.extend_from_slice(b"{\"caller\":\"ab");
    fs::write(&path, &bytes).unwrap();
    let restarted = open(&path);
    assert_eq!(restarted.digest(), digest);
    drop(restarted);
    assert_eq!(fs::metadata(&path).unwrap().len() as usize, intact);
}
