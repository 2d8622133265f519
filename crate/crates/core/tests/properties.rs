mod common;

use std::collections::BTreeSet;

use common::Workload;
use proptest::prelude::*;
use provchain_core::ledger::LedgerState;
use provchain_core::store::state_digest;
use provchain_core::{Ledger, Operation};

fn run(seed: u64, invalid_rate: f64, len: usize, mut check: impl FnMut(&Ledger, &Ledger, &Operation, bool)) {
    let mut work = Workload::new(seed, invalid_rate);
    let mut ledger = Ledger::new();
    for _ in 0..Workload::SETUP_STEPS + len {
        let tx = work.next(&ledger);
        let before = ledger.clone();
        let ok = ledger.execute(&tx).is_ok();
        check(&before, &ledger, &tx.op, ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rejected_transactions_change_nothing(seed in any::<u64>(), rate in 0.1f64..0.9) {
        run(seed, rate, 40, |before, after, _, ok| {
            if !ok {
                assert_eq!(before.state(), after.state());
                assert_eq!(before.events().len(), after.events().len());
            }
        });
    }

    #[test]
    fn accepted_transactions_emit_one_event_and_move_the_digest(seed in any::<u64>()) {
        run(seed, 0.2, 40, |before, after, _, ok| {
            if ok {
                assert_eq!(after.events().len(), before.events().len() + 1);
                assert_ne!(state_digest(before.state()), state_digest(after.state()));
            }
        });
    }

    #[test]
    fn state_is_rebuilt_from_events_after_every_step(seed in any::<u64>()) {
        run(seed, 0.2, 30, |_, after, _, _| {
            let rebuilt = LedgerState::from_events(after.events().events()).unwrap();
            assert_eq!(state_digest(&rebuilt), state_digest(after.state()));
        });
    }

    #[test]
    fn split_merge_and_transfer_preserve_contract_totals(seed in any::<u64>()) {
        run(seed, 0.3, 40, |before, after, op, ok| {
            if ok && matches!(op, Operation::SplitBatch { .. } | Operation::MergeBatch { .. } | Operation::TransferBatch { .. }) {
                for (addr, token) in &after.state().tokens {
                    let was = before.state().tokens[addr].live_supply();
                    assert_eq!(token.live_supply(), was);
                }
            }
        });
    }

    #[test]
    fn depleted_batches_stay_depleted(seed in any::<u64>()) {
        run(seed, 0.3, 40, |before, after, _, _| {
            for (addr, token) in &before.state().tokens {
                for (id, batch) in token.batches.iter().filter(|(_, b)| b.is_depleted()) {
                    let now = &after.state().tokens[addr].batches[id];
                    assert!(now.is_depleted());
                    assert_eq!(now.lineage, batch.lineage);
                }
            }
        });
    }
}

#[test]
fn workload_exercises_many_rejection_paths() {
    let mut codes = BTreeSet::new();
    for seed in 0..300 {
        let mut work = Workload::new(seed, 0.3);
        let mut ledger = Ledger::new();
        for _ in 0..Workload::SETUP_STEPS + 40 {
            let tx = work.next(&ledger);
            if let Err(e) = ledger.execute(&tx) {
                codes.insert(e.code());
            }
        }
    }
    for code in [
        "NotOwner",
        "NotBatchOwner",
        "InsufficientBalance",
        "ArityMismatch",
        "QuantityMismatch",
        "BadPartition",
        "BadMerge",
        "TimestampRegression",
        "InvalidParticipant",
        "IdCollision",
    ] {
        assert!(codes.contains(code), "{code} never hit: {codes:?}");
    }
}
