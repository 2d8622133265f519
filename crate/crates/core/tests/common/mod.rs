//! Shared fixtures for the integration tests: a random workload generator
//! and a brute-force lineage oracle that reads events as raw JSON.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use provchain_core::ledger::{InputAssignment, LedgerState, RecipeInput, RecipeSource};
use provchain_core::provenance::LedgerEvent;
use provchain_core::{Address, BatchId, ConsumedInput, Ledger, Operation, Transaction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn person(i: usize) -> Address {
    Address::from_label(&format!("participant-{i}"))
}

/// Produces transactions against whatever state the ledger is in. The
/// first few are a fixed setup: two resources, a certificate, and two
/// product tiers.
pub struct Workload {
    pub rng: ChaCha8Rng,
    pub clock: u64,
    /// Probability that a generated operation is deliberately broken.
    pub invalid_rate: f64,
    people: [Address; 4],
    step: usize,
}

struct Live {
    contract: Address,
    batch: BatchId,
    owner: Address,
    amount: u64,
}

impl Workload {
    pub fn new(seed: u64, invalid_rate: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: 1_000,
            invalid_rate,
            people: [person(0), person(1), person(2), person(3)],
            step: 0,
        }
    }

    pub const SETUP_STEPS: usize = 6;

    fn find(state: &LedgerState, name: &str) -> Address {
        state
            .tokens
            .values()
            .find(|t| t.name == name)
            .map(|t| t.address)
            .unwrap_or_else(|| panic!("{name} not deployed"))
    }

    fn certificate(state: &LedgerState) -> Address {
        *state.certificates.keys().next().expect("certificate deployed")
    }

    fn setup(&mut self, state: &LedgerState) -> Transaction {
        let [p0, p1, p2, p3] = self.people;
        let (caller, op) = match self.step {
            0 => (p0, deploy("Logs", vec![])),
            1 => (p1, deploy("Glue", vec![])),
            2 => (p3, Operation::DeployCertificate { name: "Cert".into() }),
            3 => (
                p3,
                Operation::Certify {
                    certificate: Self::certificate(state),
                    token: Self::find(state, "Logs"),
                },
            ),
            4 => {
                let recipe = vec![
                    RecipeInput::certified(Self::certificate(state), self.rng.gen_range(1..=3)),
                    RecipeInput::specific(Self::find(state, "Glue"), self.rng.gen_range(1..=2)),
                ];
                (p2, deploy("Board", recipe))
            }
            _ => {
                let recipe = vec![RecipeInput::specific(Self::find(state, "Board"), 1)];
                (p0, deploy("Table", recipe))
            }
        };
        self.step += 1;
        Transaction::new(caller, self.clock, op)
    }

    fn live(state: &LedgerState) -> Vec<Live> {
        let mut out = Vec::new();
        for token in state.tokens.values() {
            for b in token.batches.values().filter(|b| b.amount > 0) {
                out.push(Live {
                    contract: token.address,
                    batch: b.id,
                    owner: b.owner,
                    amount: b.amount,
                });
            }
        }
        out
    }

    pub fn next(&mut self, ledger: &Ledger) -> Transaction {
        let state = ledger.state();
        if self.step < Self::SETUP_STEPS {
            return self.setup(state);
        }
        if self.rng.gen_bool(0.5) {
            self.clock += 1;
        }
        let broken = self.rng.gen_bool(self.invalid_rate);
        let live = Self::live(state);
        let roll = self.rng.gen_range(0..100);
        let mut tx = match roll {
            0..=19 => self.add_resource(state),
            20..=39 => self.add_product(state, &live),
            40..=52 if !live.is_empty() => self.split(&live),
            53..=62 if !live.is_empty() => self.merge(&live),
            63..=84 if !live.is_empty() => self.transfer(state, &live),
            85..=95 if !live.is_empty() => self.consume(&live),
            96..=99 => self.toggle_certificate(state),
            _ => self.add_resource(state),
        };
        if broken {
            self.break_tx(&mut tx, state);
        }
        tx
    }

    fn add_resource(&mut self, state: &LedgerState) -> Transaction {
        let (name, owner) = if self.rng.gen_bool(0.5) {
            ("Logs", self.people[0])
        } else {
            ("Glue", self.people[1])
        };
        let op = Operation::AddBatch {
            contract: Self::find(state, name),
            amount: self.rng.gen_range(1..=40),
            assignments: vec![],
        };
        Transaction::new(owner, self.clock, op)
    }

    fn add_product(&mut self, state: &LedgerState, live: &[Live]) -> Transaction {
        let name = if self.rng.gen_bool(0.6) { "Board" } else { "Table" };
        let token = &state.tokens[&Self::find(state, name)];
        let amount = self.rng.gen_range(1..=3);
        let mut assignments = Vec::new();
        for (index, input) in token.recipe.iter().enumerate() {
            let eligible = |c: &Address| match input.source {
                RecipeSource::SpecificToken(t) => *c == t,
                RecipeSource::CertifiedBy(cert) => state.certificates[&cert].is_active(c),
            };
            let mut need = amount * input.amount_per_unit;
            let mut draws = Vec::new();
            for b in live
                .iter()
                .filter(|b| b.owner == token.owner && eligible(&b.contract))
            {
                if need == 0 {
                    break;
                }
                let take = need.min(b.amount);
                draws.push(ConsumedInput::new(b.contract, b.batch, take));
                need -= take;
            }
            if draws.is_empty() {
                // nothing to draw from; keep the shape so the ledger decides
                draws.push(ConsumedInput::new(token.address, BatchId::ZERO, need));
            }
            assignments.push(InputAssignment::new(index, draws));
        }
        let op = Operation::AddBatch {
            contract: token.address,
            amount,
            assignments,
        };
        Transaction::new(token.owner, self.clock, op)
    }

    fn split(&mut self, live: &[Live]) -> Transaction {
        let b = live.choose(&mut self.rng).unwrap();
        let n = self.rng.gen_range(2..=3).min(b.amount.max(2) as usize);
        let mut parts = Vec::new();
        let mut left = b.amount;
        for i in 0..n {
            let part = if i + 1 == n {
                left
            } else {
                self.rng.gen_range(0..=left.saturating_sub((n - i - 1) as u64)).max(1).min(left)
            };
            parts.push(part);
            left -= part;
        }
        let op = Operation::SplitBatch {
            contract: b.contract,
            batch: b.batch,
            parts,
        };
        Transaction::new(b.owner, self.clock, op)
    }

    fn merge(&mut self, live: &[Live]) -> Transaction {
        let first = live.choose(&mut self.rng).unwrap();
        let mut batches: Vec<BatchId> = live
            .iter()
            .filter(|b| b.contract == first.contract && b.owner == first.owner)
            .map(|b| b.batch)
            .collect();
        batches.shuffle(&mut self.rng);
        batches.truncate(self.rng.gen_range(2..=3));
        let op = Operation::MergeBatch {
            contract: first.contract,
            batches,
        };
        Transaction::new(first.owner, self.clock, op)
    }

    fn transfer(&mut self, state: &LedgerState, live: &[Live]) -> Transaction {
        let b = live.choose(&mut self.rng).unwrap();
        // mostly ship goods to whoever can use them
        let consumer = state.tokens.values().find(|t| {
            t.recipe.iter().any(|r| match r.source {
                RecipeSource::SpecificToken(c) => c == b.contract,
                RecipeSource::CertifiedBy(cert) => state.certificates[&cert].is_active(&b.contract),
            })
        });
        let to = match consumer {
            Some(t) if self.rng.gen_bool(0.7) => t.owner,
            _ => *self.people.choose(&mut self.rng).unwrap(),
        };
        let op = Operation::TransferBatch {
            contract: b.contract,
            batch: b.batch,
            to,
        };
        Transaction::new(b.owner, self.clock, op)
    }

    fn consume(&mut self, live: &[Live]) -> Transaction {
        let b = live.choose(&mut self.rng).unwrap();
        let op = Operation::ConsumeBatch {
            contract: b.contract,
            batch: b.batch,
            amount: self.rng.gen_range(1..=b.amount),
        };
        Transaction::new(b.owner, self.clock, op)
    }

    fn toggle_certificate(&mut self, state: &LedgerState) -> Transaction {
        let certificate = Self::certificate(state);
        let token = Self::find(state, "Logs");
        let op = if state.certificates[&certificate].is_active(&token) {
            Operation::Revoke { certificate, token }
        } else {
            Operation::Certify { certificate, token }
        };
        Transaction::new(self.people[3], self.clock, op)
    }

    fn break_tx(&mut self, tx: &mut Transaction, state: &LedgerState) {
        let stranger = Address::from_label("stranger");
        match self.rng.gen_range(0..6) {
            0 => tx.caller = stranger,
            1 if state.last_timestamp > 0 => tx.timestamp = state.last_timestamp - 1,
            2 => tx.caller = *state.tokens.keys().next().unwrap(),
            _ => match &mut tx.op {
                Operation::AddBatch { amount, assignments, .. } => {
                    if self.rng.gen_bool(0.5) || assignments.is_empty() {
                        *amount += 1;
                    } else {
                        assignments.pop();
                    }
                }
                Operation::SplitBatch { parts, .. } => parts[0] += 1,
                Operation::MergeBatch { batches, .. } => {
                    let first = batches[0];
                    batches.push(first);
                }
                Operation::TransferBatch { to, .. } => *to = *state.tokens.keys().next().unwrap(),
                Operation::ConsumeBatch { amount, .. } => *amount += 1_000,
                Operation::Certify { token, .. } | Operation::Revoke { token, .. } => {
                    *token = stranger
                }
                _ => tx.caller = stranger,
            },
        }
    }
}

fn deploy(name: &str, recipe: Vec<RecipeInput>) -> Operation {
    Operation::DeployToken {
        name: name.into(),
        unit_label: "units".into(),
        recipe,
    }
}

pub type Node = (String, String);

/// One lineage edge read from the raw event JSON: `child` was made from
/// `input`, drawing `drawn` units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEdge {
    pub child: Node,
    pub input: Node,
    pub drawn: u64,
    pub event: u64,
}

/// Every batch that appears in the log, with the index of its creating
/// event and its position within that event.
pub fn raw_batches(events: &[LedgerEvent]) -> BTreeMap<Node, (u64, usize)> {
    let mut out = BTreeMap::new();
    for e in events {
        let v = serde_json::to_value(e).unwrap();
        let d = &v["data"];
        let index = v["index"].as_u64().unwrap();
        let contract = d["contract"].as_str().map(str::to_owned);
        match v["kind"].as_str().unwrap() {
            "BatchCreated" | "BatchMerged" => {
                let node = (contract.unwrap(), d["batch"].as_str().unwrap().to_owned());
                out.insert(node, (index, 0));
            }
            "BatchSplit" => {
                for (pos, c) in d["children"].as_array().unwrap().iter().enumerate() {
                    let node = (contract.clone().unwrap(), c["batch"].as_str().unwrap().to_owned());
                    out.insert(node, (index, pos));
                }
            }
            _ => {}
        }
    }
    out
}

pub fn raw_edges(events: &[LedgerEvent]) -> Vec<RawEdge> {
    let mut out = Vec::new();
    for e in events {
        let v = serde_json::to_value(e).unwrap();
        let d = &v["data"];
        let event = v["index"].as_u64().unwrap();
        let s = |x: &serde_json::Value| x.as_str().unwrap().to_owned();
        match v["kind"].as_str().unwrap() {
            "BatchCreated" => {
                let child = (s(&d["contract"]), s(&d["batch"]));
                for i in d["inputs"].as_array().unwrap() {
                    out.push(RawEdge {
                        child: child.clone(),
                        input: (s(&i["contract"]), s(&i["batch"])),
                        drawn: i["amount"].as_u64().unwrap(),
                        event,
                    });
                }
            }
            "BatchSplit" => {
                for c in d["children"].as_array().unwrap() {
                    out.push(RawEdge {
                        child: (s(&d["contract"]), s(&c["batch"])),
                        input: (s(&d["contract"]), s(&d["parent"])),
                        drawn: c["amount"].as_u64().unwrap(),
                        event,
                    });
                }
            }
            "BatchMerged" => {
                let child = (s(&d["contract"]), s(&d["batch"]));
                for p in d["parents"].as_array().unwrap() {
                    out.push(RawEdge {
                        child: child.clone(),
                        input: (s(&d["contract"]), s(&p["batch"])),
                        drawn: p["amount"].as_u64().unwrap(),
                        event,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

/// Depth-first closure over the edge list, without any index.
pub fn reachable(edges: &[RawEdge], start: &Node, upstream: bool) -> BTreeSet<Node> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start.clone()];
    while let Some(n) = stack.pop() {
        for e in edges {
            let (from, to) = if upstream {
                (&e.child, &e.input)
            } else {
                (&e.input, &e.child)
            };
            if *from == n && seen.insert(to.clone()) {
                stack.push(to.clone());
            }
        }
    }
    seen
}

/// Runs a valid-only workload until at least `target` batches exist
/// (never more than 50).
pub fn random_chain(seed: u64, target: usize) -> Ledger {
    let mut ledger = Ledger::new();
    let mut work = Workload::new(seed, 0.0);
    for _ in 0..2_000 {
        let count: usize = ledger.state().tokens.values().map(|t| t.batches.len()).sum();
        if count >= target {
            break;
        }
        let tx = work.next(&ledger);
        let before = ledger.clone();
        if ledger.execute(&tx).is_ok() {
            let after: usize = ledger.state().tokens.values().map(|t| t.batches.len()).sum();
            if after > 50 {
                ledger = before;
                break;
            }
        }
    }
    ledger
}
