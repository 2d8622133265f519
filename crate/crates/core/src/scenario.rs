//! The wood and glue walkthrough: a forester and a glue plant supply a
//! sawmill, which turns certified logs and glue into edge-glued wood.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ident::{Address, BatchId, ConsumedInput};
use crate::ledger::{InputAssignment, LedgerError, Operation, Outcome, Receipt, RecipeInput, Transaction};
use crate::provenance::ProvenanceNode;
use crate::store::{DurableLedger, StoreError};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("the demo needs an empty ledger")]
    NotEmpty,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Fixed participant identities used by the demo.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Participants {
    pub forester: Address,
    pub glue_plant: Address,
    pub sawmill: Address,
    pub certifier: Address,
}

impl Default for Participants {
    fn default() -> Self {
        Self {
            forester: Address::from_label("forester"),
            glue_plant: Address::from_label("glue-plant"),
            sawmill: Address::from_label("sawmill"),
            certifier: Address::from_label("certifier"),
        }
    }
}

impl Participants {
    pub fn named(&self) -> [(&'static str, Address); 4] {
        [
            ("forester", self.forester),
            ("glue-plant", self.glue_plant),
            ("sawmill", self.sawmill),
            ("certifier", self.certifier),
        ]
    }

    pub fn name_of(&self, address: &Address) -> Option<&'static str> {
        self.named()
            .into_iter()
            .find(|(_, a)| a == address)
            .map(|(n, _)| n)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BalanceLine {
    pub participant: String,
    pub product: String,
    pub contract: Address,
    pub balance: u64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DemoSummary {
    pub participants: Participants,
    pub logs: Address,
    pub glue: Address,
    pub certificate: Address,
    pub edge_glued_wood: Address,
    pub product_batch: BatchId,
    pub balances: Vec<BalanceLine>,
    pub provenance: ProvenanceNode,
    pub transactions: u64,
}

impl DemoSummary {
    pub fn balance(&self, participant: &str, product: &str) -> Option<u64> {
        self.balances
            .iter()
            .find(|b| b.participant == participant && b.product == product)
            .map(|b| b.balance)
    }

    fn product_name(&self, contract: &Address) -> &'static str {
        match contract {
            c if *c == self.logs => "Logs",
            c if *c == self.glue => "Glue",
            c if *c == self.edge_glued_wood => "EdgeGluedWood",
            _ => "?",
        }
    }

    fn write_node(&self, f: &mut fmt::Formatter<'_>, node: &ProvenanceNode, drawn: Option<u64>, depth: usize) -> fmt::Result {
        let indent = "  ".repeat(depth);
        write!(
            f,
            "{indent}- {} {} (amount {})",
            self.product_name(&node.contract),
            node.batch_id,
            node.amount
        )?;
        if let Some(d) = drawn {
            write!(f, ", drew {d}")?;
        }
        writeln!(f)?;
        for child in &node.children {
            self.write_node(f, &child.node, Some(child.drawn), depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for DemoSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "balances:")?;
        for line in &self.balances {
            writeln!(f, "  {:<10} {:<14} {}", line.participant, line.product, line.balance)?;
        }
        writeln!(f, "provenance of EdgeGluedWood batch {}:", self.product_batch)?;
        self.write_node(f, &self.provenance, None, 1)
    }
}

struct Runner<'a> {
    ledger: &'a mut DurableLedger,
    clock: u64,
}

impl Runner<'_> {
    fn run(&mut self, caller: Address, op: Operation) -> Result<Receipt, DemoError> {
        let tx = Transaction::new(caller, self.clock, op);
        self.clock += 1;
        Ok(self.ledger.submit(tx)??)
    }

    fn deploy(&mut self, caller: Address, name: &str, unit: &str, recipe: Vec<RecipeInput>) -> Result<Address, DemoError> {
        let op = Operation::DeployToken {
            name: name.into(),
            unit_label: unit.into(),
            recipe,
        };
        match self.run(caller, op)?.outcome {
            Outcome::Deployed { address } => Ok(address),
            other => unreachable!("{other:?}"),
        }
    }

    fn add_batch(&mut self, caller: Address, contract: Address, amount: u64, assignments: Vec<InputAssignment>) -> Result<BatchId, DemoError> {
        let op = Operation::AddBatch {
            contract,
            amount,
            assignments,
        };
        match self.run(caller, op)?.outcome {
            Outcome::BatchCreated { batch_id } => Ok(batch_id),
            other => unreachable!("{other:?}"),
        }
    }
}

/// Runs the six-step scenario on an empty ledger, one transaction per
/// second starting at `start_time`.
pub fn run_demo(ledger: &mut DurableLedger, start_time: u64) -> Result<DemoSummary, DemoError> {
    if !ledger.ledger().is_empty() || ledger.journal().next_index() != 0 {
        return Err(DemoError::NotEmpty);
    }
    let who = Participants::default();
    let mut r = Runner {
        ledger,
        clock: start_time,
    };

    // 1. resource contracts
    let logs = r.deploy(who.forester, "Logs", "logs", vec![])?;
    let glue = r.deploy(who.glue_plant, "Glue", "litres", vec![])?;

    // 2. the certifier approves the forester's logs
    let certificate = match r
        .run(who.certifier, Operation::DeployCertificate { name: "FSC-Quality".into() })?
        .outcome
    {
        Outcome::Deployed { address } => address,
        other => unreachable!("{other:?}"),
    };
    r.run(who.certifier, Operation::Certify { certificate, token: logs })?;

    // 3. certified logs plus this particular glue
    let edge_glued_wood = r.deploy(
        who.sawmill,
        "EdgeGluedWood",
        "units",
        vec![RecipeInput::certified(certificate, 1), RecipeInput::specific(glue, 1)],
    )?;

    // 4. resource batches: one shipment-sized batch each, plus stock kept
    let shipped_logs = r.add_batch(who.forester, logs, 10, vec![])?;
    r.add_batch(who.forester, logs, 20, vec![])?;
    let shipped_glue = r.add_batch(who.glue_plant, glue, 1, vec![])?;
    r.add_batch(who.glue_plant, glue, 59, vec![])?;

    // 5. ship ten logs and one unit of glue to the sawmill
    r.run(who.forester, Operation::TransferBatch { contract: logs, batch: shipped_logs, to: who.sawmill })?;
    r.run(who.glue_plant, Operation::TransferBatch { contract: glue, batch: shipped_glue, to: who.sawmill })?;

    // 6. one unit of edge-glued wood
    let product_batch = r.add_batch(
        who.sawmill,
        edge_glued_wood,
        1,
        vec![
            InputAssignment::new(0, vec![ConsumedInput::new(logs, shipped_logs, 1)]),
            InputAssignment::new(1, vec![ConsumedInput::new(glue, shipped_glue, 1)]),
        ],
    )?;

    let ledger = r.ledger.ledger();
    let mut balances = Vec::new();
    for (participant, product, contract) in [
        ("forester", "Logs", logs),
        ("glue-plant", "Glue", glue),
        ("sawmill", "Logs", logs),
        ("sawmill", "Glue", glue),
        ("sawmill", "EdgeGluedWood", edge_glued_wood),
    ] {
        let owner = who
            .named()
            .into_iter()
            .find(|(n, _)| *n == participant)
            .map(|(_, a)| a)
            .expect("known participant");
        balances.push(BalanceLine {
            participant: participant.into(),
            product: product.into(),
            contract,
            balance: ledger.balance_of(&owner, &contract)?,
        });
    }
    let provenance = ledger
        .events()
        .trace_provenance(edge_glued_wood, product_batch)
        .expect("product batch exists");

    Ok(DemoSummary {
        participants: who,
        logs,
        glue,
        certificate,
        edge_glued_wood,
        product_batch,
        balances,
        provenance,
        transactions: r.ledger.journal().next_index(),
    })
}
