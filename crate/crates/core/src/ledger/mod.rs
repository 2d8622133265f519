//! The transactional state machine.
//!
//! Every transaction is validated against the current state without side
//! effects, turned into exactly one [`LedgerEvent`], and then applied. A
//! rejected transaction therefore never touches the state or the event log.

mod error;
mod state;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gas::{self, BatchMode, CostTable, GasReceipt, StorageStrategy};
use crate::ident::{derive_batch_id, keccak256, Address, BatchId, ConsumedInput};
use crate::provenance::{
    BatchPart, DeployedContract, EventLog, EventPayload, LedgerEvent,
};

pub use error::LedgerError;
pub use state::ApplyError;
pub use types::{
    Batch, CertificateContract, CertificateEntry, CertificateStatus, InputAssignment,
    LedgerState, Lineage, LogicalTime, RecipeInput, RecipeSource, TokenContract,
};

/// A state-changing request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "op",
    content = "params",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum Operation {
    DeployToken {
        name: String,
        unit_label: String,
        recipe: Vec<RecipeInput>,
    },
    DeployCertificate {
        name: String,
    },
    Certify {
        certificate: Address,
        token: Address,
    },
    Revoke {
        certificate: Address,
        token: Address,
    },
    AddBatch {
        contract: Address,
        amount: u64,
        assignments: Vec<InputAssignment>,
    },
    SplitBatch {
        contract: Address,
        batch: BatchId,
        parts: Vec<u64>,
    },
    MergeBatch {
        contract: Address,
        batches: Vec<BatchId>,
    },
    TransferBatch {
        contract: Address,
        batch: BatchId,
        to: Address,
    },
    ConsumeBatch {
        contract: Address,
        batch: BatchId,
        amount: u64,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::DeployToken { .. } => "deploy_token",
            Operation::DeployCertificate { .. } => "deploy_certificate",
            Operation::Certify { .. } => "certify",
            Operation::Revoke { .. } => "revoke",
            Operation::AddBatch { .. } => "add_batch",
            Operation::SplitBatch { .. } => "split_batch",
            Operation::MergeBatch { .. } => "merge_batch",
            Operation::TransferBatch { .. } => "transfer_batch",
            Operation::ConsumeBatch { .. } => "consume_batch",
        }
    }
}

/// An operation plus the declared caller and the gateway-supplied time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub caller: Address,
    pub timestamp: u64,
    #[serde(flatten)]
    pub op: Operation,
}

impl Transaction {
    pub fn new(caller: Address, timestamp: u64, op: Operation) -> Self {
        Self {
            caller,
            timestamp,
            op,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Outcome {
    Deployed { address: Address },
    Certified,
    Revoked,
    BatchCreated { batch_id: BatchId },
    Split { batch_ids: Vec<BatchId> },
    Merged { batch_id: BatchId },
    Transferred,
    Consumed,
}

impl Outcome {
    /// Identifiers created by the transaction, as hex strings.
    pub fn ids(&self) -> Vec<String> {
        match self {
            Outcome::Deployed { address } => vec![address.to_hex()],
            Outcome::BatchCreated { batch_id } | Outcome::Merged { batch_id } => {
                vec![batch_id.to_hex()]
            }
            Outcome::Split { batch_ids } => batch_ids.iter().map(BatchId::to_hex).collect(),
            Outcome::Certified | Outcome::Revoked | Outcome::Transferred | Outcome::Consumed => {
                Vec::new()
            }
        }
    }
}

/// Result of an accepted transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Receipt {
    pub outcome: Outcome,
    pub event_index: u64,
    pub gas: Option<GasReceipt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerConfig {
    /// Amount width assumed when pricing recipe storage.
    pub strategy: StorageStrategy,
    pub batch_mode: BatchMode,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            strategy: StorageStrategy::Uint256,
            batch_mode: BatchMode::EmitEvents,
        }
    }
}

struct Plan {
    payload: EventPayload,
    outcome: Outcome,
    gas: Option<GasReceipt>,
}

/// Ledger state plus its event log.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    state: LedgerState,
    log: EventLog,
    costs: CostTable,
    config: LedgerConfig,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_costs(costs: CostTable, config: LedgerConfig) -> Self {
        Self {
            costs,
            config,
            ..Self::default()
        }
    }

    /// Reconstructs a ledger from its event log alone.
    pub fn from_events(events: Vec<LedgerEvent>) -> Result<Self, ApplyError> {
        let state = LedgerState::from_events(&events)?;
        let log = EventLog::from_events(events).map_err(|e| ApplyError {
            index: 0,
            reason: e.to_string(),
        })?;
        Ok(Self {
            state,
            log,
            ..Self::default()
        })
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn events(&self) -> &EventLog {
        &self.log
    }

    pub fn costs(&self) -> &CostTable {
        &self.costs
    }

    pub fn config(&self) -> LedgerConfig {
        self.config
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Validates a transaction without applying it.
    pub fn check(&self, tx: &Transaction) -> Result<(), LedgerError> {
        self.plan(tx).map(|_| ())
    }

    /// Validates and applies one transaction atomically.
    pub fn execute(&mut self, tx: &Transaction) -> Result<Receipt, LedgerError> {
        let plan = self.plan(tx)?;
        let event = LedgerEvent::new(self.state.height, tx.timestamp, plan.payload);
        self.state
            .apply_event(&event)
            .expect("validated transaction must apply");
        let event_index = self
            .log
            .append_event(event)
            .expect("event log tracks state height");
        Ok(Receipt {
            outcome: plan.outcome,
            event_index,
            gas: plan.gas,
        })
    }

    pub fn deploy_token_contract(
        &mut self,
        caller: Address,
        timestamp: u64,
        name: &str,
        unit_label: &str,
        recipe: Vec<RecipeInput>,
    ) -> Result<Address, LedgerError> {
        let op = Operation::DeployToken {
            name: name.into(),
            unit_label: unit_label.into(),
            recipe,
        };
        match self.execute(&Transaction::new(caller, timestamp, op))?.outcome {
            Outcome::Deployed { address } => Ok(address),
            other => unreachable!("deploy produced {other:?}"),
        }
    }

    pub fn deploy_certificate_contract(
        &mut self,
        caller: Address,
        timestamp: u64,
        name: &str,
    ) -> Result<Address, LedgerError> {
        let op = Operation::DeployCertificate { name: name.into() };
        match self.execute(&Transaction::new(caller, timestamp, op))?.outcome {
            Outcome::Deployed { address } => Ok(address),
            other => unreachable!("deploy produced {other:?}"),
        }
    }

    pub fn certify(
        &mut self,
        caller: Address,
        timestamp: u64,
        certificate: Address,
        token: Address,
    ) -> Result<(), LedgerError> {
        let op = Operation::Certify { certificate, token };
        self.execute(&Transaction::new(caller, timestamp, op))
            .map(|_| ())
    }

    pub fn revoke(
        &mut self,
        caller: Address,
        timestamp: u64,
        certificate: Address,
        token: Address,
    ) -> Result<(), LedgerError> {
        let op = Operation::Revoke { certificate, token };
        self.execute(&Transaction::new(caller, timestamp, op))
            .map(|_| ())
    }

    pub fn add_batch(
        &mut self,
        caller: Address,
        timestamp: u64,
        contract: Address,
        amount: u64,
        assignments: Vec<InputAssignment>,
    ) -> Result<BatchId, LedgerError> {
        let op = Operation::AddBatch {
            contract,
            amount,
            assignments,
        };
        match self.execute(&Transaction::new(caller, timestamp, op))?.outcome {
            Outcome::BatchCreated { batch_id } => Ok(batch_id),
            other => unreachable!("add_batch produced {other:?}"),
        }
    }

    pub fn split_batch(
        &mut self,
        caller: Address,
        timestamp: u64,
        contract: Address,
        batch: BatchId,
        parts: Vec<u64>,
    ) -> Result<Vec<BatchId>, LedgerError> {
        let op = Operation::SplitBatch {
            contract,
            batch,
            parts,
        };
        match self.execute(&Transaction::new(caller, timestamp, op))?.outcome {
            Outcome::Split { batch_ids } => Ok(batch_ids),
            other => unreachable!("split produced {other:?}"),
        }
    }

    pub fn merge_batch(
        &mut self,
        caller: Address,
        timestamp: u64,
        contract: Address,
        batches: Vec<BatchId>,
    ) -> Result<BatchId, LedgerError> {
        let op = Operation::MergeBatch { contract, batches };
        match self.execute(&Transaction::new(caller, timestamp, op))?.outcome {
            Outcome::Merged { batch_id } => Ok(batch_id),
            other => unreachable!("merge produced {other:?}"),
        }
    }

    pub fn transfer_batch(
        &mut self,
        caller: Address,
        timestamp: u64,
        contract: Address,
        batch: BatchId,
        to: Address,
    ) -> Result<(), LedgerError> {
        let op = Operation::TransferBatch {
            contract,
            batch,
            to,
        };
        self.execute(&Transaction::new(caller, timestamp, op))
            .map(|_| ())
    }

    pub fn consume_batch(
        &mut self,
        caller: Address,
        timestamp: u64,
        contract: Address,
        batch: BatchId,
        amount: u64,
    ) -> Result<(), LedgerError> {
        let op = Operation::ConsumeBatch {
            contract,
            batch,
            amount,
        };
        self.execute(&Transaction::new(caller, timestamp, op))
            .map(|_| ())
    }

    /// Sum of live batches of `contract` owned by `owner`.
    pub fn balance_of(&self, owner: &Address, contract: &Address) -> Result<u64, LedgerError> {
        self.state
            .tokens
            .get(contract)
            .map(|t| t.balance_of(owner))
            .ok_or(LedgerError::UnknownContract(*contract))
    }

    /// Balance of `owner` in every deployed token contract.
    pub fn balances(&self, owner: &Address) -> BTreeMap<Address, u64> {
        self.state
            .tokens
            .iter()
            .map(|(addr, t)| (*addr, t.balance_of(owner)))
            .collect()
    }

    /// Address of the next deployment by `deployer`: the low 20 bytes of
    /// `keccak256(deployer ‖ nonce)`, where the nonce counts all contracts.
    pub fn next_contract_address(&self, deployer: &Address) -> Address {
        let mut preimage = Vec::with_capacity(28);
        preimage.extend_from_slice(deployer.as_bytes());
        preimage.extend_from_slice(&self.state.contract_count().to_be_bytes());
        let digest = keccak256(&preimage);
        Address::try_from(&digest[12..]).expect("20 bytes")
    }

    fn plan(&self, tx: &Transaction) -> Result<Plan, LedgerError> {
        let state = &self.state;
        if tx.timestamp < state.last_timestamp {
            return Err(LedgerError::TimestampRegression {
                last: state.last_timestamp,
                got: tx.timestamp,
            });
        }
        if state.is_contract(&tx.caller) {
            return Err(LedgerError::InvalidParticipant(tx.caller));
        }
        let caller = tx.caller;
        match &tx.op {
            Operation::DeployToken {
                name,
                unit_label,
                recipe,
            } => {
                for input in recipe {
                    if input.amount_per_unit == 0 {
                        return Err(LedgerError::BadAmount);
                    }
                    let known = match input.source {
                        RecipeSource::SpecificToken(a) => state.tokens.contains_key(&a),
                        RecipeSource::CertifiedBy(a) => state.certificates.contains_key(&a),
                    };
                    if !known {
                        return Err(LedgerError::UnknownSource(input.source.address()));
                    }
                }
                let address = self.fresh_contract_address(&caller)?;
                Ok(Plan {
                    payload: EventPayload::ContractDeployed {
                        contract: address,
                        owner: caller,
                        deployed: DeployedContract::Token {
                            name: name.clone(),
                            unit_label: unit_label.clone(),
                            recipe: recipe.clone(),
                        },
                    },
                    outcome: Outcome::Deployed { address },
                    gas: Some(gas::gas_deploy(
                        &self.costs,
                        recipe.len() as u64,
                        self.config.strategy,
                    )),
                })
            }
            Operation::DeployCertificate { name } => {
                let address = self.fresh_contract_address(&caller)?;
                Ok(Plan {
                    payload: EventPayload::ContractDeployed {
                        contract: address,
                        owner: caller,
                        deployed: DeployedContract::Certificate { name: name.clone() },
                    },
                    outcome: Outcome::Deployed { address },
                    gas: Some(gas::gas_deploy(&self.costs, 0, self.config.strategy)),
                })
            }
            Operation::Certify { certificate, token } => {
                let cert = self.certificate_for(&caller, certificate)?;
                if !state.tokens.contains_key(token) {
                    return Err(LedgerError::UnknownContract(*token));
                }
                if cert.is_active(token) {
                    return Err(LedgerError::AlreadyCertified(*token));
                }
                Ok(Plan {
                    payload: EventPayload::CertificateGranted {
                        certificate: *certificate,
                        token: *token,
                    },
                    outcome: Outcome::Certified,
                    gas: None,
                })
            }
            Operation::Revoke { certificate, token } => {
                let cert = self.certificate_for(&caller, certificate)?;
                if !cert.is_active(token) {
                    return Err(LedgerError::NotCertified(*token));
                }
                Ok(Plan {
                    payload: EventPayload::CertificateRevoked {
                        certificate: *certificate,
                        token: *token,
                    },
                    outcome: Outcome::Revoked,
                    gas: None,
                })
            }
            Operation::AddBatch {
                contract,
                amount,
                assignments,
            } => self.plan_add_batch(tx, contract, *amount, assignments),
            Operation::SplitBatch {
                contract,
                batch,
                parts,
            } => {
                let token = self.token(contract)?;
                let parent = owned_live_batch(token, &caller, batch)?;
                if parts.len() < 2 || parts.contains(&0) {
                    return Err(LedgerError::BadPartition);
                }
                let sum = checked_sum(parts.iter().copied()).ok_or(LedgerError::BadPartition)?;
                if sum != parent.amount {
                    return Err(LedgerError::BadPartition);
                }
                // Child k is keyed by the cumulative end offset of its part,
                // which is strictly increasing and so never repeats.
                let mut end = 0u64;
                let mut children = Vec::with_capacity(parts.len());
                for &part in parts {
                    end += part;
                    let id = derive_batch_id(
                        &[ConsumedInput::new(*contract, *batch, end)],
                        &caller,
                        tx.timestamp,
                    );
                    if token.batches.contains_key(&id) || children.iter().any(|c: &BatchPart| c.batch == id) {
                        return Err(LedgerError::IdCollision(id));
                    }
                    children.push(BatchPart {
                        batch: id,
                        amount: part,
                    });
                }
                Ok(Plan {
                    outcome: Outcome::Split {
                        batch_ids: children.iter().map(|c| c.batch).collect(),
                    },
                    payload: EventPayload::BatchSplit {
                        contract: *contract,
                        parent: *batch,
                        owner: caller,
                        children,
                    },
                    gas: None,
                })
            }
            Operation::MergeBatch { contract, batches } => {
                let token = self.token(contract)?;
                if batches.len() < 2 {
                    return Err(LedgerError::BadMerge("at least two batches required"));
                }
                let distinct: BTreeSet<_> = batches.iter().collect();
                if distinct.len() != batches.len() {
                    return Err(LedgerError::BadMerge("duplicate batch ids"));
                }
                let mut parents = Vec::with_capacity(batches.len());
                for id in batches {
                    let b = owned_batch(token, &caller, id)?;
                    if b.is_depleted() {
                        return Err(LedgerError::BadMerge("depleted input batch"));
                    }
                    parents.push(BatchPart {
                        batch: *id,
                        amount: b.amount,
                    });
                }
                checked_sum(parents.iter().map(|p| p.amount)).ok_or(LedgerError::Overflow)?;
                let inputs: Vec<_> = parents
                    .iter()
                    .map(|p| ConsumedInput::new(*contract, p.batch, p.amount))
                    .collect();
                let id = derive_batch_id(&inputs, &caller, tx.timestamp);
                if token.batches.contains_key(&id) {
                    return Err(LedgerError::IdCollision(id));
                }
                Ok(Plan {
                    payload: EventPayload::BatchMerged {
                        contract: *contract,
                        batch: id,
                        owner: caller,
                        parents,
                    },
                    outcome: Outcome::Merged { batch_id: id },
                    gas: None,
                })
            }
            Operation::TransferBatch {
                contract,
                batch,
                to,
            } => {
                let token = self.token(contract)?;
                owned_live_batch(token, &caller, batch)?;
                if state.is_contract(to) {
                    return Err(LedgerError::InvalidParticipant(*to));
                }
                Ok(Plan {
                    payload: EventPayload::BatchTransferred {
                        contract: *contract,
                        batch: *batch,
                        from: caller,
                        to: *to,
                    },
                    outcome: Outcome::Transferred,
                    gas: None,
                })
            }
            Operation::ConsumeBatch {
                contract,
                batch,
                amount,
            } => {
                let token = self.token(contract)?;
                let b = owned_live_batch(token, &caller, batch)?;
                if *amount == 0 {
                    return Err(LedgerError::BadAmount);
                }
                if *amount > b.amount {
                    return Err(LedgerError::InsufficientBalance {
                        batch: *batch,
                        available: b.amount,
                        requested: *amount,
                    });
                }
                Ok(Plan {
                    payload: EventPayload::BatchConsumed {
                        contract: *contract,
                        batch: *batch,
                        owner: caller,
                        amount: *amount,
                    },
                    outcome: Outcome::Consumed,
                    gas: None,
                })
            }
        }
    }

    fn plan_add_batch(
        &self,
        tx: &Transaction,
        contract: &Address,
        amount: u64,
        assignments: &[InputAssignment],
    ) -> Result<Plan, LedgerError> {
        let caller = tx.caller;
        let token = self.token(contract)?;
        if token.owner != caller {
            return Err(LedgerError::NotOwner(caller));
        }
        if amount == 0 {
            return Err(LedgerError::BadAmount);
        }
        let arity = || LedgerError::ArityMismatch {
            expected: token.recipe.len(),
            actual: assignments.len(),
        };
        if assignments.len() != token.recipe.len() {
            return Err(arity());
        }
        let mut ordered: Vec<Option<&InputAssignment>> = vec![None; token.recipe.len()];
        for a in assignments {
            match ordered.get_mut(a.recipe_index) {
                Some(slot @ None) => *slot = Some(a),
                _ => return Err(arity()),
            }
        }

        let mut consumed = Vec::new();
        let mut cert_checks = 0u64;
        let mut debits: BTreeMap<(Address, BatchId), u64> = BTreeMap::new();
        for (index, (entry, assignment)) in token.recipe.iter().zip(ordered).enumerate() {
            let assignment = assignment.expect("every recipe index assigned");
            let required = amount
                .checked_mul(entry.amount_per_unit)
                .ok_or(LedgerError::Overflow)?;
            if assignment.draws.iter().any(|d| d.amount == 0) {
                return Err(LedgerError::BadAmount);
            }
            let drawn = checked_sum(assignment.draws.iter().map(|d| d.amount))
                .ok_or(LedgerError::Overflow)?;
            if drawn != required {
                return Err(LedgerError::QuantityMismatch {
                    recipe_index: index,
                    required,
                    drawn,
                });
            }
            for draw in &assignment.draws {
                match entry.source {
                    RecipeSource::SpecificToken(expected) => {
                        if draw.contract != expected {
                            return Err(LedgerError::SourceMismatch {
                                expected,
                                actual: draw.contract,
                            });
                        }
                    }
                    RecipeSource::CertifiedBy(certificate) => {
                        cert_checks += 1;
                        let active = self
                            .state
                            .certificates
                            .get(&certificate)
                            .is_some_and(|c| c.is_active(&draw.contract));
                        if !active {
                            return Err(LedgerError::NotCertified(draw.contract));
                        }
                    }
                }
                let source = self.token(&draw.contract)?;
                owned_batch(source, &caller, &draw.batch)?;
                let total = debits.entry((draw.contract, draw.batch)).or_insert(0);
                *total = total.checked_add(draw.amount).ok_or(LedgerError::Overflow)?;
                consumed.push(*draw);
            }
        }
        for ((c, b), total) in &debits {
            let available = self.state.batch(c, b).map_or(0, |b| b.amount);
            if available < *total {
                return Err(LedgerError::InsufficientBalance {
                    batch: *b,
                    available,
                    requested: *total,
                });
            }
        }

        let id = derive_batch_id(&consumed, &caller, tx.timestamp);
        if token.batches.contains_key(&id) {
            return Err(LedgerError::IdCollision(id));
        }
        let gas = gas::gas_add_batch(
            &self.costs,
            consumed.len() as u64,
            self.config.batch_mode,
            cert_checks,
        )
        .expect("cert checks bounded by inputs");
        Ok(Plan {
            payload: EventPayload::BatchCreated {
                contract: *contract,
                batch: id,
                owner: caller,
                amount,
                inputs: consumed,
            },
            outcome: Outcome::BatchCreated { batch_id: id },
            gas: Some(gas),
        })
    }

    fn token(&self, contract: &Address) -> Result<&TokenContract, LedgerError> {
        self.state
            .tokens
            .get(contract)
            .ok_or(LedgerError::UnknownContract(*contract))
    }

    fn certificate_for(
        &self,
        caller: &Address,
        certificate: &Address,
    ) -> Result<&CertificateContract, LedgerError> {
        let cert = self
            .state
            .certificates
            .get(certificate)
            .ok_or(LedgerError::UnknownContract(*certificate))?;
        if cert.certifier != *caller {
            return Err(LedgerError::NotCertifier(*caller));
        }
        Ok(cert)
    }

    fn fresh_contract_address(&self, deployer: &Address) -> Result<Address, LedgerError> {
        let address = self.next_contract_address(deployer);
        if self.state.is_contract(&address) || self.state.participants.contains(&address) {
            return Err(LedgerError::AddressCollision(address));
        }
        Ok(address)
    }
}

fn checked_sum(values: impl IntoIterator<Item = u64>) -> Option<u64> {
    values.into_iter().try_fold(0u64, u64::checked_add)
}

fn owned_batch<'a>(
    token: &'a TokenContract,
    caller: &Address,
    id: &BatchId,
) -> Result<&'a Batch, LedgerError> {
    let batch = token.batches.get(id).ok_or(LedgerError::UnknownBatch {
        contract: token.address,
        batch: *id,
    })?;
    if batch.owner != *caller {
        return Err(LedgerError::NotBatchOwner {
            caller: *caller,
            batch: *id,
        });
    }
    Ok(batch)
}

fn owned_live_batch<'a>(
    token: &'a TokenContract,
    caller: &Address,
    id: &BatchId,
) -> Result<&'a Batch, LedgerError> {
    let batch = owned_batch(token, caller, id)?;
    if batch.is_depleted() {
        return Err(LedgerError::Depleted(*id));
    }
    Ok(batch)
}
