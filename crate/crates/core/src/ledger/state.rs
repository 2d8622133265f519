//! Event application. This is the only code path that mutates
//! [`LedgerState`], for live transactions and reconstruction alike.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ident::{Address, BatchId};
use crate::provenance::{DeployedContract, EventPayload, LedgerEvent};

use super::types::{
    Batch, CertificateContract, CertificateEntry, CertificateStatus, Lineage, LedgerState,
    LogicalTime, TokenContract,
};

/// An event that cannot be applied to the current state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {index} cannot be applied: {reason}")]
pub struct ApplyError {
    pub index: u64,
    pub reason: String,
}

impl LedgerState {
    /// Rebuilds state from an event sequence alone.
    pub fn from_events<'a>(
        events: impl IntoIterator<Item = &'a LedgerEvent>,
    ) -> Result<Self, ApplyError> {
        let mut state = Self::default();
        for event in events {
            state.apply_event(event)?;
        }
        Ok(state)
    }

    /// Applies one event. Checks structural consistency only; business
    /// rules were enforced when the event was produced.
    pub fn apply_event(&mut self, event: &LedgerEvent) -> Result<(), ApplyError> {
        let fail = |reason: String| ApplyError {
            index: event.index,
            reason,
        };
        if event.index != self.height {
            return Err(fail(format!("expected event index {}", self.height)));
        }
        if event.timestamp < self.last_timestamp {
            return Err(fail("timestamp regression".into()));
        }
        let at = LogicalTime {
            event: event.index,
            seconds: event.timestamp,
        };

        // Each arm validates fully before its first mutation.
        match &event.payload {
            EventPayload::ContractDeployed {
                contract,
                owner,
                deployed,
            } => {
                if self.is_contract(contract) || self.participants.contains(contract) {
                    return Err(fail(format!("address {contract} already in use")));
                }
                if self.is_contract(owner) {
                    return Err(fail(format!("owner {owner} is a contract")));
                }
                match deployed {
                    DeployedContract::Token {
                        name,
                        unit_label,
                        recipe,
                    } => {
                        self.tokens.insert(
                            *contract,
                            TokenContract {
                                address: *contract,
                                owner: *owner,
                                name: name.clone(),
                                unit_label: unit_label.clone(),
                                recipe: recipe.clone(),
                                batches: BTreeMap::new(),
                            },
                        );
                    }
                    DeployedContract::Certificate { name } => {
                        self.certificates.insert(
                            *contract,
                            CertificateContract {
                                address: *contract,
                                certifier: *owner,
                                name: name.clone(),
                                certified: BTreeMap::new(),
                            },
                        );
                    }
                }
                self.participants.insert(*owner);
            }
            EventPayload::CertificateGranted { certificate, token }
            | EventPayload::CertificateRevoked { certificate, token } => {
                if !self.tokens.contains_key(token) {
                    return Err(fail(format!("unknown token contract {token}")));
                }
                let cert = self
                    .certificates
                    .get_mut(certificate)
                    .ok_or_else(|| fail(format!("unknown certificate {certificate}")))?;
                let status = match event.payload {
                    EventPayload::CertificateGranted { .. } => CertificateStatus::Active,
                    _ => CertificateStatus::Revoked,
                };
                cert.certified
                    .entry(*token)
                    .or_default()
                    .push(CertificateEntry { status, at });
            }
            EventPayload::BatchCreated {
                contract,
                batch,
                owner,
                amount,
                inputs,
            } => {
                self.token(contract).map_err(&fail)?;
                let mut debits: BTreeMap<(Address, BatchId), u64> = BTreeMap::new();
                for input in inputs {
                    let slot = debits.entry((input.contract, input.batch)).or_insert(0);
                    *slot = slot
                        .checked_add(input.amount)
                        .ok_or_else(|| fail("input overflow".into()))?;
                }
                for ((c, b), total) in &debits {
                    let existing = self
                        .batch(c, b)
                        .ok_or_else(|| fail(format!("unknown input batch {b}")))?;
                    if existing.amount < *total {
                        return Err(fail(format!("input batch {b} underflow")));
                    }
                }
                if self.tokens[contract].batches.contains_key(batch) {
                    return Err(fail(format!("batch {batch} already exists")));
                }
                for ((c, b), total) in debits {
                    self.batch_mut(&c, &b).amount -= total;
                }
                self.tokens.get_mut(contract).unwrap().batches.insert(
                    *batch,
                    Batch {
                        id: *batch,
                        amount: *amount,
                        owner: *owner,
                        created_at: at,
                        lineage: Lineage::Created {
                            consumed_inputs: inputs.clone(),
                        },
                    },
                );
                self.participants.insert(*owner);
            }
            EventPayload::BatchSplit {
                contract,
                parent,
                owner,
                children,
            } => {
                let token = self.token(contract).map_err(&fail)?;
                let existing = token
                    .batches
                    .get(parent)
                    .ok_or_else(|| fail(format!("unknown batch {parent}")))?;
                let sum = children
                    .iter()
                    .try_fold(0u64, |acc, c| acc.checked_add(c.amount))
                    .ok_or_else(|| fail("split overflow".into()))?;
                if sum != existing.amount {
                    return Err(fail("split does not conserve amount".into()));
                }
                for (i, child) in children.iter().enumerate() {
                    if token.batches.contains_key(&child.batch)
                        || children[..i].iter().any(|c| c.batch == child.batch)
                    {
                        return Err(fail(format!("batch {} already exists", child.batch)));
                    }
                }
                let token = self.tokens.get_mut(contract).unwrap();
                token.batches.get_mut(parent).unwrap().amount = 0;
                for child in children {
                    token.batches.insert(
                        child.batch,
                        Batch {
                            id: child.batch,
                            amount: child.amount,
                            owner: *owner,
                            created_at: at,
                            lineage: Lineage::SplitFrom { parent: *parent },
                        },
                    );
                }
                self.participants.insert(*owner);
            }
            EventPayload::BatchMerged {
                contract,
                batch,
                owner,
                parents,
            } => {
                let token = self.token(contract).map_err(&fail)?;
                let mut total = 0u64;
                for p in parents {
                    let existing = token
                        .batches
                        .get(&p.batch)
                        .ok_or_else(|| fail(format!("unknown batch {}", p.batch)))?;
                    if existing.amount != p.amount {
                        return Err(fail(format!("merge amount mismatch for {}", p.batch)));
                    }
                    total = total
                        .checked_add(p.amount)
                        .ok_or_else(|| fail("merge overflow".into()))?;
                }
                if token.batches.contains_key(batch) {
                    return Err(fail(format!("batch {batch} already exists")));
                }
                let token = self.tokens.get_mut(contract).unwrap();
                for p in parents {
                    token.batches.get_mut(&p.batch).unwrap().amount = 0;
                }
                token.batches.insert(
                    *batch,
                    Batch {
                        id: *batch,
                        amount: total,
                        owner: *owner,
                        created_at: at,
                        lineage: Lineage::MergedFrom {
                            parents: parents.iter().map(|p| p.batch).collect(),
                        },
                    },
                );
                self.participants.insert(*owner);
            }
            EventPayload::BatchTransferred {
                contract,
                batch,
                from,
                to,
            } => {
                let existing = self
                    .batch(contract, batch)
                    .ok_or_else(|| fail(format!("unknown batch {batch}")))?;
                if existing.owner != *from {
                    return Err(fail("transfer from non-owner".into()));
                }
                if self.is_contract(to) {
                    return Err(fail(format!("recipient {to} is a contract")));
                }
                self.batch_mut(contract, batch).owner = *to;
                self.participants.insert(*from);
                self.participants.insert(*to);
            }
            EventPayload::BatchConsumed {
                contract,
                batch,
                owner,
                amount,
            } => {
                let existing = self
                    .batch(contract, batch)
                    .ok_or_else(|| fail(format!("unknown batch {batch}")))?;
                if existing.amount < *amount {
                    return Err(fail("consume underflow".into()));
                }
                self.batch_mut(contract, batch).amount -= amount;
                self.participants.insert(*owner);
            }
        }
        self.height += 1;
        self.last_timestamp = event.timestamp;
        Ok(())
    }

    fn token(&self, contract: &Address) -> Result<&TokenContract, String> {
        self.tokens
            .get(contract)
            .ok_or_else(|| format!("unknown token contract {contract}"))
    }

    fn batch_mut(&mut self, contract: &Address, id: &BatchId) -> &mut Batch {
        self.tokens
            .get_mut(contract)
            .and_then(|t| t.batches.get_mut(id))
            .expect("batch checked before mutation")
    }
}
