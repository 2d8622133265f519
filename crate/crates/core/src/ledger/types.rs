use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ident::{Address, BatchId, ConsumedInput};

/// Where a recipe ingredient may come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RecipeSource {
    /// Batches of exactly this token contract.
    SpecificToken(Address),
    /// Batches of any token contract currently certified by this
    /// certificate contract.
    CertifiedBy(Address),
}

impl RecipeSource {
    pub fn address(&self) -> Address {
        match self {
            RecipeSource::SpecificToken(a) | RecipeSource::CertifiedBy(a) => *a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecipeInput {
    pub source: RecipeSource,
    /// Units of the ingredient per unit of product.
    pub amount_per_unit: u64,
}

impl RecipeInput {
    pub fn specific(token: Address, amount_per_unit: u64) -> Self {
        Self {
            source: RecipeSource::SpecificToken(token),
            amount_per_unit,
        }
    }

    pub fn certified(certificate: Address, amount_per_unit: u64) -> Self {
        Self {
            source: RecipeSource::CertifiedBy(certificate),
            amount_per_unit,
        }
    }
}

/// The batches drawn to satisfy one recipe entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputAssignment {
    pub recipe_index: usize,
    pub draws: Vec<ConsumedInput>,
}

impl InputAssignment {
    pub fn new(recipe_index: usize, draws: Vec<ConsumedInput>) -> Self {
        Self {
            recipe_index,
            draws,
        }
    }
}

/// Event ordinal plus the wall-clock seconds supplied with the transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogicalTime {
    pub event: u64,
    pub seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Lineage {
    Created { consumed_inputs: Vec<ConsumedInput> },
    SplitFrom { parent: BatchId },
    MergedFrom { parents: Vec<BatchId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Batch {
    pub id: BatchId,
    pub amount: u64,
    pub owner: Address,
    pub created_at: LogicalTime,
    pub lineage: Lineage,
}

impl Batch {
    pub fn is_depleted(&self) -> bool {
        self.amount == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TokenContract {
    pub address: Address,
    pub owner: Address,
    pub name: String,
    pub unit_label: String,
    pub recipe: Vec<RecipeInput>,
    pub batches: BTreeMap<BatchId, Batch>,
}

impl TokenContract {
    pub fn is_resource(&self) -> bool {
        self.recipe.is_empty()
    }

    pub fn balance_of(&self, owner: &Address) -> u64 {
        self.batches
            .values()
            .filter(|b| b.owner == *owner && !b.is_depleted())
            .map(|b| b.amount)
            .sum()
    }

    pub fn live_supply(&self) -> u64 {
        self.batches.values().map(|b| b.amount).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub status: CertificateStatus,
    pub at: LogicalTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateContract {
    pub address: Address,
    pub certifier: Address,
    pub name: String,
    /// Grant/revoke history per token contract; the last entry is current.
    pub certified: BTreeMap<Address, Vec<CertificateEntry>>,
}

impl CertificateContract {
    pub fn status(&self, token: &Address) -> Option<CertificateStatus> {
        self.certified
            .get(token)
            .and_then(|history| history.last())
            .map(|entry| entry.status)
    }

    pub fn is_active(&self, token: &Address) -> bool {
        self.status(token) == Some(CertificateStatus::Active)
    }
}

/// Complete ledger state. Everything here is reconstructible from events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerState {
    pub tokens: BTreeMap<Address, TokenContract>,
    pub certificates: BTreeMap<Address, CertificateContract>,
    /// Addresses that acted as caller or received a batch.
    pub participants: BTreeSet<Address>,
    /// Number of accepted transactions (= number of events).
    pub height: u64,
    pub last_timestamp: u64,
}

impl LedgerState {
    pub fn is_contract(&self, address: &Address) -> bool {
        self.tokens.contains_key(address) || self.certificates.contains_key(address)
    }

    pub fn contract_count(&self) -> u64 {
        (self.tokens.len() + self.certificates.len()) as u64
    }

    pub fn batch(&self, contract: &Address, id: &BatchId) -> Option<&Batch> {
        self.tokens.get(contract).and_then(|t| t.batches.get(id))
    }

    pub fn is_empty(&self) -> bool {
        self.height == 0
    }
}
