//! Ledger events. Exactly one event is appended per accepted transaction.

use serde::{Deserialize, Serialize};

use crate::ident::{keccak256, pack_slot, Address, BatchId, ConsumedInput, Word32};
use crate::ledger::RecipeInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    ContractDeployed,
    CertificateGranted,
    CertificateRevoked,
    BatchCreated,
    BatchSplit,
    BatchMerged,
    BatchTransferred,
    BatchConsumed,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::ContractDeployed,
        EventKind::CertificateGranted,
        EventKind::CertificateRevoked,
        EventKind::BatchCreated,
        EventKind::BatchSplit,
        EventKind::BatchMerged,
        EventKind::BatchTransferred,
        EventKind::BatchConsumed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::ContractDeployed => "ContractDeployed",
            EventKind::CertificateGranted => "CertificateGranted",
            EventKind::CertificateRevoked => "CertificateRevoked",
            EventKind::BatchCreated => "BatchCreated",
            EventKind::BatchSplit => "BatchSplit",
            EventKind::BatchMerged => "BatchMerged",
            EventKind::BatchTransferred => "BatchTransferred",
            EventKind::BatchConsumed => "BatchConsumed",
        }
    }

    /// Topic 0: hash of the event name.
    pub fn signature(self) -> Word32 {
        Word32::new(keccak256(self.name().as_bytes()))
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum DeployedContract {
    Token {
        name: String,
        unit_label: String,
        recipe: Vec<RecipeInput>,
    },
    Certificate {
        name: String,
    },
}

/// One (batch, amount) pair in split and merge payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPart {
    pub batch: BatchId,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all_fields = "camelCase")]
pub enum EventPayload {
    ContractDeployed {
        contract: Address,
        owner: Address,
        deployed: DeployedContract,
    },
    CertificateGranted {
        certificate: Address,
        token: Address,
    },
    CertificateRevoked {
        certificate: Address,
        token: Address,
    },
    BatchCreated {
        contract: Address,
        batch: BatchId,
        owner: Address,
        amount: u64,
        inputs: Vec<ConsumedInput>,
    },
    BatchSplit {
        contract: Address,
        parent: BatchId,
        owner: Address,
        children: Vec<BatchPart>,
    },
    BatchMerged {
        contract: Address,
        batch: BatchId,
        owner: Address,
        parents: Vec<BatchPart>,
    },
    BatchTransferred {
        contract: Address,
        batch: BatchId,
        from: Address,
        to: Address,
    },
    BatchConsumed {
        contract: Address,
        batch: BatchId,
        owner: Address,
        amount: u64,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::ContractDeployed { .. } => EventKind::ContractDeployed,
            EventPayload::CertificateGranted { .. } => EventKind::CertificateGranted,
            EventPayload::CertificateRevoked { .. } => EventKind::CertificateRevoked,
            EventPayload::BatchCreated { .. } => EventKind::BatchCreated,
            EventPayload::BatchSplit { .. } => EventKind::BatchSplit,
            EventPayload::BatchMerged { .. } => EventKind::BatchMerged,
            EventPayload::BatchTransferred { .. } => EventKind::BatchTransferred,
            EventPayload::BatchConsumed { .. } => EventKind::BatchConsumed,
        }
    }

    /// Filterable topics: `[signature, emitting contract, subject, recipient?]`.
    ///
    /// The subject is the packed batch slot for batch events, the owner for
    /// deployments and the token contract for certificate changes.
    pub fn topics(&self) -> Vec<Word32> {
        let sig = self.kind().signature();
        match self {
            EventPayload::ContractDeployed {
                contract, owner, ..
            } => vec![sig, contract.to_word(), owner.to_word()],
            EventPayload::CertificateGranted { certificate, token }
            | EventPayload::CertificateRevoked { certificate, token } => {
                vec![sig, certificate.to_word(), token.to_word()]
            }
            EventPayload::BatchCreated {
                contract, batch, ..
            }
            | EventPayload::BatchMerged {
                contract, batch, ..
            }
            | EventPayload::BatchConsumed {
                contract, batch, ..
            } => vec![sig, contract.to_word(), pack_slot(contract, batch)],
            EventPayload::BatchSplit {
                contract, parent, ..
            } => vec![sig, contract.to_word(), pack_slot(contract, parent)],
            EventPayload::BatchTransferred {
                contract,
                batch,
                to,
                ..
            } => vec![
                sig,
                contract.to_word(),
                pack_slot(contract, batch),
                to.to_word(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub index: u64,
    pub timestamp: u64,
    pub topics: Vec<Word32>,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl LedgerEvent {
    pub fn new(index: u64, timestamp: u64, payload: EventPayload) -> Self {
        Self {
            index,
            timestamp,
            topics: payload.topics(),
            payload,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

/// Topic positions a filter can constrain (position 0 is the kind).
pub const TOPIC_CONTRACT: usize = 1;
pub const TOPIC_SUBJECT: usize = 2;
pub const TOPIC_RECIPIENT: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub kind: Option<EventKind>,
    /// Positional constraints for topics 1..=3.
    pub topics: [Option<Word32>; 3],
    pub from_index: Option<u64>,
    /// Inclusive upper bound.
    pub to_index: Option<u64>,
}

impl EventFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn kind(mut self, kind: EventKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn topic(mut self, position: usize, value: Word32) -> Self {
        assert!((1..=3).contains(&position), "topic position out of range");
        self.topics[position - 1] = Some(value);
        self
    }

    pub fn contract(self, contract: Address) -> Self {
        self.topic(TOPIC_CONTRACT, contract.to_word())
    }

    pub fn batch(self, contract: Address, batch: BatchId) -> Self {
        self.contract(contract)
            .topic(TOPIC_SUBJECT, pack_slot(&contract, &batch))
    }

    pub fn recipient(self, to: Address) -> Self {
        self.topic(TOPIC_RECIPIENT, to.to_word())
    }

    pub fn range(mut self, from: Option<u64>, to: Option<u64>) -> Self {
        self.from_index = from;
        self.to_index = to;
        self
    }

    /// Predicate form of the filter, used by linear scans.
    pub fn matches(&self, event: &LedgerEvent) -> bool {
        if let Some(kind) = self.kind {
            if event.kind() != kind {
                return false;
            }
        }
        if self.from_index.is_some_and(|from| event.index < from) {
            return false;
        }
        if self.to_index.is_some_and(|to| event.index > to) {
            return false;
        }
        self.topics.iter().enumerate().all(|(i, want)| match want {
            None => true,
            Some(w) => event.topics.get(i + 1) == Some(w),
        })
    }
}
