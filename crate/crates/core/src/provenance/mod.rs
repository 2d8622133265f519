//! Append-only event log with trace (upstream) and track (downstream)
//! queries. The production graph is rebuilt from events alone.

mod event;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ident::{Address, BatchId, Word32};

pub use event::{
    BatchPart, DeployedContract, EventFilter, EventKind, EventPayload, LedgerEvent,
    TOPIC_CONTRACT, TOPIC_RECIPIENT, TOPIC_SUBJECT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("event index {got} out of order, expected {expected}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("batch {batch} not found in contract {contract}")]
    UnknownBatch { contract: Address, batch: BatchId },
    #[error("event {index} refers to input {batch} that was never created")]
    DanglingInput { index: u64, batch: BatchId },
}

/// A batch reference: token contract plus batch id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchRef {
    pub contract: Address,
    pub batch_id: BatchId,
}

impl BatchRef {
    pub fn new(contract: Address, batch_id: BatchId) -> Self {
        Self { contract, batch_id }
    }
}

/// One node of a rendered provenance tree. Shared subtrees are duplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProvenanceNode {
    pub contract: Address,
    pub batch_id: BatchId,
    /// Amount of the batch when it was created.
    pub amount: u64,
    pub children: Vec<ProvenanceEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEdge {
    pub drawn: u64,
    pub node: ProvenanceNode,
}

impl ProvenanceNode {
    pub fn batch_ref(&self) -> BatchRef {
        BatchRef::new(self.contract, self.batch_id)
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Rendered node count, duplicates included.
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| c.node.node_count())
            .sum::<usize>()
    }

    /// Rendered edge count, duplicates included.
    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    /// Every distinct batch in the tree, root included.
    pub fn batches(&self) -> BTreeSet<BatchRef> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.insert(node.batch_ref());
            stack.extend(node.children.iter().map(|c| &c.node));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct LineageNode {
    event: u64,
    /// Position among batches created by the same event.
    position: usize,
    amount: u64,
    inputs: Vec<(BatchRef, u64)>,
}

/// Event log plus the lookup indexes derived from it.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<LedgerEvent>,
    by_topic: HashMap<(usize, Word32), Vec<u64>>,
    nodes: HashMap<BatchRef, LineageNode>,
    consumers: HashMap<BatchRef, Vec<BatchRef>>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds all indexes from a stored event sequence.
    pub fn from_events(events: impl IntoIterator<Item = LedgerEvent>) -> Result<Self, ProvenanceError> {
        let mut log = Self::new();
        for event in events {
            log.append_event(event)?;
        }
        Ok(log)
    }

    pub fn len(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn get(&self, index: u64) -> Option<&LedgerEvent> {
        self.events.get(index as usize)
    }

    pub fn contains_batch(&self, batch: &BatchRef) -> bool {
        self.nodes.contains_key(batch)
    }

    /// Appends an event whose index must equal the current length.
    pub fn append_event(&mut self, event: LedgerEvent) -> Result<u64, ProvenanceError> {
        let expected = self.len();
        if event.index != expected {
            return Err(ProvenanceError::OutOfOrder {
                expected,
                got: event.index,
            });
        }
        let created = created_batches(&event);
        for (_, node) in &created {
            for (input, _) in &node.inputs {
                if !self.nodes.contains_key(input) {
                    return Err(ProvenanceError::DanglingInput {
                        index: event.index,
                        batch: input.batch_id,
                    });
                }
            }
        }
        for (batch, node) in created {
            for (input, _) in &node.inputs {
                let consumers = self.consumers.entry(*input).or_default();
                if !consumers.contains(&batch) {
                    consumers.push(batch);
                }
            }
            self.nodes.insert(batch, node);
        }
        for (position, topic) in event.topics.iter().enumerate() {
            self.by_topic
                .entry((position, *topic))
                .or_default()
                .push(event.index);
        }
        self.events.push(event);
        Ok(expected)
    }

    /// All events matching `filter`, in index order.
    pub fn query_events(&self, filter: &EventFilter) -> Vec<LedgerEvent> {
        let mut postings: Vec<&Vec<u64>> = Vec::new();
        let mut constrained = false;
        if let Some(kind) = filter.kind {
            constrained = true;
            match self.by_topic.get(&(0, kind.signature())) {
                Some(p) => postings.push(p),
                None => return Vec::new(),
            }
        }
        for (i, topic) in filter.topics.iter().enumerate() {
            if let Some(topic) = topic {
                constrained = true;
                match self.by_topic.get(&(i + 1, *topic)) {
                    Some(p) => postings.push(p),
                    None => return Vec::new(),
                }
            }
        }
        if !constrained {
            let from = filter.from_index.unwrap_or(0) as usize;
            let to = filter
                .to_index
                .map_or(self.events.len(), |t| (t as usize).saturating_add(1))
                .min(self.events.len());
            return self.events.get(from..to).map(<[_]>::to_vec).unwrap_or_default();
        }
        let shortest = postings
            .into_iter()
            .min_by_key(|p| p.len())
            .expect("constrained filter has a posting list");
        shortest
            .iter()
            .map(|&i| &self.events[i as usize])
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    /// Full upstream composition tree of a batch.
    pub fn trace_provenance(
        &self,
        contract: Address,
        batch_id: BatchId,
    ) -> Result<ProvenanceNode, ProvenanceError> {
        let root = BatchRef::new(contract, batch_id);
        if !self.nodes.contains_key(&root) {
            return Err(ProvenanceError::UnknownBatch {
                contract,
                batch: batch_id,
            });
        }
        // Inputs always come from strictly earlier events, so building in
        // creation order sees every child before its parent.
        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            if reachable.insert((self.order_key(&b), b)) {
                queue.extend(self.nodes[&b].inputs.iter().map(|(i, _)| *i));
            }
        }
        let mut built: HashMap<BatchRef, ProvenanceNode> = HashMap::new();
        for (_, b) in reachable {
            let info = &self.nodes[&b];
            let children = info
                .inputs
                .iter()
                .map(|(input, drawn)| ProvenanceEdge {
                    drawn: *drawn,
                    node: built[input].clone(),
                })
                .collect();
            built.insert(
                b,
                ProvenanceNode {
                    contract: b.contract,
                    batch_id: b.batch_id,
                    amount: info.amount,
                    children,
                },
            );
        }
        Ok(built.remove(&root).expect("root is reachable"))
    }

    /// Every batch whose provenance contains the given batch, in creation
    /// order.
    pub fn track_descendants(
        &self,
        contract: Address,
        batch_id: BatchId,
    ) -> Result<Vec<BatchRef>, ProvenanceError> {
        let start = BatchRef::new(contract, batch_id);
        if !self.nodes.contains_key(&start) {
            return Err(ProvenanceError::UnknownBatch {
                contract,
                batch: batch_id,
            });
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for next in self.consumers.get(&b).into_iter().flatten() {
                if seen.insert((self.order_key(next), *next)) {
                    queue.push_back(*next);
                }
            }
        }
        Ok(seen.into_iter().map(|(_, b)| b).collect())
    }

    /// Transfers of one batch, oldest first. Custody is kept separate from
    /// the composition tree.
    pub fn custody_history(
        &self,
        contract: Address,
        batch_id: BatchId,
    ) -> Result<Vec<LedgerEvent>, ProvenanceError> {
        if !self.nodes.contains_key(&BatchRef::new(contract, batch_id)) {
            return Err(ProvenanceError::UnknownBatch {
                contract,
                batch: batch_id,
            });
        }
        Ok(self.query_events(
            &EventFilter::all()
                .kind(EventKind::BatchTransferred)
                .batch(contract, batch_id),
        ))
    }

    fn order_key(&self, b: &BatchRef) -> (u64, usize) {
        let n = &self.nodes[b];
        (n.event, n.position)
    }
}

fn created_batches(event: &LedgerEvent) -> Vec<(BatchRef, LineageNode)> {
    let node = |position, amount, inputs| LineageNode {
        event: event.index,
        position,
        amount,
        inputs,
    };
    match &event.payload {
        EventPayload::BatchCreated {
            contract,
            batch,
            amount,
            inputs,
            ..
        } => vec![(
            BatchRef::new(*contract, *batch),
            node(
                0,
                *amount,
                inputs
                    .iter()
                    .map(|i| (BatchRef::new(i.contract, i.batch), i.amount))
                    .collect(),
            ),
        )],
        EventPayload::BatchSplit {
            contract,
            parent,
            children,
            ..
        } => children
            .iter()
            .enumerate()
            .map(|(pos, part)| {
                (
                    BatchRef::new(*contract, part.batch),
                    node(pos, part.amount, vec![(BatchRef::new(*contract, *parent), part.amount)]),
                )
            })
            .collect(),
        EventPayload::BatchMerged {
            contract,
            batch,
            parents,
            ..
        } => vec![(
            BatchRef::new(*contract, *batch),
            node(
                0,
                parents.iter().map(|p| p.amount).sum(),
                parents
                    .iter()
                    .map(|p| (BatchRef::new(*contract, p.batch), p.amount))
                    .collect(),
            ),
        )],
        _ => Vec::new(),
    }
}
