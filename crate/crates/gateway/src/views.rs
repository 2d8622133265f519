//! Request parsing and response bodies shared by the HTTP handlers and the
//! CLI, so both surfaces produce identical JSON.

use clap::Args;
use provchain_core::gas::{gas_add_batch, gas_deploy, gas_sourcing_tree, BatchMode, StorageStrategy};
use provchain_core::provenance::{EventFilter, EventKind};
use provchain_core::scenario::Participants;
use provchain_core::{Address, BatchId, Operation};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::ApiError;
use crate::service::{Snapshot, Submitted};

/// Splits a write request body into caller, optional timestamp and the
/// operation parameters.
pub fn parse_op(op: &str, body: Value) -> Result<(Address, Option<u64>, Operation), ApiError> {
    let Value::Object(mut fields) = body else {
        return Err(ApiError::bad_request("request body must be a JSON object"));
    };
    let caller = fields
        .remove("caller")
        .ok_or_else(|| ApiError::bad_request("missing caller"))?;
    let caller: Address = serde_json::from_value(caller)
        .map_err(|e| ApiError::bad_request(format!("caller: {e}")))?;
    let timestamp = match fields.remove("timestamp") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| ApiError::bad_request("timestamp must be a non-negative integer"))?,
        ),
    };
    let op = serde_json::from_value(json!({ "op": op, "params": Value::Object(fields) }))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok((caller, timestamp, op))
}

pub fn submitted(s: &Submitted) -> Result<Value, ApiError> {
    let receipt = s.result.as_ref().map_err(|e| ApiError::from(e.clone()))?;
    Ok(json!({
        "index": s.index,
        "timestamp": s.timestamp,
        "eventIndex": receipt.event_index,
        "outcome": receipt.outcome,
        "gas": receipt.gas,
        "digest": s.digest,
    }))
}

pub fn digest(snap: &Snapshot) -> Value {
    json!({
        "digest": snap.digest,
        "records": snap.records,
        "events": snap.ledger.events().len(),
    })
}

pub fn balances(snap: &Snapshot, owner: Address) -> Value {
    let state = snap.ledger.state();
    let totals = snap.ledger.balances(&owner);
    let balances: Vec<Value> = state
        .tokens
        .values()
        .map(|t| {
            json!({
                "contract": t.address,
                "name": t.name,
                "unitLabel": t.unit_label,
                "balance": totals.get(&t.address).copied().unwrap_or(0),
            })
        })
        .collect();
    let batches: Vec<Value> = state
        .tokens
        .values()
        .flat_map(|t| t.batches.values().map(move |b| (t, b)))
        .filter(|(_, b)| b.owner == owner && b.amount > 0)
        .map(|(t, b)| json!({ "contract": t.address, "batchId": b.id, "amount": b.amount }))
        .collect();
    json!({ "owner": owner, "balances": balances, "batches": batches })
}

pub fn provenance(snap: &Snapshot, contract: Address, batch: BatchId) -> Result<Value, ApiError> {
    let tree = snap.ledger.events().trace_provenance(contract, batch)?;
    Ok(serde_json::to_value(tree).expect("tree serializes"))
}

pub fn track(snap: &Snapshot, contract: Address, batch: BatchId) -> Result<Value, ApiError> {
    let refs = snap.ledger.events().track_descendants(contract, batch)?;
    Ok(serde_json::to_value(refs).expect("refs serialize"))
}

pub fn custody(snap: &Snapshot, contract: Address, batch: BatchId) -> Result<Value, ApiError> {
    let events = snap.ledger.events().custody_history(contract, batch)?;
    Ok(serde_json::to_value(events).expect("events serialize"))
}

#[derive(Debug, Default, Clone, Deserialize, Args)]
pub struct EventQuery {
    /// Event kind, e.g. BatchTransferred
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub contract: Option<Address>,
    /// Batch id; needs --contract
    #[arg(long)]
    pub batch: Option<BatchId>,
    #[arg(long)]
    pub recipient: Option<Address>,
    /// First event index, inclusive
    #[arg(long)]
    pub from: Option<u64>,
    /// Last event index, inclusive
    #[arg(long)]
    pub to: Option<u64>,
}

pub fn events(snap: &Snapshot, q: &EventQuery) -> Result<Value, ApiError> {
    let mut filter = EventFilter::all().range(q.from, q.to);
    if let Some(kind) = &q.kind {
        filter = filter.kind(kind.parse::<EventKind>().map_err(ApiError::bad_request)?);
    }
    filter = match (q.contract, q.batch) {
        (Some(c), Some(b)) => filter.batch(c, b),
        (Some(c), None) => filter.contract(c),
        (None, Some(_)) => return Err(ApiError::bad_request("batch filter needs a contract")),
        (None, None) => filter,
    };
    if let Some(to) = q.recipient {
        filter = filter.recipient(to);
    }
    let events = snap.ledger.events().query_events(&filter);
    Ok(serde_json::to_value(events).expect("events serialize"))
}

#[derive(Debug, Default, Clone, Deserialize, Args)]
#[serde(rename_all = "camelCase")]
pub struct GasQuery {
    /// add_batch, deploy_token or sourcing_tree
    #[arg(long)]
    pub op: String,
    #[arg(long)]
    pub inputs: Option<u64>,
    #[arg(long)]
    pub mode: Option<BatchMode>,
    #[arg(long)]
    pub strategy: Option<StorageStrategy>,
    #[arg(long)]
    pub cert_checks: Option<u64>,
    #[arg(long)]
    pub nodes: Option<u64>,
    #[arg(long)]
    pub edges: Option<u64>,
}

pub fn gas_estimate(snap: &Snapshot, q: &GasQuery) -> Result<Value, ApiError> {
    let costs = snap.ledger.costs();
    let config = snap.ledger.config();
    let inputs = q.inputs.unwrap_or(0);
    let bad = |e: provchain_core::gas::GasError| ApiError::bad_request(e.to_string());
    match q.op.as_str() {
        "add_batch" => {
            let mode = q.mode.unwrap_or(config.batch_mode);
            let receipt = gas_add_batch(costs, inputs, mode, q.cert_checks.unwrap_or(0)).map_err(bad)?;
            Ok(json!({
                "op": q.op,
                "inputs": inputs,
                "mode": mode,
                "total": receipt.total,
                "breakdown": receipt.breakdown,
            }))
        }
        "deploy_token" => {
            let strategy = q.strategy.unwrap_or(config.strategy);
            let receipt = gas_deploy(costs, inputs, strategy);
            Ok(json!({
                "op": q.op,
                "inputs": inputs,
                "strategy": strategy,
                "total": receipt.total,
                "breakdown": receipt.breakdown,
            }))
        }
        "sourcing_tree" => {
            let (Some(nodes), Some(edges)) = (q.nodes, q.edges) else {
                return Err(ApiError::bad_request("sourcing_tree needs nodes and edges"));
            };
            let total = gas_sourcing_tree(costs, nodes, edges).map_err(bad)?;
            Ok(json!({ "op": q.op, "nodes": nodes, "edges": edges, "total": total }))
        }
        other => Err(ApiError::bad_request(format!("unknown op {other:?}"))),
    }
}

pub fn participants(snap: &Snapshot) -> Value {
    let names = Participants::default();
    let list: Vec<Value> = snap
        .ledger
        .state()
        .participants
        .iter()
        .map(|a| json!({ "address": a, "name": names.name_of(a) }))
        .collect();
    Value::Array(list)
}

pub fn contracts(snap: &Snapshot) -> Value {
    let state = snap.ledger.state();
    let mut out = Vec::new();
    for t in state.tokens.values() {
        let mut m = Map::new();
        m.insert("kind".into(), json!("token"));
        m.insert("address".into(), json!(t.address));
        m.insert("owner".into(), json!(t.owner));
        m.insert("name".into(), json!(t.name));
        m.insert("unitLabel".into(), json!(t.unit_label));
        m.insert("recipe".into(), json!(t.recipe));
        m.insert("batches".into(), json!(t.batches.len()));
        m.insert("liveSupply".into(), json!(t.live_supply()));
        out.push(Value::Object(m));
    }
    for c in state.certificates.values() {
        let active: Vec<&Address> = c.certified.keys().filter(|t| c.is_active(t)).collect();
        out.push(json!({
            "kind": "certificate",
            "address": c.address,
            "owner": c.certifier,
            "name": c.name,
            "certified": active,
        }));
    }
    Value::Array(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_op_splits_envelope() {
        let caller = Address::from_label("a");
        let body = json!({ "caller": caller, "timestamp": 7, "name": "Cert" });
        let (c, t, op) = parse_op("deploy_certificate", body).unwrap();
        assert_eq!((c, t), (caller, Some(7)));
        assert_eq!(op, Operation::DeployCertificate { name: "Cert".into() });
    }

    #[test]
    fn parse_op_rejects_bad_bodies() {
        let caller = Address::from_label("a").to_hex();
        for body in [
            json!([]),
            json!({ "name": "x" }),
            json!({ "caller": "nothex", "name": "x" }),
            json!({ "caller": caller, "timestamp": -1, "name": "x" }),
            json!({ "caller": caller }),
        ] {
            let err = parse_op("deploy_certificate", body).unwrap_err();
            assert_eq!((err.status, err.code.as_str()), (400, "BadRequest"));
        }
    }
}
