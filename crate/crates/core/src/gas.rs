//! Structural gas model for contract deployment and batch creation.
//!
//! Costs are assembled from EVM storage and log prices plus two
//! calibrated constants: the fixed cost of adding a batch and the per-input
//! cost when inputs are emitted as events. Storing inputs instead costs one
//! extra fresh storage slot per input.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GasError {
    #[error("cost table invalid: {0}")]
    InvalidTable(String),
    #[error("{edges} edges exceed the maximum for {nodes} nodes")]
    TooManyEdges { nodes: u64, edges: u64 },
    #[error("{cert_checks} certificate checks for only {inputs} inputs")]
    TooManyCertChecks { cert_checks: u64, inputs: u64 },
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Fresh slots written for one batch record (amount, owner, creation stamp).
pub const BATCH_RECORD_SLOTS: u64 = 3;
/// Topics on a `BatchCreated` log: signature, contract, batch slot.
pub const BATCH_CREATED_TOPICS: u64 = 3;
/// Fixed log payload of a `BatchCreated` event: the product amount word.
pub const BATCH_CREATED_FIXED_BYTES: u64 = 32;
/// Log payload per consumed input: packed slot word plus amount word.
pub const LOG_BYTES_PER_INPUT: u64 = 64;
/// Amounts of `uint32` width that fit in one 32-byte slot.
pub const PACKED_AMOUNTS_PER_SLOT: u64 = 8;

/// Gas prices. Defaults follow the pre-Istanbul schedule plus the measured
/// batch-creation constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct CostTable {
    pub tx_base: u64,
    pub sstore_set: u64,
    pub sstore_update: u64,
    pub sload: u64,
    pub call: u64,
    pub log_base: u64,
    pub log_topic: u64,
    pub log_data_per_byte: u64,
    pub deploy_base: u64,
    pub add_batch_base: u64,
    pub per_input_event: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            tx_base: 21_000,
            sstore_set: 20_000,
            sstore_update: 5_000,
            sload: 200,
            call: 700,
            log_base: 375,
            log_topic: 375,
            log_data_per_byte: 8,
            // code deposit and constructor folded into one number
            deploy_base: 1_000_000,
            add_batch_base: 92_756,
            per_input_event: 19_241,
        }
    }
}

impl CostTable {
    pub fn deploy_per_slot(&self) -> u64 {
        self.sstore_set
    }

    pub fn per_input_store(&self) -> u64 {
        self.per_input_event + self.sstore_set
    }

    fn batch_fixed_itemized(&self) -> u64 {
        self.tx_base + BATCH_RECORD_SLOTS * self.sstore_set + self.batch_fixed_logs()
    }

    fn batch_fixed_logs(&self) -> u64 {
        self.log_base
            + BATCH_CREATED_TOPICS * self.log_topic
            + BATCH_CREATED_FIXED_BYTES * self.log_data_per_byte
    }

    fn input_itemized_max(&self) -> u64 {
        self.sstore_update
            + LOG_BYTES_PER_INPUT * self.log_data_per_byte
            + self.call
            + self.certificate_check()
    }

    fn certificate_check(&self) -> u64 {
        self.call + self.sload
    }

    /// Checks positivity and that the calibrated constants cover every
    /// itemized component, so receipts never need a negative remainder.
    pub fn validate(&self) -> Result<(), GasError> {
        let fields = [
            ("txBase", self.tx_base),
            ("sstoreSet", self.sstore_set),
            ("sstoreUpdate", self.sstore_update),
            ("sload", self.sload),
            ("call", self.call),
            ("logBase", self.log_base),
            ("logTopic", self.log_topic),
            ("logDataPerByte", self.log_data_per_byte),
            ("deployBase", self.deploy_base),
            ("addBatchBase", self.add_batch_base),
            ("perInputEvent", self.per_input_event),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(GasError::InvalidTable(format!("{name} must be positive")));
        }
        if self.deploy_base < self.tx_base {
            return Err(GasError::InvalidTable("deployBase below txBase".into()));
        }
        if self.add_batch_base < self.batch_fixed_itemized() {
            return Err(GasError::InvalidTable(format!(
                "addBatchBase {} below itemized fixed cost {}",
                self.add_batch_base,
                self.batch_fixed_itemized()
            )));
        }
        if self.per_input_event < self.input_itemized_max() {
            return Err(GasError::InvalidTable(format!(
                "perInputEvent {} below itemized per-input cost {}",
                self.per_input_event,
                self.input_itemized_max()
            )));
        }
        Ok(())
    }
}

/// Width used to store recipe amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StorageStrategy {
    Uint256,
    Uint32Packed,
}

impl StorageStrategy {
    pub const ALL: [StorageStrategy; 2] = [StorageStrategy::Uint256, StorageStrategy::Uint32Packed];

    pub fn name(self) -> &'static str {
        match self {
            StorageStrategy::Uint256 => "Uint256",
            StorageStrategy::Uint32Packed => "Uint32Packed",
        }
    }
}

/// Whether batch inputs are kept in contract storage or only logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BatchMode {
    StoreInputs,
    EmitEvents,
}

impl BatchMode {
    pub const ALL: [BatchMode; 2] = [BatchMode::StoreInputs, BatchMode::EmitEvents];

    pub fn name(self) -> &'static str {
        match self {
            BatchMode::StoreInputs => "StoreInputs",
            BatchMode::EmitEvents => "EmitEvents",
        }
    }
}

impl std::str::FromStr for StorageStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown storage strategy {s:?}"))
    }
}

impl std::str::FromStr for BatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown batch mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GasCategory {
    Base,
    Storage,
    Logs,
    Calls,
    CalibratedOverhead,
}

/// Itemized cost of one transaction. `total` is always the breakdown sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasReceipt {
    pub total: u64,
    pub breakdown: BTreeMap<GasCategory, u64>,
}

impl GasReceipt {
    pub fn from_items(items: impl IntoIterator<Item = (GasCategory, u64)>) -> Self {
        let mut breakdown = BTreeMap::new();
        for (category, gas) in items {
            *breakdown.entry(category).or_insert(0) += gas;
        }
        let total = breakdown.values().sum();
        Self { total, breakdown }
    }

    pub fn get(&self, category: GasCategory) -> u64 {
        self.breakdown.get(&category).copied().unwrap_or(0)
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.breakdown.values().sum::<u64>()
    }
}

/// Storage slots holding a recipe of `n_inputs` entries: one packed
/// (contract, batch) word per input plus the amounts.
pub fn recipe_slots(n_inputs: u64, strategy: StorageStrategy) -> u64 {
    match strategy {
        StorageStrategy::Uint256 => 2 * n_inputs,
        StorageStrategy::Uint32Packed => n_inputs + n_inputs.div_ceil(PACKED_AMOUNTS_PER_SLOT),
    }
}

pub fn gas_deploy(table: &CostTable, n_inputs: u64, strategy: StorageStrategy) -> GasReceipt {
    GasReceipt::from_items([
        (GasCategory::Base, table.tx_base),
        (
            GasCategory::Storage,
            recipe_slots(n_inputs, strategy) * table.deploy_per_slot(),
        ),
        (GasCategory::CalibratedOverhead, table.deploy_base - table.tx_base),
    ])
}

/// Cost of creating one batch that draws `n_inputs` input batches, of which
/// `cert_checks` are verified against a certificate contract.
///
/// The total depends only on `n_inputs` and `mode`; certificate checks move
/// gas from the calibrated remainder into `calls`.
pub fn gas_add_batch(
    table: &CostTable,
    n_inputs: u64,
    mode: BatchMode,
    cert_checks: u64,
) -> Result<GasReceipt, GasError> {
    if cert_checks > n_inputs {
        return Err(GasError::TooManyCertChecks {
            cert_checks,
            inputs: n_inputs,
        });
    }
    let per_input = match mode {
        BatchMode::EmitEvents => table.per_input_event,
        BatchMode::StoreInputs => table.per_input_store(),
    };
    let total = table.add_batch_base + n_inputs * per_input;

    let mut storage =
        BATCH_RECORD_SLOTS * table.sstore_set + n_inputs * table.sstore_update;
    if mode == BatchMode::StoreInputs {
        storage += n_inputs * table.sstore_set;
    }
    let logs = table.batch_fixed_logs() + n_inputs * LOG_BYTES_PER_INPUT * table.log_data_per_byte;
    let calls = n_inputs * table.call + cert_checks * table.certificate_check();
    let itemized = table.tx_base + storage + logs + calls;
    let overhead = total.checked_sub(itemized).ok_or_else(|| {
        GasError::InvalidTable(format!("itemized {itemized} exceeds modelled {total}"))
    })?;

    Ok(GasReceipt::from_items([
        (GasCategory::Base, table.tx_base),
        (GasCategory::Storage, storage),
        (GasCategory::Logs, logs),
        (GasCategory::Calls, calls),
        (GasCategory::CalibratedOverhead, overhead),
    ]))
}

/// Total creation gas of a sourcing graph in event mode: every vertex is one
/// batch creation and every edge one consumed input.
pub fn gas_sourcing_tree(table: &CostTable, nodes: u64, edges: u64) -> Result<u64, GasError> {
    if edges > nodes.saturating_mul(nodes.saturating_sub(1)) {
        return Err(GasError::TooManyEdges { nodes, edges });
    }
    Ok(nodes * table.add_batch_base + edges * table.per_input_event)
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    #[serde(rename = "nInputs")]
    n_inputs: u64,
    mode_or_strategy: &'a str,
    gas: u64,
}

/// Deployment gas for `0..=max_inputs` inputs under both storage strategies.
pub fn write_deploy_curve<W: Write>(
    table: &CostTable,
    max_inputs: u64,
    out: W,
) -> Result<(), GasError> {
    let mut writer = csv::Writer::from_writer(out);
    for strategy in StorageStrategy::ALL {
        for n in 0..=max_inputs {
            writer.serialize(CurveRow {
                n_inputs: n,
                mode_or_strategy: strategy.name(),
                gas: gas_deploy(table, n, strategy).total,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Batch-creation gas for `0..=max_inputs` inputs under both modes.
pub fn write_add_batch_curve<W: Write>(
    table: &CostTable,
    max_inputs: u64,
    out: W,
) -> Result<(), GasError> {
    let mut writer = csv::Writer::from_writer(out);
    for mode in BatchMode::ALL {
        for n in 0..=max_inputs {
            writer.serialize(CurveRow {
                n_inputs: n,
                mode_or_strategy: mode.name(),
                gas: gas_add_batch(table, n, mode, 0)?.total,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}
