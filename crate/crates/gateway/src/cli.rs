//! Command-line verbs. Write verbs build the same JSON body the HTTP API
//! accepts and print the same JSON it returns.

use std::fs::{self, File};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use provchain_core::gas::{write_add_batch_curve, write_deploy_curve, BatchMode, CostTable, StorageStrategy};
use provchain_core::ledger::{InputAssignment, LedgerConfig, RecipeInput};
use provchain_core::store::{parse_log, replay_with};
use provchain_core::{Address, BatchId, ConsumedInput};
use serde_json::{json, Value};

use crate::service::Gateway;
use crate::views::{self, EventQuery, GasQuery};

#[derive(Debug, Parser)]
#[command(name = "provchain", version, about = "Supply chain ledger with provenance tracing")]
pub struct Cli {
    /// Transaction log file
    #[arg(long, global = true, env = "PROVCHAIN_LOG", default_value = "provchain.provlog")]
    pub log: PathBuf,
    /// JSON file overriding entries of the gas cost table
    #[arg(long, global = true)]
    pub cost_table: Option<PathBuf>,
    /// Amount width used to price recipe storage
    #[arg(long, global = true)]
    pub storage_strategy: Option<StorageStrategy>,
    /// Whether batch inputs are priced as stored or as events
    #[arg(long, global = true)]
    pub batch_mode: Option<BatchMode>,
    #[command(subcommand)]
    pub command: Command,
}

/// A participant: 40 hex digits, or a label hashed into an address.
#[derive(Debug, Clone, Copy)]
pub struct Party(pub Address);

impl FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<Address>() {
            Ok(a) => Ok(Party(a)),
            Err(_) if !s.is_empty() => Ok(Party(Address::from_label(s))),
            Err(e) => Err(e.to_string()),
        }
    }
}

/// Recipe entry: `specific:<token>:<per-unit>` or `certified:<certificate>:<per-unit>`.
#[derive(Debug, Clone, Copy)]
pub struct RecipeArg(pub RecipeInput);

impl FromStr for RecipeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, addr, n] = parts[..] else {
            return Err("expected kind:address:amount".into());
        };
        let addr: Address = addr.parse().map_err(|e| format!("{e}"))?;
        let n: u64 = n.parse().map_err(|e| format!("{e}"))?;
        match kind {
            "specific" => Ok(RecipeArg(RecipeInput::specific(addr, n))),
            "certified" => Ok(RecipeArg(RecipeInput::certified(addr, n))),
            other => Err(format!("unknown recipe kind {other:?}")),
        }
    }
}

/// Draw: `<recipe-index>:<contract>:<batch>:<amount>`.
#[derive(Debug, Clone, Copy)]
pub struct DrawArg(pub usize, pub ConsumedInput);

impl FromStr for DrawArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [index, contract, batch, amount] = parts[..] else {
            return Err("expected index:contract:batch:amount".into());
        };
        Ok(DrawArg(
            index.parse().map_err(|e| format!("{e}"))?,
            ConsumedInput::new(
                contract.parse().map_err(|e| format!("{e}"))?,
                batch.parse().map_err(|e| format!("{e}"))?,
                amount.parse().map_err(|e| format!("{e}"))?,
            ),
        ))
    }
}

#[derive(Debug, Clone, Args)]
pub struct Who {
    #[arg(long)]
    pub caller: Party,
    /// Seconds since the epoch; defaults to now
    #[arg(long)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub contract: Address,
    #[arg(long)]
    pub batch: BatchId,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Run the wood and glue scenario on an empty log
    Demo {
        #[arg(long)]
        start_time: Option<u64>,
    },
    /// Re-execute a log and verify every recorded digest
    Replay { log: PathBuf },
    /// Write deployment and add-batch gas curves as CSV
    ExportGas {
        dir: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_inputs: u64,
    },
    DeployToken {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "units")]
        unit_label: String,
        /// Recipe entries in order; none for a resource
        #[arg(long = "input")]
        inputs: Vec<RecipeArg>,
    },
    DeployCertificate {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        name: String,
    },
    Certify {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        certificate: Address,
        #[arg(long)]
        token: Address,
    },
    Revoke {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        certificate: Address,
        #[arg(long)]
        token: Address,
    },
    AddBatch {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        contract: Address,
        #[arg(long)]
        amount: u64,
        #[arg(long = "draw")]
        draws: Vec<DrawArg>,
    },
    Split {
        #[command(flatten)]
        who: Who,
        #[command(flatten)]
        target: BatchArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        parts: Vec<u64>,
    },
    Merge {
        #[command(flatten)]
        who: Who,
        #[arg(long)]
        contract: Address,
        #[arg(long, value_delimiter = ',', required = true)]
        batches: Vec<BatchId>,
    },
    Transfer {
        #[command(flatten)]
        who: Who,
        #[command(flatten)]
        target: BatchArgs,
        #[arg(long)]
        to: Party,
    },
    Consume {
        #[command(flatten)]
        who: Who,
        #[command(flatten)]
        target: BatchArgs,
        #[arg(long)]
        amount: u64,
    },
    Balances { owner: Party },
    Provenance { contract: Address, batch: BatchId },
    Track { contract: Address, batch: BatchId },
    Custody { contract: Address, batch: BatchId },
    Events(EventQuery),
    GasEstimate(GasQuery),
    Digest,
    Participants,
    Contracts,
}

pub enum Output {
    Json(Value),
    Text(String),
}

impl Cli {
    pub fn costs(&self) -> anyhow::Result<CostTable> {
        let Some(path) = &self.cost_table else {
            return Ok(CostTable::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: CostTable = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn config(&self) -> LedgerConfig {
        let default = LedgerConfig::default();
        LedgerConfig {
            strategy: self.storage_strategy.unwrap_or(default.strategy),
            batch_mode: self.batch_mode.unwrap_or(default.batch_mode),
        }
    }

    pub fn open(&self) -> anyhow::Result<Gateway> {
        Gateway::open(&self.log, self.costs()?, self.config())
            .with_context(|| format!("opening {}", self.log.display()))
    }
}

fn with_who(who: &Who, mut body: Value) -> Value {
    body["caller"] = json!(who.caller.0);
    if let Some(t) = who.timestamp {
        body["timestamp"] = json!(t);
    }
    body
}

fn assignments(draws: &[DrawArg]) -> Vec<InputAssignment> {
    let mut out: Vec<InputAssignment> = Vec::new();
    for DrawArg(index, draw) in draws {
        match out.iter_mut().find(|a| a.recipe_index == *index) {
            Some(a) => a.draws.push(*draw),
            None => out.push(InputAssignment::new(*index, vec![*draw])),
        }
    }
    out
}

/// The operation name and request body a write verb maps to.
fn write_request(command: &Command) -> Option<(&'static str, Value)> {
    let (op, who, body) = match command {
        Command::DeployToken {
            who,
            name,
            unit_label,
            inputs,
        } => {
            let recipe: Vec<RecipeInput> = inputs.iter().map(|r| r.0).collect();
            ("deploy_token", who, json!({ "name": name, "unitLabel": unit_label, "recipe": recipe }))
        }
        Command::DeployCertificate { who, name } => ("deploy_certificate", who, json!({ "name": name })),
        Command::Certify { who, certificate, token } => {
            ("certify", who, json!({ "certificate": certificate, "token": token }))
        }
        Command::Revoke { who, certificate, token } => {
            ("revoke", who, json!({ "certificate": certificate, "token": token }))
        }
        Command::AddBatch {
            who,
            contract,
            amount,
            draws,
        } => (
            "add_batch",
            who,
            json!({ "contract": contract, "amount": amount, "assignments": assignments(draws) }),
        ),
        Command::Split { who, target, parts } => (
            "split_batch",
            who,
            json!({ "contract": target.contract, "batch": target.batch, "parts": parts }),
        ),
        Command::Merge { who, contract, batches } => {
            ("merge_batch", who, json!({ "contract": contract, "batches": batches }))
        }
        Command::Transfer { who, target, to } => (
            "transfer_batch",
            who,
            json!({ "contract": target.contract, "batch": target.batch, "to": to.0 }),
        ),
        Command::Consume { who, target, amount } => (
            "consume_batch",
            who,
            json!({ "contract": target.contract, "batch": target.batch, "amount": amount }),
        ),
        _ => return None,
    };
    Some((op, with_who(who, body)))
}

/// Runs every verb except `serve`.
pub fn execute(cli: &Cli) -> anyhow::Result<Output> {
    if let Some((op, body)) = write_request(&cli.command) {
        let gateway = cli.open()?;
        let (caller, timestamp, op) = views::parse_op(op, body)?;
        let submitted = gateway.submit(caller, timestamp, op)?;
        return Ok(Output::Json(views::submitted(&submitted)?));
    }
    let out = match &cli.command {
        Command::Serve { .. } => anyhow::bail!("serve runs through the async entry point"),
        Command::Demo { start_time } => {
            let gateway = cli.open()?;
            let summary = gateway.run_demo(*start_time)?;
            let digest = gateway.snapshot().digest;
            Output::Text(format!("{summary}state digest: {digest}\n"))
        }
        Command::Replay { log } => {
            let text = fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
            let records = parse_log(&text)?;
            let mut accepted = 0u64;
            let (_, digest) = replay_with(&records, &cli.costs()?, cli.config(), |r, _| {
                accepted += r.outcome.is_accepted() as u64;
            })?;
            Output::Json(json!({
                "records": records.len(),
                "accepted": accepted,
                "rejected": records.len() as u64 - accepted,
                "digest": digest,
            }))
        }
        Command::ExportGas { dir, max_inputs } => {
            fs::create_dir_all(dir)?;
            let costs = cli.costs()?;
            let deploy = dir.join("deploy_gas.csv");
            let add = dir.join("add_batch_gas.csv");
            write_deploy_curve(&costs, *max_inputs, File::create(&deploy)?)?;
            write_add_batch_curve(&costs, *max_inputs, File::create(&add)?)?;
            Output::Text(format!("{}\n{}\n", deploy.display(), add.display()))
        }
        read => {
            let gateway = cli.open()?;
            let snap = gateway.snapshot();
            let value = match read {
                Command::Balances { owner } => views::balances(&snap, owner.0),
                Command::Provenance { contract, batch } => views::provenance(&snap, *contract, *batch)?,
                Command::Track { contract, batch } => views::track(&snap, *contract, *batch)?,
                Command::Custody { contract, batch } => views::custody(&snap, *contract, *batch)?,
                Command::Events(q) => views::events(&snap, q)?,
                Command::GasEstimate(q) => views::gas_estimate(&snap, q)?,
                Command::Digest => views::digest(&snap),
                Command::Participants => views::participants(&snap),
                Command::Contracts => views::contracts(&snap),
                _ => unreachable!("write verbs handled above"),
            };
            Output::Json(value)
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parties_accept_hex_or_labels() {
        let hex = Address::from_label("sawmill").to_hex();
        assert_eq!(hex.parse::<Party>().unwrap().0, Address::from_label("sawmill"));
        assert_eq!("sawmill".parse::<Party>().unwrap().0, Address::from_label("sawmill"));
        assert!("".parse::<Party>().is_err());
    }

    #[test]
    fn recipe_and_draw_arguments() {
        let a = Address::from_label("t");
        let r: RecipeArg = format!("certified:{a}:3").parse().unwrap();
        assert_eq!(r.0, RecipeInput::certified(a, 3));
        assert!(format!("other:{a}:3").parse::<RecipeArg>().is_err());
        assert!("specific:zz:1".parse::<RecipeArg>().is_err());
        let d: DrawArg = format!("1:{a}:{}:4", BatchId::ZERO).parse().unwrap();
        assert_eq!(d.0, 1);
        assert_eq!(d.1, ConsumedInput::new(a, BatchId::ZERO, 4));
        let grouped = assignments(&[d, DrawArg(0, d.1), d]);
        assert_eq!(grouped.len(), 2);
        assert_eq!(grouped[0].draws.len(), 2);
    }

    #[test]
    fn log_path_comes_from_flag() {
        let cli = Cli::try_parse_from(["provchain", "digest", "--log", "x.provlog"]).unwrap();
        assert_eq!(cli.log, PathBuf::from("x.provlog"));
        assert!(Cli::try_parse_from(["provchain", "split", "--caller", "a"]).is_err());
    }
}
