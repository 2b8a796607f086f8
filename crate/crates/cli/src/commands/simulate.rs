//! `simulate`: one protocol run from a JSON config file, producing a
//! machine-readable run record. Re-running the same config (with its
//! seed) reproduces the record byte for byte.

use std::path::PathBuf;

use clap::Args;
use dakd_core::protocol::{run_protocol, AttackConfig, Key, NoiseModel, ProtocolConfig, QberReport};
use dakd_core::qmath::GaussianMode;
use serde::{Deserialize, Serialize};

use crate::error::CmdError;
use crate::output::Sink;

/// On-disk config. Mirrors [`ProtocolConfig`] with an optional seed
/// (drawn and echoed into the record when absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n_rounds: usize,
    #[serde(default = "default_d_values")]
    pub d_values_mm: Vec<f64>,
    pub mode: GaussianMode<f64>,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
    pub noise: NoiseModel,
    pub qber_sample_fraction: f64,
    #[serde(default)]
    pub discard_disclosed: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_d_values() -> Vec<f64> {
    dakd_core::protocol::DEFAULT_D_VALUES_MM.to_vec()
}

#[derive(Debug, Serialize)]
struct KeyRecord {
    length: usize,
    bits: String,
    round_indices: Vec<usize>,
}

impl From<&Key> for KeyRecord {
    fn from(k: &Key) -> Self {
        Self {
            length: k.len(),
            bits: k.bit_string(),
            round_indices: k.round_indices.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct RunRecord {
    config: ProtocolConfig,
    seed: u64,
    rounds_total: usize,
    kept_rounds: usize,
    alice_key: KeyRecord,
    bob_key: KeyRecord,
    eve_key: Option<KeyRecord>,
    report: QberReport,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output record path (stdout when omitted; written atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &SimulateArgs) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| CmdError::Usage(format!("invalid config: {e}")))?;
    let seed = crate::resolve_seed(file.seed);
    let config = ProtocolConfig {
        n_rounds: file.n_rounds,
        d_values_mm: file.d_values_mm,
        mode: file.mode,
        attack: file.attack,
        noise: file.noise,
        qber_sample_fraction: file.qber_sample_fraction,
        discard_disclosed: file.discard_disclosed,
        seed,
    };
    config.validate().map_err(|e| CmdError::Usage(e.to_string()))?;

    let outcome = run_protocol(&config)?;
    let record = RunRecord {
        seed,
        rounds_total: outcome.rounds.len(),
        kept_rounds: outcome.rounds.iter().filter(|r| r.kept).count(),
        alice_key: KeyRecord::from(&outcome.alice_key),
        bob_key: KeyRecord::from(&outcome.bob_key),
        eve_key: outcome.eve_key.as_ref().map(KeyRecord::from),
        report: outcome.report,
        config,
    };
    let mut json = serde_json::to_string_pretty(&record)
        .map_err(|e| CmdError::Numeric(format!("record serialization: {e}")))?;
    json.push('\n');
    Sink::from_opt(args.out.clone()).write(&json)?;
    Ok(())
}
