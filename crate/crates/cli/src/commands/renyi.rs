//! `renyi`: the leakage-vs-QBER curve family. Each information column
//! inverts its own QBER→S mapping; infeasible cells are left empty. The
//! `below_threshold` column marks the 11% security threshold.

use clap::Args;
use dakd_core::attack::renyi_vs_qber_curve;

use crate::error::CmdError;
use crate::output::{sig12, Sink};

pub const SECURITY_THRESHOLD_QBER: f64 = 0.11;

#[derive(Args, Debug)]
pub struct RenyiArgs {
    /// Comma-separated decoherence levels γ₀ ∈ [0, 1].
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.75,0.5,0.25,0.0")]
    pub gamma0: Vec<f64>,
    /// First QBER grid value.
    #[arg(long, default_value_t = 0.005)]
    pub qber_start: f64,
    /// Last QBER grid value (inclusive).
    #[arg(long, default_value_t = 0.25)]
    pub qber_end: f64,
    /// QBER grid step.
    #[arg(long, default_value_t = 0.005)]
    pub qber_step: f64,
    /// Output CSV path (stdout when omitted; written atomically).
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

pub fn run(args: &RenyiArgs) -> Result<(), CmdError> {
    if !args.qber_step.is_finite()
        || args.qber_step <= 0.0
        || args.qber_end < args.qber_start
        || args.qber_start < 0.0
    {
        return Err(CmdError::Usage("invalid qber grid".into()));
    }
    if args.gamma0.is_empty() {
        return Err(CmdError::Usage("need at least one gamma0".into()));
    }
    let n = ((args.qber_end - args.qber_start) / args.qber_step).round() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| args.qber_start + args.qber_step * k as f64).collect();

    let mut csv = String::from("gamma0,qber,i_hv,i_da,i_total,below_threshold\n");
    for &g0 in &args.gamma0 {
        let points = renyi_vs_qber_curve(g0, &grid).map_err(|e| CmdError::Usage(e.to_string()))?;
        for p in points {
            let cell = |v: Option<f64>| v.map(sig12).unwrap_or_default();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sig12(g0),
                sig12(p.qber),
                cell(p.i_hv),
                cell(p.i_da),
                cell(p.i_total),
                u8::from(p.qber <= SECURITY_THRESHOLD_QBER),
            ));
        }
    }
    Sink::from_opt(args.out.clone()).write(&csv)?;
    Ok(())
}
