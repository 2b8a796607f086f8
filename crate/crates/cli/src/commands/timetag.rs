//! `timetag`: the detector-event pipeline as four subcommands —
//! synthetic generation, G² histogramming, peak fitting, and
//! coincidence sifting with a public transcript.

use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use dakd_core::timetag::{
    assemble_key, find_coincidences, fit_gaussian_peak, g2_histogram, generate_events,
    public_transcript, read_events_csv, read_histogram_csv, schedule_from_bits, schedule_poisson,
    write_events_csv, write_histogram_csv, ChannelSelector, CoincidenceWindow, EventGenConfig,
    PairChannel,
};
use rand::{Rng as _, SeedableRng as _};
use serde::Serialize;

use crate::error::CmdError;
use crate::output::{sig12, write_atomic, Sink};

#[derive(Subcommand, Debug)]
pub enum TimetagCmd {
    /// Generate synthetic detector streams for a random planted key.
    Gen(GenArgs),
    /// Build the G²(τ) histogram from two event files.
    G2(G2Args),
    /// Fit the Gaussian peak and report the coincidence window.
    Fit(FitArgs),
    /// Match coincidences in the window and assemble both keys.
    Sift(SiftArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of planted key bits.
    #[arg(long)]
    pub n_bits: usize,
    /// Mean pairs per bit; 1 means exactly one pair per bit.
    #[arg(long, default_value_t = 1.0)]
    pub mean_pairs: f64,
    /// First emission time, ticks.
    #[arg(long, default_value_t = 10_000)]
    pub start: u64,
    /// Emission slot per bit, ticks.
    #[arg(long, default_value_t = 5_000)]
    pub spacing: u64,
    /// Per-side Gaussian timing jitter, ticks.
    #[arg(long, default_value_t = 0.0)]
    pub jitter_sigma: f64,
    /// Bob-side optical delay, ticks.
    #[arg(long, default_value_t = 1_234)]
    pub delay: u64,
    /// Dark-count rate per tick for every detector.
    #[arg(long, default_value_t = 0.0)]
    pub dark_rate: f64,
    /// Stream duration, ticks; derived from the schedule when omitted.
    #[arg(long)]
    pub duration: Option<u64>,
    /// Seed; drawn and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_alice: PathBuf,
    #[arg(long)]
    pub out_bob: PathBuf,
    /// Ground-truth CSV (pair, indexes, bits) for test harnesses.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct G2Args {
    #[arg(long)]
    pub alice: PathBuf,
    #[arg(long)]
    pub bob: PathBuf,
    /// Histogram bin width, ticks.
    #[arg(long, default_value_t = 1)]
    pub bin_width: u32,
    /// Histogram half-range, ticks.
    #[arg(long, default_value_t = 2_048)]
    pub range: u32,
    /// Output CSV path (stdout when omitted; written atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Histogram CSV produced by `timetag g2`.
    #[arg(long)]
    pub hist: PathBuf,
    /// Channel to fit: d12, d03, d13, d02, or sum.
    #[arg(long, default_value = "sum")]
    pub pair: String,
    /// Minimum peak count required for a fit.
    #[arg(long, default_value_t = 50)]
    pub min_peak: u64,
    /// Output JSON path (stdout when omitted; written atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SiftArgs {
    #[arg(long)]
    pub alice: PathBuf,
    #[arg(long)]
    pub bob: PathBuf,
    /// Window center τ₀, ticks.
    #[arg(long)]
    pub tau0: f64,
    /// Window σ, ticks.
    #[arg(long)]
    pub sigma: f64,
    /// Half-width multiplier (window = τ₀ ± multiplier·σ).
    #[arg(long, default_value_t = 2.0)]
    pub multiplier: f64,
    /// Key output JSON path (stdout when omitted).
    #[arg(long)]
    pub key_out: Option<PathBuf>,
    /// Public transcript CSV: indexes and timestamps only.
    #[arg(long)]
    pub public_out: Option<PathBuf>,
}

pub fn run(cmd: &TimetagCmd) -> Result<(), CmdError> {
    match cmd {
        TimetagCmd::Gen(a) => gen(a),
        TimetagCmd::G2(a) => g2(a),
        TimetagCmd::Fit(a) => fit(a),
        TimetagCmd::Sift(a) => sift(a),
    }
}

fn read_events(path: &PathBuf) -> Result<Vec<dakd_core::timetag::DetectionRecord>, CmdError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CmdError::Usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_events_csv(&mut BufReader::new(file))?)
}

fn gen(args: &GenArgs) -> Result<(), CmdError> {
    if args.n_bits == 0 {
        return Err(CmdError::Usage("n_bits must be ≥ 1".into()));
    }
    let seed = crate::resolve_seed(args.seed);
    let mut key_rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_B175);
    let bits: Vec<u8> = (0..args.n_bits).map(|_| key_rng.gen_range(0..2u8)).collect();

    let (schedule, expanded) = if (args.mean_pairs - 1.0).abs() < f64::EPSILON {
        (schedule_from_bits(&bits, args.start, args.spacing), bits.clone())
    } else {
        schedule_poisson(&bits, args.mean_pairs, args.start, args.spacing, seed ^ 0x0DD5)?
    };
    let duration = args.duration.unwrap_or_else(|| {
        args.start + args.spacing * (args.n_bits as u64 + 1) + args.delay + 10_000
    });
    let cfg = EventGenConfig {
        jitter_sigma: args.jitter_sigma,
        bob_delay: args.delay,
        dark_rates: [args.dark_rate; 4],
        duration,
        seed,
    };
    let (alice, bob, truth) = generate_events(&schedule, &cfg)?;

    let mut buf = Vec::new();
    write_events_csv(&mut buf, &alice)?;
    write_atomic(&args.out_alice, &buf)?;
    buf.clear();
    write_events_csv(&mut buf, &bob)?;
    write_atomic(&args.out_bob, &buf)?;

    if let Some(path) = &args.truth_out {
        let mut csv = String::from("pair,alice_index,bob_index,alice_bit,bob_bit\n");
        for (k, t) in truth.iter().enumerate() {
            csv.push_str(&format!(
                "{k},{},{},{},{}\n",
                t.alice_index, t.bob_index, t.alice_bit, t.bob_bit
            ));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    eprintln!(
        "generated {} pairs ({} bits), {} alice clicks, {} bob clicks",
        expanded.len(),
        args.n_bits,
        alice.len(),
        bob.len()
    );
    Ok(())
}

fn g2(args: &G2Args) -> Result<(), CmdError> {
    let alice = read_events(&args.alice)?;
    let bob = read_events(&args.bob)?;
    let hist = g2_histogram(&alice, &bob, args.bin_width, args.range)?;
    let mut buf = Vec::new();
    write_histogram_csv(&mut buf, &hist)?;
    let text = String::from_utf8(buf).expect("ascii csv");
    Sink::from_opt(args.out.clone()).write(&text)?;
    Ok(())
}

#[derive(Serialize)]
struct FitRecord {
    pair: String,
    tau0_ticks: f64,
    sigma_ticks: f64,
    half_width_multiplier: f64,
    amplitude: f64,
    residual_rms: f64,
    n_bins_fit: usize,
}

fn fit(args: &FitArgs) -> Result<(), CmdError> {
    let selector = match args.pair.as_str() {
        "sum" => ChannelSelector::Sum,
        other => ChannelSelector::One(
            PairChannel::parse(other)
                .ok_or_else(|| CmdError::Usage(format!("unknown pair `{other}`")))?,
        ),
    };
    let file = std::fs::File::open(&args.hist)
        .map_err(|e| CmdError::Usage(format!("cannot open {}: {e}", args.hist.display())))?;
    let hist = read_histogram_csv(&mut BufReader::new(file))?;
    let fit = fit_gaussian_peak(&hist, selector, args.min_peak)?;
    let record = FitRecord {
        pair: args.pair.clone(),
        tau0_ticks: fit.window.tau0,
        sigma_ticks: fit.window.sigma,
        half_width_multiplier: fit.window.half_width_multiplier,
        amplitude: fit.amplitude,
        residual_rms: fit.residual_rms,
        n_bins_fit: fit.n_bins_fit,
    };
    let mut json = serde_json::to_string_pretty(&record)
        .map_err(|e| CmdError::Numeric(format!("fit serialization: {e}")))?;
    json.push('\n');
    Sink::from_opt(args.out.clone()).write(&json)?;
    Ok(())
}

#[derive(Serialize)]
struct SiftRecord {
    n_coincidences: usize,
    alice_bits: String,
    bob_bits: String,
    pairs: Vec<(u64, u64)>,
}

fn sift(args: &SiftArgs) -> Result<(), CmdError> {
    let window = CoincidenceWindow::with_multiplier(args.tau0, args.sigma, args.multiplier)?;
    let alice = read_events(&args.alice)?;
    let bob = read_events(&args.bob)?;
    let tags_a = public_transcript(&alice);
    let tags_b = public_transcript(&bob);

    if let Some(path) = &args.public_out {
        // Only indexes and timestamps cross the public boundary.
        let mut csv = String::from("side,index,t_ticks\n");
        for t in &tags_a {
            csv.push_str(&format!("alice,{},{}\n", t.index, t.t));
        }
        for t in &tags_b {
            csv.push_str(&format!("bob,{},{}\n", t.index, t.t));
        }
        write_atomic(path, csv.as_bytes())?;
    }

    let pairs = find_coincidences(&tags_a, &tags_b, &window);
    let (ka, kb) = assemble_key(&pairs, &alice, &bob)?;
    let to_string = |bits: &[u8]| bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect();
    let record = SiftRecord {
        n_coincidences: pairs.len(),
        alice_bits: to_string(&ka),
        bob_bits: to_string(&kb),
        pairs,
    };
    let mut json = serde_json::to_string_pretty(&record)
        .map_err(|e| CmdError::Numeric(format!("sift serialization: {e}")))?;
    json.push('\n');
    Sink::from_opt(args.key_out.clone()).write(&json)?;
    eprintln!(
        "matched {} coincidences, window τ0 = {} σ = {}",
        record.n_coincidences,
        sig12(args.tau0),
        sig12(args.sigma)
    );
    Ok(())
}
