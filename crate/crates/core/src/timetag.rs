//! Detector time-tag pipeline: synthetic event generation, G²(τ)
//! histogramming, Gaussian peak fitting, coincidence matching in the
//! τ₀ ± 2σ window, and key assembly from detector identities.
//!
//! Timestamps are unsigned tick counts (1 tick = 81 ps). Alice's stream
//! carries detectors D0/D1, Bob's D2/D3. Bit assignment: Alice D0→0,
//! D1→1; Bob D3→0, D2→1. Only indexes and timestamps ever cross the
//! public boundary ([`TimeTag`]); detector identities stay private until
//! bit assignment.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimetagError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("peak too weak to fit: max count {max} below the required {min}")]
    InsufficientCounts { max: u64, min: u64 },
    #[error("fit did not converge to a concave peak")]
    FitNotConcave,
    #[error("fitted width {0:.3} ticks is not usable")]
    UnusableWidth(f64),
    #[error("record {index} is on the wrong side (detector {detector:?})")]
    WrongSide { index: u64, detector: Detector },
    #[error("malformed event file at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Single-photon counting modules. D0/D1 sit on Alice's arm, D2/D3 on
/// Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    D0,
    D1,
    D2,
    D3,
}

impl Detector {
    pub fn is_alice(self) -> bool {
        matches!(self, Detector::D0 | Detector::D1)
    }

    /// Key-bit convention: Alice D0→0, D1→1; Bob D3→0, D2→1.
    pub fn bit(self) -> u8 {
        match self {
            Detector::D0 | Detector::D3 => 0,
            Detector::D1 | Detector::D2 => 1,
        }
    }

    fn id(self) -> u8 {
        match self {
            Detector::D0 => 0,
            Detector::D1 => 1,
            Detector::D2 => 2,
            Detector::D3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Detector::D0 => "D0",
            Detector::D1 => "D1",
            Detector::D2 => "D2",
            Detector::D3 => "D3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "D0" => Some(Detector::D0),
            "D1" => Some(Detector::D1),
            "D2" => Some(Detector::D2),
            "D3" => Some(Detector::D3),
            _ => None,
        }
    }
}

/// One detector click: time in ticks, the detector, and the record's
/// position in its (time-sorted) stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub index: u64,
    pub t: u64,
    pub detector: Detector,
}

/// The public part of a detection record: index and timestamp only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTag {
    pub index: u64,
    pub t: u64,
}

/// Strips detector identities for the public exchange.
pub fn public_transcript(stream: &[DetectionRecord]) -> Vec<TimeTag> {
    stream.iter().map(|r| TimeTag { index: r.index, t: r.t }).collect()
}

/// Coincidence window around the fitted G² peak: keep pairs with
/// |t_B − t_A − τ₀| ≤ half_width_multiplier · σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindow {
    pub tau0: f64,
    pub sigma: f64,
    pub half_width_multiplier: f64,
}

impl CoincidenceWindow {
    pub fn new(tau0: f64, sigma: f64) -> Result<Self, TimetagError> {
        Self::with_multiplier(tau0, sigma, 2.0)
    }

    pub fn with_multiplier(tau0: f64, sigma: f64, mult: f64) -> Result<Self, TimetagError> {
        if !tau0.is_finite() || !sigma.is_finite() || sigma <= 0.0 || mult <= 0.0 {
            return Err(TimetagError::InvalidParameter(
                "window needs finite τ0 and positive σ and multiplier".into(),
            ));
        }
        Ok(Self { tau0, sigma, half_width_multiplier: mult })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width_multiplier * self.sigma
    }
}

/// Joint-count channels between the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairChannel {
    D12,
    D03,
    D13,
    D02,
}

impl PairChannel {
    pub const ALL: [PairChannel; 4] =
        [PairChannel::D12, PairChannel::D03, PairChannel::D13, PairChannel::D02];

    pub fn index(self) -> usize {
        match self {
            PairChannel::D12 => 0,
            PairChannel::D03 => 1,
            PairChannel::D13 => 2,
            PairChannel::D02 => 3,
        }
    }

    pub fn from_detectors(a: Detector, b: Detector) -> Option<Self> {
        match (a, b) {
            (Detector::D1, Detector::D2) => Some(PairChannel::D12),
            (Detector::D0, Detector::D3) => Some(PairChannel::D03),
            (Detector::D1, Detector::D3) => Some(PairChannel::D13),
            (Detector::D0, Detector::D2) => Some(PairChannel::D02),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PairChannel::D12 => "d12",
            PairChannel::D03 => "d03",
            PairChannel::D13 => "d13",
            PairChannel::D02 => "d02",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d12" => Some(PairChannel::D12),
            "d03" => Some(PairChannel::D03),
            "d13" => Some(PairChannel::D13),
            "d02" => Some(PairChannel::D02),
            _ => None,
        }
    }
}

/// Which histogram channel a fit runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSelector {
    One(PairChannel),
    /// Sum of all four channels.
    Sum,
}

/// Lag histogram of Bob-minus-Alice click times, per joint-count channel.
/// Bin `k` covers lags `[−range + k·bin_width, −range + (k+1)·bin_width)`,
/// clipped to `range` inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Histogram {
    pub bin_width: u32,
    pub range: u32,
    pub counts: [Vec<u64>; 4],
}

impl G2Histogram {
    pub fn n_bins(&self) -> usize {
        (2 * self.range as usize + 1).div_ceil(self.bin_width as usize)
    }

    pub fn lag_lo(&self, bin: usize) -> i64 {
        -(i64::from(self.range)) + bin as i64 * i64::from(self.bin_width)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.lag_lo(bin) as f64 + (f64::from(self.bin_width) - 1.0) / 2.0
    }

    pub fn bin_for_lag(&self, lag: i64) -> Option<usize> {
        let r = i64::from(self.range);
        if lag < -r || lag > r {
            return None;
        }
        Some(((lag + r) / i64::from(self.bin_width)) as usize)
    }

    pub fn channel(&self, ch: PairChannel) -> &[u64] {
        &self.counts[ch.index()]
    }

    fn selected(&self, sel: ChannelSelector) -> Vec<u64> {
        match sel {
            ChannelSelector::One(ch) => self.counts[ch.index()].clone(),
            ChannelSelector::Sum => {
                let mut sum = vec![0u64; self.n_bins()];
                for ch in &self.counts {
                    for (s, c) in sum.iter_mut().zip(ch) {
                        *s += c;
                    }
                }
                sum
            }
        }
    }
}

/// One scheduled photon pair: emission time and which detector clicks on
/// each arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledPair {
    pub emission_t: u64,
    pub alice: Detector,
    pub bob: Detector,
}

/// Synthetic-source parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventGenConfig {
    /// Per-side Gaussian timing jitter, ticks.
    pub jitter_sigma: f64,
    /// Extra optical-path delay on Bob's side, ticks.
    pub bob_delay: u64,
    /// Poisson dark-count rate per tick, per detector D0..D3.
    pub dark_rates: [f64; 4],
    /// Dark counts fall uniformly in [0, duration).
    pub duration: u64,
    pub seed: u64,
}

/// Ground truth for one scheduled pair after index assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTruth {
    pub alice_index: u64,
    pub bob_index: u64,
    pub alice_bit: u8,
    pub bob_bit: u8,
}

/// Exactly one pair per key bit, evenly spaced, noiseless detector
/// assignment (Alice bit b → D0/D1, Bob bit b → D3/D2).
pub fn schedule_from_bits(bits: &[u8], start: u64, spacing: u64) -> Vec<ScheduledPair> {
    bits.iter()
        .enumerate()
        .map(|(k, &b)| ScheduledPair {
            emission_t: start + k as u64 * spacing,
            alice: if b == 0 { Detector::D0 } else { Detector::D1 },
            bob: if b == 0 { Detector::D3 } else { Detector::D2 },
        })
        .collect()
}

/// Poisson-many pairs per key bit (heralded-pair regime: the bench
/// averages a handful of heralded pairs per wave-plate position).
/// Returns the schedule and the expanded per-pair bit list.
pub fn schedule_poisson(
    bits: &[u8],
    mean_pairs: f64,
    start: u64,
    slot: u64,
    seed: u64,
) -> Result<(Vec<ScheduledPair>, Vec<u8>), TimetagError> {
    if !mean_pairs.is_finite() || mean_pairs <= 0.0 || slot == 0 {
        return Err(TimetagError::InvalidParameter(
            "mean_pairs and slot must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois = Poisson::new(mean_pairs)
        .map_err(|e| TimetagError::InvalidParameter(format!("poisson: {e}")))?;
    let mut schedule = Vec::new();
    let mut expanded = Vec::new();
    for (k, &b) in bits.iter().enumerate() {
        let n = pois.sample(&mut rng) as u64;
        let slot_start = start + k as u64 * slot;
        for j in 0..n {
            // Spread pairs through the slot, keeping them ordered.
            let offset = (j * slot) / n.max(1);
            schedule.push(ScheduledPair {
                emission_t: slot_start + offset,
                alice: if b == 0 { Detector::D0 } else { Detector::D1 },
                bob: if b == 0 { Detector::D3 } else { Detector::D2 },
            });
            expanded.push(b);
        }
    }
    Ok((schedule, expanded))
}

/// Generates the two detector streams for a schedule: one click per side
/// per pair at emission (+ delay on Bob's side) + Gaussian jitter, plus
/// Poisson dark counts. Streams come back time-sorted with indexes
/// assigned; simultaneous ticks order by (t, detector id, insertion).
/// Generated Alice and Bob streams with the per-pair ground truth.
pub type GeneratedStreams = (Vec<DetectionRecord>, Vec<DetectionRecord>, Vec<PairTruth>);

pub fn generate_events(
    schedule: &[ScheduledPair],
    cfg: &EventGenConfig,
) -> Result<GeneratedStreams, TimetagError> {
    if cfg.jitter_sigma < 0.0 || !cfg.jitter_sigma.is_finite() {
        return Err(TimetagError::InvalidParameter("jitter_sigma must be ≥ 0".into()));
    }
    if cfg.dark_rates.iter().any(|r| *r < 0.0 || !r.is_finite()) {
        return Err(TimetagError::InvalidParameter("dark rates must be ≥ 0".into()));
    }
    if !schedule.windows(2).all(|w| w[0].emission_t <= w[1].emission_t) {
        return Err(TimetagError::InvalidParameter("schedule must be sorted".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = if cfg.jitter_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.jitter_sigma).expect("validated sigma"))
    } else {
        None
    };
    let draw_t = |rng: &mut ChaCha8Rng, base: u64| -> u64 {
        let j = jitter.map_or(0.0, |n| n.sample(rng));
        let t = base as f64 + j;
        if t < 0.0 {
            0
        } else {
            t.round() as u64
        }
    };

    // (time, detector, provenance: scheduled pair id or dark count)
    let mut alice: Vec<(u64, Detector, Option<usize>)> = Vec::new();
    let mut bob: Vec<(u64, Detector, Option<usize>)> = Vec::new();
    for (k, p) in schedule.iter().enumerate() {
        if !p.alice.is_alice() || p.bob.is_alice() {
            return Err(TimetagError::InvalidParameter(
                "schedule detectors on wrong arms".into(),
            ));
        }
        let ta = draw_t(&mut rng, p.emission_t);
        let tb = draw_t(&mut rng, p.emission_t + cfg.bob_delay);
        alice.push((ta, p.alice, Some(k)));
        bob.push((tb, p.bob, Some(k)));
    }
    for det in [Detector::D0, Detector::D1, Detector::D2, Detector::D3] {
        let rate = cfg.dark_rates[det.id() as usize];
        let lambda = rate * cfg.duration as f64;
        if lambda <= 0.0 {
            continue;
        }
        let pois = Poisson::new(lambda)
            .map_err(|e| TimetagError::InvalidParameter(format!("poisson: {e}")))?;
        let n = pois.sample(&mut rng) as u64;
        for _ in 0..n {
            let t = rng.gen_range(0..cfg.duration);
            if det.is_alice() {
                alice.push((t, det, None));
            } else {
                bob.push((t, det, None));
            }
        }
    }

    type Click = (u64, Detector, Option<usize>);
    let finish = |mut v: Vec<Click>| -> (Vec<DetectionRecord>, Vec<(usize, u64)>) {
        let mut keyed: Vec<(usize, Click)> = v.drain(..).enumerate().collect();
        keyed.sort_by_key(|(orig, (t, det, _))| (*t, det.id(), *orig));
        let mut stream = Vec::with_capacity(keyed.len());
        let mut pair_positions = Vec::new();
        for (idx, (_, (t, det, prov))) in keyed.into_iter().enumerate() {
            stream.push(DetectionRecord { index: idx as u64, t, detector: det });
            if let Some(k) = prov {
                pair_positions.push((k, idx as u64));
            }
        }
        (stream, pair_positions)
    };

    let (alice_stream, alice_pairs) = finish(alice);
    let (bob_stream, bob_pairs) = finish(bob);

    let mut truth = vec![
        PairTruth { alice_index: 0, bob_index: 0, alice_bit: 0, bob_bit: 0 };
        schedule.len()
    ];
    for (k, idx) in alice_pairs {
        truth[k].alice_index = idx;
        truth[k].alice_bit = schedule[k].alice.bit();
    }
    for (k, idx) in bob_pairs {
        truth[k].bob_index = idx;
        truth[k].bob_bit = schedule[k].bob.bit();
    }
    Ok((alice_stream, bob_stream, truth))
}

/// G²(τ) histogram of lags t_B − t_A over all cross-arm click pairs
/// within ±range, split by joint-count channel.
pub fn g2_histogram(
    alice: &[DetectionRecord],
    bob: &[DetectionRecord],
    bin_width: u32,
    range: u32,
) -> Result<G2Histogram, TimetagError> {
    if bin_width == 0 || range == 0 {
        return Err(TimetagError::InvalidParameter("bin_width and range must be ≥ 1".into()));
    }
    let mut hist = G2Histogram {
        bin_width,
        range,
        counts: std::array::from_fn(|_| Vec::new()),
    };
    let n_bins = hist.n_bins();
    for c in &mut hist.counts {
        c.resize(n_bins, 0);
    }

    let r = i64::from(range);
    let mut lo = 0usize; // sliding window over bob
    for a in alice {
        let ta = a.t as i64;
        while lo < bob.len() && (bob[lo].t as i64) < ta - r {
            lo += 1;
        }
        let mut j = lo;
        while j < bob.len() && (bob[j].t as i64) <= ta + r {
            let lag = bob[j].t as i64 - ta;
            if let (Some(ch), Some(bin)) =
                (PairChannel::from_detectors(a.detector, bob[j].detector), hist.bin_for_lag(lag))
            {
                hist.counts[ch.index()][bin] += 1;
            }
            j += 1;
        }
    }
    Ok(hist)
}

/// Outcome of a Gaussian peak fit on log-counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakFit {
    pub window: CoincidenceWindow,
    pub amplitude: f64,
    /// RMS residual of ln(count) over the fitted bins.
    pub residual_rms: f64,
    pub n_bins_fit: usize,
}

/// Fits a Gaussian to the selected channel by least squares on
/// log-counts (floor 1): a parabola in lag through the contiguous bins
/// around the mode holding at least 5% of the peak. Returns the
/// (τ₀, σ) window with the default ±2σ rule. Flat or starved histograms
/// fail explicitly.
pub fn fit_gaussian_peak(
    hist: &G2Histogram,
    selector: ChannelSelector,
    min_peak: u64,
) -> Result<PeakFit, TimetagError> {
    let counts = hist.selected(selector);
    let (mode_bin, &peak) = counts
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
        .ok_or_else(|| TimetagError::InvalidParameter("empty histogram".into()))?;
    if peak < min_peak.max(1) {
        return Err(TimetagError::InsufficientCounts { max: peak, min: min_peak.max(1) });
    }

    let threshold = ((peak as f64) * 0.05).ceil().max(2.0) as u64;
    let mut lo = mode_bin;
    while lo > 0 && counts[lo - 1] >= threshold {
        lo -= 1;
    }
    let mut hi = mode_bin;
    while hi + 1 < counts.len() && counts[hi + 1] >= threshold {
        hi += 1;
    }
    let n = hi - lo + 1;
    if n < 5 {
        return Err(TimetagError::FitNotConcave);
    }

    // Parabola y = c2 u² + c1 u + c0 on (bin center, ln max(count, 1)),
    // with u centered for conditioning.
    let xs: Vec<f64> = (lo..=hi).map(|b| hist.bin_center(b)).collect();
    let ys: Vec<f64> = (lo..=hi).map(|b| (counts[b].max(1) as f64).ln()).collect();
    let x0 = xs.iter().sum::<f64>() / n as f64;
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let u = x - x0;
        let u2 = u * u;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += y;
        t1 += u * y;
        t2 += u2 * y;
    }
    let s0 = n as f64;
    // 3×3 normal equations by Cramer's rule.
    let det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) + s2 * (s1 * s3 - s2 * s2);
    if det.abs() < 1e-12 {
        return Err(TimetagError::FitNotConcave);
    }
    let d0 = t0 * (s2 * s4 - s3 * s3) - s1 * (t1 * s4 - t2 * s3) + s2 * (t1 * s3 - t2 * s2);
    let d1 = s0 * (t1 * s4 - t2 * s3) - t0 * (s1 * s4 - s2 * s3) + s2 * (s1 * t2 - s2 * t1);
    let d2 = s0 * (s2 * t2 - s3 * t1) - s1 * (s1 * t2 - s2 * t1) + t0 * (s1 * s3 - s2 * s2);
    let (c0, c1, c2) = (d0 / det, d1 / det, d2 / det);

    if c2 >= -1e-12 {
        return Err(TimetagError::FitNotConcave);
    }
    let sigma = (-1.0 / (2.0 * c2)).sqrt();
    let tau0 = x0 - c1 / (2.0 * c2);
    let amplitude = (c0 - c1 * c1 / (4.0 * c2)).exp();
    if !sigma.is_finite() || sigma <= 0.0 || sigma > f64::from(hist.range) {
        return Err(TimetagError::UnusableWidth(sigma));
    }

    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let u = x - x0;
        let fit = c0 + c1 * u + c2 * u * u;
        ss += (y - fit) * (y - fit);
    }
    Ok(PeakFit {
        window: CoincidenceWindow::new(tau0, sigma)?,
        amplitude,
        residual_rms: (ss / n as f64).sqrt(),
        n_bins_fit: n,
    })
}

/// Greedy earliest-match one-to-one coincidence finder: walking Alice's
/// clicks in time order, each takes the earliest unused Bob click with
/// t_B − t_A inside the window. Returns (alice index, bob index) pairs.
pub fn find_coincidences(
    alice: &[TimeTag],
    bob: &[TimeTag],
    window: &CoincidenceWindow,
) -> Vec<(u64, u64)> {
    let h = window.half_width();
    let mut out = Vec::new();
    let mut base = 0usize;
    for a in alice {
        let lo = a.t as f64 + window.tau0 - h;
        let hi = a.t as f64 + window.tau0 + h;
        while base < bob.len() && (bob[base].t as f64) < lo {
            base += 1;
        }
        if base < bob.len() && (bob[base].t as f64) <= hi {
            out.push((a.index, bob[base].index));
            base += 1;
        }
    }
    out
}

/// Assigns key bits to both sides of each coincidence from the private
/// detector identities.
pub fn assemble_key(
    coincidences: &[(u64, u64)],
    alice: &[DetectionRecord],
    bob: &[DetectionRecord],
) -> Result<(Vec<u8>, Vec<u8>), TimetagError> {
    let mut a_bits = Vec::with_capacity(coincidences.len());
    let mut b_bits = Vec::with_capacity(coincidences.len());
    for &(ia, ib) in coincidences {
        let ra = alice
            .get(ia as usize)
            .ok_or_else(|| TimetagError::InvalidParameter(format!("alice index {ia} out of range")))?;
        let rb = bob
            .get(ib as usize)
            .ok_or_else(|| TimetagError::InvalidParameter(format!("bob index {ib} out of range")))?;
        if !ra.detector.is_alice() {
            return Err(TimetagError::WrongSide { index: ia, detector: ra.detector });
        }
        if rb.detector.is_alice() {
            return Err(TimetagError::WrongSide { index: ib, detector: rb.detector });
        }
        a_bits.push(ra.detector.bit());
        b_bits.push(rb.detector.bit());
    }
    Ok((a_bits, b_bits))
}

// ── File formats ──────────────────────────────────────────────────────
//
// Event stream: CSV `index,t_ticks,detector`, one record per line.
// Histogram: CSV `lag_ticks,count_d12,count_d03,count_d13,count_d02`.

pub const EVENTS_CSV_HEADER: &str = "index,t_ticks,detector";
pub const HISTOGRAM_CSV_HEADER: &str = "lag_ticks,count_d12,count_d03,count_d13,count_d02";
pub const TRANSCRIPT_CSV_HEADER: &str = "index,t_ticks";

pub fn write_events_csv(w: &mut impl Write, stream: &[DetectionRecord]) -> Result<(), TimetagError> {
    writeln!(w, "{EVENTS_CSV_HEADER}")?;
    for r in stream {
        writeln!(w, "{},{},{}", r.index, r.t, r.detector.name())?;
    }
    Ok(())
}

pub fn read_events_csv(r: &mut impl BufRead) -> Result<Vec<DetectionRecord>, TimetagError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| TimetagError::MalformedCsv { line: 1, reason: "empty file".into() })?;
    if header.trim() != EVENTS_CSV_HEADER {
        return Err(TimetagError::MalformedCsv { line: 1, reason: format!("bad header `{header}`") });
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |what: &'static str| -> Result<String, TimetagError> {
            parts
                .next()
                .map(str::to_owned)
                .ok_or_else(|| TimetagError::MalformedCsv {
                    line: k + 2,
                    reason: format!("missing {what}"),
                })
        };
        let index = field("index")?.trim().parse().map_err(|e| {
            TimetagError::MalformedCsv { line: k + 2, reason: format!("index: {e}") }
        })?;
        let t = field("t_ticks")?.trim().parse().map_err(|e| {
            TimetagError::MalformedCsv { line: k + 2, reason: format!("t_ticks: {e}") }
        })?;
        let det = field("detector")?;
        let detector = Detector::parse(det.trim()).ok_or_else(|| TimetagError::MalformedCsv {
            line: k + 2,
            reason: format!("unknown detector `{det}`"),
        })?;
        out.push(DetectionRecord { index, t, detector });
    }
    Ok(out)
}

pub fn write_histogram_csv(w: &mut impl Write, hist: &G2Histogram) -> Result<(), TimetagError> {
    writeln!(w, "{HISTOGRAM_CSV_HEADER}")?;
    for bin in 0..hist.n_bins() {
        writeln!(
            w,
            "{},{},{},{},{}",
            hist.lag_lo(bin),
            hist.counts[0][bin],
            hist.counts[1][bin],
            hist.counts[2][bin],
            hist.counts[3][bin],
        )?;
    }
    Ok(())
}

pub fn read_histogram_csv(r: &mut impl BufRead) -> Result<G2Histogram, TimetagError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| TimetagError::MalformedCsv { line: 1, reason: "empty file".into() })?;
    if header.trim() != HISTOGRAM_CSV_HEADER {
        return Err(TimetagError::MalformedCsv { line: 1, reason: format!("bad header `{header}`") });
    }
    let mut lags: Vec<i64> = Vec::new();
    let mut counts: [Vec<u64>; 4] = std::array::from_fn(|_| Vec::new());
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(TimetagError::MalformedCsv { line: k + 2, reason: "expected 5 columns".into() });
        }
        let lag = parts[0].trim().parse().map_err(|e| TimetagError::MalformedCsv {
            line: k + 2,
            reason: format!("lag: {e}"),
        })?;
        lags.push(lag);
        for (c, p) in counts.iter_mut().zip(&parts[1..]) {
            c.push(p.trim().parse().map_err(|e| TimetagError::MalformedCsv {
                line: k + 2,
                reason: format!("count: {e}"),
            })?);
        }
    }
    if lags.is_empty() {
        return Err(TimetagError::MalformedCsv { line: 2, reason: "no bins".into() });
    }
    let bin_width = if lags.len() > 1 { (lags[1] - lags[0]) as u32 } else { 1 };
    let range = (-lags[0]) as u32;
    Ok(G2Histogram { bin_width: bin_width.max(1), range, counts })
}

pub fn write_transcript_csv(w: &mut impl Write, tags: &[TimeTag]) -> Result<(), TimetagError> {
    writeln!(w, "{TRANSCRIPT_CSV_HEADER}")?;
    for tag in tags {
        writeln!(w, "{},{}", tag.index, tag.t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> EventGenConfig {
        EventGenConfig {
            jitter_sigma: 0.0,
            bob_delay: 100,
            dark_rates: [0.0; 4],
            duration: 1_000_000,
            seed,
        }
    }

    #[test]
    fn empty_schedule_gives_empty_streams() {
        let (a, b, t) = generate_events(&[], &cfg(1)).unwrap();
        assert!(a.is_empty() && b.is_empty() && t.is_empty());
    }

    #[test]
    fn noiseless_pairs_land_at_delay() {
        let bits: Vec<u8> = (0..1000).map(|k| (k % 2) as u8).collect();
        let schedule = schedule_from_bits(&bits, 1000, 500);
        let (a, b, truth) = generate_events(&schedule, &cfg(2)).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(b.len(), 1000);
        for tr in &truth {
            let ta = a[tr.alice_index as usize].t;
            let tb = b[tr.bob_index as usize].t;
            assert_eq!(tb - ta, 100);
        }
        // Streams sorted, indexes strictly increasing from 0.
        for (k, r) in a.iter().enumerate() {
            assert_eq!(r.index, k as u64);
        }
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn g2_single_pair_counts_once_at_lag_zero() {
        let a = vec![DetectionRecord { index: 0, t: 500, detector: Detector::D1 }];
        let b = vec![DetectionRecord { index: 0, t: 500, detector: Detector::D2 }];
        let h = g2_histogram(&a, &b, 1, 64).unwrap();
        let bin = h.bin_for_lag(0).unwrap();
        assert_eq!(h.channel(PairChannel::D12)[bin], 1);
        assert_eq!(h.channel(PairChannel::D12).iter().sum::<u64>(), 1);
        assert_eq!(h.channel(PairChannel::D03).iter().sum::<u64>(), 0);
    }

    #[test]
    fn g2_mode_at_planted_lag() {
        let bits = vec![0u8; 400];
        let schedule = schedule_from_bits(&bits, 1000, 1000);
        let (a, b, _) = generate_events(&schedule, &cfg(3)).unwrap();
        let h = g2_histogram(&a, &b, 1, 256).unwrap();
        let d03 = h.channel(PairChannel::D03);
        let mode = d03.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        assert_eq!(h.lag_lo(mode), 100);
    }

    #[test]
    fn fit_recovers_exact_gaussian() {
        // Analytic bins with a large amplitude: recovery to better than
        // 1e-6 relative despite integer rounding.
        let range = 2048u32;
        let n_bins = (2 * range + 1) as usize;
        let (tau0, sigma, amp) = (1000.0, 50.0, 1.0e9);
        let mut h = G2Histogram {
            bin_width: 1,
            range,
            counts: std::array::from_fn(|_| vec![0u64; n_bins]),
        };
        for bin in 0..n_bins {
            let x = h.bin_center(bin);
            let v = amp * (-(x - tau0) * (x - tau0) / (2.0 * sigma * sigma)).exp();
            h.counts[0][bin] = v.round() as u64;
        }
        let fit = fit_gaussian_peak(&h, ChannelSelector::One(PairChannel::D12), 50).unwrap();
        assert!((fit.window.tau0 - tau0).abs() / tau0 < 1e-6, "tau0 {}", fit.window.tau0);
        assert!((fit.window.sigma - sigma).abs() / sigma < 1e-6, "sigma {}", fit.window.sigma);
        assert!((fit.amplitude - amp).abs() / amp < 1e-4);
    }

    #[test]
    fn fit_fails_on_flat_histogram() {
        let range = 512u32;
        let n_bins = (2 * range + 1) as usize;
        let h = G2Histogram {
            bin_width: 1,
            range,
            counts: std::array::from_fn(|_| vec![60u64; n_bins]),
        };
        assert!(matches!(
            fit_gaussian_peak(&h, ChannelSelector::Sum, 50),
            Err(TimetagError::FitNotConcave)
        ));
    }

    #[test]
    fn fit_fails_on_starved_histogram() {
        let h = g2_histogram(&[], &[], 1, 128).unwrap();
        assert!(matches!(
            fit_gaussian_peak(&h, ChannelSelector::Sum, 50),
            Err(TimetagError::InsufficientCounts { .. })
        ));
    }

    #[test]
    fn coincidences_empty_when_windows_disjoint() {
        let a = vec![TimeTag { index: 0, t: 100 }];
        let b = vec![TimeTag { index: 0, t: 10_000 }];
        let w = CoincidenceWindow::new(0.0, 5.0).unwrap();
        assert!(find_coincidences(&a, &b, &w).is_empty());
    }

    #[test]
    fn coincidences_earliest_match_on_contention() {
        // Two Alice clicks bracket one Bob click: the earlier one wins.
        let a = vec![TimeTag { index: 0, t: 98 }, TimeTag { index: 1, t: 102 }];
        let b = vec![TimeTag { index: 0, t: 100 }];
        let w = CoincidenceWindow::new(0.0, 3.0).unwrap();
        let m = find_coincidences(&a, &b, &w);
        assert_eq!(m, vec![(0, 0)]);
    }

    #[test]
    fn assemble_key_all_ones() {
        let a = vec![DetectionRecord { index: 0, t: 1, detector: Detector::D1 }];
        let b = vec![DetectionRecord { index: 0, t: 1, detector: Detector::D2 }];
        let (ka, kb) = assemble_key(&[(0, 0)], &a, &b).unwrap();
        assert_eq!(ka, vec![1]);
        assert_eq!(kb, vec![1]);
    }

    #[test]
    fn assemble_key_rejects_wrong_side() {
        let a = vec![DetectionRecord { index: 0, t: 1, detector: Detector::D2 }];
        let b = vec![DetectionRecord { index: 0, t: 1, detector: Detector::D3 }];
        assert!(matches!(
            assemble_key(&[(0, 0)], &a, &b),
            Err(TimetagError::WrongSide { .. })
        ));
    }

    #[test]
    fn transcript_has_no_detectors() {
        let a = vec![DetectionRecord { index: 0, t: 42, detector: Detector::D1 }];
        let tags = public_transcript(&a);
        let mut buf = Vec::new();
        write_transcript_csv(&mut buf, &tags).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains("D1"));
        assert!(text.contains("0,42"));
    }

    #[test]
    fn events_csv_round_trip() {
        let bits = vec![1u8, 0, 1];
        let schedule = schedule_from_bits(&bits, 50, 10);
        let (a, _, _) = generate_events(&schedule, &cfg(9)).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &a).unwrap();
        let back = read_events_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(a, back);
        assert!(read_events_csv(&mut "bogus\n".as_bytes()).is_err());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let bits = vec![0u8; 50];
        let schedule = schedule_from_bits(&bits, 1000, 700);
        let (a, b, _) = generate_events(&schedule, &cfg(10)).unwrap();
        let h = g2_histogram(&a, &b, 1, 256).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h).unwrap();
        let back = read_histogram_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn poisson_schedule_mean_pairs() {
        let bits = vec![0u8; 2000];
        let (schedule, expanded) = schedule_poisson(&bits, 9.0, 0, 10_000, 21).unwrap();
        assert_eq!(schedule.len(), expanded.len());
        let mean = schedule.len() as f64 / bits.len() as f64;
        let sigma = (9.0f64 / bits.len() as f64).sqrt();
        assert!((mean - 9.0).abs() < 3.0 * sigma, "mean {mean}");
        assert!(schedule.windows(2).all(|w| w[0].emission_t <= w[1].emission_t));
    }
}
