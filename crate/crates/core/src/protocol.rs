//! Seeded Monte Carlo execution of the BB84 protocol with the
//! decoherence-assisted scheme.
//!
//! Each round draws Alice's basis/bit/displacement and Bob's
//! basis/displacement, pushes the state through the (possibly attacked)
//! channel, samples Bob's detector, and applies detector noise.
//! Reconciliation keeps exactly the rounds with matching basis *and*
//! matching displacement, so the expected kept fraction is
//! 1/(2·|d_values|).
//!
//! Randomness: one master seed; round `i` uses ChaCha stream `i + 2`,
//! stream 0 is reserved for QBER sampling. Rounds are therefore
//! independent and the whole run is reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    attack_joint_state, bob_outcome_split, helstrom_measurement, EveStateSet, ProbeStrength,
};
use crate::channel::{bob_state_for, ChannelSetting, PolBasis};
use crate::qmath::{expectation, DensityMatrix2, GaussianMode, MathError, Matrix2};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("QBER sample is empty")]
    EmptySample,
    #[error("key lengths differ: {a} vs {b}")]
    KeyLengthMismatch { a: usize, b: usize },
}

/// Detector imperfections applied to Bob's recorded bit. A dark count
/// replaces the bit with a uniform one (extra flip probability p/2); a
/// polarization misalignment of θ flips it with probability sin²θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub dark_count_prob: f64,
    pub pol_misalignment_rad: f64,
}

impl NoiseModel {
    pub const OFF: NoiseModel = NoiseModel {
        dark_count_prob: 0.0,
        pol_misalignment_rad: 0.0,
    };
}

impl Default for NoiseModel {
    /// Calibrated to emulate the ≈3.9% baseline QBER of a real bench:
    /// 0.98·sin²(0.173) + 0.02/2 ≈ 0.039.
    fn default() -> Self {
        Self {
            dark_count_prob: 0.02,
            pol_misalignment_rad: 0.173,
        }
    }
}

/// Default public displacement list, mm. Alice and Bob each draw
/// uniformly from the configured list every round.
pub const DEFAULT_D_VALUES_MM: [f64; 4] = [0.0, 0.2, 0.4, 0.6];

/// Entangling-probe attack settings. Eve interacts between the two
/// displacers with the round's actual displacements; for her Helstrom
/// measurement she uses the round's reconciled displacement unless
/// `measurement_displacement_mm` pins a different assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Probe strength S ∈ [0, 1].
    pub strength: f64,
    #[serde(default)]
    pub measurement_displacement_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_rounds: usize,
    /// Public list of displacements both parties draw from, mm.
    pub d_values_mm: Vec<f64>,
    pub mode: GaussianMode<f64>,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
    pub noise: NoiseModel,
    /// Fraction of the sifted key disclosed for QBER estimation, (0, 1].
    pub qber_sample_fraction: f64,
    /// Drop disclosed bits from the final keys (off by default: the
    /// proof-of-principle keeps every sifted bit).
    #[serde(default)]
    pub discard_disclosed: bool,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_rounds == 0 {
            return Err(ProtocolError::InvalidConfig("n_rounds must be ≥ 1".into()));
        }
        if self.d_values_mm.is_empty() {
            return Err(ProtocolError::InvalidConfig("d_values_mm must be nonempty".into()));
        }
        if self.d_values_mm.iter().any(|d| !d.is_finite()) {
            return Err(ProtocolError::InvalidConfig("d_values_mm must be finite".into()));
        }
        GaussianMode::new(self.mode.w, self.mode.q0)?;
        if let Some(a) = &self.attack {
            ProbeStrength::new(a.strength)?;
            if let Some(d) = a.measurement_displacement_mm {
                if !d.is_finite() {
                    return Err(ProtocolError::InvalidConfig(
                        "measurement_displacement_mm must be finite".into(),
                    ));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.noise.dark_count_prob) {
            return Err(ProtocolError::InvalidConfig(
                "dark_count_prob must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.noise.pol_misalignment_rad) {
            return Err(ProtocolError::InvalidConfig(
                "pol_misalignment_rad must lie in [0, π/2]".into(),
            ));
        }
        if !(self.qber_sample_fraction > 0.0 && self.qber_sample_fraction <= 1.0) {
            return Err(ProtocolError::InvalidConfig(
                "qber_sample_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One protocol round. `kept` holds exactly when bases and displacements
/// both match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRound {
    pub alice_basis: PolBasis,
    pub alice_bit: u8,
    pub alice_d: f64,
    pub bob_basis: PolBasis,
    pub bob_d: f64,
    pub bob_bit: u8,
    pub eve_bit: Option<u8>,
    pub kept: bool,
}

/// Sifted key: bit string plus the round index each bit came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub bits: Vec<u8>,
    pub round_indices: Vec<usize>,
}

impl Key {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect()
    }
}

/// Error statistics over the disclosed sample. `total` counts disclosed
/// positions; per-basis counts sum to it. With no HV (DA) positions in
/// the sample the per-basis rate reports 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub total: usize,
    pub errors: usize,
    pub qber: f64,
    pub qber_hv: f64,
    pub qber_da: f64,
    pub hv_total: usize,
    pub hv_errors: usize,
    pub da_total: usize,
    pub da_errors: usize,
    /// 1.96·√(q(1−q)/total).
    pub ci95: f64,
    /// Key positions disclosed for the estimate.
    pub disclosed: Vec<usize>,
}

impl QberReport {
    fn empty() -> Self {
        Self {
            total: 0,
            errors: 0,
            qber: 0.0,
            qber_hv: 0.0,
            qber_da: 0.0,
            hv_total: 0,
            hv_errors: 0,
            da_total: 0,
            da_errors: 0,
            ci95: 0.0,
            disclosed: Vec::new(),
        }
    }
}

/// Result of a protocol run. `eve_key` is present only under attack.
/// Zero kept rounds yields empty keys and a zeroed report.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub alice_key: Key,
    pub bob_key: Key,
    pub eve_key: Option<Key>,
    pub report: QberReport,
    pub rounds: Vec<ProtocolRound>,
}

/// Samples a measurement of `rho` in `basis`; bit 0 is the basis' first
/// state (H or D).
pub fn sample_measurement(
    rho: &DensityMatrix2<f64>,
    basis: PolBasis,
    rng: &mut impl Rng,
) -> Result<u8, ProtocolError> {
    let p0 = rho.born_probability(&basis.state_for_bit(0).ket_hv())?;
    Ok(u8::from(!rng.gen_bool(p0.clamp(0.0, 1.0))))
}

/// Applies detector noise to a recorded bit. Identity when both noise
/// parameters are zero.
pub fn apply_noise(bit: u8, noise: &NoiseModel, rng: &mut impl Rng) -> u8 {
    let mut b = bit;
    let p_flip = noise.pol_misalignment_rad.sin().powi(2);
    if rng.gen_bool(p_flip.clamp(0.0, 1.0)) {
        b ^= 1;
    }
    if rng.gen_bool(noise.dark_count_prob.clamp(0.0, 1.0)) {
        b = rng.gen_range(0..2u8);
    }
    b
}

/// Indices of the rounds reconciliation keeps: matching basis and
/// matching displacement.
pub fn sift(rounds: &[ProtocolRound]) -> Vec<usize> {
    rounds
        .iter()
        .enumerate()
        .filter(|(_, r)| r.alice_basis == r.bob_basis && r.alice_d == r.bob_d)
        .map(|(i, _)| i)
        .collect()
}

/// Estimates the QBER from a random disclosed sample of the two keys.
/// `bases[k]` is the basis key position `k` was measured in.
pub fn estimate_qber(
    alice_bits: &[u8],
    bob_bits: &[u8],
    bases: &[PolBasis],
    sample_fraction: f64,
    rng: &mut impl Rng,
) -> Result<QberReport, ProtocolError> {
    if alice_bits.len() != bob_bits.len() || alice_bits.len() != bases.len() {
        return Err(ProtocolError::KeyLengthMismatch {
            a: alice_bits.len(),
            b: bob_bits.len(),
        });
    }
    let n = alice_bits.len();
    if n == 0 {
        return Err(ProtocolError::EmptySample);
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(ProtocolError::InvalidConfig(
            "sample fraction must lie in (0, 1]".into(),
        ));
    }
    let m = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut disclosed = rand::seq::index::sample(rng, n, m).into_vec();
    disclosed.sort_unstable();

    let mut errors = 0usize;
    let mut hv = (0usize, 0usize);
    let mut da = (0usize, 0usize);
    for &k in &disclosed {
        let err = alice_bits[k] != bob_bits[k];
        errors += usize::from(err);
        let slot = match bases[k] {
            PolBasis::HV => &mut hv,
            PolBasis::DA => &mut da,
        };
        slot.0 += 1;
        slot.1 += usize::from(err);
    }
    let qber = errors as f64 / m as f64;
    let rate = |t: usize, e: usize| if t == 0 { 0.0 } else { e as f64 / t as f64 };
    Ok(QberReport {
        total: m,
        errors,
        qber,
        qber_hv: rate(hv.0, hv.1),
        qber_da: rate(da.0, da.1),
        hv_total: hv.0,
        hv_errors: hv.1,
        da_total: da.0,
        da_errors: da.1,
        ci95: 1.96 * (qber * (1.0 - qber) / m as f64).sqrt(),
        disclosed,
    })
}

/// Eve's Helstrom projector pair for one (basis, displacement) cell, or
/// `None` when the two states coincide and she must flip a coin.
type EveProjectors = Option<[Matrix2<f64>; 2]>;

fn eve_projector_table(
    attack: &AttackConfig,
    d_values: &[f64],
    mode: &GaussianMode<f64>,
) -> Result<Vec<[EveProjectors; 2]>, ProtocolError> {
    let strength = ProbeStrength::new(attack.strength)?;
    d_values
        .iter()
        .map(|&d| {
            let d_meas = attack.measurement_displacement_mm.unwrap_or(d);
            let set = EveStateSet::closed_form(strength, d_meas, mode)?;
            let mut per_basis: [EveProjectors; 2] = [None, None];
            for (k, basis) in [PolBasis::HV, PolBasis::DA].into_iter().enumerate() {
                let (r1, r2) = set.pair(basis);
                per_basis[k] = match helstrom_measurement(r1, r2) {
                    Ok(p) => Some(p),
                    Err(MathError::DegenerateDiscrimination) => None,
                    Err(e) => return Err(ProtocolError::Math(e)),
                };
            }
            Ok(per_basis)
        })
        .collect()
}

fn basis_index(b: PolBasis) -> usize {
    match b {
        PolBasis::HV => 0,
        PolBasis::DA => 1,
    }
}

/// Runs the full protocol. Deterministic given the config (the seed is
/// part of it).
pub fn run_protocol(config: &ProtocolConfig) -> Result<RunOutcome, ProtocolError> {
    config.validate()?;
    let mode = config.mode;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let strength = config
        .attack
        .as_ref()
        .map(|a| ProbeStrength::new(a.strength))
        .transpose()?;
    let projectors = config
        .attack
        .as_ref()
        .map(|a| eve_projector_table(a, &config.d_values_mm, &mode))
        .transpose()?;

    let mut rounds = Vec::with_capacity(config.n_rounds);
    for i in 0..config.n_rounds {
        let mut rng = base.clone();
        rng.set_stream(i as u64 + 2);

        let alice_basis = if rng.gen_bool(0.5) { PolBasis::HV } else { PolBasis::DA };
        let alice_bit: u8 = rng.gen_range(0..2);
        let a_idx = rng.gen_range(0..config.d_values_mm.len());
        let bob_basis = if rng.gen_bool(0.5) { PolBasis::HV } else { PolBasis::DA };
        let b_idx = rng.gen_range(0..config.d_values_mm.len());
        let d_a = config.d_values_mm[a_idx];
        let d_b = config.d_values_mm[b_idx];
        let prepared = alice_basis.state_for_bit(alice_bit);
        let kept = alice_basis == bob_basis && d_a == d_b;

        let (quantum_bit, eve_state) = match strength {
            None => {
                let rho = bob_state_for(prepared, &ChannelSetting::new(d_a, d_b), &mode)?;
                (sample_measurement(&rho, bob_basis, &mut rng)?, None)
            }
            Some(st) => {
                let joint = attack_joint_state(prepared, d_a, d_b, st, mode);
                let outcomes = bob_outcome_split(&joint, bob_basis)?;
                let bit = u8::from(rng.gen_bool(outcomes[1].probability.clamp(0.0, 1.0)));
                (bit, outcomes[usize::from(bit)].eve_state)
            }
        };
        let bob_bit = apply_noise(quantum_bit, &config.noise, &mut rng);

        // Eve measures after reconciliation, on kept rounds only; her
        // correlation is with Bob's quantum outcome, not the noisy record.
        let eve_bit = match (&projectors, kept) {
            (Some(table), true) => {
                let cell = &table[a_idx][basis_index(alice_basis)];
                Some(match (cell, eve_state) {
                    (Some(proj), Some(rho)) => {
                        let p0 = expectation(&proj[0], &rho).clamp(0.0, 1.0);
                        u8::from(!rng.gen_bool(p0))
                    }
                    _ => rng.gen_range(0..2u8),
                })
            }
            _ => None,
        };

        rounds.push(ProtocolRound {
            alice_basis,
            alice_bit,
            alice_d: d_a,
            bob_basis,
            bob_d: d_b,
            bob_bit,
            eve_bit,
            kept,
        });
    }

    let kept_idx = sift(&rounds);
    if kept_idx.is_empty() {
        return Ok(RunOutcome {
            alice_key: Key { bits: Vec::new(), round_indices: Vec::new() },
            bob_key: Key { bits: Vec::new(), round_indices: Vec::new() },
            eve_key: None,
            report: QberReport::empty(),
            rounds,
        });
    }

    let mut alice_bits = Vec::with_capacity(kept_idx.len());
    let mut bob_bits = Vec::with_capacity(kept_idx.len());
    let mut eve_bits = Vec::with_capacity(kept_idx.len());
    let mut bases = Vec::with_capacity(kept_idx.len());
    for &i in &kept_idx {
        alice_bits.push(rounds[i].alice_bit);
        bob_bits.push(rounds[i].bob_bit);
        if let Some(e) = rounds[i].eve_bit {
            eve_bits.push(e);
        }
        bases.push(rounds[i].alice_basis);
    }

    let mut sample_rng = base.clone();
    sample_rng.set_stream(0);
    let report = estimate_qber(
        &alice_bits,
        &bob_bits,
        &bases,
        config.qber_sample_fraction,
        &mut sample_rng,
    )?;

    let keep_pos: Vec<bool> = if config.discard_disclosed {
        let mut keep = vec![true; kept_idx.len()];
        for &k in &report.disclosed {
            keep[k] = false;
        }
        keep
    } else {
        vec![true; kept_idx.len()]
    };

    let filter_key = |bits: &[u8]| -> Key {
        let mut out = Key { bits: Vec::new(), round_indices: Vec::new() };
        for (k, &b) in bits.iter().enumerate() {
            if keep_pos[k] {
                out.bits.push(b);
                out.round_indices.push(kept_idx[k]);
            }
        }
        out
    };

    let eve_key = if config.attack.is_some() && eve_bits.len() == kept_idx.len() {
        Some(filter_key(&eve_bits))
    } else {
        None
    };

    Ok(RunOutcome {
        alice_key: filter_key(&alice_bits),
        bob_key: filter_key(&bob_bits),
        eve_key,
        report,
        rounds,
    })
}

/// One point of a fixed-displacement QBER scan (the Fig.-5-style
/// diagnostic): both displacements are pinned, bases and bits stay
/// random, and sifting keeps basis-matched rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub sifted: usize,
    pub errors: usize,
    pub qber: f64,
    pub ci95: f64,
}

/// Monte Carlo QBER at a fixed `(d_a, d_b)` with no attack and no noise.
pub fn qber_scan_point(
    d_a: f64,
    d_b: f64,
    n_rounds: usize,
    mode: &GaussianMode<f64>,
    seed: u64,
) -> Result<ScanPoint, ProtocolError> {
    if n_rounds == 0 {
        return Err(ProtocolError::InvalidConfig("n_rounds must be ≥ 1".into()));
    }
    let setting = ChannelSetting::new(d_a, d_b);
    // Per-preparation error probabilities from the measurement machinery.
    let mut p_err = [[0.0f64; 2]; 2];
    for basis in [PolBasis::HV, PolBasis::DA] {
        for bit in 0..2u8 {
            let prepared = basis.state_for_bit(bit);
            let rho = bob_state_for(prepared, &setting, mode)?;
            let p_match = rho.born_probability(&prepared.ket_hv())?;
            p_err[basis_index(basis)][usize::from(bit)] = (1.0 - p_match).clamp(0.0, 1.0);
        }
    }

    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut sifted = 0usize;
    let mut errors = 0usize;
    for i in 0..n_rounds {
        let mut rng = base.clone();
        rng.set_stream(i as u64 + 2);
        let alice_basis = if rng.gen_bool(0.5) { PolBasis::HV } else { PolBasis::DA };
        let alice_bit: u8 = rng.gen_range(0..2);
        let bob_basis = if rng.gen_bool(0.5) { PolBasis::HV } else { PolBasis::DA };
        if alice_basis != bob_basis {
            continue;
        }
        sifted += 1;
        let p = p_err[basis_index(alice_basis)][usize::from(alice_bit)];
        if rng.gen_bool(p) {
            errors += 1;
        }
    }
    let qber = if sifted == 0 { 0.0 } else { errors as f64 / sifted as f64 };
    let ci95 = if sifted == 0 {
        0.0
    } else {
        1.96 * (qber * (1.0 - qber) / sifted as f64).sqrt()
    };
    Ok(ScanPoint { sifted, errors, qber, ci95 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Polarization;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn ideal_config(n: usize, d_values: Vec<f64>, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            n_rounds: n,
            d_values_mm: d_values,
            mode: GaussianMode::default(),
            attack: None,
            noise: NoiseModel::OFF,
            qber_sample_fraction: 1.0,
            discard_disclosed: false,
            seed,
        }
    }

    #[test]
    fn sample_measurement_deterministic_state() {
        let rho = DensityMatrix2::pure(&Polarization::H.ket_hv()).unwrap();
        let mut r = rng(1);
        for _ in 0..200 {
            assert_eq!(sample_measurement(&rho, PolBasis::HV, &mut r).unwrap(), 0);
        }
    }

    #[test]
    fn sample_measurement_mixed_state_frequency() {
        let rho = DensityMatrix2::maximally_mixed();
        let mut r = rng(7);
        let n = 100_000;
        let ones: u32 = (0..n)
            .map(|_| u32::from(sample_measurement(&rho, PolBasis::DA, &mut r).unwrap()))
            .sum();
        let freq = f64::from(ones) / f64::from(n);
        let sigma = (0.25 / f64::from(n)).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn apply_noise_zero_is_identity() {
        let mut r = rng(3);
        for bit in [0u8, 1u8] {
            for _ in 0..100 {
                assert_eq!(apply_noise(bit, &NoiseModel::OFF, &mut r), bit);
            }
        }
    }

    #[test]
    fn apply_noise_dark_flip_rate() {
        // Pure dark counts: flip probability p/2.
        let noise = NoiseModel { dark_count_prob: 0.3, pol_misalignment_rad: 0.0 };
        let mut r = rng(11);
        let n = 200_000;
        let flips: u32 = (0..n).map(|_| u32::from(apply_noise(0, &noise, &mut r))).sum();
        let freq = f64::from(flips) / f64::from(n);
        let expect = 0.15;
        let sigma = (expect * (1.0 - expect) / f64::from(n)).sqrt();
        assert!((freq - expect).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn sift_matches_predicate() {
        let template = ProtocolRound {
            alice_basis: PolBasis::HV,
            alice_bit: 0,
            alice_d: 0.2,
            bob_basis: PolBasis::HV,
            bob_d: 0.2,
            bob_bit: 0,
            eve_bit: None,
            kept: true,
        };
        let all_match = vec![template; 5];
        assert_eq!(sift(&all_match).len(), 5);

        let mut d_mismatch = template;
        d_mismatch.bob_d = 0.4;
        let mut basis_mismatch = template;
        basis_mismatch.bob_basis = PolBasis::DA;
        let mixed = vec![template, d_mismatch, basis_mismatch, template];
        assert_eq!(sift(&mixed), vec![0, 3]);
    }

    #[test]
    fn estimate_qber_examples() {
        let bases = vec![PolBasis::HV; 10];
        let a = vec![0u8, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let mut r = rng(5);
        let rep = estimate_qber(&a, &a, &bases, 1.0, &mut r).unwrap();
        assert_eq!(rep.qber, 0.0);
        assert_eq!(rep.total, 10);

        let b: Vec<u8> = a.iter().map(|x| x ^ 1).collect();
        let rep = estimate_qber(&a, &b, &bases, 1.0, &mut r).unwrap();
        assert_eq!(rep.qber, 1.0);

        // Planted 10% flips, full sample: exactly 0.10.
        let n = 200;
        let a: Vec<u8> = vec![0; n];
        let mut b = a.clone();
        for k in 0..n / 10 {
            b[k * 10] = 1;
        }
        let bases = vec![PolBasis::DA; n];
        let rep = estimate_qber(&a, &b, &bases, 1.0, &mut r).unwrap();
        assert_eq!(rep.qber, 0.1);
        assert_eq!(rep.da_errors, 20);
        assert_eq!(rep.hv_total, 0);

        assert!(estimate_qber(&[], &[], &[], 1.0, &mut r).is_err());
    }

    #[test]
    fn ideal_run_single_d_gives_zero_qber_and_half_rate() {
        let out = run_protocol(&ideal_config(10_000, vec![0.0], 42)).unwrap();
        assert_eq!(out.report.errors, 0);
        assert_eq!(out.alice_key.bits, out.bob_key.bits);
        let n = out.alice_key.len() as f64;
        // Kept fraction 1/2 within 3σ.
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!((n - 5_000.0).abs() < 3.0 * sigma, "kept {n}");
        assert!(out.eve_key.is_none());
    }

    #[test]
    fn ideal_run_four_d_values_keeps_an_eighth() {
        let out = run_protocol(&ideal_config(10_000, DEFAULT_D_VALUES_MM.to_vec(), 99)).unwrap();
        assert_eq!(out.report.errors, 0);
        let n = out.alice_key.len() as f64;
        let p: f64 = 1.0 / 8.0;
        let sigma = (10_000.0 * p * (1.0 - p)).sqrt();
        assert!((n - 1_250.0).abs() < 3.0 * sigma, "kept {n}");
        // Round invariant: kept flag equals the sift predicate.
        for r in &out.rounds {
            assert_eq!(r.kept, r.alice_basis == r.bob_basis && r.alice_d == r.bob_d);
        }
    }

    #[test]
    fn run_is_deterministic_for_a_seed() {
        let cfg = ideal_config(2_000, vec![0.0, 0.3], 7);
        let a = run_protocol(&cfg).unwrap();
        let b = run_protocol(&cfg).unwrap();
        assert_eq!(a.alice_key, b.alice_key);
        assert_eq!(a.bob_key, b.bob_key);
        assert_eq!(a.report, b.report);
        let mut other = cfg;
        other.seed = 8;
        let c = run_protocol(&other).unwrap();
        assert_ne!(a.alice_key.bits, c.alice_key.bits);
    }

    #[test]
    fn attack_run_reproduces_hv_qber() {
        let cfg = ProtocolConfig {
            n_rounds: 40_000,
            d_values_mm: vec![0.0],
            mode: GaussianMode::untilted(0.8).unwrap(),
            attack: Some(AttackConfig { strength: 0.4, measurement_displacement_mm: None }),
            noise: NoiseModel::OFF,
            qber_sample_fraction: 1.0,
            discard_disclosed: false,
            seed: 4242,
        };
        let out = run_protocol(&cfg).unwrap();
        let rep = &out.report;
        let sigma_hv = (0.08f64 * 0.92 / rep.hv_total as f64).sqrt();
        assert!((rep.qber_hv - 0.08).abs() < 3.0 * sigma_hv, "qber_hv {}", rep.qber_hv);
        let eve = out.eve_key.expect("eve key under attack");
        assert_eq!(eve.len(), out.alice_key.len());
    }

    #[test]
    fn noise_monotonicity() {
        let qber_with = |noise: NoiseModel, seed: u64| {
            let mut cfg = ideal_config(6_000, vec![0.0], seed);
            cfg.noise = noise;
            run_protocol(&cfg).unwrap().report.qber
        };
        let base = qber_with(NoiseModel::OFF, 31);
        let dark = qber_with(NoiseModel { dark_count_prob: 0.2, pol_misalignment_rad: 0.0 }, 31);
        let mis = qber_with(NoiseModel { dark_count_prob: 0.0, pol_misalignment_rad: 0.3 }, 31);
        assert!(base <= dark && base <= mis);
        assert!(dark > 0.05 && mis > 0.05);
    }

    #[test]
    fn discard_disclosed_shrinks_key() {
        let mut cfg = ideal_config(4_000, vec![0.0], 5);
        cfg.qber_sample_fraction = 0.25;
        cfg.discard_disclosed = true;
        let out = run_protocol(&cfg).unwrap();
        let kept_rounds = sift(&out.rounds).len();
        assert_eq!(out.alice_key.len(), kept_rounds - out.report.total);
        assert_eq!(out.alice_key.bits, out.bob_key.bits);
    }

    #[test]
    fn scan_point_matches_analytic() {
        let mode = GaussianMode::new(0.8, 6.87).unwrap();
        let p = qber_scan_point(0.4, 0.1, 40_000, &mode, 77).unwrap();
        let q = crate::channel::qber_analytic(&ChannelSetting::new(0.4, 0.1), &mode).unwrap();
        let sigma = (q * (1.0 - q) / p.sifted as f64).sqrt();
        assert!(p.sifted > 18_000);
        assert!((p.qber - q).abs() < 3.0 * sigma, "mc {} vs analytic {q}", p.qber);
    }

    #[test]
    fn config_validation_errors() {
        let mut cfg = ideal_config(0, vec![0.0], 1);
        assert!(run_protocol(&cfg).is_err());
        cfg = ideal_config(10, vec![], 1);
        assert!(run_protocol(&cfg).is_err());
        cfg = ideal_config(10, vec![0.0], 1);
        cfg.qber_sample_fraction = 0.0;
        assert!(run_protocol(&cfg).is_err());
        cfg = ideal_config(10, vec![0.0], 1);
        cfg.attack = Some(AttackConfig { strength: 1.5, measurement_displacement_mm: None });
        assert!(run_protocol(&cfg).is_err());
    }
}
