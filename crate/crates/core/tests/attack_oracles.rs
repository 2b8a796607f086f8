//! The attack layer against its independent routes: closed-form probe
//! matrices vs numeric project-and-trace construction, Gaussian overlap
//! identities vs quadrature, trace-distance closed forms vs the
//! eigenvalue solver, and Helstrom sampling vs its analytic success rate.

mod common;

use common::{gamma1_quadrature, gamma2_quadrature, renyi_direct_sum, three_sigma};
use dakd_core::attack::{
    attack_qber_da, attack_qber_hv, conditional_error_da, conditional_error_hv,
    eve_density_matrix, helstrom_error_prob, helstrom_measurement, renyi_da, renyi_hv,
    renyi_information, trace_distance_da_closed, trace_distance_hv_closed, EveStateSet,
    ProbeStrength,
};
use dakd_core::channel::Polarization;
use dakd_core::qmath::{expectation, trace_distance, GaussianMode};
use rand::{Rng as _, SeedableRng};

fn strengths() -> Vec<ProbeStrength<f64>> {
    (0..10)
        .map(|k| ProbeStrength::new(0.05 + 0.1 * f64::from(k)).unwrap())
        .collect()
}

fn displacements() -> Vec<f64> {
    (0..10).map(|k| 0.1 * f64::from(k)).collect()
}

#[test]
fn closed_form_matrices_equal_numeric_construction() {
    // Project + trace-out from the joint state vs the closed forms, at
    // every (S, d) on a 10×10 grid, elementwise ≤ 1e-12.
    let mode = GaussianMode::untilted(0.8).unwrap();
    let mut max_err = 0.0f64;
    for st in strengths() {
        for &d in &displacements() {
            let set = EveStateSet::closed_form(st, d, &mode).unwrap();
            for (pol, closed) in [
                (Polarization::H, &set.rho_h),
                (Polarization::V, &set.rho_v),
                (Polarization::D, &set.rho_d),
                (Polarization::A, &set.rho_a),
            ] {
                let numeric = eve_density_matrix(pol, d, st, mode).unwrap().matrix;
                for i in 0..2 {
                    for j in 0..2 {
                        let err = (closed.entry(i, j) - numeric.entry(i, j)).norm();
                        max_err = max_err.max(err);
                    }
                }
            }
        }
    }
    assert!(max_err <= 1e-12, "max elementwise error {max_err:.3e}");
}

#[test]
fn gaussian_identities_against_quadrature() {
    // γ₁ = 2 + 2γ₀⁴ and γ₂ = 2γ₀ (untilted), vs Simpson quadrature.
    let w = 0.8;
    for &d in &displacements() {
        let gamma0 = (-2.0 * d * d / (w * w)).exp();
        let g1 = gamma1_quadrature(d, w);
        let g2 = gamma2_quadrature(d, w);
        assert!((g1 - (2.0 + 2.0 * gamma0.powi(4))).abs() < 1e-10, "γ₁ at d={d}");
        assert!((g2 - 2.0 * gamma0).abs() < 1e-10, "γ₂ at d={d}");

        let mode = GaussianMode::untilted(w).unwrap();
        let set = EveStateSet::closed_form(ProbeStrength::new(0.5).unwrap(), d, &mode).unwrap();
        assert!((set.gamma1 - g1).abs() < 1e-10);
        assert!((set.gamma2.re - g2).abs() < 1e-10);
        assert!(set.gamma2.im.abs() < 1e-14);
        assert!((set.gamma0 - gamma0).abs() < 1e-12);
    }
}

#[test]
fn trace_distance_closed_forms_match_eigen_route() {
    let mode = GaussianMode::untilted(0.8).unwrap();
    for st in strengths() {
        for &d in &displacements() {
            let set = EveStateSet::closed_form(st, d, &mode).unwrap();
            let d_hv = trace_distance(&set.rho_h, &set.rho_v).unwrap();
            assert!((d_hv - trace_distance_hv_closed(st)).abs() <= 1e-12);
            let d_da = trace_distance(&set.rho_d, &set.rho_a).unwrap();
            assert!((d_da - trace_distance_da_closed(st, set.gamma0)).abs() <= 1e-12);
        }
    }
}

#[test]
fn conditional_errors_match_helstrom_route() {
    let mode = GaussianMode::untilted(0.8).unwrap();
    for st in strengths() {
        for &d in &displacements() {
            let set = EveStateSet::closed_form(st, d, &mode).unwrap();
            let p_hv = helstrom_error_prob(&set.rho_h, &set.rho_v).unwrap();
            assert!((p_hv - conditional_error_hv(st)).abs() <= 1e-12);
            let p_da = helstrom_error_prob(&set.rho_d, &set.rho_a).unwrap();
            assert!((p_da - conditional_error_da(st, set.gamma0)).abs() <= 1e-12);
        }
    }
}

#[test]
fn renyi_identity_and_direct_sum() {
    // I = log₂(1 + D²) via the Helstrom error, and the literal Eq.-11
    // style sums, all agree ≤ 1e-12.
    let mode = GaussianMode::untilted(0.8).unwrap();
    for st in strengths() {
        for &d in &[0.0, 0.3, 0.8] {
            let set = EveStateSet::closed_form(st, d, &mode).unwrap();
            for (pair, closed) in [
                ((&set.rho_h, &set.rho_v), renyi_hv(st)),
                ((&set.rho_d, &set.rho_a), renyi_da(st, set.gamma0)),
            ] {
                let dist = trace_distance(pair.0, pair.1).unwrap();
                let p = helstrom_error_prob(pair.0, pair.1).unwrap();
                let via_p = renyi_information(p).unwrap();
                let via_d = (1.0 + dist * dist).log2();
                let via_sums = renyi_direct_sum(p);
                assert!((via_p - via_d).abs() <= 1e-12);
                assert!((via_p - via_sums).abs() <= 1e-12);
                assert!((via_p - closed).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn attack_qber_consistent_with_outcome_probabilities() {
    // Eq.-21/22 values vs the joint-state branch probabilities.
    use dakd_core::attack::{bob_outcome_split, cnot_attack};
    use dakd_core::channel::PolBasis;
    let mode = GaussianMode::untilted(0.8).unwrap();
    for st in strengths() {
        for &d in &displacements() {
            let gamma0 = (-2.0 * d * d / 0.64).exp();
            let joint = cnot_attack(Polarization::H, d, st, mode);
            let hv = bob_outcome_split(&joint, PolBasis::HV).unwrap();
            assert!((hv[1].probability - attack_qber_hv(st)).abs() < 1e-12);
            let joint = cnot_attack(Polarization::D, d, st, mode);
            let da = bob_outcome_split(&joint, PolBasis::DA).unwrap();
            assert!((da[1].probability - attack_qber_da(st, gamma0)).abs() < 1e-12);
            assert!((da[0].probability + da[1].probability - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn helstrom_sampling_matches_success_rate() {
    // Draw one of the two states uniformly, measure with the Helstrom
    // projectors, and compare the empirical success frequency with
    // ½(1 + D) over 10⁵ trials.
    let mode = GaussianMode::<f64>::untilted(0.8).unwrap();
    let st = ProbeStrength::new(0.4f64).unwrap();
    let set = EveStateSet::closed_form(st, 0.25, &mode).unwrap();
    for (r1, r2) in [(&set.rho_h, &set.rho_v), (&set.rho_d, &set.rho_a)] {
        let proj = helstrom_measurement(r1, r2).unwrap();
        let d = trace_distance(r1, r2).unwrap();
        let p_success = 0.5 * (1.0 + d);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(271);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let actual = usize::from(rng.gen_bool(0.5));
            let rho = if actual == 0 { r1 } else { r2 };
            let p0: f64 = expectation(&proj[0], rho).clamp(0.0, 1.0);
            let guess = usize::from(!rng.gen_bool(p0));
            hits += usize::from(guess == actual);
        }
        let freq = hits as f64 / n as f64;
        assert!(
            (freq - p_success).abs() < three_sigma(p_success, n),
            "freq {freq} expected {p_success}"
        );
    }
}
