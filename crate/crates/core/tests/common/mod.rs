//! Independent numerical oracles shared by the integration tests. These
//! deliberately avoid the closed forms under test: overlaps come from
//! grid quadrature, eigenvalues from the characteristic polynomial, and
//! coincidence matching from an O(n²) scan.

#![allow(dead_code)]

use num_complex::Complex;

pub type C64 = Complex<f64>;

/// Normalized Gaussian profile with tilt phase, evaluated at `u`:
/// f(u) = (2/πw²)^{1/4} exp(−u²/w²) exp(−i q0 u). The tilt sign is the
/// one whose shifted-profile inner products reproduce
/// exp(i q0 (s2 − s1)).
fn profile(u: f64, w: f64, q0: f64) -> C64 {
    let norm = (2.0 / (std::f64::consts::PI * w * w)).powf(0.25);
    let env = (-u * u / (w * w)).exp();
    Complex::from_polar(norm * env, -q0 * u)
}

/// ⟨f_{s1}|f_{s2}⟩ by composite Simpson quadrature on a fine grid.
pub fn overlap_quadrature(s1: f64, s2: f64, w: f64, q0: f64) -> C64 {
    let center = 0.5 * (s1 + s2);
    let half = 0.5 * (s1 - s2).abs() + 10.0 * w;
    let n = 40_000usize; // even
    let h = 2.0 * half / n as f64;
    let f = |y: f64| profile(y - s1, w, q0).conj() * profile(y - s2, w, q0);
    let mut acc = f(center - half) + f(center + half);
    for k in 1..n {
        let y = center - half + h * k as f64;
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(y) * weight;
    }
    acc * (h / 3.0)
}

/// γ₁ = ∫ |f(y+2d) + f(y−2d)|² dy by Simpson quadrature (untilted).
pub fn gamma1_quadrature(d: f64, w: f64) -> f64 {
    let half = 2.0 * d.abs() + 10.0 * w;
    let n = 40_000usize;
    let h = 2.0 * half / n as f64;
    let f = |y: f64| {
        let v = profile(y + 2.0 * d, w, 0.0) + profile(y - 2.0 * d, w, 0.0);
        v.norm_sqr()
    };
    let mut acc = f(-half) + f(half);
    for k in 1..n {
        let y = -half + h * k as f64;
        acc += f(y) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// γ₂ = ∫ f*(y)[f(y+2d) + f(y−2d)] dy by Simpson quadrature (untilted).
pub fn gamma2_quadrature(d: f64, w: f64) -> f64 {
    let half = 2.0 * d.abs() + 10.0 * w;
    let n = 40_000usize;
    let h = 2.0 * half / n as f64;
    let f = |y: f64| {
        profile(y, w, 0.0).conj() * (profile(y + 2.0 * d, w, 0.0) + profile(y - 2.0 * d, w, 0.0))
    };
    let mut acc = f(-half) + f(half);
    for k in 1..n {
        let y = -half + h * k as f64;
        acc += f(y) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (acc * (h / 3.0)).re
}

/// Eigenvalues of a 2×2 Hermitian matrix from the characteristic
/// polynomial λ² − tr·λ + det = 0, sorted descending.
pub fn eig_char_poly(m: &[[C64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0].re + m[1][1].re;
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

/// Random density matrix from a Bloch vector of length ≤ 1.
pub fn random_density(rng: &mut impl rand::Rng) -> dakd_core::DensityMatrix64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let z: f64 = rng.gen_range(-1.0..1.0);
        if x * x + y * y + z * z <= 1.0 {
            let m = [
                [
                    Complex::new(0.5 * (1.0 + z), 0.0),
                    Complex::new(0.5 * x, -0.5 * y),
                ],
                [
                    Complex::new(0.5 * x, 0.5 * y),
                    Complex::new(0.5 * (1.0 - z), 0.0),
                ],
            ];
            return dakd_core::DensityMatrix64::new(m).expect("Bloch ball state");
        }
    }
}

/// O(n²) reference for the greedy earliest-match coincidence rule.
pub fn brute_force_coincidences(
    alice: &[dakd_core::timetag::TimeTag],
    bob: &[dakd_core::timetag::TimeTag],
    window: &dakd_core::timetag::CoincidenceWindow,
) -> Vec<(u64, u64)> {
    let h = window.half_width();
    let mut used = vec![false; bob.len()];
    let mut out = Vec::new();
    for a in alice {
        for (j, b) in bob.iter().enumerate() {
            if used[j] {
                continue;
            }
            if (b.t as f64 - a.t as f64 - window.tau0).abs() <= h {
                used[j] = true;
                out.push((a.index, b.index));
                break;
            }
        }
    }
    out
}

/// Three binomial standard deviations around probability `p` over `n`
/// trials, in units of the empirical frequency.
pub fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Rényi information evaluated literally from the binary-channel sums
/// with uniform priors and symmetric error probability `p`:
/// −log₂ Σ_b P(b)² + Σ_e P(e) log₂ Σ_b P(b|e)².
pub fn renyi_direct_sum(p: f64) -> f64 {
    let prior: f64 = 0.5f64.powi(2) + 0.5f64.powi(2);
    let mut total = -prior.log2();
    for _e in 0..2 {
        let cond: f64 = (1.0 - p) * (1.0 - p) + p * p;
        total += 0.5 * cond.log2();
    }
    total
}
