//! The controllable dephasing channel.
//!
//! Alice's photon carries polarization ⊗ a Gaussian spatial mode. A
//! dephasing displacement `d` shifts the H spatial component by `+d` and
//! the V component by `−d`; tracing out the spatial mode then attenuates
//! the polarization coherences by the overlap of the shifted profiles.
//! Alice applies `U(d_a)`, Bob applies `U(−d_b)`, so only the difference
//! `Δ = d_a − d_b` survives in Bob's reduced state.

use num_complex::Complex;
use num_traits::Zero;

use crate::qmath::{overlap, DensityMatrix2, GaussianMode, MathError, Matrix2};
use crate::scalar::{real, Real};

/// The four BB84 preparation states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

/// Measurement / preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PolBasis {
    HV,
    DA,
}

impl PolBasis {
    /// Bit convention: HV {0→H, 1→V}; DA {0→D, 1→A}.
    pub fn state_for_bit(self, bit: u8) -> Polarization {
        match (self, bit) {
            (PolBasis::HV, 0) => Polarization::H,
            (PolBasis::HV, _) => Polarization::V,
            (PolBasis::DA, 0) => Polarization::D,
            (PolBasis::DA, _) => Polarization::A,
        }
    }

    /// The two basis states in bit order (bit 0 first).
    pub fn states(self) -> [Polarization; 2] {
        [self.state_for_bit(0), self.state_for_bit(1)]
    }
}

impl Polarization {
    pub fn basis(self) -> PolBasis {
        match self {
            Polarization::H | Polarization::V => PolBasis::HV,
            Polarization::D | Polarization::A => PolBasis::DA,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarization::H | Polarization::D => 0,
            Polarization::V | Polarization::A => 1,
        }
    }

    /// Ket coordinates (α, β) in the {H, V} basis.
    pub fn ket_hv<R: Real>(self) -> [Complex<R>; 2] {
        let one = Complex::new(R::one(), R::zero());
        let zero = Complex::<R>::zero();
        let s = Complex::new(real::<R>(std::f64::consts::FRAC_1_SQRT_2), R::zero());
        match self {
            Polarization::H => [one, zero],
            Polarization::V => [zero, one],
            Polarization::D => [s, s],
            Polarization::A => [s, -s],
        }
    }

    /// Expansion onto the channel-basis components {H, V}.
    pub fn components<R: Real>(self) -> Vec<(PolComponent, Complex<R>)> {
        let k = self.ket_hv::<R>();
        let mut out = Vec::with_capacity(2);
        if k[0].norm_sqr() > R::zero() {
            out.push((PolComponent::H, k[0]));
        }
        if k[1].norm_sqr() > R::zero() {
            out.push((PolComponent::V, k[1]));
        }
        out
    }
}

/// One of the two channel-basis polarization components. The dephasing
/// channel is diagonal in this basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolComponent {
    H,
    V,
}

impl PolComponent {
    pub fn polarization(self) -> Polarization {
        match self {
            PolComponent::H => Polarization::H,
            PolComponent::V => Polarization::V,
        }
    }
}

/// Label carried by a [`JointState`] term; tells the dephasing channel
/// which way the term's spatial mode shifts.
pub trait DephasingLabel: Copy + PartialEq {
    /// +1 for the H component, −1 for V.
    fn shift_sign(&self) -> i8;
}

impl DephasingLabel for PolComponent {
    fn shift_sign(&self) -> i8 {
        match self {
            PolComponent::H => 1,
            PolComponent::V => -1,
        }
    }
}

/// One term of a joint polarization ⊗ spatial superposition: a labelled
/// copy of the mode profile shifted to `shift`, weighted by `amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term<L, R: Real> {
    pub label: L,
    pub shift: R,
    pub amp: Complex<R>,
}

/// Finite superposition of labelled, shifted copies of one Gaussian mode.
/// The label type is [`PolComponent`] in the bare channel and a
/// system ⊗ probe pair under the entangling-probe attack.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<L, R: Real> {
    pub terms: Vec<Term<L, R>>,
    pub mode: GaussianMode<R>,
}

impl<L: Copy + PartialEq, R: Real> JointState<L, R> {
    /// Norm via the Gram matrix of mode overlaps; labels are orthogonal.
    pub fn norm(&self) -> Result<R, MathError> {
        let mut acc = R::zero();
        for tj in &self.terms {
            for tk in &self.terms {
                if tj.label == tk.label {
                    let g = overlap(tj.shift, tk.shift, &self.mode)?;
                    acc += (tj.amp.conj() * tk.amp * g).re;
                }
            }
        }
        Ok(acc.max(R::zero()).sqrt())
    }

    /// Merges terms with identical (label, shift) and drops zero weight.
    pub fn simplified(mut self) -> Self {
        let mut merged: Vec<Term<L, R>> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.label == t.label && m.shift == t.shift)
            {
                m.amp += t.amp;
            } else {
                merged.push(t);
            }
        }
        merged.retain(|t| t.amp.norm() > real(1e-15));
        self.terms = merged;
        self
    }
}

impl<L: DephasingLabel, R: Real> JointState<L, R> {
    /// Applies the dephasing displacement `d`: H-side components shift by
    /// `+d`, V-side by `−d`. Unitary; `dephased(d).dephased(−d)` restores
    /// every term.
    pub fn dephased(&self, d: R) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                label: t.label,
                shift: t.shift + d * real::<R>(f64::from(t.label.shift_sign())),
                amp: t.amp,
            })
            .collect();
        Self {
            terms,
            mode: self.mode,
        }
    }
}

/// Prepares the joint state for a polarization at spatial shift 0.
pub fn prepare_joint<R: Real>(pol: Polarization, mode: GaussianMode<R>) -> JointState<PolComponent, R> {
    let terms = pol
        .components::<R>()
        .into_iter()
        .map(|(label, amp)| Term {
            label,
            shift: R::zero(),
            amp,
        })
        .collect();
    JointState { terms, mode }
}

/// Dephasing displacements applied by Alice (`d_a`) and Bob (`d_b`), mm.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelSetting<R: Real> {
    pub d_a: R,
    pub d_b: R,
}

impl<R: Real> ChannelSetting<R> {
    pub fn new(d_a: R, d_b: R) -> Self {
        Self { d_a, d_b }
    }

    /// Residual displacement Δ = d_a − d_b.
    pub fn delta(&self) -> R {
        self.d_a - self.d_b
    }
}

/// Residual coherence γ_c of Bob's polarization state: the overlap of the
/// H and V spatial components after both displacements,
/// `γ_c = overlap(−Δ, +Δ)` with Δ = d_a − d_b. Equals 1 when d_a = d_b.
pub fn coherence_factor<R: Real>(
    setting: &ChannelSetting<R>,
    mode: &GaussianMode<R>,
) -> Result<Complex<R>, MathError> {
    let delta = setting.delta();
    overlap(-delta, delta, mode)
}

/// Bob's reduced polarization density matrix for the input α|H⟩ + β|V⟩:
///
/// ```text
/// ρ = [ |α|²        α* β γ_c* ]
///     [ α β* γ_c    |β|²      ]
/// ```
///
/// Pure when |γ_c| = 1; diagonal when γ_c = 0.
pub fn bob_reduced_state<R: Real>(
    alpha: Complex<R>,
    beta: Complex<R>,
    setting: &ChannelSetting<R>,
    mode: &GaussianMode<R>,
) -> Result<DensityMatrix2<R>, MathError> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - R::one()).abs() > real(crate::qmath::DERIVED_TOL) {
        return Err(MathError::NotNormalized(norm.to_f64().unwrap_or(f64::NAN)));
    }
    let gc = coherence_factor(setting, mode)?;
    let m: Matrix2<R> = [
        [
            Complex::new(alpha.norm_sqr(), R::zero()),
            alpha.conj() * beta * gc.conj(),
        ],
        [
            alpha * beta.conj() * gc,
            Complex::new(beta.norm_sqr(), R::zero()),
        ],
    ];
    DensityMatrix2::new(m)
}

/// Bob's reduced state for one of the four BB84 preparations.
pub fn bob_state_for<R: Real>(
    pol: Polarization,
    setting: &ChannelSetting<R>,
    mode: &GaussianMode<R>,
) -> Result<DensityMatrix2<R>, MathError> {
    let k = pol.ket_hv::<R>();
    bob_reduced_state(k[0], k[1], setting, mode)
}

/// Analytic QBER of the decoherence-assisted protocol without an
/// eavesdropper:
///
/// ```text
/// QBER(d_a, d_b) = ¼ { 1 − exp(−2Δ²/w²) · cos(2 q0 Δ) } = ¼ (1 − Re γ_c)
/// ```
///
/// Zero when d_a = d_b; ¼ under complete decoherence (untilted).
pub fn qber_analytic<R: Real>(
    setting: &ChannelSetting<R>,
    mode: &GaussianMode<R>,
) -> Result<R, MathError> {
    let gc = coherence_factor(setting, mode)?;
    Ok(real::<R>(0.25) * (R::one() - gc.re))
}
