//! The entangling-probe attack, with and without the decoherence-assisted
//! scheme.
//!
//! Eve entangles a probe qubit with the flying qubit through a C-NOT and
//! later discriminates the probe states with the optimal (Helstrom)
//! measurement. Under the dephasing scheme the C-NOT acts between Alice's
//! and Bob's displacers, so Eve's reduced states in the D/A basis pick up
//! the spatial overlap factors γ₁ and γ₂ (γ₁ = 2 + 2γ₀⁴, γ₂ = 2γ₀ for the
//! untilted Gaussian, γ₀ = exp(−2d²/w²)), which is what suppresses her
//! information in that basis.
//!
//! Probe-state matrices are expressed in the ordered {|+⟩, |−⟩} basis.

use num_complex::Complex;
use num_traits::Zero;

use crate::channel::{prepare_joint, DephasingLabel, JointState, PolBasis, PolComponent, Polarization, Term};
use crate::qmath::{
    eig_hermitian_2x2, overlap, DensityMatrix2, GaussianMode, MathError, Matrix2,
};
use crate::scalar::{real, Real};

/// Probe preparation parameter S ∈ [0, 1]; the probe ket is
/// √(1−S²)|+⟩ + S|−⟩. S = 0 leaks nothing and causes no errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeStrength<R: Real> {
    s: R,
}

impl<R: Real> ProbeStrength<R> {
    pub fn new(s: R) -> Result<Self, MathError> {
        if !s.is_finite() || s < R::zero() || s > R::one() {
            return Err(MathError::InvalidProbeStrength(
                s.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self { s })
    }

    pub fn value(&self) -> R {
        self.s
    }
}

/// Probe ket in the {+, −} basis: (√(1−S²), S).
pub fn probe_state<R: Real>(strength: ProbeStrength<R>) -> [Complex<R>; 2] {
    let s = strength.value();
    [
        Complex::new((R::one() - s * s).max(R::zero()).sqrt(), R::zero()),
        Complex::new(s, R::zero()),
    ]
}

/// The probe basis {|+⟩, |−⟩} built from |0⟩ = cos(π/8)|H⟩ + sin(π/8)|V⟩
/// and |1⟩ = −sin(π/8)|H⟩ + cos(π/8)|V⟩ via |±⟩ = (|0⟩ ± |1⟩)/√2.
pub struct ProbeBasis;

impl ProbeBasis {
    /// |+⟩ in {H, V} coordinates.
    pub fn plus_hv<R: Real>() -> [Complex<R>; 2] {
        let (c, s, r) = Self::trig::<R>();
        [Complex::new((c - s) * r, R::zero()), Complex::new((c + s) * r, R::zero())]
    }

    /// |−⟩ in {H, V} coordinates.
    pub fn minus_hv<R: Real>() -> [Complex<R>; 2] {
        let (c, s, r) = Self::trig::<R>();
        [Complex::new((c + s) * r, R::zero()), Complex::new((s - c) * r, R::zero())]
    }

    fn trig<R: Real>() -> (R, R, R) {
        let eighth = R::FRAC_PI_4() * real::<R>(0.5);
        (eighth.cos(), eighth.sin(), real::<R>(std::f64::consts::FRAC_1_SQRT_2))
    }
}

/// Probe axis label for joint Bob ⊗ Eve states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeAxis {
    Plus,
    Minus,
}

impl ProbeAxis {
    fn index(self) -> usize {
        match self {
            ProbeAxis::Plus => 0,
            ProbeAxis::Minus => 1,
        }
    }
}

/// Joint label after the C-NOT: Bob's polarization component ⊗ Eve's
/// probe axis. Dephasing acts on the system side only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemProbe {
    pub system: PolComponent,
    pub probe: ProbeAxis,
}

impl DephasingLabel for SystemProbe {
    fn shift_sign(&self) -> i8 {
        self.system.shift_sign()
    }
}

/// C-NOT on (system ⊗ probe) with the probe prepared in `T_in`:
///
/// ```text
/// H ⊗ T_in → H ⊗ T_−  +  V ⊗ T_ẽ        T_± = √(1−S²)|+⟩ ± (S/√2)|−⟩
/// V ⊗ T_in → V ⊗ T_+  +  H ⊗ T_ẽ        T_ẽ = (S/√2)|−⟩
/// ```
///
/// The spatial mode of each term is untouched.
fn apply_cnot<R: Real>(
    state: &JointState<PolComponent, R>,
    strength: ProbeStrength<R>,
) -> JointState<SystemProbe, R> {
    let s = strength.value();
    let keep = (R::one() - s * s).max(R::zero()).sqrt();
    let flip = s * real::<R>(std::f64::consts::FRAC_1_SQRT_2);
    let mut terms = Vec::with_capacity(state.terms.len() * 3);
    for t in &state.terms {
        let (same_minus_sign, other) = match t.label {
            PolComponent::H => (true, PolComponent::V),
            PolComponent::V => (false, PolComponent::H),
        };
        terms.push(Term {
            label: SystemProbe { system: t.label, probe: ProbeAxis::Plus },
            shift: t.shift,
            amp: t.amp * keep,
        });
        let minus_amp = if same_minus_sign { -(t.amp * flip) } else { t.amp * flip };
        terms.push(Term {
            label: SystemProbe { system: t.label, probe: ProbeAxis::Minus },
            shift: t.shift,
            amp: minus_amp,
        });
        terms.push(Term {
            label: SystemProbe { system: other, probe: ProbeAxis::Minus },
            shift: t.shift,
            amp: t.amp * flip,
        });
    }
    JointState { terms, mode: state.mode }
}

/// Full attack sequence with independent displacements: prepare at shift 0,
/// dephase by `d_alice`, C-NOT, dephase by `−d_bob`.
pub fn attack_joint_state<R: Real>(
    prepared: Polarization,
    d_alice: R,
    d_bob: R,
    strength: ProbeStrength<R>,
    mode: GaussianMode<R>,
) -> JointState<SystemProbe, R> {
    let dephased = prepare_joint(prepared, mode).dephased(d_alice);
    apply_cnot(&dephased, strength).dephased(-d_bob).simplified()
}

/// Attack with one displacement `d` applied before the C-NOT and undone
/// after it (the matched-setting case of [`attack_joint_state`]). At
/// `d = 0` this reduces to the plain entangling-probe transforms.
pub fn cnot_attack<R: Real>(
    prepared: Polarization,
    d: R,
    strength: ProbeStrength<R>,
    mode: GaussianMode<R>,
) -> JointState<SystemProbe, R> {
    attack_joint_state(prepared, d, d, strength, mode)
}

/// Projects the joint state on Bob's polarization ket, leaving Eve's
/// probe ⊗ spatial terms.
pub fn project_on_bob<R: Real>(
    joint: &JointState<SystemProbe, R>,
    bob: Polarization,
) -> Vec<Term<ProbeAxis, R>> {
    let ket = bob.ket_hv::<R>();
    let mut out = Vec::with_capacity(joint.terms.len());
    for t in &joint.terms {
        let coeff = match t.label.system {
            PolComponent::H => ket[0].conj(),
            PolComponent::V => ket[1].conj(),
        };
        if coeff.norm_sqr() > R::zero() {
            out.push(Term { label: t.label.probe, shift: t.shift, amp: t.amp * coeff });
        }
    }
    out
}

/// Eve's unnormalized reduced matrix in {+, −} from a projected branch:
/// the spatial environment is traced out through mode overlaps. The trace
/// is the branch probability.
pub fn eve_unnormalized<R: Real>(
    terms: &[Term<ProbeAxis, R>],
    mode: &GaussianMode<R>,
) -> Result<Matrix2<R>, MathError> {
    let mut m = [[Complex::<R>::zero(); 2]; 2];
    for t in terms {
        for t2 in terms {
            let g = overlap(t2.shift, t.shift, mode)?;
            m[t.label.index()][t2.label.index()] += t.amp * t2.amp.conj() * g;
        }
    }
    Ok(m)
}

/// One of Bob's two measurement outcomes under attack: the outcome
/// probability and Eve's conditional (normalized) probe state.
#[derive(Debug, Clone, Copy)]
pub struct BobOutcome<R: Real> {
    pub probability: R,
    pub eve_state: Option<DensityMatrix2<R>>,
}

/// Splits the joint state over Bob's two outcomes in `basis` (bit order).
/// Outcome probabilities sum to 1; a (near-)zero-probability branch
/// carries no conditional state.
pub fn bob_outcome_split<R: Real>(
    joint: &JointState<SystemProbe, R>,
    basis: PolBasis,
) -> Result<[BobOutcome<R>; 2], MathError> {
    let mut out = [BobOutcome { probability: R::zero(), eve_state: None }; 2];
    for (k, pol) in basis.states().into_iter().enumerate() {
        let branch = project_on_bob(joint, pol);
        let m = eve_unnormalized(&branch, &joint.mode)?;
        let p = (m[0][0].re + m[1][1].re).max(R::zero());
        out[k] = BobOutcome {
            probability: p,
            eve_state: if p > real(1e-14) {
                Some(DensityMatrix2::from_unnormalized(m)?)
            } else {
                None
            },
        };
    }
    Ok(out)
}

/// Eve's conditional probe state given that Bob detected the same
/// polarization Alice prepared.
#[derive(Debug, Clone, Copy)]
pub struct EveConditionalState<R: Real> {
    pub matrix: DensityMatrix2<R>,
    /// Set in the fully decohered D/A limit at S = 1, where the |+⟩
    /// population of the error-free branch vanishes and the state is the
    /// limit diag(0, 1).
    pub degenerate: bool,
}

/// Eve's reduced density matrix for preparation `prepared` under the
/// matched-displacement attack: project the joint state on Bob's matching
/// polarization, trace out the spatial environment, normalize.
pub fn eve_density_matrix<R: Real>(
    prepared: Polarization,
    d: R,
    strength: ProbeStrength<R>,
    mode: GaussianMode<R>,
) -> Result<EveConditionalState<R>, MathError> {
    let joint = cnot_attack(prepared, d, strength, mode);
    let branch = project_on_bob(&joint, prepared);
    let m = eve_unnormalized(&branch, &mode)?;
    let matrix = DensityMatrix2::from_unnormalized(m)?;
    let gamma2 = overlap(R::zero(), real::<R>(2.0) * d, &mode)?
        + overlap(R::zero(), real::<R>(-2.0) * d, &mode)?;
    let degenerate = prepared.basis() == PolBasis::DA
        && (strength.value() - R::one()).abs() <= real(1e-12)
        && gamma2.norm() <= real(1e-12);
    Ok(EveConditionalState { matrix, degenerate })
}

/// The four closed-form probe states Eve must discriminate, with the
/// spatial overlap parameters they depend on.
#[derive(Debug, Clone, Copy)]
pub struct EveStateSet<R: Real> {
    pub rho_h: DensityMatrix2<R>,
    pub rho_v: DensityMatrix2<R>,
    pub rho_d: DensityMatrix2<R>,
    pub rho_a: DensityMatrix2<R>,
    /// γ₀ = |⟨f₀|f_{2d}⟩| (= exp(−2d²/w²) for the Gaussian).
    pub gamma0: R,
    /// γ₁ = ‖f_{2d} + f_{−2d}‖² (= 2 + 2γ₀⁴ untilted).
    pub gamma1: R,
    /// γ₂ = ⟨f₀|f_{2d}⟩ + ⟨f₀|f_{−2d}⟩ (= 2γ₀ untilted).
    pub gamma2: Complex<R>,
}

impl<R: Real> EveStateSet<R> {
    /// Closed forms in the {+, −} basis:
    ///
    /// ```text
    /// ρ_{H,V} = [ 1−S²        ∓ S√(1−S²)/√2 ]  / (1 − S²/2)
    ///           [ ∓ S√(1−S²)/√2    S²/2     ]
    ///
    /// ρ_{D,A} = [ 1−S²              ± γ₂* S√(1−S²)/(2√2) ]  / (1 + (γ₁/8 − 1)S²)
    ///           [ ± γ₂ S√(1−S²)/(2√2)    S²γ₁/8          ]
    /// ```
    pub fn closed_form(
        strength: ProbeStrength<R>,
        d: R,
        mode: &GaussianMode<R>,
    ) -> Result<Self, MathError> {
        let s = strength.value();
        let two_d = real::<R>(2.0) * d;
        let gamma0 = overlap(R::zero(), two_d, mode)?.norm();
        let gamma1 = real::<R>(2.0) + real::<R>(2.0) * overlap(two_d, -two_d, mode)?.re;
        let gamma2 = overlap(R::zero(), two_d, mode)? + overlap(R::zero(), -two_d, mode)?;

        let s2 = s * s;
        let cross = s * (R::one() - s2).max(R::zero()).sqrt();
        let sq2 = real::<R>(std::f64::consts::SQRT_2);

        let build_hv = |sign: R| -> Result<DensityMatrix2<R>, MathError> {
            let norm = R::one() - s2 * real::<R>(0.5);
            let off = Complex::new(sign * cross / sq2 / norm, R::zero());
            DensityMatrix2::new([
                [Complex::new((R::one() - s2) / norm, R::zero()), off],
                [off, Complex::new(s2 * real::<R>(0.5) / norm, R::zero())],
            ])
        };
        let build_da = |sign: R| -> Result<DensityMatrix2<R>, MathError> {
            let norm = R::one() + (gamma1 * real::<R>(0.125) - R::one()) * s2;
            let coeff = sign * cross / (real::<R>(2.0) * sq2) / norm;
            let lower = gamma2 * coeff;
            DensityMatrix2::new([
                [
                    Complex::new((R::one() - s2) / norm, R::zero()),
                    lower.conj(),
                ],
                [
                    lower,
                    Complex::new(s2 * gamma1 * real::<R>(0.125) / norm, R::zero()),
                ],
            ])
        };

        Ok(Self {
            rho_h: build_hv(-R::one())?,
            rho_v: build_hv(R::one())?,
            rho_d: build_da(R::one())?,
            rho_a: build_da(-R::one())?,
            gamma0,
            gamma1,
            gamma2,
        })
    }

    pub fn pair(&self, basis: PolBasis) -> (&DensityMatrix2<R>, &DensityMatrix2<R>) {
        match basis {
            PolBasis::HV => (&self.rho_h, &self.rho_v),
            PolBasis::DA => (&self.rho_d, &self.rho_a),
        }
    }
}

/// Helstrom bound: minimum error probability ½(1 − D(ρ₁, ρ₂)) of
/// discriminating two equiprobable states.
pub fn helstrom_error_prob<R: Real>(
    rho1: &DensityMatrix2<R>,
    rho2: &DensityMatrix2<R>,
) -> Result<R, MathError> {
    let d = crate::qmath::trace_distance(rho1, rho2)?;
    Ok((R::one() - d) * real::<R>(0.5))
}

/// Optimal discrimination measurement: projectors onto the positive and
/// negative eigenspaces of ρ₁ − ρ₂, in that order (outcome 0 ⇒ guess ρ₁).
/// Fails when the states coincide within tolerance; the caller must fall
/// back to a uniform coin.
pub fn helstrom_measurement<R: Real>(
    rho1: &DensityMatrix2<R>,
    rho2: &DensityMatrix2<R>,
) -> Result<[Matrix2<R>; 2], MathError> {
    let mut diff = [[Complex::<R>::zero(); 2]; 2];
    let mut max_dev = R::zero();
    for i in 0..2 {
        for j in 0..2 {
            diff[i][j] = rho1.entry(i, j) - rho2.entry(i, j);
            max_dev = max_dev.max(diff[i][j].norm());
        }
    }
    if max_dev <= real(1e-12) {
        return Err(MathError::DegenerateDiscrimination);
    }
    let eig = eig_hermitian_2x2(&diff)?;
    let proj = |v: &[Complex<R>; 2]| -> Matrix2<R> {
        [
            [v[0] * v[0].conj(), v[0] * v[1].conj()],
            [v[1] * v[0].conj(), v[1] * v[1].conj()],
        ]
    };
    Ok([proj(&eig.vectors[0]), proj(&eig.vectors[1])])
}

/// Closed-form trace distance D(ρ_H, ρ_V) = 2√2 S√(1−S²)/(2−S²).
pub fn trace_distance_hv_closed<R: Real>(strength: ProbeStrength<R>) -> R {
    let s = strength.value();
    let s2 = s * s;
    real::<R>(2.0 * std::f64::consts::SQRT_2) * s * (R::one() - s2).max(R::zero()).sqrt()
        / (real::<R>(2.0) - s2)
}

/// Closed-form trace distance D(ρ_D, ρ_A) = 4√2 S√(1−S²)γ₂ / (8 + (γ₁−8)S²)
/// with the untilted Gaussian values γ₁ = 2 + 2γ₀⁴, γ₂ = 2γ₀.
pub fn trace_distance_da_closed<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    let s = strength.value();
    let s2 = s * s;
    let g4 = gamma0.powi(4);
    let gamma1 = real::<R>(2.0) + real::<R>(2.0) * g4;
    let gamma2 = real::<R>(2.0) * gamma0;
    real::<R>(4.0 * std::f64::consts::SQRT_2) * s * (R::one() - s2).max(R::zero()).sqrt() * gamma2
        / (real::<R>(8.0) + (gamma1 - real::<R>(8.0)) * s2)
}

/// Eve's discrimination error in the H/V basis (Helstrom value of the
/// closed-form pair): (S² − 2 + 2S√(2−2S²)) / (2(S² − 2)).
pub fn conditional_error_hv<R: Real>(strength: ProbeStrength<R>) -> R {
    let s = strength.value();
    let s2 = s * s;
    let root = (real::<R>(2.0) - real::<R>(2.0) * s2).max(R::zero()).sqrt();
    (s2 - real::<R>(2.0) + real::<R>(2.0) * s * root) / (real::<R>(2.0) * (s2 - real::<R>(2.0)))
}

/// Eve's discrimination error in the D/A basis:
/// (4 − 4S√(2−2S²)γ₀ + S²(γ₀⁴−3)) / (8 + 2S²(γ₀⁴−3)).
pub fn conditional_error_da<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    let s = strength.value();
    let s2 = s * s;
    let g4m3 = gamma0.powi(4) - real::<R>(3.0);
    let root = (real::<R>(2.0) - real::<R>(2.0) * s2).max(R::zero()).sqrt();
    (real::<R>(4.0) - real::<R>(4.0) * s * root * gamma0 + s2 * g4m3)
        / (real::<R>(8.0) + real::<R>(2.0) * s2 * g4m3)
}

/// Rényi (order-2) information, in bits, of a symmetric binary channel
/// with discrimination error probability `p`: log₂(1 + (1−2p)²).
pub fn renyi_information<R: Real>(error_prob: R) -> Result<R, MathError> {
    let tol: R = real(1e-12);
    if !error_prob.is_finite() || error_prob < -tol || error_prob > real::<R>(0.5) + tol {
        return Err(MathError::NonFinite("discrimination error probability"));
    }
    let p = error_prob.max(R::zero()).min(real(0.5));
    let d = R::one() - real::<R>(2.0) * p;
    Ok((R::one() + d * d).log2())
}

/// Rényi leakage in the H/V basis: log₂[1 + 2S²(1−S²)/(1−S²/2)²].
/// Independent of the decoherence level.
pub fn renyi_hv<R: Real>(strength: ProbeStrength<R>) -> R {
    let s2 = strength.value() * strength.value();
    let den = R::one() - s2 * real::<R>(0.5);
    (R::one() + real::<R>(2.0) * s2 * (R::one() - s2) / (den * den)).log2()
}

/// Rényi leakage in the D/A basis:
/// log₂[1 + 32S²(1−S²)γ₀² / (4 + S²(γ₀⁴−3))²].
/// Equals [`renyi_hv`] at γ₀ = 1 and vanishes at γ₀ = 0; identical to
/// log₂(1 + D²) with the D/A trace distance.
pub fn renyi_da<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    let s2 = strength.value() * strength.value();
    let den = real::<R>(4.0) + s2 * (gamma0.powi(4) - real::<R>(3.0));
    (R::one() + real::<R>(32.0) * s2 * (R::one() - s2) * gamma0 * gamma0 / (den * den)).log2()
}

/// Total Rényi leakage (Alice switches bases uniformly):
/// (I_HV + I_DA)/2.
pub fn renyi_total<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    (renyi_hv(strength) + renyi_da(strength, gamma0)) * real::<R>(0.5)
}

/// QBER produced by the attack in the H/V basis: S²/2.
pub fn attack_qber_hv<R: Real>(strength: ProbeStrength<R>) -> R {
    strength.value() * strength.value() * real::<R>(0.5)
}

/// QBER produced by the attack in the D/A basis: ¼(3 − γ₀⁴)S².
pub fn attack_qber_da<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    real::<R>(0.25) * (real::<R>(3.0) - gamma0.powi(4)) * strength.value() * strength.value()
}

/// Average attack QBER over the two bases.
pub fn attack_qber_total<R: Real>(strength: ProbeStrength<R>, gamma0: R) -> R {
    (attack_qber_hv(strength) + attack_qber_da(strength, gamma0)) * real::<R>(0.5)
}

/// One point of the leakage-vs-QBER curve family. Each column inverts its
/// own QBER→S mapping (Eq.-21-style for HV, Eq.-22-style for DA, their
/// average for the total); a column is `None` where no S ∈ [0, 1] attains
/// that QBER for the given γ₀.
#[derive(Debug, Clone, Copy)]
pub struct RenyiCurvePoint<R: Real> {
    pub qber: R,
    pub i_hv: Option<R>,
    pub i_da: Option<R>,
    pub i_total: Option<R>,
}

/// Rényi-information curves as a function of the QBER Eve induces.
pub fn renyi_vs_qber_curve<R: Real>(
    gamma0: R,
    qber_grid: &[R],
) -> Result<Vec<RenyiCurvePoint<R>>, MathError> {
    if !gamma0.is_finite() || gamma0 < R::zero() || gamma0 > R::one() {
        return Err(MathError::NonFinite("gamma0"));
    }
    let g4 = gamma0.powi(4);
    let strength_for = |s2: R| -> Option<ProbeStrength<R>> {
        if s2 >= R::zero() && s2 <= R::one() + real(1e-12) {
            ProbeStrength::new(s2.min(R::one()).sqrt()).ok()
        } else {
            None
        }
    };
    qber_grid
        .iter()
        .map(|&q| {
            if !q.is_finite() || q < R::zero() {
                return Err(MathError::NonFinite("qber grid value"));
            }
            let i_hv = strength_for(real::<R>(2.0) * q).map(renyi_hv);
            let i_da = strength_for(real::<R>(4.0) * q / (real::<R>(3.0) - g4))
                .map(|s| renyi_da(s, gamma0));
            let i_total = strength_for(real::<R>(8.0) * q / (real::<R>(5.0) - g4))
                .map(|s| renyi_total(s, gamma0));
            Ok(RenyiCurvePoint { qber: q, i_hv, i_da, i_total })
        })
        .collect()
}
