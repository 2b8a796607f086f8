//! Complex 2×2 Hermitian matrix algebra and the analytic Gaussian-mode
//! overlap calculus shared by the channel, attack, and protocol layers.
//!
//! Spatial modes are never discretized: every spatial wavefunction in the
//! model is a shifted copy of one Gaussian profile, so every inner product
//! reduces to the closed form implemented by [`overlap`]. Grid quadrature
//! exists only as a test oracle.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::{real, Real};

/// Tolerance for constructing validated objects (hermiticity, unit trace).
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance for derived checks (eigen residuals, normalization of states).
pub const DERIVED_TOL: f64 = 1e-10;

/// Complex amplitude; finite in all public results.
pub type ComplexAmplitude<R> = Complex<R>;

/// Raw complex 2×2 matrix, row-major.
pub type Matrix2<R> = [[Complex<R>; 2]; 2];

/// Errors from the math layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("beam width must be positive, got {0}")]
    InvalidBeamWidth(f64),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is not 1 (got {0:.12e})")]
    TraceNotUnit(f64),
    #[error("negative eigenvalue {0:.3e} below tolerance")]
    NegativeEigenvalue(f64),
    #[error("state vector is not normalized (norm {0:.12e})")]
    NotNormalized(f64),
    #[error("probe strength must lie in [0, 1], got {0}")]
    InvalidProbeStrength(f64),
    #[error("states are equal within tolerance; discrimination measurement undefined")]
    DegenerateDiscrimination,
}

/// Gaussian spatial mode: beam width `w` (mm) and transverse tilt
/// wavenumber `q0` (mm⁻¹). `q0 = 0` is the untilted regime used by the
/// attack closed forms; the nonzero default reproduces the experiment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianMode<R: Real> {
    /// Beam width, mm. Must be positive.
    #[serde(rename = "w_mm")]
    pub w: R,
    /// Transverse tilt wavenumber, mm⁻¹. May be zero.
    #[serde(rename = "q0_inv_mm")]
    pub q0: R,
}

impl<R: Real> GaussianMode<R> {
    pub fn new(w: R, q0: R) -> Result<Self, MathError> {
        if !w.is_finite() || !q0.is_finite() {
            return Err(MathError::NonFinite("mode parameters"));
        }
        if w <= R::zero() {
            return Err(MathError::InvalidBeamWidth(w.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { w, q0 })
    }

    /// Untilted mode (`q0 = 0`).
    pub fn untilted(w: R) -> Result<Self, MathError> {
        Self::new(w, R::zero())
    }
}

impl<R: Real> Default for GaussianMode<R> {
    /// Experimental defaults: w = 0.8 mm, q0 = 6.87 mm⁻¹.
    fn default() -> Self {
        Self {
            w: real(0.8),
            q0: real(6.87),
        }
    }
}

/// Inner product ⟨f_{s1}|f_{s2}⟩ of two copies of the mode profile shifted
/// to `s1` and `s2` (mm):
///
/// ```text
/// overlap(s1, s2) = exp(−(s1−s2)² / (2 w²)) · exp(i q0 (s2 − s1))
/// ```
///
/// Equal shifts give exactly 1; widely separated shifts decay to 0.
pub fn overlap<R: Real>(s1: R, s2: R, mode: &GaussianMode<R>) -> Result<Complex<R>, MathError> {
    if !s1.is_finite() || !s2.is_finite() {
        return Err(MathError::NonFinite("mode shift"));
    }
    if mode.w <= R::zero() || !mode.w.is_finite() || !mode.q0.is_finite() {
        return Err(MathError::InvalidBeamWidth(
            mode.w.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let delta = s1 - s2;
    let mag = (-(delta * delta) / (real::<R>(2.0) * mode.w * mode.w)).exp();
    let phase = mode.q0 * (s2 - s1);
    Ok(Complex::from_polar(mag, phase))
}

/// Eigen-decomposition of a 2×2 Hermitian matrix: eigenvalues sorted
/// descending with orthonormal eigenvectors.
#[derive(Debug, Clone, Copy)]
pub struct EigenDecomposition<R: Real> {
    pub values: [R; 2],
    /// `vectors[k]` is the eigenvector for `values[k]`.
    pub vectors: [[Complex<R>; 2]; 2],
}

/// Closed-form eigensolver for 2×2 Hermitian matrices.
///
/// Accepts any Hermitian matrix (unit trace not required, so it also serves
/// density-matrix differences). Rejects inputs whose Hermitian deviation
/// exceeds `1e-10`.
pub fn eig_hermitian_2x2<R: Real>(m: &Matrix2<R>) -> Result<EigenDecomposition<R>, MathError> {
    let tol: R = real(DERIVED_TOL);
    for row in m {
        for e in row {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(MathError::NonFinite("matrix entry"));
            }
        }
    }
    let herm_dev = (m[0][1] - m[1][0].conj()).norm().max(m[0][0].im.abs().max(m[1][1].im.abs()));
    if herm_dev > tol {
        return Err(MathError::NotHermitian(herm_dev.to_f64().unwrap_or(f64::NAN)));
    }

    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = (m[0][1] + m[1][0].conj()) * real::<R>(0.5); // symmetrized upper entry
    let half_tr = (a + d) * real::<R>(0.5);
    let half_diff = (a - d) * real::<R>(0.5);
    let gap = (half_diff * half_diff + b.norm_sqr()).sqrt();
    let values = [half_tr + gap, half_tr - gap];

    let vectors = if b.norm() <= real(1e-300) {
        // Diagonal matrix: basis eigenvectors ordered by eigenvalue.
        let e0 = [Complex::new(R::one(), R::zero()), Complex::zero()];
        let e1 = [Complex::zero(), Complex::new(R::one(), R::zero())];
        if a >= d {
            [e0, e1]
        } else {
            [e1, e0]
        }
    } else {
        // (m − λ)v = 0 with v = (b, λ − a); nonzero because |b| > 0.
        let mut vs = [[Complex::<R>::zero(); 2]; 2];
        for (k, v) in vs.iter_mut().enumerate() {
            let raw = [b, Complex::new(values[k] - a, R::zero())];
            let n = (raw[0].norm_sqr() + raw[1].norm_sqr()).sqrt();
            v[0] = raw[0] / n;
            v[1] = raw[1] / n;
        }
        vs
    };

    Ok(EigenDecomposition { values, vectors })
}

/// 2×2 density matrix: Hermitian, unit trace, positive semidefinite within
/// construction tolerance. The basis labelling ({H,V} or {+,−}) is carried
/// by context, not by the type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2<R: Real> {
    m: Matrix2<R>,
}

impl<R: Real> DensityMatrix2<R> {
    /// Validates hermiticity (1e-12), unit trace (1e-12) and the eigenvalue
    /// floor (≥ −1e-12).
    pub fn new(m: Matrix2<R>) -> Result<Self, MathError> {
        let tol: R = real(CONSTRUCTION_TOL);
        for row in &m {
            for e in row {
                if !e.re.is_finite() || !e.im.is_finite() {
                    return Err(MathError::NonFinite("density matrix entry"));
                }
            }
        }
        let herm_dev = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs().max(m[1][1].im.abs()));
        if herm_dev > tol {
            return Err(MathError::NotHermitian(herm_dev.to_f64().unwrap_or(f64::NAN)));
        }
        let tr = m[0][0].re + m[1][1].re;
        if (tr - R::one()).abs() > tol {
            return Err(MathError::TraceNotUnit(tr.to_f64().unwrap_or(f64::NAN)));
        }
        // λmin = tr/2 − √((a−d)²/4 + |b|²); reject below −1e-12.
        let half_diff = (m[0][0].re - m[1][1].re) * real::<R>(0.5);
        let lam_min = tr * real::<R>(0.5) - (half_diff * half_diff + m[0][1].norm_sqr()).sqrt();
        if lam_min < -tol {
            return Err(MathError::NegativeEigenvalue(
                lam_min.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self { m })
    }

    /// Normalizes a Hermitian PSD matrix by its trace. Fails on a
    /// (near-)zero trace.
    pub fn from_unnormalized(m: Matrix2<R>) -> Result<Self, MathError> {
        let tr = m[0][0].re + m[1][1].re;
        if !tr.is_finite() || tr <= real(1e-300) {
            return Err(MathError::TraceNotUnit(tr.to_f64().unwrap_or(f64::NAN)));
        }
        let mut n = m;
        for row in &mut n {
            for e in row.iter_mut() {
                *e /= tr;
            }
        }
        Self::new(n)
    }

    /// Pure state |ψ⟩⟨ψ| from a normalized two-component ket.
    pub fn pure(ket: &[Complex<R>; 2]) -> Result<Self, MathError> {
        let n = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        if (n - R::one()).abs() > real(DERIVED_TOL) {
            return Err(MathError::NotNormalized(n.to_f64().unwrap_or(f64::NAN)));
        }
        let m = [
            [ket[0] * ket[0].conj(), ket[0] * ket[1].conj()],
            [ket[1] * ket[0].conj(), ket[1] * ket[1].conj()],
        ];
        Self::new(m)
    }

    /// Maximally mixed state I/2.
    pub fn maximally_mixed() -> Self {
        let h = Complex::new(real::<R>(0.5), R::zero());
        Self {
            m: [[h, Complex::zero()], [Complex::zero(), h]],
        }
    }

    pub fn entries(&self) -> &Matrix2<R> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<R> {
        self.m[i][j]
    }

    /// Eigenvalues (descending) and orthonormal eigenvectors.
    pub fn eigen(&self) -> Result<EigenDecomposition<R>, MathError> {
        eig_hermitian_2x2(&self.m)
    }

    /// Born probability ⟨ket|ρ|ket⟩ for a normalized ket. Values within
    /// 1e-12 below 0 (or above 1) are clipped.
    pub fn born_probability(&self, ket: &[Complex<R>; 2]) -> Result<R, MathError> {
        let n = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        if (n - R::one()).abs() > real(DERIVED_TOL) {
            return Err(MathError::NotNormalized(n.to_f64().unwrap_or(f64::NAN)));
        }
        let mut acc = Complex::<R>::zero();
        for i in 0..2 {
            for j in 0..2 {
                acc += ket[i].conj() * self.m[i][j] * ket[j];
            }
        }
        let p = acc.re;
        let tol: R = real(CONSTRUCTION_TOL);
        if p < -tol || p > R::one() + tol {
            return Err(MathError::NegativeEigenvalue(p.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(p.max(R::zero()).min(R::one()))
    }
}

/// Trace distance D(ρ₁, ρ₂) = ½ Σ|λᵢ| of ρ₂ − ρ₁; lies in [0, 1].
pub fn trace_distance<R: Real>(
    rho1: &DensityMatrix2<R>,
    rho2: &DensityMatrix2<R>,
) -> Result<R, MathError> {
    let mut diff = [[Complex::<R>::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            diff[i][j] = rho2.m[i][j] - rho1.m[i][j];
        }
    }
    let eig = eig_hermitian_2x2(&diff)?;
    Ok((eig.values[0].abs() + eig.values[1].abs()) * real::<R>(0.5))
}

/// Tr(op · ρ), real part (exact for Hermitian operators).
pub fn expectation<R: Real>(op: &Matrix2<R>, rho: &DensityMatrix2<R>) -> R {
    let mut acc = Complex::<R>::zero();
    for i in 0..2 {
        for j in 0..2 {
            acc += op[i][j] * rho.m[j][i];
        }
    }
    acc.re
}
