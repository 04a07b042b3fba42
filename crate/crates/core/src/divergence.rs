//! Tsallis relative α entropy, its trace functional f_α, and the entropic
//! α → 1 limits. All logarithms are natural (nats).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pow_clamped, trace_product, ComplexMatrix, HermitianSpectrum};
use crate::states::DensityMatrix;

/// |α - 1| below this routes to the analytic α → 1 limit.
pub const NEAR_ONE: f64 = 1e-6;
/// Overlap of a null direction of σ with supp ρ that counts as a support
/// violation.
pub const SUPPORT_OVERLAP_TOL: f64 = 1e-10;

/// Entropic order α ∈ (0, 2].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha {
    value: f64,
    near_one: bool,
}

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 2.0) {
            return Err(Error::BadAlpha(value));
        }
        Ok(Self {
            value,
            near_one: (value - 1.0).abs() < NEAR_ONE,
        })
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn near_one(self) -> bool {
        self.near_one
    }

    /// sgn₁(α): -1 on (0,1), +1 on (1,2].
    pub fn sgn1(self) -> f64 {
        if self.value < 1.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.value
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// A real number or +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PositiveInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PositiveInfinity => None,
        }
    }

    /// As an `f64`, with +∞ mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(f(v)),
            inf => inf,
        }
    }
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch(rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// True iff some null direction of σ overlaps supp ρ.
fn support_violated(rho: &HermitianSpectrum, sigma: &HermitianSpectrum) -> bool {
    let p_rho = rho.support_projector();
    (0..sigma.dim()).filter(|&k| sigma.eigenvalues[k] == 0.0).any(|k| {
        let e = sigma.eigenvector(k);
        let mut overlap = 0.0;
        for i in 0..e.len() {
            for j in 0..e.len() {
                overlap += (e[i].conj() * p_rho.get(i, j) * e[j]).re;
            }
        }
        overlap > SUPPORT_OVERLAP_TOL
    })
}

/// f_α from precomputed spectra of ρ and σ.
pub fn f_alpha_spectra(rho: &HermitianSpectrum, sigma: &HermitianSpectrum, alpha: Alpha) -> Result<ExtendedReal> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch(rho.dim(), sigma.dim()));
    }
    let a = alpha.value();
    let q = 1.0 - a;
    if q < 0.0 && support_violated(rho, sigma) {
        return Ok(ExtendedReal::PositiveInfinity);
    }
    // Negative powers act on supp σ only; the null part is orthogonal to ρ.
    let rho_pow = rho.map_eigenvalues(|l| pow_clamped(l.max(0.0), a));
    let sigma_pow = sigma.map_eigenvalues(|l| pow_clamped(l.max(0.0), q));
    Ok(ExtendedReal::Finite(trace_product(&rho_pow, &sigma_pow)?.re))
}

/// Growth factor over the first-order estimate in [`f_alpha_resolution`],
/// covering eigenvector error and accumulated rounding.
const RESOLUTION_FACTOR: f64 = 4.0;

/// ⟨v_k|M|v_k⟩ for each eigenvector v_k of `spec`.
fn diagonal_in_eigenbasis(m: &ComplexMatrix, spec: &HermitianSpectrum) -> Vec<f64> {
    let v = &spec.eigenvectors;
    let rotated = v
        .adjoint()
        .mul(m)
        .and_then(|x| x.mul(v))
        .expect("square matrices of equal size");
    rotated.diagonal().iter().map(|z| z.re).collect()
}

/// Floating-point uncertainty of [`f_alpha_spectra`] to first order.
///
/// A computed eigenvalue λ is off by about ε·λ_max, and λ ↦ λ^p turns that
/// into |p|·λ^{p−1}·ε·λ_max. Weighting each sensitivity by the overlap
/// with the other factor bounds the error of Tr ρ^α σ^{1−α}. The estimate
/// is negligible for well-conditioned pairs and grows like 1/λ_min(σ) for
/// α > 1, where a nearly singular σ makes f_α large and loses digits.
pub fn f_alpha_resolution(rho: &HermitianSpectrum, sigma: &HermitianSpectrum, alpha: Alpha) -> f64 {
    let a = alpha.value();
    let q = 1.0 - a;
    let rho_pow = rho.map_eigenvalues(|l| pow_clamped(l.max(0.0), a));
    let sigma_pow = sigma.map_eigenvalues(|l| pow_clamped(l.max(0.0), q));
    let sensitivity = |spec: &HermitianSpectrum, other: &ComplexMatrix, p: f64| -> f64 {
        let top = spec.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let weights = diagonal_in_eigenbasis(other, spec);
        spec.eigenvalues
            .iter()
            .zip(weights)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, w)| w.abs() * (p * l.powf(p - 1.0)).abs() * f64::EPSILON * top)
            .sum()
    };
    let value = trace_product(&rho_pow, &sigma_pow).map(|z| z.re.abs()).unwrap_or(0.0);
    let first_order = sensitivity(rho, &sigma_pow, a) + sensitivity(sigma, &rho_pow, q) + f64::EPSILON * value;
    RESOLUTION_FACTOR * first_order
}

/// f_α(ρ, σ) = Tr ρ^α σ^{1-α}.
pub fn f_alpha(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: Alpha) -> Result<ExtendedReal> {
    check_dims(rho, sigma)?;
    f_alpha_spectra(&rho.spectrum(), &sigma.spectrum(), alpha)
}

/// D_α(ρ‖σ) = (f_α − 1)/(α − 1); the quantum relative entropy near α = 1.
pub fn tsallis_divergence(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: Alpha) -> Result<ExtendedReal> {
    if alpha.near_one() {
        return relative_entropy(rho, sigma);
    }
    let a = alpha.value();
    Ok(f_alpha(rho, sigma, alpha)?.map(|f| (f - 1.0) / (a - 1.0)))
}

fn entropy_of_spectrum(eigs: &[f64]) -> f64 {
    -eigs.iter().filter(|&&l| l > 0.0).map(|&l| l * l.ln()).sum::<f64>()
}

/// S(ρ) = −Tr ρ ln ρ.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.spectrum().eigenvalues)
}

/// Shannon entropy of a probability vector, in nats.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    entropy_of_spectrum(p)
}

/// S(ρ‖σ) = Tr ρ ln ρ − Tr ρ ln σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<ExtendedReal> {
    check_dims(rho, sigma)?;
    let rs = rho.spectrum();
    let ss = sigma.spectrum();
    if support_violated(&rs, &ss) {
        return Ok(ExtendedReal::PositiveInfinity);
    }
    let log_sigma = ss.map_eigenvalues(|l| if l > 0.0 { l.ln() } else { 0.0 });
    let cross = trace_product(rho.matrix(), &log_sigma)?.re;
    Ok(ExtendedReal::Finite(-entropy_of_spectrum(&rs.eigenvalues) - cross))
}
