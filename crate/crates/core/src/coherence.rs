//! Coherence quantifiers in a fixed reference basis.
//!
//! The Tsallis family is evaluated from its closed form
//!
//! ```text
//! C_α(ρ) = (Σⱼ ⟨j|ρ^α|j⟩^{1/α} − 1) / (α − 1)
//! ```
//!
//! and the original Tsallis quantifier C̃_α raises the same sum to the power
//! α before subtracting one. Both share the α → 1 limit S(Δρ) − S(ρ).
//! [`brute_force_min`] is an independent grid-search oracle over the
//! incoherent simplex; it is never used to compute a measure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::divergence::{shannon_entropy, Alpha};
use crate::error::{Error, Result};
use crate::linalg::{matrix_power, pow_clamped, ComplexMatrix, HermitianSpectrum};
use crate::states::{dephase, DensityMatrix, ProbabilityVector};

/// Which quantifier to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherenceKind {
    TsallisFamily(Alpha),
    RasteginTsallis(Alpha),
    RelativeEntropy,
    L1,
    SkewInfoSum,
    C2Direct,
}

impl CoherenceKind {
    pub fn alpha(self) -> Option<Alpha> {
        match self {
            CoherenceKind::TsallisFamily(a) | CoherenceKind::RasteginTsallis(a) => Some(a),
            _ => None,
        }
    }

    /// Short machine name, also accepted by [`FromStr`] (with `:α` suffix
    /// for the two α-families).
    pub fn name(self) -> &'static str {
        match self {
            CoherenceKind::TsallisFamily(_) => "tsallis",
            CoherenceKind::RasteginTsallis(_) => "rastegin",
            CoherenceKind::RelativeEntropy => "relent",
            CoherenceKind::L1 => "l1",
            CoherenceKind::SkewInfoSum => "skew",
            CoherenceKind::C2Direct => "c2",
        }
    }

    /// Whether the value is an entropy-like quantity that scales with the
    /// choice of logarithm base.
    pub fn is_entropic(self) -> bool {
        match self {
            CoherenceKind::RelativeEntropy => true,
            CoherenceKind::TsallisFamily(a) | CoherenceKind::RasteginTsallis(a) => a.near_one(),
            _ => false,
        }
    }

    pub fn evaluate(self, rho: &DensityMatrix) -> f64 {
        match self {
            CoherenceKind::TsallisFamily(a) => coherence_alpha(rho, a).value,
            CoherenceKind::RasteginTsallis(a) => rastegin_coherence(rho, a).value,
            CoherenceKind::RelativeEntropy => relative_entropy_coherence(rho).value,
            CoherenceKind::L1 => l1_coherence(rho),
            CoherenceKind::SkewInfoSum => skew_info_sum(rho),
            CoherenceKind::C2Direct => c2_direct(rho),
        }
    }
}

impl fmt::Display for CoherenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha() {
            Some(a) => write!(f, "{}:{}", self.name(), a),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for CoherenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, alpha) = match s.split_once(':') {
            Some((n, a)) => {
                let v: f64 = a.parse().map_err(|_| Error::Parse(format!("bad alpha in {s:?}")))?;
                (n, Some(Alpha::new(v)?))
            }
            None => (s, None),
        };
        let need_alpha = || alpha.ok_or_else(|| Error::Parse(format!("{name} needs an alpha, e.g. {name}:0.5")));
        Ok(match name {
            "tsallis" => CoherenceKind::TsallisFamily(need_alpha()?),
            "rastegin" => CoherenceKind::RasteginTsallis(need_alpha()?),
            "relent" => CoherenceKind::RelativeEntropy,
            "l1" => CoherenceKind::L1,
            "skew" => CoherenceKind::SkewInfoSum,
            "c2" => CoherenceKind::C2Direct,
            _ => return Err(Error::Parse(format!("unknown measure {name:?}"))),
        })
    }
}

impl Serialize for CoherenceKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoherenceKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceResult {
    pub value: f64,
    /// The minimizing incoherent state, where the measure has one.
    pub optimal_delta: Option<ProbabilityVector>,
}

/// aⱼ = ⟨j|ρ^α|j⟩, clamped at zero, from the spectrum of ρ.
fn alpha_diagonal(spec: &HermitianSpectrum, a: f64) -> Vec<f64> {
    let d = spec.dim();
    let v = &spec.eigenvectors;
    let powered: Vec<f64> = spec.eigenvalues.iter().map(|&l| pow_clamped(l.max(0.0), a)).collect();
    (0..d)
        .map(|j| {
            (0..d)
                .map(|k| powered[k] * v.get(j, k).norm_sqr())
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// Σⱼ ⟨j|ρ^α|j⟩^{1/α} and the normalized weights aⱼ^{1/α}/Σ.
fn rooted_sum(rho: &DensityMatrix, a: f64) -> (f64, Vec<f64>) {
    let diag = alpha_diagonal(&rho.spectrum(), a);
    let roots: Vec<f64> = diag.iter().map(|&x| x.powf(1.0 / a)).collect();
    (roots.iter().sum(), roots)
}

/// The Tsallis-family coherence C_α.
pub fn coherence_alpha(rho: &DensityMatrix, alpha: Alpha) -> CoherenceResult {
    if alpha.near_one() {
        return relative_entropy_coherence(rho);
    }
    let a = alpha.value();
    let (sum, roots) = rooted_sum(rho, a);
    CoherenceResult {
        value: (sum - 1.0) / (a - 1.0),
        optimal_delta: ProbabilityVector::normalized(roots).ok(),
    }
}

/// The original Tsallis quantifier C̃_α = [(Σⱼ⟨j|ρ^α|j⟩^{1/α})^α − 1]/(α − 1).
pub fn rastegin_coherence(rho: &DensityMatrix, alpha: Alpha) -> CoherenceResult {
    if alpha.near_one() {
        return relative_entropy_coherence(rho);
    }
    let a = alpha.value();
    let (sum, roots) = rooted_sum(rho, a);
    CoherenceResult {
        value: (sum.powf(a) - 1.0) / (a - 1.0),
        optimal_delta: ProbabilityVector::normalized(roots).ok(),
    }
}

/// The incoherent state minimizing sgn₁(α) f_α(ρ, δ):
/// δⱼ = aⱼ^{1/α} / Σₖ aₖ^{1/α}.
pub fn optimal_incoherent_state(rho: &DensityMatrix, alpha: Alpha) -> Result<ProbabilityVector> {
    let a = alpha.value();
    let diag = alpha_diagonal(&rho.spectrum(), a);
    if diag.iter().all(|&x| x < 1e-14) {
        return Err(Error::DegenerateDiagonal);
    }
    ProbabilityVector::normalized(diag.iter().map(|&x| x.powf(1.0 / a)).collect())
}

/// Exhaustive simplex grid search for
/// min_δ (f_α(ρ, δ)^{1/α} − 1)/(α − 1), for d ∈ {2, 3}.
///
/// f_α(ρ, δ) = Tr ρ^α δ^{1−α} is evaluated from ρ^α (computed once) and
/// the entrywise power of the diagonal δ. Grid points where f_α = +∞
/// (δⱼ = 0 on the support of ρ, α > 1) are skipped.
pub fn brute_force_min(rho: &DensityMatrix, alpha: Alpha, resolution: f64) -> Result<(f64, ProbabilityVector)> {
    let d = rho.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::DimTooLarge(d));
    }
    if !(1e-5..=1e-2).contains(&resolution) {
        return Err(Error::BadResolution(resolution));
    }
    let a = alpha.value();
    if alpha.near_one() {
        return Err(Error::BadAlpha(a));
    }
    let rho_a = matrix_power(rho.matrix(), a)?
        .finite()
        .expect("positive power is finite");
    let diag: Vec<f64> = rho_a.diagonal().iter().map(|z| z.re).collect();
    let q = 1.0 - a;

    let objective = |delta: &[f64]| -> Option<f64> {
        let mut f = 0.0;
        for (aj, &dj) in diag.iter().zip(delta) {
            if dj == 0.0 {
                if q < 0.0 && *aj > 1e-14 {
                    return None;
                }
                continue;
            }
            f += aj * dj.powf(q);
        }
        Some((f.powf(1.0 / a) - 1.0) / (a - 1.0))
    };

    let steps = (1.0 / resolution).round() as usize;
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut consider = |delta: Vec<f64>| {
        if let Some(v) = objective(&delta) {
            if v < best.0 {
                best = (v, delta);
            }
        }
    };
    if d == 2 {
        for i in 0..=steps {
            let x = i as f64 * h;
            consider(vec![x, (1.0 - x).max(0.0)]);
        }
    } else {
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let x = i as f64 * h;
                let y = j as f64 * h;
                consider(vec![x, y, (1.0 - x - y).max(0.0)]);
            }
        }
    }
    let (value, delta) = best;
    Ok((value, ProbabilityVector::normalized(delta)?))
}

/// S(Δρ) − S(ρ) in nats, the α → 1 limit of both Tsallis families.
pub fn relative_entropy_coherence(rho: &DensityMatrix) -> CoherenceResult {
    let dephased = dephase(rho);
    let s_rho = shannon_entropy(&rho.spectrum().eigenvalues);
    CoherenceResult {
        value: shannon_entropy(dephased.as_slice()) - s_rho,
        optimal_delta: Some(dephased),
    }
}

fn sqrt_diagonal(rho: &DensityMatrix) -> Vec<f64> {
    alpha_diagonal(&rho.spectrum(), 0.5)
}

/// Σᵢ skew information of ρ with |i⟩⟨i|, as 1 − Σᵢ⟨i|√ρ|i⟩².
pub fn skew_info_sum(rho: &DensityMatrix) -> f64 {
    let value = 1.0 - sqrt_diagonal(rho).iter().map(|s| s * s).sum::<f64>();
    debug_assert!((value - skew_info_commutator(rho)).abs() <= 1e-10);
    value
}

/// −½ Σᵢ Tr([√ρ, |i⟩⟨i|]²), evaluated with explicit commutators.
pub fn skew_info_commutator(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let root = rho.spectrum().map_eigenvalues(|l| l.max(0.0).sqrt());
    let mut total = 0.0;
    for i in 0..d {
        let mut diag = vec![0.0; d];
        diag[i] = 1.0;
        let p = ComplexMatrix::from_diagonal(&diag);
        let comm = root
            .mul(&p)
            .and_then(|a| p.mul(&root).and_then(|b| a.sub(&b)))
            .expect("same dimension");
        let sq = comm.mul(&comm).expect("same dimension");
        total += -0.5 * sq.trace().re;
    }
    total
}

/// The three expressions that appear for the α = 1/2 member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfOrderForms {
    /// C_{1/2}(ρ) from the general closed form: 2(1 − Σᵢ⟨i|√ρ|i⟩²).
    pub closed_form: f64,
    /// 1 − Σᵢ⟨i|√ρ|i⟩² (equals the skew-information sum).
    pub displayed: f64,
    /// min over δ of ‖√ρ − √δ‖₂² = 2(1 − (Σᵢ⟨i|√ρ|i⟩²)^{1/2}).
    pub hilbert_schmidt_min: f64,
}

impl HalfOrderForms {
    /// closed_form / displayed; NaN when both vanish.
    pub fn ratio(&self) -> f64 {
        self.closed_form / self.displayed
    }
}

pub fn half_order_forms(rho: &DensityMatrix) -> HalfOrderForms {
    let s2: f64 = sqrt_diagonal(rho).iter().map(|s| s * s).sum();
    HalfOrderForms {
        closed_form: coherence_alpha(rho, Alpha::new(0.5).expect("valid")).value,
        displayed: 1.0 - s2,
        hilbert_schmidt_min: 2.0 * (1.0 - s2.sqrt()),
    }
}

/// Σ_{i≠j} |ρᵢⱼ|.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let m = rho.matrix();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                total += m.get(i, j).norm();
            }
        }
    }
    total
}

/// Σᵢ ⟨i|ρ²|i⟩^{1/2} − 1 with ⟨i|ρ²|i⟩ = Σₖ |ρᵢₖ|² (no eigensolver).
pub fn c2_direct(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let m = rho.matrix();
    (0..d)
        .map(|i| (0..d).map(|k| m.get(i, k).norm_sqr()).sum::<f64>().sqrt())
        .sum::<f64>()
        - 1.0
}

/// C_α of a maximally coherent state: (d^{(α−1)/α} − 1)/(α − 1), ln d at α = 1.
pub fn max_coherence(d: usize, alpha: Alpha) -> f64 {
    let df = d as f64;
    if alpha.near_one() {
        return df.ln();
    }
    let a = alpha.value();
    (df.powf((a - 1.0) / a) - 1.0) / (a - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::states::{maximally_coherent, random_density};

    fn alpha(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    #[test]
    fn diagonal_states_have_zero_coherence() {
        let rho = ProbabilityVector::new(vec![0.2, 0.5, 0.3]).unwrap().embed();
        for &a in &[0.1, 0.5, 0.9, 1.0, 1.5, 2.0] {
            let r = coherence_alpha(&rho, alpha(a));
            assert!(r.value.abs() < 1e-12, "alpha {a}: {}", r.value);
            assert!(rastegin_coherence(&rho, alpha(a)).value.abs() < 1e-12);
        }
        assert_eq!(l1_coherence(&rho), 0.0);
        assert!(skew_info_sum(&rho).abs() < 1e-14);
        assert!(c2_direct(&rho).abs() < 1e-15);
        assert!(relative_entropy_coherence(&rho).value.abs() < 1e-14);
    }

    #[test]
    fn maximally_coherent_qubit_values() {
        let m = maximally_coherent(2, &[0.0, 0.0]).unwrap();
        let c2 = coherence_alpha(&m, alpha(2.0)).value;
        assert!((c2 - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((c2 - 0.4142135).abs() < 1e-7);
        assert!((coherence_alpha(&m, alpha(0.5)).value - 1.0).abs() < 1e-12);
        assert!((rastegin_coherence(&m, alpha(2.0)).value - 1.0).abs() < 1e-12);
        assert!((skew_info_sum(&m) - 0.5).abs() < 1e-12);
        assert!((l1_coherence(&m) - 1.0).abs() < 1e-15);
        assert!((c2_direct(&m) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn max_coherence_formula() {
        assert_eq!(max_coherence(1, alpha(0.3)), 0.0);
        assert_eq!(max_coherence(1, alpha(1.0)), 0.0);
        assert!((max_coherence(2, alpha(2.0)) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((max_coherence(4, alpha(0.5)) - 1.5).abs() < 1e-15);
        assert!((max_coherence(3, alpha(1.0)) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_coherence_of_maximal_state() {
        for d in 2..6 {
            let m = maximally_coherent(d, &vec![0.4; d]).unwrap();
            let r = relative_entropy_coherence(&m);
            assert!((r.value - (d as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_state_cases() {
        let rho = ProbabilityVector::new(vec![0.1, 0.6, 0.3]).unwrap();
        for &a in &[0.3, 1.7] {
            let delta = optimal_incoherent_state(&rho.embed(), alpha(a)).unwrap();
            for (x, y) in delta.as_slice().iter().zip(rho.as_slice()) {
                assert!((x - y).abs() < 1e-13);
            }
        }
        let m = maximally_coherent(3, &[0.0, 1.0, 2.0]).unwrap();
        let delta = optimal_incoherent_state(&m, alpha(0.7)).unwrap();
        assert!(delta.as_slice().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn oracle_argument_checks() {
        let rho = ProbabilityVector::uniform(4).embed();
        assert!(matches!(
            brute_force_min(&rho, alpha(0.5), 1e-3),
            Err(Error::DimTooLarge(4))
        ));
        let rho = ProbabilityVector::uniform(2).embed();
        assert!(matches!(
            brute_force_min(&rho, alpha(0.5), 0.1),
            Err(Error::BadResolution(_))
        ));
    }

    #[test]
    fn oracle_on_diagonal_state() {
        let rho = ProbabilityVector::new(vec![0.25, 0.75]).unwrap().embed();
        let (v, delta) = brute_force_min(&rho, alpha(1.5), 1e-4).unwrap();
        assert!(v.abs() < 1e-12);
        assert!((delta.as_slice()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn oracle_on_maximal_qubit() {
        let m = maximally_coherent(2, &[0.0, 0.0]).unwrap();
        let (v, _) = brute_force_min(&m, alpha(2.0), 1e-4).unwrap();
        assert!((v - (2f64.sqrt() - 1.0)).abs() < 2e-3);
    }

    #[test]
    fn half_order_identities() {
        let mut rng = RngSeed(31).stream();
        for _ in 0..50 {
            let rho = random_density(3, 3, &mut rng).unwrap();
            let forms = half_order_forms(&rho);
            assert!((forms.closed_form - 2.0 * skew_info_sum(&rho)).abs() < 1e-10);
            assert!((forms.ratio() - 2.0).abs() < 1e-8);
            assert!((skew_info_sum(&rho) - skew_info_commutator(&rho)).abs() < 1e-10);
            assert!(forms.hilbert_schmidt_min <= forms.closed_form + 1e-12);
        }
    }

    #[test]
    fn c2_agrees_with_family() {
        let mut rng = RngSeed(32).stream();
        for _ in 0..50 {
            let rho = random_density(4, 3, &mut rng).unwrap();
            assert!((c2_direct(&rho) - coherence_alpha(&rho, alpha(2.0)).value).abs() < 1e-12);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for s in ["tsallis:0.5", "rastegin:2", "relent", "l1", "skew", "c2"] {
            let k: CoherenceKind = s.parse().unwrap();
            let again: CoherenceKind = k.to_string().parse().unwrap();
            assert_eq!(k, again);
        }
        assert!("tsallis".parse::<CoherenceKind>().is_err());
        assert!("tsallis:3".parse::<CoherenceKind>().is_err());
        assert!("fidelity".parse::<CoherenceKind>().is_err());
    }
}
