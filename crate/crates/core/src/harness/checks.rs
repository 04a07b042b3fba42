use crate::channels::{KrausChannel, INCOHERENT_TOL};
use crate::coherence::{optimal_incoherent_state, CoherenceKind};
use crate::divergence::{f_alpha, f_alpha_resolution, f_alpha_spectra, Alpha, ExtendedReal};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::states::{DensityMatrix, ProbabilityVector, PROB_SUM_TOL};

use super::{CheckName, TrialRecord};

fn require_incoherent(ch: &KrausChannel) -> Result<()> {
    if !ch.is_incoherent(INCOHERENT_TOL) {
        return Err(Error::NotIncoherentChannel);
    }
    Ok(())
}

fn require_not_near_one(alpha: Alpha) -> Result<()> {
    if alpha.near_one() {
        return Err(Error::BadAlpha(alpha.value()));
    }
    Ok(())
}

fn kind_alpha(kind: CoherenceKind) -> Option<f64> {
    kind.alpha().map(Alpha::value)
}

/// f_α together with its floating-point uncertainty.
fn f_resolved(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: Alpha) -> Result<(ExtendedReal, f64)> {
    let (rs, ss) = (rho.spectrum(), sigma.spectrum());
    let f = f_alpha_spectra(&rs, &ss, alpha)?;
    Ok((f, f_alpha_resolution(&rs, &ss, alpha)))
}

/// sgn₁(α)·f with +∞ kept as +∞ (only reachable for α > 1).
fn signed(f: ExtendedReal, alpha: Alpha) -> f64 {
    alpha.sgn1() * f.to_f64()
}

/// C(ρ) ≥ Σₙ pₙ C(ρₙ) under an incoherent operation with sub-selection.
/// Dropped outcomes (p < P_MIN) contribute nothing to the right side.
pub fn check_strong_monotonicity(
    kind: CoherenceKind,
    rho: &DensityMatrix,
    ch: &KrausChannel,
    tolerance: f64,
) -> Result<TrialRecord> {
    require_incoherent(ch)?;
    let lhs = kind.evaluate(rho);
    let rhs: f64 = ch
        .select(rho)?
        .outcomes
        .iter()
        .map(|o| o.prob * kind.evaluate(&o.post_state))
        .sum();
    Ok(TrialRecord::inequality(
        CheckName::StrongMonotonicity,
        kind.to_string(),
        rho.dim(),
        kind_alpha(kind),
        lhs,
        rhs,
        tolerance,
    ))
}

/// C(ρ) ≥ C(Φ(ρ)) for an incoherent channel Φ.
pub fn check_monotonicity(
    kind: CoherenceKind,
    rho: &DensityMatrix,
    ch: &KrausChannel,
    tolerance: f64,
) -> Result<TrialRecord> {
    require_incoherent(ch)?;
    let lhs = kind.evaluate(rho);
    let rhs = kind.evaluate(&ch.apply(rho)?);
    Ok(TrialRecord::inequality(
        CheckName::Monotonicity,
        kind.to_string(),
        rho.dim(),
        kind_alpha(kind),
        lhs,
        rhs,
        tolerance,
    ))
}

/// Σᵢ qᵢ C(σᵢ) ≥ C(Σᵢ qᵢ σᵢ).
pub fn check_convexity(kind: CoherenceKind, ensemble: &[(f64, DensityMatrix)], tolerance: f64) -> Result<TrialRecord> {
    let total: f64 = ensemble.iter().map(|(w, _)| w).sum();
    if ensemble.is_empty() || (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::BadWeights(format!("weights sum to {total}")));
    }
    let mixed = DensityMatrix::mixture(ensemble)?;
    let lhs: f64 = ensemble.iter().map(|(w, s)| w * kind.evaluate(s)).sum();
    let rhs = kind.evaluate(&mixed);
    Ok(TrialRecord::inequality(
        CheckName::Convexity,
        kind.to_string(),
        mixed.dim(),
        kind_alpha(kind),
        lhs,
        rhs,
        tolerance,
    ))
}

/// sgn₁(α) f_α(ρ, σ) ≥ sgn₁(α) Σₙ pₙ^α qₙ^{1−α} f_α(ρₙ, σₙ) for any
/// channel, where (pₙ, ρₙ) and (qₙ, σₙ) are the sub-selected outcomes of ρ
/// and σ.
pub fn check_lemma1(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    ch: &KrausChannel,
    alpha: Alpha,
    tolerance: f64,
) -> Result<TrialRecord> {
    require_not_near_one(alpha)?;
    let a = alpha.value();
    let (base, mut resolution) = f_resolved(rho, sigma, alpha)?;
    let lhs = signed(base, alpha);
    let sel_rho = ch.select(rho)?;
    let sel_sigma = ch.select(sigma)?;

    let mut sum = 0.0;
    let mut unbounded = false;
    for o in &sel_rho.outcomes {
        let Some(s) = sel_sigma.outcome(o.index) else {
            // q_n ≈ 0 with p_n > 0: the term is +∞ for α > 1 and 0 for α < 1.
            if a > 1.0 {
                unbounded = true;
            }
            continue;
        };
        let weight = o.prob.powf(a) * s.prob.powf(1.0 - a);
        match f_resolved(&o.post_state, &s.post_state, alpha)? {
            (ExtendedReal::Finite(f), r) => {
                sum += weight * f;
                resolution += weight * r;
            }
            (ExtendedReal::PositiveInfinity, _) => unbounded = true,
        }
    }
    let rhs = if unbounded { f64::INFINITY } else { alpha.sgn1() * sum };
    let record = TrialRecord::inequality(
        CheckName::Lemma1,
        "f_alpha".into(),
        rho.dim(),
        Some(a),
        lhs,
        rhs,
        tolerance,
    )
    .with_resolution(resolution, tolerance);
    Ok(if unbounded { record.mark_degenerate() } else { record })
}

/// The Hölder step of the strong-monotonicity argument, with δ° the
/// optimal incoherent state of ρ and σₙ° its sub-selected images:
///
/// α ∈ (0,1): (Σ qₙ)^{1−α} (Σ pₙ f^{1/α})^α ≥ Σ pₙ^α qₙ^{1−α} f,
/// α ∈ (1,2]: the reverse, where f = f_α(ρₙ, σₙ°).
pub fn check_holder_step(rho: &DensityMatrix, ch: &KrausChannel, alpha: Alpha, tolerance: f64) -> Result<TrialRecord> {
    require_not_near_one(alpha)?;
    require_incoherent(ch)?;
    let a = alpha.value();
    let delta = optimal_incoherent_state(rho, alpha)?.embed();
    let sel_rho = ch.select(rho)?;
    let sel_delta = ch.select(&delta)?;

    let q_total: f64 = sel_delta.all_probs.iter().sum();
    let mut weighted_root = 0.0;
    let mut mixed = 0.0;
    let mut degenerate = false;
    for o in &sel_rho.outcomes {
        let Some(s) = sel_delta.outcome(o.index) else {
            degenerate = true;
            continue;
        };
        match f_alpha(&o.post_state, &s.post_state, alpha)? {
            ExtendedReal::Finite(f) => {
                weighted_root += o.prob * f.max(0.0).powf(1.0 / a);
                mixed += o.prob.powf(a) * s.prob.powf(1.0 - a) * f;
            }
            ExtendedReal::PositiveInfinity => degenerate = true,
        }
    }
    let holder = q_total.powf(1.0 - a) * weighted_root.powf(a);
    let (lhs, rhs) = if a < 1.0 { (holder, mixed) } else { (mixed, holder) };
    let record = TrialRecord::inequality(
        CheckName::Holder,
        "f_alpha".into(),
        rho.dim(),
        Some(a),
        lhs,
        rhs,
        tolerance,
    );
    Ok(if degenerate { record.mark_degenerate() } else { record })
}

/// Inputs for the five structural properties of f_α.
#[derive(Debug, Clone)]
pub struct ObservationInputs {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    /// Any TPCP map (contractivity).
    pub channel: KrausChannel,
    /// Unitary for the isometry property.
    pub unitary: ComplexMatrix,
    /// Ancilla state for f_α(ρ⊗δ, σ⊗δ) = f_α(ρ, σ).
    pub ancilla: ProbabilityVector,
    /// (pᵢ, ρᵢ, σᵢ) for joint convexity.
    pub ensemble: Vec<(f64, DensityMatrix, DensityMatrix)>,
}

/// One record per property, in order:
///
/// 1. sgn₁(α)(f_α(ρ,σ) − 1) ≥ 0;
/// 2. f_α(UρU†, UσU†) = f_α(ρ,σ);
/// 3. sgn₁(α) f_α(Φρ, Φσ) ≤ sgn₁(α) f_α(ρ,σ);
/// 4. sgn₁(α) f_α is jointly convex;
/// 5. f_α(ρ⊗δ, σ⊗δ) = f_α(ρ,σ).
pub fn check_observations(inputs: &ObservationInputs, alpha: Alpha, tolerance: f64) -> Result<Vec<TrialRecord>> {
    require_not_near_one(alpha)?;
    let a = Some(alpha.value());
    let d = inputs.rho.dim();
    let kind = || "f_alpha".to_string();
    let f = |r: &DensityMatrix, s: &DensityMatrix| f_resolved(r, s, alpha);
    let (base, base_res) = f(&inputs.rho, &inputs.sigma)?;

    let obs1 = TrialRecord::inequality(
        CheckName::Obs1Positivity,
        kind(),
        d,
        a,
        signed(base, alpha),
        alpha.sgn1(),
        tolerance,
    )
    .with_resolution(base_res, tolerance);

    let (rotated, rotated_res) = f(
        &inputs.rho.conjugate_by(&inputs.unitary)?,
        &inputs.sigma.conjugate_by(&inputs.unitary)?,
    )?;
    let obs2 = TrialRecord::equality(
        CheckName::Obs2Isometry,
        kind(),
        d,
        a,
        rotated.to_f64(),
        base.to_f64(),
        tolerance,
    )
    .with_resolution(base_res + rotated_res, tolerance);

    let (mapped, mapped_res) = f(
        &inputs.channel.apply(&inputs.rho)?,
        &inputs.channel.apply(&inputs.sigma)?,
    )?;
    let obs3 = TrialRecord::inequality(
        CheckName::Obs3Contractivity,
        kind(),
        d,
        a,
        signed(base, alpha),
        signed(mapped, alpha),
        tolerance,
    )
    .with_resolution(base_res + mapped_res, tolerance);

    let mut weighted = 0.0;
    let mut weighted_res = 0.0;
    for (p, r, s) in &inputs.ensemble {
        let (fi, ri) = f(r, s)?;
        weighted += p * signed(fi, alpha);
        weighted_res += p * ri;
    }
    let rho_mix: Vec<(f64, DensityMatrix)> = inputs.ensemble.iter().map(|(p, r, _)| (*p, r.clone())).collect();
    let sigma_mix: Vec<(f64, DensityMatrix)> = inputs.ensemble.iter().map(|(p, _, s)| (*p, s.clone())).collect();
    let (joint, joint_res) = f(&DensityMatrix::mixture(&rho_mix)?, &DensityMatrix::mixture(&sigma_mix)?)?;
    let obs4 = TrialRecord::inequality(
        CheckName::Obs4JointConvexity,
        kind(),
        d,
        a,
        weighted,
        signed(joint, alpha),
        tolerance,
    )
    .with_resolution(weighted_res + joint_res, tolerance);

    let anc = inputs.ancilla.embed();
    let (extended, extended_res) = f(&inputs.rho.tensor(&anc), &inputs.sigma.tensor(&anc))?;
    let obs5 = TrialRecord::equality(
        CheckName::Obs5Ancilla,
        kind(),
        d,
        a,
        extended.to_f64(),
        base.to_f64(),
        tolerance,
    )
    .with_resolution(base_res + extended_res, tolerance);

    Ok(vec![obs1, obs2, obs3, obs4, obs5])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{dephasing_channel, random_channel, random_incoherent_channel};
    use crate::coherence::CoherenceKind;
    use crate::rng::RngSeed;
    use crate::states::{haar_unitary, random_density, random_incoherent};

    const TOL: f64 = 1e-9;

    fn alpha(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    #[test]
    fn identity_channel_is_tight() {
        let mut rng = RngSeed(51).stream();
        let rho = random_density(3, 3, &mut rng).unwrap();
        let id = KrausChannel::identity(3);
        for kind in [
            CoherenceKind::TsallisFamily(alpha(1.5)),
            CoherenceKind::RasteginTsallis(alpha(0.4)),
            CoherenceKind::RelativeEntropy,
        ] {
            let r = check_strong_monotonicity(kind, &rho, &id, TOL).unwrap();
            assert!(r.margin.abs() < 1e-14, "{kind}: {}", r.margin);
            let r = check_monotonicity(kind, &rho, &id, TOL).unwrap();
            assert!(r.margin.abs() < 1e-14);
        }
    }

    #[test]
    fn dephasing_removes_all_coherence() {
        let mut rng = RngSeed(52).stream();
        let rho = random_density(3, 3, &mut rng).unwrap();
        let kind = CoherenceKind::TsallisFamily(alpha(0.7));
        let r = check_strong_monotonicity(kind, &rho, &dephasing_channel(3), TOL).unwrap();
        assert!(r.rhs.abs() < 1e-12);
        assert!((r.margin - kind.evaluate(&rho)).abs() < 1e-12);
        let r = check_monotonicity(kind, &rho, &dephasing_channel(3), TOL).unwrap();
        assert!(r.rhs.abs() < 1e-12);
    }

    #[test]
    fn coherent_channel_rejected() {
        let mut rng = RngSeed(53).stream();
        let rho = random_density(2, 2, &mut rng).unwrap();
        let ch = random_channel(2, 2, &mut rng).unwrap();
        let kind = CoherenceKind::TsallisFamily(alpha(2.0));
        assert!(matches!(
            check_strong_monotonicity(kind, &rho, &ch, TOL),
            Err(Error::NotIncoherentChannel)
        ));
        assert!(matches!(
            check_holder_step(&rho, &ch, alpha(0.5), TOL),
            Err(Error::NotIncoherentChannel)
        ));
    }

    #[test]
    fn random_qubit_strong_monotonicity() {
        let mut rng = RngSeed(54).stream();
        for _ in 0..200 {
            let rho = random_density(2, 2, &mut rng).unwrap();
            let ch = random_incoherent_channel(2, 3, &mut rng).unwrap();
            let r = check_strong_monotonicity(CoherenceKind::TsallisFamily(alpha(1.5)), &rho, &ch, TOL).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn convexity_trivial_ensembles() {
        let mut rng = RngSeed(55).stream();
        let s = random_density(3, 3, &mut rng).unwrap();
        let kind = CoherenceKind::TsallisFamily(alpha(0.3));
        let r = check_convexity(kind, &[(1.0, s.clone())], TOL).unwrap();
        assert!(r.margin.abs() < 1e-14);
        let r = check_convexity(kind, &[(0.4, s.clone()), (0.6, s.clone())], TOL).unwrap();
        assert!(r.margin.abs() < 1e-13);
        assert!(matches!(
            check_convexity(kind, &[(0.4, s.clone()), (0.4, s)], TOL),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn lemma1_equality_cases() {
        let mut rng = RngSeed(56).stream();
        let rho = random_density(3, 3, &mut rng).unwrap();
        let sigma = random_density(3, 3, &mut rng).unwrap();
        for &a in &[0.3, 1.6] {
            let r = check_lemma1(&rho, &sigma, &KrausChannel::identity(3), alpha(a), TOL).unwrap();
            assert!(r.margin.abs() < 1e-12, "{r:?}");
            let ch = random_channel(3, 3, &mut rng).unwrap();
            let r = check_lemma1(&rho, &rho, &ch, alpha(a), TOL).unwrap();
            assert!((r.lhs - alpha(a).sgn1()).abs() < 1e-12);
            assert!(r.margin.abs() < 1e-10, "{r:?}");
        }
        assert!(check_lemma1(&rho, &sigma, &KrausChannel::identity(3), alpha(1.0), TOL).is_err());
    }

    #[test]
    fn lemma1_random() {
        let mut rng = RngSeed(57).stream();
        for &a in &[0.2, 0.8, 1.2, 2.0] {
            for _ in 0..100 {
                let rho = random_density(3, 3, &mut rng).unwrap();
                let sigma = random_density(3, 3, &mut rng).unwrap();
                let ch = random_channel(3, 3, &mut rng).unwrap();
                let r = check_lemma1(&rho, &sigma, &ch, alpha(a), TOL).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn holder_single_kraus_is_tight() {
        let mut rng = RngSeed(58).stream();
        for &a in &[0.3, 1.5] {
            let rho = random_density(3, 3, &mut rng).unwrap();
            let ch = random_incoherent_channel(3, 1, &mut rng).unwrap();
            let r = check_holder_step(&rho, &ch, alpha(a), TOL).unwrap();
            assert!(r.margin.abs() <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn holder_projective_measurement_qubit() {
        let mut rng = RngSeed(59).stream();
        for &a in &[0.25, 0.75, 1.25, 2.0] {
            let rho = random_density(2, 2, &mut rng).unwrap();
            let r = check_holder_step(&rho, &dephasing_channel(2), alpha(a), TOL).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn observation_equality_cases() {
        let mut rng = RngSeed(60).stream();
        let rho = random_density(3, 3, &mut rng).unwrap();
        let inputs = ObservationInputs {
            rho: rho.clone(),
            sigma: rho.clone(),
            channel: random_channel(3, 2, &mut rng).unwrap(),
            unitary: ComplexMatrix::identity(3),
            ancilla: random_incoherent(2, &mut rng),
            ensemble: vec![(1.0, rho.clone(), rho.clone())],
        };
        for &a in &[0.4, 1.8] {
            let recs = check_observations(&inputs, alpha(a), TOL).unwrap();
            assert_eq!(recs.len(), 5);
            assert!(recs[0].margin.abs() <= 1e-10);
            assert!(recs[1].margin.abs() <= 1e-10);
            assert!(recs.iter().all(|r| r.passed));
        }
    }

    #[test]
    fn observations_random() {
        let mut rng = RngSeed(61).stream();
        for &a in &[0.1, 0.5, 1.1, 2.0] {
            for _ in 0..50 {
                let mut draw = || random_density(3, 3, &mut rng).unwrap();
                let (rho, sigma, r2, s2) = (draw(), draw(), draw(), draw());
                let inputs = ObservationInputs {
                    rho: rho.clone(),
                    sigma: sigma.clone(),
                    channel: random_channel(3, 2, &mut rng).unwrap(),
                    unitary: haar_unitary(3, &mut rng),
                    ancilla: random_incoherent(3, &mut rng),
                    ensemble: vec![(0.3, rho, sigma), (0.7, r2, s2)],
                };
                for r in check_observations(&inputs, alpha(a), TOL).unwrap() {
                    assert!(r.passed, "{r:?}");
                }
            }
        }
    }
}
