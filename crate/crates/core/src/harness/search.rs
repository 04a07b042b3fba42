use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{incoherent_from_raw, KrausChannel, INCOHERENT_TOL};
use crate::coherence::CoherenceKind;
use crate::divergence::Alpha;
use crate::error::{Error, Result};
use crate::io::{channel_to_json, parse_channel, parse_state, state_to_json};
use crate::linalg::{spectral_decompose, ComplexMatrix};
use crate::rng::{label_hash, substream, RngSeed, Stream};
use crate::states::{complex_gaussian, DensityMatrix};

use super::Family;

/// A witness must beat this gap to count.
pub const WITNESS_GAP: f64 = 1e-6;
/// Replay of a witness must reproduce its gap this closely.
pub const REPLAY_TOL: f64 = 1e-12;
/// For α < 1 every eigenvalue on the structural support of ρ and of each
/// post-measurement state must exceed this fraction of the trace.
pub const RESOLVED_EIG: f64 = 1e-8;

const RESTART_BATCH: u64 = 64;

/// Parameters of [`search_violation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub family: Family,
    pub dim: usize,
    /// Restart r searches at `alphas[r % alphas.len()]`.
    pub alphas: Vec<f64>,
    /// Total number of objective evaluations.
    pub budget: u64,
    pub master_seed: u64,
    pub n_kraus_range: (usize, usize),
    /// Evaluations spent on each random restart (the first is the random
    /// draw itself, the rest hill-climb from it).
    pub evals_per_restart: u64,
    pub workers: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            family: Family::Rastegin,
            dim: 2,
            alphas: vec![0.3, 0.5, 1.5, 2.0],
            budget: 1_000_000,
            master_seed: 20160314,
            n_kraus_range: (1, 4),
            evals_per_restart: 100,
            workers: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.to_string()));
        if self.dim < 2 || self.dim > 16 {
            return bad("search dimension must be in 2..=16");
        }
        if self.alphas.is_empty() {
            return bad("alphas must be nonempty");
        }
        for &a in &self.alphas {
            Alpha::new(a)?;
        }
        if self.budget == 0 || self.evals_per_restart == 0 {
            return bad("budget and evals_per_restart must be at least 1");
        }
        let (lo, hi) = self.n_kraus_range;
        if lo == 0 || hi < lo {
            return bad("n_kraus_range must satisfy 1 <= lo <= hi");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

/// Outcome of a violation search. When nothing was found the instance
/// fields describe the largest gap seen.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    pub found: bool,
    pub kind: CoherenceKind,
    pub alpha: Alpha,
    pub state: DensityMatrix,
    pub channel: KrausChannel,
    pub c_before: f64,
    pub avg_c_after: f64,
    /// avg_c_after − c_before.
    pub gap: f64,
    /// Largest gap over the whole search.
    pub best_gap: f64,
    pub master_seed: u64,
    /// Restart that produced the reported instance.
    pub restart: u64,
    pub evaluations: u64,
}

/// (C(ρ), Σₙ pₙ C(ρₙ)) over the sub-selected outcomes of an incoherent
/// channel. Strong monotonicity fails when the second exceeds the first.
pub fn strong_monotonicity_gap(kind: CoherenceKind, rho: &DensityMatrix, ch: &KrausChannel) -> Result<(f64, f64)> {
    if !ch.is_incoherent(INCOHERENT_TOL) {
        return Err(Error::NotIncoherentChannel);
    }
    let before = kind.evaluate(rho);
    let after = ch
        .select(rho)?
        .outcomes
        .iter()
        .map(|o| o.prob * kind.evaluate(&o.post_state))
        .sum();
    Ok((before, after))
}

/// Search coordinates: a Ginibre factor for ρ, the row targets of every
/// Kraus column, and the unprojected column vectors.
#[derive(Debug, Clone)]
struct Point {
    g: Vec<num_complex::Complex64>,
    rows: Vec<Vec<usize>>,
    raw: Vec<Vec<num_complex::Complex64>>,
}

impl Point {
    fn draw(d: usize, n_kraus: usize, rng: &mut Stream) -> Self {
        Self {
            g: (0..d * d).map(|_| complex_gaussian(rng)).collect(),
            rows: (0..d)
                .map(|_| (0..n_kraus).map(|_| rng.gen_range(0..d)).collect())
                .collect(),
            raw: (0..d)
                .map(|_| (0..n_kraus).map(|_| complex_gaussian(rng)).collect())
                .collect(),
        }
    }

    fn build(&self, d: usize) -> Option<(DensityMatrix, KrausChannel)> {
        let g = ComplexMatrix::from_fn(d, |i, j| self.g[i * d + j]);
        let gg = g.mul(&g.adjoint()).ok()?;
        if !(gg.trace().re > 1e-300) {
            return None;
        }
        let rho = DensityMatrix::from_psd_unchecked(gg);
        let ch = incoherent_from_raw(d, &self.rows, &self.raw)?;
        Some((rho, ch))
    }

    fn perturb(&mut self, d: usize, step: f64, rng: &mut Stream) {
        let n_kraus = self.rows[0].len();
        if n_kraus > 1 && rng.gen_bool(0.1) {
            let j = rng.gen_range(0..d);
            let n = rng.gen_range(0..n_kraus);
            self.rows[j][n] = rng.gen_range(0..d);
            return;
        }
        let k = rng.gen_range(0..d * d + d * n_kraus);
        let z = complex_gaussian(rng) * step;
        if k < d * d {
            self.g[k] += z;
        } else {
            let k = k - d * d;
            self.raw[k / n_kraus][k % n_kraus] += z;
        }
    }
}

struct RestartOutcome {
    restart: u64,
    alpha: Alpha,
    point: Option<Point>,
    gap: f64,
}

/// λ ↦ λ^α has unbounded slope at 0 for α < 1, so eigenvalues near the
/// [`crate::linalg::ZERO_EIG`] clamp move C̃_α by up to ~ZERO_EIG^α. A
/// spectrum is trusted when, restricted to the rows that are not exactly
/// zero, it stays well clear of that clamp. Exact zeros (from Kraus columns
/// that share a row) are structural and fine.
fn resolved(m: &ComplexMatrix) -> bool {
    let inner = m.inner();
    let d = m.dim();
    let rows: Vec<usize> = (0..d)
        .filter(|&i| inner.row(i).iter().any(|z| z.norm_sqr() != 0.0))
        .collect();
    if rows.is_empty() {
        return true;
    }
    let k = rows.len();
    let sub = ComplexMatrix::from_fn(k, |a, b| inner[(rows[a], rows[b])]);
    let trace: f64 = (0..k).map(|i| sub.inner()[(i, i)].re).sum();
    // Clamping to zero only lowers eigenvalues, so it cannot hide an
    // unresolved one from this test.
    match spectral_decompose(&sub) {
        Ok(spec) => spec.eigenvalues.iter().all(|&l| l >= RESOLVED_EIG * trace),
        Err(_) => false,
    }
}

/// Gap Σₙ pₙ C(ρₙ) − C(ρ), or `None` when the point is invalid or, for
/// α < 1, numerically unresolved.
fn guarded_gap(kind: CoherenceKind, rho: &DensityMatrix, ch: &KrausChannel) -> Option<(f64, f64)> {
    if !ch.is_incoherent(INCOHERENT_TOL) {
        return None;
    }
    let sel = ch.select(rho).ok()?;
    let guard = kind.alpha().is_some_and(|a| a.value() < 1.0 && !a.near_one());
    if guard && !(resolved(rho.matrix()) && sel.outcomes.iter().all(|o| resolved(o.post_state.matrix()))) {
        return None;
    }
    let before = kind.evaluate(rho);
    let after: f64 = sel.outcomes.iter().map(|o| o.prob * kind.evaluate(&o.post_state)).sum();
    (before.is_finite() && after.is_finite()).then_some((before, after))
}

fn objective(kind: CoherenceKind, d: usize, p: &Point) -> Option<f64> {
    let (rho, ch) = p.build(d)?;
    let (before, after) = guarded_gap(kind, &rho, &ch)?;
    Some(after - before)
}

fn run_restart(cfg: &SearchConfig, alphas: &[Alpha], restart: u64, evals: u64) -> RestartOutcome {
    let d = cfg.dim;
    let alpha = alphas[(restart % alphas.len() as u64) as usize];
    let kind = cfg.family.kind(alpha);
    let label = format!("search/{:?}/d={d}", cfg.family);
    let mut rng = substream(RngSeed(cfg.master_seed), label_hash(&label), restart);
    let (lo, hi) = cfg.n_kraus_range;
    let n_kraus = rng.gen_range(lo..=hi);

    let mut current = Point::draw(d, n_kraus, &mut rng);
    let mut current_gap = objective(kind, d, &current).unwrap_or(f64::NEG_INFINITY);
    let mut step = 0.3;
    for _ in 1..evals {
        let mut candidate = current.clone();
        candidate.perturb(d, step, &mut rng);
        match objective(kind, d, &candidate) {
            Some(gap) if gap > current_gap => {
                current = candidate;
                current_gap = gap;
                step = (step * 1.5).min(1.0);
            }
            _ => step = (step * 0.8).max(1e-6),
        }
    }
    let valid = current_gap.is_finite();
    RestartOutcome {
        restart,
        alpha,
        point: valid.then_some(current),
        gap: current_gap,
    }
}

/// Rebuilds the instance from its files and recomputes both sides with
/// fresh decompositions and the conditioning guard.
fn replay(
    kind: CoherenceKind,
    rho: &DensityMatrix,
    ch: &KrausChannel,
) -> Result<(DensityMatrix, KrausChannel, f64, f64)> {
    let rho = parse_state(&state_to_json(rho))?;
    let (ch, incoherent) = parse_channel(&channel_to_json(ch))?;
    if !incoherent {
        return Err(Error::NotIncoherentChannel);
    }
    let (before, after) = guarded_gap(kind, &rho, &ch).ok_or(Error::NotIncoherentChannel)?;
    Ok((rho, ch, before, after))
}

/// Random-restart hill climbing on Σₙ pₙ C(ρₙ) − C(ρ) over states and
/// incoherent channels.
///
/// Restarts run in parallel batches and are scanned in index order, so the
/// reported witness is the lowest-index restart whose final gap exceeds
/// [`WITNESS_GAP`] and survives a replay from its serialized files. The
/// result does not depend on the worker count.
pub fn search_violation(cfg: &SearchConfig) -> Result<ViolationReport> {
    cfg.validate()?;
    let alphas: Vec<Alpha> = cfg.alphas.iter().map(|&a| Alpha::new(a)).collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::BadConfig(e.to_string()))?;

    let per = cfg.evals_per_restart;
    let restarts = cfg.budget.div_ceil(per);
    let evals_of = |r: u64| {
        if r + 1 < restarts {
            per
        } else {
            cfg.budget - per * (restarts - 1)
        }
    };

    let mut best: Option<RestartOutcome> = None;
    let mut evaluations = 0;
    let mut start = 0;
    while start < restarts {
        let end = (start + RESTART_BATCH).min(restarts);
        let batch: Vec<RestartOutcome> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|r| run_restart(cfg, &alphas, r, evals_of(r)))
                .collect()
        });
        for outcome in batch {
            evaluations += evals_of(outcome.restart);
            if outcome.gap > WITNESS_GAP {
                if let Some(report) = verify(cfg, &outcome, evaluations)? {
                    let best_gap = best.as_ref().map_or(report.gap, |b| b.gap.max(report.gap));
                    return Ok(ViolationReport { best_gap, ..report });
                }
            }
            if outcome.point.is_some() && best.as_ref().is_none_or(|b| outcome.gap > b.gap) {
                best = Some(outcome);
            }
        }
        start = end;
    }

    let best = best.ok_or_else(|| Error::BadConfig("no valid search point was ever drawn".into()))?;
    let kind = cfg.family.kind(best.alpha);
    let (rho, ch) = best
        .point
        .as_ref()
        .and_then(|p| p.build(cfg.dim))
        .expect("valid point rebuilds");
    let (c_before, avg_c_after) = strong_monotonicity_gap(kind, &rho, &ch)?;
    Ok(ViolationReport {
        found: false,
        kind,
        alpha: best.alpha,
        state: rho,
        channel: ch,
        c_before,
        avg_c_after,
        gap: avg_c_after - c_before,
        best_gap: best.gap,
        master_seed: cfg.master_seed,
        restart: best.restart,
        evaluations,
    })
}

fn verify(cfg: &SearchConfig, outcome: &RestartOutcome, evaluations: u64) -> Result<Option<ViolationReport>> {
    let Some((rho, ch)) = outcome.point.as_ref().and_then(|p| p.build(cfg.dim)) else {
        return Ok(None);
    };
    let kind = cfg.family.kind(outcome.alpha);
    let Ok((rho, ch, c_before, avg_c_after)) = replay(kind, &rho, &ch) else {
        return Ok(None);
    };
    let gap = avg_c_after - c_before;
    if gap <= WITNESS_GAP || (gap - outcome.gap).abs() > REPLAY_TOL {
        return Ok(None);
    }
    Ok(Some(ViolationReport {
        found: true,
        kind,
        alpha: outcome.alpha,
        state: rho,
        channel: ch,
        c_before,
        avg_c_after,
        gap,
        best_gap: gap,
        master_seed: cfg.master_seed,
        restart: outcome.restart,
        evaluations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: Family, dim: usize, alphas: Vec<f64>, budget: u64) -> SearchConfig {
        SearchConfig {
            family,
            dim,
            alphas,
            budget,
            master_seed: 5,
            workers: Some(2),
            ..SearchConfig::default()
        }
    }

    #[test]
    fn tsallis_family_never_violates() {
        let report = search_violation(&cfg(Family::Tsallis, 3, vec![0.3, 2.0], 4_000)).unwrap();
        assert!(!report.found);
        assert!(report.best_gap <= WITNESS_GAP, "{}", report.best_gap);
        assert_eq!(report.evaluations, 4_000);
    }

    #[test]
    fn alpha_one_never_violates() {
        let report = search_violation(&cfg(Family::Rastegin, 3, vec![1.0], 2_000)).unwrap();
        assert!(!report.found);
    }

    #[test]
    fn rastegin_qutrit_violation_found_and_replays() {
        let report = search_violation(&cfg(Family::Rastegin, 3, vec![0.3, 0.5, 1.5, 2.0], 200_000)).unwrap();
        assert!(report.found, "best gap {}", report.best_gap);
        assert!(report.gap > WITNESS_GAP);
        let (b, a) = strong_monotonicity_gap(report.kind, &report.state, &report.channel).unwrap();
        assert!((a - b - report.gap).abs() <= REPLAY_TOL);
    }

    #[test]
    fn search_is_worker_independent() {
        let mut c = cfg(Family::Rastegin, 2, vec![0.5, 2.0], 3_000);
        let one = search_violation(&SearchConfig {
            workers: Some(1),
            ..c.clone()
        })
        .unwrap();
        c.workers = Some(3);
        let three = search_violation(&c).unwrap();
        assert_eq!(one.best_gap.to_bits(), three.best_gap.to_bits());
        assert_eq!(one.restart, three.restart);
        assert_eq!(one.state, three.state);
    }

    #[test]
    fn invalid_config() {
        assert!(search_violation(&cfg(Family::Rastegin, 1, vec![0.5], 10)).is_err());
        assert!(search_violation(&cfg(Family::Rastegin, 2, vec![], 10)).is_err());
        assert!(search_violation(&cfg(Family::Rastegin, 2, vec![0.5], 0)).is_err());
    }
}
