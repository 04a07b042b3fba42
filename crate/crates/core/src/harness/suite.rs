use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{random_channel, random_incoherent_channel, KrausChannel};
use crate::divergence::Alpha;
use crate::error::{Error, Result};
use crate::rng::{label_hash, substream, RngSeed, Stream};
use crate::states::{haar_unitary, random_density, random_incoherent, DensityMatrix};

use super::checks::{
    check_convexity, check_holder_step, check_lemma1, check_monotonicity, check_observations,
    check_strong_monotonicity, ObservationInputs,
};
use super::{CheckName, Digest, Family, RankPolicy, TrialConfig, TrialRecord};

/// The random draw behind one trial. Regenerated exactly by
/// [`trial_inputs`] from the trial's cell and index.
#[derive(Debug, Clone)]
pub enum TrialInputs {
    /// A state and an incoherent channel.
    Incoherent {
        rho: DensityMatrix,
        channel: KrausChannel,
    },
    /// A weighted ensemble.
    Ensemble(Vec<(f64, DensityMatrix)>),
    /// A pair of states and an arbitrary channel.
    Pair {
        rho: DensityMatrix,
        sigma: DensityMatrix,
        channel: KrausChannel,
    },
    Observations(ObservationInputs),
}

fn draw_rank(policy: RankPolicy, d: usize, rng: &mut Stream) -> usize {
    match policy {
        RankPolicy::Full => d,
        RankPolicy::MixedRanks => rng.gen_range(1..=d),
    }
}

fn draw_state(policy: RankPolicy, d: usize, rng: &mut Stream) -> Result<DensityMatrix> {
    let rank = draw_rank(policy, d, rng);
    random_density(d, rank, rng)
}

fn draw_ensemble(policy: RankPolicy, d: usize, rng: &mut Stream) -> Result<Vec<(f64, DensityMatrix)>> {
    let k = rng.gen_range(2..=4);
    let weights = random_incoherent(k, rng);
    weights
        .as_slice()
        .iter()
        .map(|&w| Ok((w, draw_state(policy, d, rng)?)))
        .collect()
}

fn cell_label(check: CheckName, dim: usize, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("{check}/d={dim}/alpha={a:?}"),
        None => format!("{check}/d={dim}"),
    }
}

fn cell_stream(cfg: &TrialConfig, check: CheckName, dim: usize, alpha: Option<f64>, trial: u64) -> Stream {
    substream(
        RngSeed(cfg.master_seed),
        label_hash(&cell_label(check, dim, alpha)),
        trial,
    )
}

/// Regenerates the inputs of trial `trial` in cell `(check, dim, alpha)`.
///
/// The second state σ of the divergence checks is always drawn full rank so
/// that f_α stays finite for α > 1; ρ follows the rank policy.
pub fn trial_inputs(
    cfg: &TrialConfig,
    check: CheckName,
    dim: usize,
    alpha: Option<f64>,
    trial: u64,
) -> Result<TrialInputs> {
    let mut rng = cell_stream(cfg, check, dim, alpha, trial);
    let rng = &mut rng;
    let (lo, hi) = cfg.n_kraus_range;
    let policy = cfg.rank_policy;
    Ok(match check {
        CheckName::StrongMonotonicity | CheckName::Monotonicity | CheckName::Holder => {
            let rho = draw_state(policy, dim, rng)?;
            let n = rng.gen_range(lo..=hi);
            let channel = random_incoherent_channel(dim, n, rng)?;
            TrialInputs::Incoherent { rho, channel }
        }
        CheckName::Convexity => TrialInputs::Ensemble(draw_ensemble(policy, dim, rng)?),
        CheckName::Lemma1 => {
            let rho = draw_state(policy, dim, rng)?;
            let sigma = random_density(dim, dim, rng)?;
            let n = rng.gen_range(lo..=hi);
            let channel = random_channel(dim, n, rng)?;
            TrialInputs::Pair { rho, sigma, channel }
        }
        CheckName::Obs1Positivity
        | CheckName::Obs2Isometry
        | CheckName::Obs3Contractivity
        | CheckName::Obs4JointConvexity
        | CheckName::Obs5Ancilla => {
            let rho = draw_state(policy, dim, rng)?;
            let sigma = random_density(dim, dim, rng)?;
            let n = rng.gen_range(lo..=hi);
            let channel = random_channel(dim, n, rng)?;
            let unitary = haar_unitary(dim, rng);
            let ancilla_dim = rng.gen_range(2..=3);
            let ancilla = random_incoherent(ancilla_dim, rng);
            let k = rng.gen_range(2..=3);
            let weights = random_incoherent(k, rng);
            let mut ensemble = Vec::with_capacity(k);
            for &w in weights.as_slice() {
                ensemble.push((w, draw_state(policy, dim, rng)?, random_density(dim, dim, rng)?));
            }
            TrialInputs::Observations(ObservationInputs {
                rho,
                sigma,
                channel,
                unitary,
                ancilla,
                ensemble,
            })
        }
    })
}

fn observation_index(check: CheckName) -> usize {
    match check {
        CheckName::Obs1Positivity => 0,
        CheckName::Obs2Isometry => 1,
        CheckName::Obs3Contractivity => 2,
        CheckName::Obs4JointConvexity => 3,
        _ => 4,
    }
}

fn run_trial(cfg: &TrialConfig, check: CheckName, dim: usize, alpha: Alpha, trial: u64) -> Result<TrialRecord> {
    let kind = cfg.family.kind(alpha);
    let tol = cfg.tolerance;
    let inputs = trial_inputs(cfg, check, dim, Some(alpha.value()), trial)?;
    let record = match (check, inputs) {
        (CheckName::StrongMonotonicity, TrialInputs::Incoherent { rho, channel }) => {
            check_strong_monotonicity(kind, &rho, &channel, tol)?
        }
        (CheckName::Monotonicity, TrialInputs::Incoherent { rho, channel }) => {
            check_monotonicity(kind, &rho, &channel, tol)?
        }
        (CheckName::Holder, TrialInputs::Incoherent { rho, channel }) => check_holder_step(&rho, &channel, alpha, tol)?,
        (CheckName::Convexity, TrialInputs::Ensemble(parts)) => check_convexity(kind, &parts, tol)?,
        (CheckName::Lemma1, TrialInputs::Pair { rho, sigma, channel }) => {
            check_lemma1(&rho, &sigma, &channel, alpha, tol)?
        }
        (obs, TrialInputs::Observations(inputs)) => {
            check_observations(&inputs, alpha, tol)?.swap_remove(observation_index(obs))
        }
        _ => unreachable!("trial_inputs returns the variant matching each check"),
    };
    Ok(record.with_digest(Digest {
        seed: cfg.master_seed,
        trial,
    }))
}

/// Aggregate over the trials of one (check, dim, α) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub check_name: CheckName,
    pub kind: String,
    pub dim: usize,
    pub alpha: f64,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub degenerate: usize,
    pub errors: usize,
    /// Smallest non-degenerate margin, with the trial that produced it.
    pub worst_margin: Option<f64>,
    pub worst_trial: Option<u64>,
    pub first_error: Option<String>,
    #[serde(skip)]
    pub runtime: Duration,
}

/// Aggregate over a whole suite. Serializes without runtimes so that equal
/// seeds give byte-identical output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub master_seed: u64,
    pub family: Family,
    pub tolerance: f64,
    pub cells: Vec<CellSummary>,
    pub total_trials: usize,
    pub total_failed: usize,
    pub total_degenerate: usize,
    pub total_errors: usize,
    /// True when no trial failed and none errored.
    pub passed: bool,
    #[serde(skip)]
    pub runtime: Duration,
}

impl SuiteSummary {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(|c| c.failed > 0 || c.errors > 0)
    }
}

/// Runs the suite and discards the per-trial records.
pub fn run_suite(cfg: &TrialConfig) -> Result<SuiteSummary> {
    run_suite_with(cfg, |_| {})
}

/// Runs the suite, passing every record to `sink` in canonical order:
/// check, then dim, then α, then trial index. Trials inside a cell run in
/// parallel but are merged in index order, so neither the records nor the
/// summary depend on the number of workers.
pub fn run_suite_with(cfg: &TrialConfig, mut sink: impl FnMut(&TrialRecord)) -> Result<SuiteSummary> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::BadConfig(e.to_string()))?;
    let started = Instant::now();

    let mut checks = cfg.checks.clone();
    checks.sort();
    checks.dedup();
    let mut dims = cfg.dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let mut alphas: Vec<Alpha> = cfg.alphas.iter().map(|&a| Alpha::new(a)).collect::<Result<_>>()?;
    alphas.sort_by(|a, b| a.value().total_cmp(&b.value()));
    alphas.dedup_by(|a, b| a.value() == b.value());

    let mut cells = Vec::new();
    for &check in &checks {
        for &dim in &dims {
            for &alpha in &alphas {
                // f_α-level checks have no α = 1 member.
                if !check.is_measure_check() && alpha.near_one() {
                    continue;
                }
                let cell_start = Instant::now();
                let outcomes: Vec<Result<TrialRecord>> = pool.install(|| {
                    (0..cfg.trials_per_cell as u64)
                        .into_par_iter()
                        .map(|t| run_trial(cfg, check, dim, alpha, t))
                        .collect()
                });
                let mut cell = CellSummary {
                    check_name: check,
                    kind: if check.is_measure_check() {
                        cfg.family.kind(alpha).to_string()
                    } else {
                        "f_alpha".to_string()
                    },
                    dim,
                    alpha: alpha.value(),
                    trials: outcomes.len(),
                    passed: 0,
                    failed: 0,
                    degenerate: 0,
                    errors: 0,
                    worst_margin: None,
                    worst_trial: None,
                    first_error: None,
                    runtime: Duration::ZERO,
                };
                for outcome in &outcomes {
                    match outcome {
                        Ok(rec) => {
                            sink(rec);
                            if rec.degenerate {
                                cell.degenerate += 1;
                            }
                            if rec.passed {
                                cell.passed += 1;
                            } else {
                                cell.failed += 1;
                            }
                            if !rec.degenerate && cell.worst_margin.is_none_or(|w| rec.margin < w) {
                                cell.worst_margin = Some(rec.margin);
                                cell.worst_trial = Some(rec.digest.trial);
                            }
                        }
                        Err(e) => {
                            cell.errors += 1;
                            cell.first_error.get_or_insert_with(|| e.to_string());
                        }
                    }
                }
                cell.runtime = cell_start.elapsed();
                cells.push(cell);
            }
        }
    }

    let total_failed = cells.iter().map(|c| c.failed).sum();
    let total_errors = cells.iter().map(|c| c.errors).sum();
    Ok(SuiteSummary {
        master_seed: cfg.master_seed,
        family: cfg.family,
        tolerance: cfg.tolerance,
        total_trials: cells.iter().map(|c| c.trials).sum(),
        total_failed,
        total_degenerate: cells.iter().map(|c| c.degenerate).sum(),
        total_errors,
        passed: total_failed == 0 && total_errors == 0,
        cells,
        runtime: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, workers: usize) -> TrialConfig {
        TrialConfig {
            dims: vec![2, 3],
            alphas: vec![0.5, 1.0, 1.5],
            trials_per_cell: 8,
            master_seed: seed,
            workers: Some(workers),
            ..TrialConfig::default()
        }
    }

    #[test]
    fn small_suite_passes_and_skips_alpha_one_for_divergence_checks() {
        let summary = run_suite(&small(7, 2)).unwrap();
        assert!(summary.passed, "{:?}", summary.failed_cells().collect::<Vec<_>>());
        // 3 measure checks × 2 dims × 3 alphas + 7 others × 2 dims × 2 alphas.
        assert_eq!(summary.cells.len(), 18 + 28);
        assert_eq!(summary.total_trials, 46 * 8);
    }

    #[test]
    fn records_arrive_in_canonical_order() {
        let mut seen = Vec::new();
        run_suite_with(&small(9, 3), |r| {
            seen.push((r.check_name, r.dim, r.alpha.map(f64::to_bits), r.digest.trial))
        })
        .unwrap();
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let collect = |w| {
            let mut out = Vec::new();
            let s = run_suite_with(&small(11, w), |r| out.push(r.clone())).unwrap();
            (serde_json::to_string(&s).unwrap(), out)
        };
        assert_eq!(collect(1), collect(4));
    }

    #[test]
    fn inputs_replay_from_digest() {
        let cfg = small(13, 1);
        let a = trial_inputs(&cfg, CheckName::Lemma1, 3, Some(0.5), 4).unwrap();
        let b = trial_inputs(&cfg, CheckName::Lemma1, 3, Some(0.5), 4).unwrap();
        match (a, b) {
            (TrialInputs::Pair { rho: r1, .. }, TrialInputs::Pair { rho: r2, .. }) => assert_eq!(r1, r2),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrialConfig {
            trials_per_cell: 0,
            ..TrialConfig::default()
        };
        assert!(run_suite(&cfg).is_err());
    }
}
