//! Randomized property checks for the coherence measures and the
//! divergence they are built on.
//!
//! Every check produces a [`TrialRecord`] with a signed margin: a check
//! passes when `margin ≥ −tolerance`. Records carry the `(seed, trial)`
//! digest that regenerates their inputs, see [`suite::trial_inputs`].

mod checks;
mod search;
mod suite;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use checks::{
    check_convexity, check_holder_step, check_lemma1, check_monotonicity, check_observations,
    check_strong_monotonicity, ObservationInputs,
};
pub use search::{search_violation, strong_monotonicity_gap, SearchConfig, ViolationReport};
pub use suite::{run_suite, run_suite_with, trial_inputs, CellSummary, SuiteSummary, TrialInputs};

/// Default pass line for every inequality.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// The individual property checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    StrongMonotonicity,
    Monotonicity,
    Convexity,
    Lemma1,
    Holder,
    Obs1Positivity,
    Obs2Isometry,
    Obs3Contractivity,
    Obs4JointConvexity,
    Obs5Ancilla,
}

impl CheckName {
    pub const ALL: [CheckName; 10] = [
        CheckName::StrongMonotonicity,
        CheckName::Monotonicity,
        CheckName::Convexity,
        CheckName::Lemma1,
        CheckName::Holder,
        CheckName::Obs1Positivity,
        CheckName::Obs2Isometry,
        CheckName::Obs3Contractivity,
        CheckName::Obs4JointConvexity,
        CheckName::Obs5Ancilla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::StrongMonotonicity => "strong_monotonicity",
            CheckName::Monotonicity => "monotonicity",
            CheckName::Convexity => "convexity",
            CheckName::Lemma1 => "lemma1",
            CheckName::Holder => "holder",
            CheckName::Obs1Positivity => "obs1_positivity",
            CheckName::Obs2Isometry => "obs2_isometry",
            CheckName::Obs3Contractivity => "obs3_contractivity",
            CheckName::Obs4JointConvexity => "obs4_joint_convexity",
            CheckName::Obs5Ancilla => "obs5_ancilla",
        }
    }

    /// Checks on a coherence measure (as opposed to on f_α itself).
    pub fn is_measure_check(self) -> bool {
        matches!(
            self,
            CheckName::StrongMonotonicity | CheckName::Monotonicity | CheckName::Convexity
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown check {s:?}")))
    }
}

/// Which α-family the measure checks target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// C_α.
    #[default]
    Tsallis,
    /// C̃_α.
    Rastegin,
}

impl Family {
    pub fn kind(self, alpha: crate::Alpha) -> crate::CoherenceKind {
        match self {
            Family::Tsallis => crate::CoherenceKind::TsallisFamily(alpha),
            Family::Rastegin => crate::CoherenceKind::RasteginTsallis(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankPolicy {
    Full,
    #[default]
    MixedRanks,
}

/// Reproducibility token of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Digest {
    pub seed: u64,
    pub trial: u64,
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub check_name: CheckName,
    pub kind: String,
    pub dim: usize,
    pub alpha: Option<f64>,
    pub digest: Digest,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs − rhs for inequalities, −|lhs − rhs| for equalities.
    pub margin: f64,
    pub passed: bool,
    /// Floating-point uncertainty of lhs − rhs, added to the tolerance.
    #[serde(default)]
    pub resolution: f64,
    /// The inequality is vacuous here (both sides infinite, or a term is
    /// unbounded in the direction that cannot be falsified).
    pub degenerate: bool,
}

impl TrialRecord {
    pub(crate) fn inequality(
        check_name: CheckName,
        kind: String,
        dim: usize,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> Self {
        let margin = lhs - rhs;
        Self::from_margin(check_name, kind, dim, alpha, lhs, rhs, margin, tolerance)
    }

    pub(crate) fn equality(
        check_name: CheckName,
        kind: String,
        dim: usize,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> Self {
        let margin = if lhs == rhs { 0.0 } else { -(lhs - rhs).abs() };
        Self::from_margin(check_name, kind, dim, alpha, lhs, rhs, margin, tolerance)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_margin(
        check_name: CheckName,
        kind: String,
        dim: usize,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
        margin: f64,
        tolerance: f64,
    ) -> Self {
        let degenerate = margin.is_nan();
        Self {
            check_name,
            kind,
            dim,
            alpha,
            digest: Digest::default(),
            lhs,
            rhs,
            margin,
            passed: degenerate || margin >= -allowance(lhs, rhs, tolerance, 0.0),
            resolution: 0.0,
            degenerate,
        }
    }

    /// Attach the numerical uncertainty of the compared values and
    /// re-evaluate the verdict with it.
    pub(crate) fn with_resolution(mut self, resolution: f64, tolerance: f64) -> Self {
        self.resolution = resolution;
        if !self.degenerate {
            self.passed = self.margin >= -allowance(self.lhs, self.rhs, tolerance, resolution);
        }
        self
    }

    pub(crate) fn mark_degenerate(mut self) -> Self {
        self.degenerate = true;
        self.passed = true;
        self
    }

    pub fn with_digest(mut self, digest: Digest) -> Self {
        self.digest = digest;
        self
    }

    /// A genuine failure: not passed and not degenerate.
    pub fn failed(&self) -> bool {
        !self.passed && !self.degenerate
    }
}

/// Largest accepted shortfall. The tolerance is absolute below unit
/// magnitude and relative above it, since f_α reaches 1e3 and beyond when
/// σ is nearly singular and one ulp there already exceeds 1e-13.
fn allowance(lhs: f64, rhs: f64, tolerance: f64, resolution: f64) -> f64 {
    let scale = [lhs.abs(), rhs.abs()]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(1.0, f64::max);
    tolerance * scale + resolution
}

/// Parameters of a randomized suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialConfig {
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub trials_per_cell: usize,
    /// Inclusive range of Kraus-operator counts.
    pub n_kraus_range: (usize, usize),
    pub master_seed: u64,
    pub tolerance: f64,
    pub rank_policy: RankPolicy,
    pub checks: Vec<CheckName>,
    pub family: Family,
    /// Worker threads; `None` uses all cores. Results never depend on it.
    pub workers: Option<usize>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 4],
            alphas: vec![0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0],
            trials_per_cell: 1000,
            n_kraus_range: (1, 4),
            master_seed: 20160314,
            tolerance: DEFAULT_TOLERANCE,
            rank_policy: RankPolicy::MixedRanks,
            checks: CheckName::ALL.to_vec(),
            family: Family::Tsallis,
            workers: None,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::BadConfig(m.to_string()));
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0 || d > 16) {
            return bad("dims must be a nonempty list of values in 1..=16");
        }
        if self.alphas.is_empty() {
            return bad("alphas must be nonempty");
        }
        for &a in &self.alphas {
            crate::Alpha::new(a)?;
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1");
        }
        let (lo, hi) = self.n_kraus_range;
        if lo == 0 || hi < lo {
            return bad("n_kraus_range must satisfy 1 <= lo <= hi");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.checks.is_empty() {
            return bad("checks must be nonempty");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrialConfig::default().validate().is_ok());
        let cfg = TrialConfig {
            trials_per_cell: 0,
            ..TrialConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::BadConfig(_))));
        let cfg = TrialConfig {
            alphas: vec![2.5],
            ..TrialConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::BadAlpha(_))));
        let cfg = TrialConfig {
            n_kraus_range: (3, 2),
            ..TrialConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_schema() {
        let json = r#"{"dims": [2], "alphas": [0.5], "trials_per_cell": 3, "family": "rastegin",
                       "rank_policy": "full", "checks": ["strong_monotonicity"]}"#;
        let cfg: TrialConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.family, Family::Rastegin);
        assert_eq!(cfg.rank_policy, RankPolicy::Full);
        assert_eq!(cfg.checks, vec![CheckName::StrongMonotonicity]);
        assert_eq!(cfg.tolerance, DEFAULT_TOLERANCE);
        assert!(serde_json::from_str::<TrialConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn record_margins() {
        let r = TrialRecord::inequality(CheckName::Convexity, "k".into(), 2, None, 1.0, 1.0 + 5e-10, 1e-9);
        assert!(r.passed && !r.degenerate);
        let r = TrialRecord::inequality(CheckName::Convexity, "k".into(), 2, None, 1.0, 1.1, 1e-9);
        assert!(r.failed());
        let r = TrialRecord::equality(CheckName::Obs2Isometry, "k".into(), 2, None, 2.0, 2.0 + 1e-11, 1e-9);
        assert!(r.passed && r.margin <= 0.0);
        let inf = f64::INFINITY;
        let r = TrialRecord::inequality(CheckName::Lemma1, "k".into(), 2, None, inf, inf, 1e-9);
        assert!(r.degenerate && r.passed);
        let r = TrialRecord::inequality(CheckName::Lemma1, "k".into(), 2, None, 1.0, inf, 1e-9);
        assert!(r.failed());
    }

    #[test]
    fn check_names_parse() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), c);
        }
    }
}
