use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use tsallis_coherence::coherence::{brute_force_min, coherence_alpha, rastegin_coherence};
use tsallis_coherence::harness::{
    run_suite_with, search_violation, strong_monotonicity_gap, CheckName, Family, SearchConfig, SuiteSummary,
    TrialConfig, TrialRecord, ViolationReport,
};
use tsallis_coherence::io::{channel_to_json, load_channel, load_state, state_to_json};
use tsallis_coherence::rng::{label_hash, substream, RngSeed};
use tsallis_coherence::states::random_density;
use tsallis_coherence::{Alpha, CoherenceKind, DensityMatrix, KrausChannel};

use crate::args::{
    AlphaArgs, ComputeArgs, Measure, OracleArgs, SearchArgs, SweepArgs, VerifyArgs, DEFAULT_SEED, SEED_ENV,
};
use crate::output::{write_json_object, write_rows, Format, Num, Units};
use crate::{CliError, Outcome};

type CmdResult = Result<Outcome, CliError>;

/// Parses `lo:hi:step` into an ascending, inclusive grid. Points are rounded
/// to 12 decimals so that e.g. `0.5:1.5:0.1` hits 1.0 exactly.
pub fn parse_alpha_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(CliError::usage(format!("alpha range {spec:?} is not lo:hi:step")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::usage(format!("alpha range {spec:?}: {s:?} is not a number")))
    };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(step > 0.0) {
        return Err(CliError::usage(format!("alpha range {spec:?}: step must be positive")));
    }
    if !(hi >= lo) {
        return Err(CliError::usage(format!("alpha range {spec:?} is empty")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn collect_alphas(args: &AlphaArgs) -> Result<Vec<f64>, CliError> {
    let mut out = args.alpha.clone();
    if let Some(range) = &args.alpha_range {
        out.extend(parse_alpha_range(range)?);
    }
    for &a in &out {
        Alpha::new(a)?;
    }
    Ok(out)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn parse_family(s: &str) -> Result<Family, CliError> {
    match s {
        "tsallis" => Ok(Family::Tsallis),
        "rastegin" => Ok(Family::Rastegin),
        _ => Err(CliError::usage(format!(
            "unknown family {s:?}; expected tsallis or rastegin"
        ))),
    }
}

/// Sends rows to `--out` when given, otherwise to `stdout`.
fn emit<T: Serialize>(
    format: Format,
    out_path: Option<&Path>,
    command: &str,
    header: &[&str],
    rows: &[T],
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match out_path {
        Some(p) => {
            let mut buf = Vec::new();
            write_rows(format, command, header, rows, &mut buf)?;
            fs::write(p, buf).map_err(|e| CliError::io(p, e))
        }
        None => Ok(write_rows(format, command, header, rows, stdout)?),
    }
}

// ---- compute / sweep -------------------------------------------------------

const MEASURE_HEADER: [&str; 8] = [
    "measure",
    "dim",
    "alpha",
    "value",
    "units",
    "optimal_delta",
    "avg_after",
    "gap",
];

#[derive(Debug, Serialize)]
struct MeasureRow {
    measure: String,
    dim: usize,
    alpha: Option<Num>,
    value: Num,
    units: &'static str,
    optimal_delta: Option<String>,
    avg_after: Option<Num>,
    gap: Option<Num>,
}

fn kinds_for(measures: &[Measure], alphas: &[f64]) -> Result<Vec<CoherenceKind>, CliError> {
    let mut kinds = Vec::new();
    for m in measures {
        match m {
            Measure::Tsallis | Measure::Rastegin => {
                for &a in alphas {
                    let a = Alpha::new(a)?;
                    kinds.push(if *m == Measure::Tsallis {
                        CoherenceKind::TsallisFamily(a)
                    } else {
                        CoherenceKind::RasteginTsallis(a)
                    });
                }
            }
            Measure::Relent => kinds.push(CoherenceKind::RelativeEntropy),
            Measure::L1 => kinds.push(CoherenceKind::L1),
            Measure::Skew => kinds.push(CoherenceKind::SkewInfoSum),
            Measure::C2 => kinds.push(CoherenceKind::C2Direct),
        }
    }
    Ok(kinds)
}

fn measure_row(
    kind: CoherenceKind,
    rho: &DensityMatrix,
    channel: Option<&KrausChannel>,
    units: Units,
    emit_delta: bool,
) -> Result<MeasureRow, CliError> {
    // Only the entropic members depend on the logarithm base.
    let (scale, unit) = match (kind.is_entropic(), units) {
        (false, _) => (1.0, "dimensionless"),
        (true, Units::Nats) => (1.0, "nats"),
        (true, Units::Bits) => (1.0 / std::f64::consts::LN_2, "bits"),
    };
    let result = match kind {
        CoherenceKind::TsallisFamily(a) => Some(coherence_alpha(rho, a)),
        CoherenceKind::RasteginTsallis(a) => Some(rastegin_coherence(rho, a)),
        _ => None,
    };
    let value = match &result {
        Some(r) => r.value,
        None => kind.evaluate(rho),
    };
    let optimal_delta = if emit_delta {
        result.and_then(|r| r.optimal_delta).map(|p| {
            p.as_slice()
                .iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(";")
        })
    } else {
        None
    };
    let (avg_after, gap) = match channel {
        Some(ch) => {
            let (before, after) = strong_monotonicity_gap(kind, rho, ch)?;
            (Some(Num(after * scale)), Some(Num((after - before) * scale)))
        }
        None => (None, None),
    };
    Ok(MeasureRow {
        measure: kind.name().to_string(),
        dim: rho.dim(),
        alpha: kind.alpha().map(|a| Num(a.value())),
        value: Num(value * scale),
        units: unit,
        optimal_delta,
        avg_after,
        gap,
    })
}

pub fn compute(args: &ComputeArgs, stdout: &mut dyn Write) -> CmdResult {
    let rho = load_state(&args.state)?;
    let channel = match &args.channel {
        Some(p) => {
            let (ch, incoherent) = load_channel(p)?;
            if !incoherent {
                return Err(tsallis_coherence::Error::NotIncoherentChannel.into());
            }
            if ch.dim() != rho.dim() {
                return Err(tsallis_coherence::Error::DimMismatch(rho.dim(), ch.dim()).into());
            }
            Some(ch)
        }
        None => None,
    };
    let measures = if args.measures.is_empty() {
        vec![Measure::Tsallis, Measure::Rastegin]
    } else {
        args.measures.clone()
    };
    let mut alphas = collect_alphas(&args.alphas)?;
    if alphas.is_empty() {
        alphas = vec![0.5, 1.0, 2.0];
    }
    let rows = kinds_for(&measures, &alphas)?
        .into_iter()
        .map(|k| measure_row(k, &rho, channel.as_ref(), args.units, args.emit_delta))
        .collect::<Result<Vec<_>, _>>()?;
    emit(
        args.output.format,
        args.output.out.as_deref(),
        "compute",
        &MEASURE_HEADER,
        &rows,
        stdout,
    )?;
    Ok(Outcome::Success)
}

pub fn sweep(args: &SweepArgs, stdout: &mut dyn Write) -> CmdResult {
    let rho = load_state(&args.state)?;
    let alphas = parse_alpha_range(&args.alpha_range)?;
    let mut rows = Vec::with_capacity(2 * alphas.len());
    for &a in &alphas {
        let a = Alpha::new(a)?;
        for kind in [CoherenceKind::TsallisFamily(a), CoherenceKind::RasteginTsallis(a)] {
            rows.push(measure_row(kind, &rho, None, args.units, args.emit_delta)?);
        }
    }
    emit(
        args.output.format,
        args.output.out.as_deref(),
        "sweep",
        &MEASURE_HEADER,
        &rows,
        stdout,
    )?;
    Ok(Outcome::Success)
}

// ---- verify ----------------------------------------------------------------

const RECORD_HEADER: [&str; 10] = [
    "check_name",
    "dim",
    "alpha",
    "kind",
    "lhs",
    "rhs",
    "margin",
    "passed",
    "seed",
    "trial",
];

#[derive(Debug, Serialize)]
struct RecordRow {
    check_name: CheckName,
    dim: usize,
    alpha: Option<Num>,
    kind: String,
    lhs: Num,
    rhs: Num,
    margin: Num,
    passed: bool,
    seed: u64,
    trial: u64,
}

impl From<&TrialRecord> for RecordRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            check_name: r.check_name,
            dim: r.dim,
            alpha: r.alpha.map(Num),
            kind: r.kind.clone(),
            lhs: Num(r.lhs),
            rhs: Num(r.rhs),
            margin: Num(r.margin),
            passed: r.passed,
            seed: r.digest.seed,
            trial: r.digest.trial,
        }
    }
}

const CELL_HEADER: [&str; 12] = [
    "check_name",
    "kind",
    "dim",
    "alpha",
    "trials",
    "passed",
    "failed",
    "degenerate",
    "errors",
    "worst_margin",
    "worst_trial",
    "first_error",
];

#[derive(Debug, Serialize)]
struct CellRow<'a> {
    check_name: CheckName,
    kind: &'a str,
    dim: usize,
    alpha: Num,
    trials: usize,
    passed: usize,
    failed: usize,
    degenerate: usize,
    errors: usize,
    worst_margin: Option<Num>,
    worst_trial: Option<u64>,
    first_error: Option<&'a str>,
}

/// Builds the suite configuration: defaults, then flags, then the config
/// file, each layer overriding the previous one field by field.
pub fn build_trial_config(args: &VerifyArgs) -> Result<TrialConfig, CliError> {
    let mut cfg = TrialConfig {
        master_seed: resolve_seed(args.seed)?,
        ..TrialConfig::default()
    };
    if !args.dims.is_empty() {
        cfg.dims = args.dims.clone();
    }
    let alphas = collect_alphas(&args.alphas)?;
    if !alphas.is_empty() {
        cfg.alphas = alphas;
    }
    if let Some(t) = args.trials {
        cfg.trials_per_cell = t;
    }
    if let Some(t) = args.tol {
        cfg.tolerance = t;
    }
    if let Some(f) = &args.family {
        cfg.family = parse_family(f)?;
    }
    if !args.checks.is_empty() {
        cfg.checks = args
            .checks
            .iter()
            .map(|c| c.parse::<CheckName>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(p) = &args.rank_policy {
        cfg.rank_policy = serde_json::from_value(serde_json::Value::String(p.clone()))
            .map_err(|_| CliError::usage(format!("unknown rank policy {p:?}; expected full or mixed-ranks")))?;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let serde_json::Value::Object(overrides) = file else {
            return Err(CliError::usage(format!("{}: expected a JSON object", path.display())));
        };
        let mut merged = serde_json::to_value(&cfg).expect("config serializes");
        let obj = merged.as_object_mut().expect("config is an object");
        obj.extend(overrides);
        cfg = serde_json::from_value(merged).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct VerifyDocument<'a> {
    summary: &'a SuiteSummary,
    violation: Option<ReportRow>,
}

pub fn verify(args: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let cfg = build_trial_config(args)?;
    let mut rows = Vec::new();
    let summary = run_suite_with(&cfg, |r| rows.push(RecordRow::from(r)))?;
    if let Some(p) = &args.output.out {
        let mut buf = Vec::new();
        write_rows(args.output.format, "verify", &RECORD_HEADER, &rows, &mut buf)?;
        fs::write(p, buf).map_err(|e| CliError::io(p, e))?;
    }

    // A rastegin strong-monotonicity suite is paired with a directed search,
    // since random trials alone rarely land on a violating instance.
    let mut violation = None;
    if cfg.family == Family::Rastegin && cfg.checks.contains(&CheckName::StrongMonotonicity) {
        let alphas: Vec<f64> = cfg
            .alphas
            .iter()
            .copied()
            .filter(|&a| !Alpha::new(a).map(Alpha::near_one).unwrap_or(true))
            .collect();
        let mut dims = cfg.dims.clone();
        dims.sort_unstable();
        dims.dedup();
        for &dim in dims.iter().filter(|&&d| d >= 2) {
            if alphas.is_empty() {
                break;
            }
            let search = SearchConfig {
                dim,
                alphas: alphas.clone(),
                budget: args.search_budget,
                master_seed: cfg.master_seed,
                workers: cfg.workers,
                ..SearchConfig::default()
            };
            let report = search_violation(&search)?;
            if report.found {
                violation = Some(ReportRow::new(&report, None));
                break;
            }
        }
    }

    let mut doc = Vec::new();
    match args.output.format {
        Format::Json => write_json_object(
            "verify",
            "result",
            &VerifyDocument {
                summary: &summary,
                violation: violation.clone(),
            },
            &mut doc,
        )?,
        Format::Csv => {
            let cells: Vec<CellRow> = summary
                .cells
                .iter()
                .map(|c| CellRow {
                    check_name: c.check_name,
                    kind: &c.kind,
                    dim: c.dim,
                    alpha: Num(c.alpha),
                    trials: c.trials,
                    passed: c.passed,
                    failed: c.failed,
                    degenerate: c.degenerate,
                    errors: c.errors,
                    worst_margin: c.worst_margin.map(Num),
                    worst_trial: c.worst_trial,
                    first_error: c.first_error.as_deref(),
                })
                .collect();
            write_rows(Format::Csv, "verify", &CELL_HEADER, &cells, &mut doc)?;
        }
    }
    match &args.summary {
        Some(p) => fs::write(p, &doc).map_err(|e| CliError::io(p, e))?,
        None => stdout.write_all(&doc)?,
    }

    let failed = !summary.passed || violation.is_some();
    writeln!(
        stderr,
        "verify: {} ({} trials, {} failed, {} degenerate, {} errors) in {:.2?}",
        if failed { "FAIL" } else { "PASS" },
        summary.total_trials,
        summary.total_failed,
        summary.total_degenerate,
        summary.total_errors,
        summary.runtime
    )?;
    if let Some(v) = &violation {
        writeln!(
            stderr,
            "verify: strong monotonicity violated by {} at d = {}, gap {:e}",
            v.kind, v.dim, v.gap.0
        )?;
    }
    Ok(if failed { Outcome::Failure } else { Outcome::Success })
}

// ---- search-violation ------------------------------------------------------

const REPORT_HEADER: [&str; 15] = [
    "found",
    "kind",
    "dim",
    "alpha",
    "c_before",
    "avg_c_after",
    "gap",
    "best_gap",
    "seed",
    "restart",
    "evaluations",
    "n_kraus",
    "state_file",
    "channel_file",
    "witness_file",
];

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    found: bool,
    kind: String,
    dim: usize,
    alpha: Num,
    c_before: Num,
    avg_c_after: Num,
    gap: Num,
    best_gap: Num,
    seed: u64,
    restart: u64,
    evaluations: u64,
    n_kraus: usize,
    state_file: Option<String>,
    channel_file: Option<String>,
    witness_file: Option<String>,
}

impl ReportRow {
    fn new(r: &ViolationReport, files: Option<[String; 3]>) -> Self {
        let [state_file, channel_file, witness_file] = match files {
            Some([a, b, c]) => [Some(a), Some(b), Some(c)],
            None => [None, None, None],
        };
        Self {
            found: r.found,
            kind: r.kind.to_string(),
            dim: r.state.dim(),
            alpha: Num(r.alpha.value()),
            c_before: Num(r.c_before),
            avg_c_after: Num(r.avg_c_after),
            gap: Num(r.gap),
            best_gap: Num(r.best_gap),
            seed: r.master_seed,
            restart: r.restart,
            evaluations: r.evaluations,
            n_kraus: r.channel.len(),
            state_file,
            channel_file,
            witness_file,
        }
    }
}

pub const WITNESS_STATE: &str = "witness_state.json";
pub const WITNESS_CHANNEL: &str = "witness_channel.json";
pub const WITNESS_REPORT: &str = "witness.json";

fn parse_kraus_range(s: &str) -> Result<(usize, usize), CliError> {
    let err = || CliError::usage(format!("kraus range {s:?} is not lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(err)?;
    Ok((
        lo.trim().parse().map_err(|_| err())?,
        hi.trim().parse().map_err(|_| err())?,
    ))
}

pub fn search(args: &SearchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let mut alphas = collect_alphas(&args.alphas)?;
    let defaults = SearchConfig::default();
    if alphas.is_empty() {
        alphas = defaults.alphas.clone();
    }
    let cfg = SearchConfig {
        family: parse_family(&args.family)?,
        dim: args.dim,
        alphas,
        budget: args.trials,
        master_seed: resolve_seed(args.seed)?,
        n_kraus_range: match &args.kraus {
            Some(s) => parse_kraus_range(s)?,
            None => defaults.n_kraus_range,
        },
        evals_per_restart: args.restart_evals.unwrap_or(defaults.evals_per_restart),
        workers: args.workers,
    };
    let report = search_violation(&cfg)?;

    let files = if report.found {
        let dir = &args.witness_dir;
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let paths = [WITNESS_STATE, WITNESS_CHANNEL, WITNESS_REPORT].map(|f| dir.join(f));
        fs::write(&paths[0], state_to_json(&report.state)).map_err(|e| CliError::io(&paths[0], e))?;
        fs::write(&paths[1], channel_to_json(&report.channel)).map_err(|e| CliError::io(&paths[1], e))?;
        Some(paths)
    } else {
        None
    };
    let row = ReportRow::new(
        &report,
        files.as_ref().map(|p| p.clone().map(|p| p.display().to_string())),
    );
    if let Some(paths) = &files {
        let mut buf = Vec::new();
        write_json_object("search-violation", "report", &row, &mut buf)?;
        fs::write(&paths[2], buf).map_err(|e| CliError::io(&paths[2], e))?;
    }
    emit(
        args.output.format,
        args.output.out.as_deref(),
        "search-violation",
        &REPORT_HEADER,
        std::slice::from_ref(&row),
        stdout,
    )?;
    writeln!(
        stderr,
        "search-violation: {} after {} evaluations (best gap {:e})",
        if report.found {
            "witness found"
        } else {
            "budget exhausted"
        },
        report.evaluations,
        report.best_gap
    )?;
    Ok(if report.found {
        Outcome::Success
    } else {
        Outcome::Exhausted
    })
}

// ---- oracle-compare --------------------------------------------------------

const ORACLE_HEADER: [&str; 7] = ["dim", "alpha", "state", "closed_form", "oracle", "abs_diff", "passed"];

#[derive(Debug, Serialize)]
struct OracleRow {
    dim: usize,
    alpha: Num,
    state: usize,
    closed_form: Num,
    oracle: Num,
    abs_diff: Num,
    passed: bool,
}

/// Slack allowed for the closed form to sit above the grid minimum.
pub const ORACLE_ABOVE_TOL: f64 = 1e-9;

pub fn oracle_compare(args: &OracleArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let d = args.dim;
    if !(2..=3).contains(&d) {
        return Err(tsallis_coherence::Error::DimTooLarge(d).into());
    }
    let mut alphas = collect_alphas(&args.alphas)?;
    if alphas.is_empty() {
        alphas = vec![0.3, 0.5, 0.7, 1.3, 1.5, 2.0];
    }
    let alphas: Vec<Alpha> = alphas.into_iter().map(Alpha::new).collect::<Result<_, _>>()?;
    if let Some(a) = alphas.iter().find(|a| a.near_one()) {
        return Err(CliError::usage(format!(
            "alpha {a} has no grid oracle (use the α → 1 limit instead)"
        )));
    }
    let resolution = args.resolution.unwrap_or(if d == 2 { 1e-4 } else { 2e-3 });
    let bound = args.bound.unwrap_or(20.0 * resolution);
    let seed = resolve_seed(args.seed)?;
    let cell = label_hash(&format!("oracle/d={d}"));
    let states = (0..args.states as u64)
        .map(|i| random_density(d, d, &mut substream(RngSeed(seed), cell, i)))
        .collect::<Result<Vec<_>, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let jobs: Vec<(Alpha, usize)> = alphas
        .iter()
        .flat_map(|&a| (0..states.len()).map(move |i| (a, i)))
        .collect();
    let rows: Vec<OracleRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, i)| {
                let closed = coherence_alpha(&states[i], a).value;
                let (oracle, _) = brute_force_min(&states[i], a, resolution)?;
                let diff = (closed - oracle).abs();
                Ok(OracleRow {
                    dim: d,
                    alpha: Num(a.value()),
                    state: i,
                    closed_form: Num(closed),
                    oracle: Num(oracle),
                    abs_diff: Num(diff),
                    passed: diff <= bound && closed <= oracle + ORACLE_ABOVE_TOL,
                })
            })
            .collect::<Result<_, tsallis_coherence::Error>>()
    })?;
    emit(
        args.output.format,
        args.output.out.as_deref(),
        "oracle-compare",
        &ORACLE_HEADER,
        &rows,
        stdout,
    )?;
    let failures = rows.iter().filter(|r| !r.passed).count();
    let worst = rows.iter().map(|r| r.abs_diff.0).fold(0.0, f64::max);
    writeln!(
        stderr,
        "oracle-compare: {} rows, {failures} outside bound {bound:e}, worst |diff| {worst:e}",
        rows.len()
    )?;
    Ok(if failures == 0 {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}
