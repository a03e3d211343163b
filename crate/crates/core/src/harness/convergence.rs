//! Repeated estimates against a self-reference: CSV rows and a JSON summary.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::estimator::ProblemSet;
use crate::multiindex::{combine_estimate, mlmc_baseline, Experiment, MIResult};
use crate::sampler::mix64;

pub const CSV_HEADER: [&str; 7] = [
    "N",
    "run",
    "value",
    "reference",
    "rel_error",
    "cost_model",
    "walltime_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub run: usize,
    pub value: f64,
    pub reference: f64,
    pub rel_error: f64,
    pub cost_model: f64,
    pub walltime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_rel_error: f64,
    pub ci90_low: f64,
    pub ci90_high: f64,
    pub mean_cost_model: f64,
    pub mean_walltime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    /// Least-squares slope of `log₂ mean_rel_error` against `N`.
    pub rel_error_vs_n: Option<f64>,
    /// Least-squares slope of `log₂ mean_rel_error` against `log₂ cost_model`.
    pub rel_error_vs_cost: Option<f64>,
    pub fit_from: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub value: f64,
    pub n_ref: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub experiment: Experiment,
    pub variant: crate::multiindex::Variant,
    pub method: Method,
    pub n_max: usize,
    pub runs: usize,
    pub seed: u64,
    pub reference: Option<ReferenceInfo>,
    pub per_n: Vec<LevelSummary>,
    pub slopes: Option<Slopes>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Summary,
}

/// Stream tag of run `run` at level `n`.
pub fn run_tag(experiment: Experiment, run: usize, n: usize) -> u64 {
    mix64(mix64(mix64(experiment.id()) ^ run as u64) ^ ((n as u64) << 32))
}

/// Stream tag reserved for reference estimates.
pub fn reference_tag(experiment: Experiment, n_ref: usize) -> u64 {
    mix64(mix64(0x7265_6665_7265_6e63 ^ experiment.id()) ^ n_ref as u64)
}

fn estimate(
    cfg: &ExperimentConfig,
    set: &ProblemSet,
    n: usize,
    seed: u64,
    tag: u64,
) -> Result<MIResult> {
    match cfg.method {
        Method::MultiIndex => combine_estimate(set, n, seed, tag),
        Method::Multilevel => mlmc_baseline(set, n, cfg.nu_star.unwrap_or(n), seed, tag),
    }
}

fn problem_set(cfg: &ExperimentConfig, n: usize) -> Result<ProblemSet> {
    let schedule = cfg.schedule();
    match cfg.method {
        Method::MultiIndex => ProblemSet::for_simplex(schedule, n, &cfg.problem_options()),
        Method::Multilevel => {
            // every N ≤ n uses s_{ν*(N)} modes on all of its levels
            let s = (0..=n)
                .map(|m| schedule.schedule_s(cfg.nu_star.unwrap_or(m)))
                .max()
                .unwrap_or(1);
            ProblemSet::with_modes(schedule, &vec![s; n + 1], &cfg.problem_options())
        }
    }
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    version: &'a str,
    experiment: Experiment,
    variant: crate::multiindex::Variant,
    method: Method,
    nu_star: Option<usize>,
    n_ref: usize,
    seed: u64,
    problem: crate::estimator::ProblemOptions,
}

/// SHA-256 over everything the reference value depends on.
pub fn reference_fingerprint(cfg: &ExperimentConfig, n_ref: usize, seed: u64) -> String {
    let input = FingerprintInput {
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment,
        variant: cfg.variant,
        method: cfg.method,
        nu_star: cfg.nu_star,
        n_ref,
        seed,
        problem: cfg.problem_options(),
    };
    let bytes = serde_json::to_vec(&input).expect("fingerprint input serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedReference {
    fingerprint: String,
    n_ref: usize,
    value: f64,
    cost_model: f64,
}

/// Reference estimate at `n_ref` with a dedicated stream tag, read from the
/// cache when its fingerprint matches.
pub fn compute_reference(cfg: &ExperimentConfig, n_ref: usize) -> Result<ReferenceInfo> {
    let seed = cfg.reference.seed.unwrap_or(cfg.seed);
    let fingerprint = reference_fingerprint(cfg, n_ref, seed);
    if let Some(value) = cfg.reference.value {
        return Ok(ReferenceInfo {
            value,
            n_ref,
            seed,
            fingerprint,
            from_cache: false,
        });
    }
    if let Some(path) = &cfg.reference.cache {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(c) = serde_json::from_str::<CachedReference>(&text) {
                if c.fingerprint == fingerprint && c.n_ref == n_ref {
                    return Ok(ReferenceInfo {
                        value: c.value,
                        n_ref,
                        seed,
                        fingerprint,
                        from_cache: true,
                    });
                }
            }
        }
    }
    let set = problem_set(cfg, n_ref)?;
    let result = cfg
        .workers
        .pool()?
        .install(|| estimate(cfg, &set, n_ref, seed, reference_tag(cfg.experiment, n_ref)))?;
    if let Some(path) = &cfg.reference.cache {
        let cached = CachedReference {
            fingerprint: fingerprint.clone(),
            n_ref,
            value: result.value,
            cost_model: result.cost_model,
        };
        write_atomic(path, &serde_json::to_vec_pretty(&cached)?)?;
    }
    Ok(ReferenceInfo {
        value: result.value,
        n_ref,
        seed,
        fingerprint,
        from_cache: false,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Nearest-rank order statistic at fraction `q` of a sorted sample.
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn summarize(rows: &[ConvergenceRow], n_max: usize) -> Vec<LevelSummary> {
    (0..=n_max)
        .filter_map(|n| {
            let these: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n == n).collect();
            if these.is_empty() {
                return None;
            }
            let k = these.len() as f64;
            let mut errs: Vec<f64> = these.iter().map(|r| r.rel_error).collect();
            errs.sort_by(f64::total_cmp);
            Some(LevelSummary {
                n,
                mean_rel_error: errs.iter().sum::<f64>() / k,
                ci90_low: order_statistic(&errs, 0.05),
                ci90_high: order_statistic(&errs, 0.95),
                mean_cost_model: these.iter().map(|r| r.cost_model).sum::<f64>() / k,
                mean_walltime_s: these.iter().map(|r| r.walltime_s).sum::<f64>() / k,
            })
        })
        .collect()
}

fn slopes(per_n: &[LevelSummary], fit_from: usize) -> Slopes {
    let used: Vec<&LevelSummary> = per_n
        .iter()
        .filter(|s| s.n >= fit_from && s.mean_rel_error > 0.0)
        .collect();
    let y: Vec<f64> = used.iter().map(|s| s.mean_rel_error.log2()).collect();
    let xn: Vec<f64> = used.iter().map(|s| s.n as f64).collect();
    let xc: Vec<f64> = used.iter().map(|s| s.mean_cost_model.log2()).collect();
    Slopes {
        rel_error_vs_n: fit_slope(&xn, &y),
        rel_error_vs_cost: fit_slope(&xc, &y),
        fit_from,
    }
}

fn failed_summary(cfg: &ExperimentConfig, err: &Error) -> Summary {
    let mut message = err.to_string();
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        message.push_str(": ");
        message.push_str(&s.to_string());
        source = s.source();
    }
    Summary {
        status: "failed".into(),
        experiment: cfg.experiment,
        variant: cfg.variant,
        method: cfg.method,
        n_max: cfg.n_max,
        runs: cfg.runs,
        seed: cfg.seed,
        reference: None,
        per_n: Vec::new(),
        slopes: None,
        error: Some(message),
    }
}

/// The convergence study. Runs execute one after another; the samples of
/// each estimate are spread over the configured worker pool.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let result = run_inner(cfg);
    if let Err(e) = &result {
        if let Some(path) = &cfg.output.json {
            let _ = write_atomic(
                path,
                &serde_json::to_vec_pretty(&failed_summary(cfg, e)).unwrap_or_default(),
            );
        }
    }
    let report = result?;
    if let Some(path) = &cfg.output.csv {
        let mut buf = Vec::new();
        write_csv(&report.rows, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    if let Some(path) = &cfg.output.json {
        write_atomic(path, &serde_json::to_vec_pretty(&report.summary)?)?;
    }
    Ok(report)
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let reference = compute_reference(cfg, cfg.n_ref())?;
    if reference.value == 0.0 || !reference.value.is_finite() {
        return Err(Error::Config(format!(
            "reference value {} cannot normalize relative errors",
            reference.value
        )));
    }
    let set = problem_set(cfg, cfg.n_max)?;
    let pool = cfg.workers.pool()?;
    let mut rows = Vec::with_capacity((cfg.n_max + 1) * cfg.runs);
    for n in 0..=cfg.n_max {
        for run in 0..cfg.runs {
            let start = Instant::now();
            let est =
                pool.install(|| estimate(cfg, &set, n, cfg.seed, run_tag(cfg.experiment, run, n)))?;
            rows.push(ConvergenceRow {
                n,
                run,
                value: est.value,
                reference: reference.value,
                rel_error: (est.value - reference.value).abs() / reference.value.abs(),
                cost_model: est.cost_model,
                walltime_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    let per_n = summarize(&rows, cfg.n_max);
    let slopes = slopes(&per_n, cfg.fit_from);
    Ok(ConvergenceReport {
        rows,
        summary: Summary {
            status: "ok".into(),
            experiment: cfg.experiment,
            variant: cfg.variant,
            method: cfg.method,
            n_max: cfg.n_max,
            runs: cfg.runs,
            seed: cfg.seed,
            reference: Some(reference),
            per_n,
            slopes: Some(slopes),
            error: None,
        },
    })
}

pub fn write_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected CSV header {header:?}"),
        });
    }
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}
