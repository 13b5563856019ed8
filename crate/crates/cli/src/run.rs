//! Experiment execution and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use silt_core::deviation::{
    geometric_checkpoints, lil_traces, oracle_audit, AuditReport, DeviationConstants, EstimateKind, TailEstimate, TrialSet,
};
use silt_core::gn::{maximize, variational_max, GridOptions, TraceRow};
use silt_core::report::{lil_rows, write_rows, LilRow, PolymerRow, ResultRow};
use silt_core::rng::derive_seed;
use silt_core::{collapse_sweep, exhaustive_silt_distribution, solve_kappa_ode, ScalingSchedule, StepDistribution, VariationalResult};

use crate::cache::EbCache;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};

/// Relative disagreement between the two κ routes above which the kappa
/// run is flagged.
pub const KAPPA_RESIDUAL_LIMIT: f64 = 0.01;

/// LIL envelope factor and the extra slack on the lower envelope.
pub const LIL_ENVELOPE: f64 = 1.5;
pub const LIL_LOWER_SLACK: f64 = 0.5;

/// Written to `kappa.json` by the kappa experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    /// The value used downstream: the shooting route.
    pub kappa: f64,
    pub source: String,
    /// |κ_grid - κ_ode| / κ_ode.
    pub residual: f64,
    pub grid: VariationalResult,
    pub ode: VariationalResult,
    pub quadratic_law: Option<QuadraticLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticLaw {
    pub h: f64,
    pub l: f64,
    pub theta: Vec<f64>,
    pub max_f: Vec<f64>,
    /// Least-squares slope of log M against log θ.
    pub slope: f64,
}

/// κ provenance as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub value: f64,
    pub residual: Option<f64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub experiment: String,
    pub kappa: Option<KappaRecord>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    /// Estimates with zero successes, low-acceptance chains, failed audit
    /// checks or a κ residual over the limit.
    pub flagged: usize,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    /// 0, or 2 when something was flagged and the run is strict.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && self.manifest.flagged > 0 {
            2
        } else {
            0
        }
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let f = fs::File::create(self.dir.join(name))?;
        write_rows(std::io::BufWriter::new(f), rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Reads κ from the config's `[kappa]` table.
pub fn load_kappa(config: &ExperimentConfig) -> Result<KappaRecord> {
    let missing = || CliError::KappaUnavailable {
        experiment: config.experiment.to_string(),
    };
    let input = config.kappa.as_ref().ok_or_else(missing)?;
    if let Some(path) = &input.file {
        let text = fs::read_to_string(path).map_err(|e| CliError::KappaFile {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let report: KappaReport = serde_json::from_str(&text).map_err(|e| CliError::KappaFile {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        return Ok(KappaRecord {
            value: report.kappa,
            residual: Some(report.residual),
            source: format!("{} ({})", path.display(), report.source),
        });
    }
    match (input.value, &input.note) {
        (Some(v), Some(note)) => Ok(KappaRecord {
            value: v,
            residual: None,
            source: format!("user-supplied: {note}"),
        }),
        _ => Err(missing()),
    }
}

/// Validates, executes and writes every output of `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.ensure_valid()?;
    let start = Instant::now();
    let kappa = if config.experiment.needs_kappa() {
        Some(load_kappa(config)?)
    } else {
        None
    };
    let mut out = Outputs::new(&config.out)?;
    let flagged = match config.experiment {
        ExperimentKind::Cumulant | ExperimentKind::UpperTail | ExperimentKind::LowerTail => {
            run_tails(config, kappa.as_ref(), &mut out)?
        }
        ExperimentKind::Lil => run_lil(config, kappa.as_ref().expect("checked above").value, &mut out)?,
        ExperimentKind::Kappa => run_kappa(config, &mut out)?,
        ExperimentKind::Polymer => run_polymer(config, &mut out)?,
        ExperimentKind::OracleAudit => {
            let dist = config.dist.resolve()?;
            let label = config.dist.label(&dist);
            let cases: Vec<(String, StepDistribution, usize)> =
                config.n.iter().map(|&n| (label.clone(), dist.clone(), n)).collect();
            run_audit(config, &cases, &mut out)?
        }
    };
    let manifest = RunManifest {
        config_hash: config.hash()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment.to_string(),
        kappa,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
        flagged,
    };
    out.json("manifest.json", &manifest)?;
    fs::write(out.dir.join("config.toml"), config.canonical_text()?)?;
    Ok(RunOutcome {
        manifest,
        out_dir: out.dir,
    })
}

/// Runs the exhaustive oracle suite over explicit (label, law, n) cases.
pub fn run_audit_suite(config: &ExperimentConfig, cases: &[(String, StepDistribution, usize)]) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut out = Outputs::new(&config.out)?;
    let flagged = run_audit(config, cases, &mut out)?;
    let manifest = RunManifest {
        config_hash: config.hash()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: ExperimentKind::OracleAudit.to_string(),
        kappa: None,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
        flagged,
    };
    out.json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        manifest,
        out_dir: out.dir,
    })
}

fn run_tails(config: &ExperimentConfig, kappa: Option<&KappaRecord>, out: &mut Outputs) -> Result<usize> {
    let dist = config.dist.resolve()?;
    let label = config.dist.label(&dist);
    let schedule: ScalingSchedule = config.schedule.parse()?;
    let mut cache = EbCache::open(&config.cache_dir(), &dist)?;
    let expected = cache.values(&config.n)?;
    let sets = if config.shared_paths {
        TrialSet::simulate_prefixes(&dist, &config.n, config.trials, config.seed, &expected)?
    } else {
        config
            .n
            .iter()
            .zip(&expected)
            .map(|(&n, &e)| TrialSet::simulate(&dist, n, config.trials, derive_seed(config.seed, n as u64), e))
            .collect()
    };
    let constants = DeviationConstants::new(kappa.map_or(f64::NAN, |k| k.value), dist.det_gamma());
    let mut estimates: Vec<TailEstimate> = Vec::new();
    for ts in &sets {
        let b = schedule.b(ts.n)?;
        for &p in &config.params {
            let est = match config.experiment {
                ExperimentKind::Cumulant => ts.cumulant(b, p)?.with_theory(constants.cumulant(p)),
                ExperimentKind::UpperTail => ts.upper_tail(b, p)?.with_theory(constants.upper_tail_rate(p)),
                _ => ts.lower_tail(b, p, constants.big_theta())?,
            };
            estimates.push(est);
        }
    }
    let rows: Vec<ResultRow> = estimates
        .iter()
        .map(|e| ResultRow::from_estimate(e, &label, &schedule.label()))
        .collect();
    out.csv("results.csv", &rows)?;

    let flagged = estimates.iter().filter(|e| e.flagged).count();
    let per_param: Vec<_> = config
        .params
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let seq: Vec<&TailEstimate> = estimates.iter().skip(j).step_by(config.params.len()).collect();
            let values: Vec<f64> = seq.iter().map(|e| e.estimate).collect();
            let theory = seq.first().and_then(|e| e.theory);
            let distances: Option<Vec<f64>> = theory.map(|t| values.iter().map(|v| (v - t).abs()).collect());
            json!({
                "param": p,
                "n": config.n,
                "estimate": values,
                "theory": theory,
                "approaching_theory": distances.as_ref().map(|d| d.windows(2).all(|w| w[1] < w[0])),
                "final_relative_error": theory.and_then(|t| values.last().map(|v| (v - t).abs() / t.abs())),
            })
        })
        .collect();
    let summary = json!({
        "experiment": config.experiment.as_str(),
        "dist": label,
        "det_gamma": dist.det_gamma(),
        "schedule": schedule.label(),
        "outside_hypotheses": schedule.outside_hypotheses(),
        "trials": config.trials,
        "shared_paths": config.shared_paths,
        "seed": config.seed,
        "expected_silt": expected,
        "flagged": flagged,
        "sequences": per_param,
    });
    out.json("summary.json", &summary)?;
    Ok(flagged)
}

fn run_lil(config: &ExperimentConfig, kappa: f64, out: &mut Outputs) -> Result<usize> {
    let dist = config.dist.resolve()?;
    let label = config.dist.label(&dist);
    let n_max = *config.n.last().expect("validated");
    let checkpoints = geometric_checkpoints(config.lil.start, n_max, config.lil.per_octave);
    let mut cache = EbCache::open(&config.cache_dir(), &dist)?;
    cache.values(&checkpoints)?;
    let seeds: Vec<u64> = (0..config.lil.seeds as u64).map(|i| derive_seed(config.seed, i)).collect();
    let traces = lil_traces(&dist, &checkpoints, &seeds, cache.expected())?;
    let rows: Vec<LilRow> = traces.iter().flat_map(lil_rows).collect();
    out.csv("lil.csv", &rows)?;

    let c = DeviationConstants::new(kappa, dist.det_gamma());
    let upper_envelope = LIL_ENVELOPE * c.lil_upper();
    let lower_envelope = LIL_ENVELOPE * c.lil_lower() - LIL_LOWER_SLACK;
    let max_upper = traces.iter().map(|t| t.max_upper()).fold(f64::NEG_INFINITY, f64::max);
    let min_lower = traces.iter().map(|t| t.min_lower()).fold(f64::INFINITY, f64::min);
    let upper_breaches = rows.iter().filter(|r| r.upper_ratio > upper_envelope).count();
    let lower_breaches = rows.iter().filter(|r| r.lower_ratio < lower_envelope).count();
    let summary = json!({
        "experiment": "lil",
        "dist": label,
        "n_max": n_max,
        "checkpoints": checkpoints.len(),
        "seeds": seeds,
        "lil_upper": c.lil_upper(),
        "lil_lower": c.lil_lower(),
        "upper_envelope": upper_envelope,
        "lower_envelope": lower_envelope,
        "max_upper_ratio": max_upper,
        "min_lower_ratio": min_lower,
        "upper_breaches": upper_breaches,
        "lower_breaches": lower_breaches,
        "within_envelopes": upper_breaches == 0 && lower_breaches == 0,
    });
    out.json("summary.json", &summary)?;
    Ok(0)
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Both κ routes, their residual, and the M(θ) scan.
pub fn compute_kappa(config: &ExperimentConfig) -> Result<(KappaReport, Vec<TraceRow>)> {
    let s = &config.solver;
    let opts = GridOptions {
        h: s.h,
        l: s.l,
        theta: 1.0,
        max_iter: s.max_iter,
        random_starts: s.random_starts,
        seed: derive_seed(config.seed, 0x6A11),
        ..GridOptions::default()
    };
    let (_, mut grid, _) = maximize(&opts)?;
    let mut ode = solve_kappa_ode(s.r_max, s.tol)?;
    let residual = VariationalResult::cross_check(&mut grid, &mut ode);
    let trace = std::mem::take(&mut grid.trace);

    let quadratic_law = if config.params.len() >= 2 {
        let mut max_f = Vec::with_capacity(config.params.len());
        for &theta in &config.params {
            let o = GridOptions {
                h: s.law_h,
                l: s.law_l,
                theta,
                random_starts: 0,
                ..opts
            };
            max_f.push(maximize(&o)?.1.objective);
        }
        Some(QuadraticLaw {
            h: s.law_h,
            l: s.law_l,
            slope: log_log_slope(&config.params, &max_f),
            theta: config.params.clone(),
            max_f,
        })
    } else {
        None
    };
    Ok((
        KappaReport {
            kappa: ode.kappa,
            source: "ode-shooting".into(),
            residual,
            grid,
            ode,
            quadratic_law,
        },
        trace,
    ))
}

fn run_kappa(config: &ExperimentConfig, out: &mut Outputs) -> Result<usize> {
    let (report, trace) = compute_kappa(config)?;
    out.json("kappa.json", &report)?;
    out.csv("kappa_trace.csv", &trace)?;
    let flagged = usize::from(report.residual >= KAPPA_RESIDUAL_LIMIT) + usize::from(!report.ode.converged);
    let summary = json!({
        "experiment": "kappa",
        "kappa_ode": report.ode.kappa,
        "kappa_grid": report.grid.kappa,
        "residual": report.residual,
        "residual_limit": KAPPA_RESIDUAL_LIMIT,
        "gaussian_ratio": silt_core::gn::gaussian_ratio(),
        "max_f_at_theta_1": variational_max(report.kappa, 1.0),
        "quadratic_law_slope": report.quadratic_law.as_ref().map(|q| q.slope),
        "flagged": flagged,
    });
    out.json("summary.json", &summary)?;
    Ok(flagged)
}

fn run_polymer(config: &ExperimentConfig, out: &mut Outputs) -> Result<usize> {
    let dist = config.dist.resolve()?;
    let label = config.dist.label(&dist);
    let mut rows = Vec::new();
    let mut low = 0;
    for &n in &config.n {
        let collapse = collapse_sweep(&dist, n, &config.params, config.polymer.sweeps, derive_seed(config.seed, n as u64))?;
        low += collapse.iter().filter(|r| r.low_acceptance).count();
        rows.extend(collapse);
    }
    let csv_rows: Vec<PolymerRow> = rows.iter().map(PolymerRow::from).collect();
    out.csv("polymer.csv", &csv_rows)?;
    let summary = json!({
        "experiment": "polymer",
        "dist": label,
        "sweeps": config.polymer.sweeps,
        "burn_in": config.polymer.sweeps / 10,
        "low_acceptance": low,
        "rows": rows,
    });
    out.json("summary.json", &summary)?;
    Ok(low)
}

/// `dist,n,kind,param,exact,max_abs_z,within,reps,pass`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub dist: String,
    pub n: usize,
    pub kind: EstimateKind,
    pub param: f64,
    pub exact: f64,
    pub max_abs_z: f64,
    pub within: usize,
    pub reps: usize,
    pub pass: bool,
}

fn run_audit(config: &ExperimentConfig, cases: &[(String, StepDistribution, usize)], out: &mut Outputs) -> Result<usize> {
    let mut rows = Vec::new();
    let mut means = Vec::new();
    let mut reports: Vec<AuditReport> = Vec::new();
    for (label, dist, n) in cases {
        let exact = exhaustive_silt_distribution(dist, *n)?;
        let mut cache = EbCache::open(&config.cache_dir(), dist)?;
        let expected = cache.values(&[*n])?[0];
        means.push(json!({
            "dist": label,
            "n": n,
            "exact_mean": exact.mean(),
            "expected_silt": expected,
            "abs_error": (exact.mean() - expected).abs(),
            "total_probability": exact.total(),
        }));
        let report = oracle_audit(dist, *n, config.audit.reps, config.audit.trials, derive_seed(config.seed, *n as u64))?;
        for c in &report.checks {
            rows.push(AuditRow {
                dist: label.clone(),
                n: *n,
                kind: c.kind,
                param: c.param,
                exact: c.exact,
                max_abs_z: c.max_abs_z,
                within: c.within,
                reps: c.reps,
                pass: c.pass_rate() >= config.audit.pass_rate,
            });
        }
        reports.push(report);
    }
    out.csv("audit.csv", &rows)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    let summary = json!({
        "experiment": "oracle_audit",
        "reps": config.audit.reps,
        "trials": config.audit.trials,
        "pass_rate": config.audit.pass_rate,
        "failed_checks": failed,
        "means": means,
        "reports": reports,
    });
    out.json("summary.json", &summary)?;
    Ok(failed)
}
