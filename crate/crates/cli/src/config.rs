//! Experiment configuration files.
//!
//! A config is a TOML document. Scalar keys come first, then the optional
//! `[dist]`, `[kappa]`, `[lil]`, `[polymer]`, `[solver]` and `[audit]` tables.
//! The canonical text of a config is its re-serialization after command-line
//! overrides, and the run hash is the SHA-256 of that text.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use silt_core::deviation::{MIN_TRIALS, ENUMERATION_BUDGET};
use silt_core::{ScalingSchedule, StepDistribution, StepSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Cumulant,
    UpperTail,
    LowerTail,
    Lil,
    Kappa,
    Polymer,
    OracleAudit,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Cumulant => "cumulant",
            ExperimentKind::UpperTail => "upper_tail",
            ExperimentKind::LowerTail => "lower_tail",
            ExperimentKind::Lil => "lil",
            ExperimentKind::Kappa => "kappa",
            ExperimentKind::Polymer => "polymer",
            ExperimentKind::OracleAudit => "oracle_audit",
        }
    }

    /// Experiments whose estimators need `trials` independent walks.
    pub fn is_statistical(&self) -> bool {
        matches!(self, ExperimentKind::Cumulant | ExperimentKind::UpperTail | ExperimentKind::LowerTail)
    }

    /// Experiments that test a limit theorem and so need a strongly
    /// aperiodic step law.
    pub fn needs_aperiodic(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Cumulant
                | ExperimentKind::UpperTail
                | ExperimentKind::LowerTail
                | ExperimentKind::Lil
                | ExperimentKind::OracleAudit
        )
    }

    /// Experiments whose theory column depends on κ(2,2).
    pub fn needs_kappa(&self) -> bool {
        matches!(self, ExperimentKind::Cumulant | ExperimentKind::UpperTail | ExperimentKind::Lil)
    }

    fn uses_schedule(&self) -> bool {
        self.is_statistical()
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A preset name (`lazy`, `simple`, `king`, `sticky:N`) or an explicit table
/// of `[dx, dy, mass]` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistSpec {
    Preset(String),
    Atoms {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        atoms: Vec<(i32, i32, f64)>,
    },
}

impl DistSpec {
    pub fn resolve(&self) -> silt_core::Result<StepDistribution> {
        match self {
            DistSpec::Preset(name) => StepDistribution::preset(name),
            DistSpec::Atoms { atoms, .. } => StepDistribution::from_spec(&StepSpec { atoms: atoms.clone() }),
        }
    }

    /// Name written to the `dist` column of result files.
    pub fn label(&self, dist: &StepDistribution) -> String {
        match self {
            DistSpec::Preset(name) => name.clone(),
            DistSpec::Atoms { name: Some(n), .. } => n.clone(),
            DistSpec::Atoms { name: None, .. } => format!("custom-{:016x}", dist.fingerprint()),
        }
    }
}

impl Default for DistSpec {
    fn default() -> Self {
        DistSpec::Preset("lazy".into())
    }
}

/// Where the κ(2,2) used for theory columns comes from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaInput {
    /// kappa.json written by `silt kappa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// A value supplied by hand; requires `note`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LilOptions {
    pub seeds: usize,
    pub start: usize,
    pub per_octave: usize,
}

impl Default for LilOptions {
    fn default() -> Self {
        LilOptions {
            seeds: 20,
            start: 16,
            per_octave: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolymerOptions {
    pub sweeps: usize,
}

impl Default for PolymerOptions {
    fn default() -> Self {
        PolymerOptions { sweeps: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub h: f64,
    pub l: f64,
    pub max_iter: usize,
    pub random_starts: usize,
    pub r_max: f64,
    pub tol: f64,
    /// Spacing and box for the M(θ) scan over `params`, which uses the
    /// Gaussian start only.
    pub law_h: f64,
    pub law_l: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            h: 0.05,
            l: 20.0,
            max_iter: 600,
            random_starts: 2,
            r_max: 20.0,
            tol: 1e-12,
            law_h: 0.1,
            law_l: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditOptions {
    pub reps: usize,
    pub trials: usize,
    pub pass_rate: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            reps: 100,
            trials: 2000,
            pass_rate: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// θ, λ, θ-exponent or ζ values, depending on the experiment.
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub strict: bool,
    /// Read every n of the grid off prefixes of the same walks.
    #[serde(default)]
    pub shared_paths: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub dist: DistSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaInput>,
    #[serde(default)]
    pub lil: LilOptions,
    #[serde(default)]
    pub polymer: PolymerOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub audit: AuditOptions,
}

fn default_schedule() -> String {
    "log".into()
}

fn default_trials() -> usize {
    10_000
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults for `experiment`, as used when a verb runs without a file.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            n: Vec::new(),
            schedule: default_schedule(),
            params: Vec::new(),
            trials: default_trials(),
            seed: 0,
            out: default_out(),
            strict: false,
            shared_paths: false,
            cache_dir: None,
            dist: DistSpec::default(),
            kappa: None,
            lil: LilOptions::default(),
            polymer: PolymerOptions::default(),
            solver: SolverOptions::default(),
            audit: AuditOptions::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn canonical_text(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_text()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    /// Dry-run check. Returns every problem found; never runs anything.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let kind = self.experiment;
        let mut err = |m: String| out.push(Diagnostic::error(m));

        let dist = match self.dist.resolve() {
            Ok(d) => Some(d),
            Err(e) => {
                err(format!("distribution: {e}"));
                None
            }
        };
        if let Some(d) = &dist {
            if kind.needs_aperiodic() && !d.strongly_aperiodic() {
                err(format!(
                    "theorem hypotheses violated: the {kind} experiment needs a strongly aperiodic step law, and {} is not",
                    self.dist.label(d)
                ));
            }
        }

        if kind != ExperimentKind::Kappa {
            if self.n.is_empty() {
                err("n grid is empty".into());
            }
            if self.n.windows(2).any(|w| w[1] <= w[0]) {
                err(format!("n grid {:?} is not strictly increasing", self.n));
            }
            if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
                err(format!("n = {n} is too short; every n must be at least 2"));
            }
        }

        if kind.is_statistical() && self.trials < MIN_TRIALS {
            err(format!(
                "trials = {} is below statistical minimum of {MIN_TRIALS}",
                self.trials
            ));
        }

        if kind.uses_schedule() {
            match self.schedule.parse::<ScalingSchedule>() {
                Ok(s) => {
                    for &n in self.n.iter().filter(|&&n| n >= 2) {
                        if let Err(e) = s.b(n) {
                            err(format!("schedule {}: {e}", self.schedule));
                        }
                    }
                    if s.outside_hypotheses() {
                        out.push(Diagnostic::warning(format!(
                            "schedule {} is outside theorem hypotheses; theory columns are not limits for this run",
                            self.schedule
                        )));
                    }
                }
                Err(e) => out.push(Diagnostic::error(format!("schedule: {e}"))),
            }
        }
        let mut err = |m: String| out.push(Diagnostic::error(m));

        let needs_params = matches!(
            kind,
            ExperimentKind::Cumulant | ExperimentKind::UpperTail | ExperimentKind::LowerTail | ExperimentKind::Polymer
        );
        if needs_params && self.params.is_empty() {
            err(format!("the {kind} experiment needs a non-empty params grid"));
        }
        if let Some(p) = self.params.iter().find(|p| !p.is_finite()) {
            err(format!("params contains the non-finite value {p}"));
        }
        match kind {
            ExperimentKind::Cumulant => {
                if let Some(p) = self.params.iter().find(|&&p| p < 0.0) {
                    err(format!("cumulant θ must be nonnegative, got {p}"));
                }
            }
            ExperimentKind::UpperTail | ExperimentKind::LowerTail | ExperimentKind::Kappa => {
                if let Some(p) = self.params.iter().find(|&&p| !(p > 0.0)) {
                    err(format!("{kind} parameters must be positive, got {p}"));
                }
            }
            _ => {}
        }

        match kind {
            ExperimentKind::Lil => {
                if let Some(&n_max) = self.n.last() {
                    if n_max < 1 << 16 {
                        err(format!("lil needs n_max ≥ 65536, got {n_max}"));
                    }
                }
                if self.lil.seeds == 0 {
                    err("lil.seeds must be at least 1".into());
                }
                if self.lil.start < silt_core::deviation::LIL_MIN_N {
                    err(format!(
                        "lil.start = {} is below {}, where the iterated logarithms turn positive",
                        self.lil.start,
                        silt_core::deviation::LIL_MIN_N
                    ));
                }
                if self.lil.per_octave == 0 {
                    err("lil.per_octave must be at least 1".into());
                }
            }
            ExperimentKind::Polymer => {
                if self.polymer.sweeps < 2 * silt_core::polymer::COLLAPSE_BATCHES {
                    err(format!(
                        "polymer.sweeps = {} is below statistical minimum of {} for batch means",
                        self.polymer.sweeps,
                        2 * silt_core::polymer::COLLAPSE_BATCHES
                    ));
                }
            }
            ExperimentKind::OracleAudit => {
                if self.audit.trials < MIN_TRIALS {
                    err(format!(
                        "audit.trials = {} is below statistical minimum of {MIN_TRIALS}",
                        self.audit.trials
                    ));
                }
                if self.audit.reps == 0 {
                    err("audit.reps must be at least 1".into());
                }
                if !(self.audit.pass_rate > 0.0 && self.audit.pass_rate <= 1.0) {
                    err(format!("audit.pass_rate must lie in (0, 1], got {}", self.audit.pass_rate));
                }
                if let Some(d) = &dist {
                    let k = d.atoms().len() as u128;
                    for &n in &self.n {
                        if !(3..=9).contains(&n) {
                            err(format!("oracle audit lengths must lie in 3..=9, got {n}"));
                        } else if k.pow(n as u32) > ENUMERATION_BUDGET {
                            err(format!(
                                "oracle audit at n = {n} would enumerate {} paths, over the budget of {ENUMERATION_BUDGET}",
                                k.pow(n as u32)
                            ));
                        }
                    }
                }
            }
            ExperimentKind::Kappa => {
                let s = &self.solver;
                if !(s.h > 0.0 && s.l > 2.0 * s.h && s.law_h > 0.0 && s.law_l > 2.0 * s.law_h) {
                    err("solver grid needs h > 0 and l > 2h (also for law_h, law_l)".into());
                }
                if !(s.r_max >= 10.0) {
                    err(format!("solver.r_max = {} is too small for the shooting route (need ≥ 10)", s.r_max));
                }
                if !(s.tol > 0.0) {
                    err("solver.tol must be positive".into());
                }
            }
            _ => {}
        }

        if kind.needs_kappa() {
            match &self.kappa {
                None => err(format!(
                    "κ unavailable: the {kind} experiment needs [kappa] file (from `silt kappa`) or [kappa] value with a note"
                )),
                Some(k) => match (&k.file, k.value) {
                    (Some(_), Some(_)) => err("[kappa] takes either file or value, not both".into()),
                    (None, None) => err("[kappa] needs file or value".into()),
                    (None, Some(v)) => {
                        if !(v > 0.0) {
                            err(format!("[kappa] value must be positive, got {v}"));
                        }
                        if k.note.as_deref().is_none_or(|n| n.trim().is_empty()) {
                            err("[kappa] value needs a note recording where it came from".into());
                        }
                    }
                    (Some(f), None) => {
                        if !f.exists() {
                            err(format!("[kappa] file {} does not exist; run `silt kappa` first", f.display()));
                        }
                    }
                },
            }
        }
        if self.seed > i64::MAX as u64 {
            err(format!("seed {} does not fit in a TOML integer", self.seed));
        }
        out
    }

    /// Errors out if [`validate`](Self::validate) reports any error.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<Diagnostic> = self.validate().into_iter().filter(|d| d.severity == Severity::Error).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message,
        }
    }

    pub fn warning(message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}
