use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use silt_cli::config::{DistSpec, ExperimentConfig, ExperimentKind, Severity};
use silt_cli::run::{run, run_audit_suite, RunOutcome};
use silt_cli::{CliError, Result};
use silt_core::StepDistribution;

#[derive(Parser)]
#[command(name = "silt", version, about = "Self-intersection local time experiments for planar random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 2 if any estimate is flagged.
    #[arg(long, global = true)]
    strict: bool,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by --config.
    Run,
    /// Check a config without running it.
    Validate,
    /// Solve for κ(2,2) by both routes and write kappa.json.
    Kappa,
    /// Check every Monte Carlo estimator against exhaustive enumeration.
    Audit,
}

impl Global {
    fn load(&self, verb: &'static str, default: ExperimentKind) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None if verb == "run" || verb == "validate" => {
                return Err(CliError::Invalid(vec![silt_cli::Diagnostic::error(format!(
                    "`silt {verb}` needs --config <file>"
                ))]))
            }
            None => ExperimentConfig::new(default),
        };
        if self.config.is_some() && (verb == "kappa" || verb == "audit") && config.experiment != default {
            return Err(CliError::WrongExperiment {
                verb,
                expected: default.as_str(),
                found: config.experiment.to_string(),
            });
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.out = o.clone();
        }
        config.strict |= self.strict;
        Ok(config)
    }
}

fn report(outcome: &RunOutcome) {
    let m = &outcome.manifest;
    eprintln!(
        "{}: wrote {} to {} in {:.1} s ({} flagged)",
        m.experiment,
        m.outputs.join(", "),
        outcome.out_dir.display(),
        m.wall_clock_seconds,
        m.flagged
    );
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    }
    match cli.command {
        Command::Validate => {
            let config = cli.global.load("validate", ExperimentKind::Cumulant)?;
            let diags = config.validate();
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
            }
            Ok(i32::from(diags.iter().any(|d| d.severity == Severity::Error)))
        }
        Command::Run => {
            let config = cli.global.load("run", ExperimentKind::Cumulant)?;
            let outcome = run(&config)?;
            report(&outcome);
            Ok(outcome.exit_code(config.strict))
        }
        Command::Kappa => {
            let mut config = cli.global.load("kappa", ExperimentKind::Kappa)?;
            if cli.global.config.is_none() {
                config.params = vec![0.5, 1.0, 2.0];
            }
            let outcome = run(&config)?;
            let text = std::fs::read_to_string(outcome.out_dir.join("kappa.json"))?;
            print!("{text}");
            report(&outcome);
            Ok(outcome.exit_code(config.strict))
        }
        Command::Audit => {
            let config = cli.global.load("audit", ExperimentKind::OracleAudit)?;
            let outcome = if cli.global.config.is_some() {
                run(&config)?
            } else {
                let cases = vec![
                    ("lazy".to_string(), StepDistribution::lazy(), 8),
                    ("king".to_string(), StepDistribution::king(), 6),
                ];
                let mut c = config.clone();
                c.dist = DistSpec::Preset("lazy".into());
                c.n = vec![8];
                run_audit_suite(&c, &cases)?
            };
            report(&outcome);
            if outcome.manifest.flagged > 0 {
                eprintln!("audit: {} check(s) below the pass rate", outcome.manifest.flagged);
                return Ok(2);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
