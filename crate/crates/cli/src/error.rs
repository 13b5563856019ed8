use std::path::PathBuf;

use thiserror::Error;

use crate::config::Diagnostic;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),
    #[error("invalid config:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(
        "κ(2,2) is required for the {experiment} experiment; run `silt kappa` first and point [kappa] file at its kappa.json, \
         or set [kappa] value together with a provenance note"
    )]
    KappaUnavailable { experiment: String },
    #[error("cannot load κ from {path}: {reason}")]
    KappaFile { path: PathBuf, reason: String },
    #[error("corrupt E B_n cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error("{verb} needs a config with experiment = \"{expected}\", got \"{found}\"")]
    WrongExperiment {
        verb: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error(transparent)]
    Core(#[from] silt_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

pub type Result<T> = std::result::Result<T, CliError>;
