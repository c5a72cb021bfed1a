//! Library half of the `synthpower` binary: scenario configuration, the five
//! command implementations, manifest writing, and SVG plotting. The binary is
//! a thin clap wrapper over [`run`]; tests call the `cmd_*` functions
//! directly with a prepared [`config::RunConfig`].

pub mod commands;
pub mod config;
pub mod manifest;
pub mod svg;

use std::fmt;

pub use commands::{
    cmd_fmri, cmd_gaussian, cmd_power, cmd_report, cmd_train, Artifacts,
};
pub use config::RunConfig;

/// Pipeline stage families; each maps to a distinct process exit code so
/// callers can tell where a run failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Flag/file parsing, validation, output-directory setup. Exit 2.
    Config,
    /// Reading input data: pools, volumes, sidecars, tables. Exit 3.
    Ingest,
    /// Generative-model training. Exit 4.
    Train,
    /// Statistical testing and power-curve estimation. Exit 5.
    Test,
    /// Writing tables, plots, manifests. Exit 6.
    Report,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 3,
            Stage::Train => 4,
            Stage::Test => 5,
            Stage::Report => 6,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Test => "test",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A command failure tagged with the stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {source}")]
pub struct CmdError {
    pub stage: Stage,
    #[source]
    pub source: synthpower::error::Error,
}

impl CmdError {
    pub fn config(message: impl Into<String>) -> Self {
        CmdError { stage: Stage::Config, source: synthpower::error::Error::Config(message.into()) }
    }
}

pub type CmdResult<T> = std::result::Result<T, CmdError>;

/// Extension for tagging core errors with their pipeline stage.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> CmdResult<T>;
}

impl<T> StageExt<T> for std::result::Result<T, synthpower::error::Error> {
    fn stage(self, stage: Stage) -> CmdResult<T> {
        self.map_err(|source| CmdError { stage, source })
    }
}

/// Runs one fully merged configuration, dispatching on its scenario. When a
/// thread count is configured (flag or `SYNTHPOWER_THREADS`), the command
/// executes inside a dedicated rayon pool of that size; results are
/// byte-identical either way.
pub fn run(config: &RunConfig) -> CmdResult<Artifacts> {
    let scenario = config.scenario.ok_or_else(|| CmdError::config("no scenario selected"))?;
    let dispatch = || -> CmdResult<Artifacts> {
        match scenario {
            config::Scenario::Gaussian => cmd_gaussian(config),
            config::Scenario::Train => cmd_train(config),
            config::Scenario::Power => cmd_power(config),
            config::Scenario::Fmri => cmd_fmri(config),
            config::Scenario::Report => cmd_report(config),
        }
    };
    match config.run.threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CmdError::config(format!("cannot build a {n}-thread pool: {e}")))?
            .install(dispatch),
        _ => dispatch(),
    }
}
