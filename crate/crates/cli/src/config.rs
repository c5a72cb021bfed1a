//! Run configuration: one structured file (TOML or JSON, chosen by
//! extension) holding common settings plus per-scenario sections, merged
//! with command-line flags. Flags win; the merged result is echoed into the
//! run manifest so a run can be reproduced from its manifest alone.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use synthpower::error::{Error, Result};
use synthpower::power::{PowerConfig, DEFAULT_WINDOW, POWER_TARGET};
use synthpower::sampling::Strategy;
use synthpower::twosample::{KernelSpec, TestSpec};

use crate::{CmdError, CmdResult};

/// Which pipeline a run executes; set by the subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Gaussian,
    Train,
    Power,
    Fmri,
    Report,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Gaussian => "gaussian",
            Scenario::Train => "train",
            Scenario::Power => "power",
            Scenario::Fmri => "fmri",
            Scenario::Report => "report",
        }
    }
}

/// Test family selected by name; the data dimension picks the concrete
/// variant (a plain t-test becomes Bonferroni-aggregated per-coordinate
/// Welch tests when the data is multivariate).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TestName {
    T,
    Hotelling,
    Mmd,
    MmdL1,
}

impl TestName {
    pub fn to_spec(self, dim: usize, permutations: usize) -> TestSpec<f64> {
        match self {
            TestName::T if dim == 1 => TestSpec::WelchT,
            TestName::T => TestSpec::BonferroniWelch,
            TestName::Hotelling => TestSpec::HotellingT2,
            TestName::Mmd => TestSpec::Mmd2 { kernel: KernelSpec::default(), permutations },
            TestName::MmdL1 => TestSpec::MmdL1 { kernel: KernelSpec::default(), permutations },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestName::T => "t",
            TestName::Hotelling => "hotelling",
            TestName::Mmd => "mmd",
            TestName::MmdL1 => "mmd-l1",
        }
    }
}

/// CLI-facing strategy name, convertible to the core sampling strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Resample,
    Bootstrap,
    Synthetic,
}

impl From<StrategyName> for Strategy {
    fn from(name: StrategyName) -> Strategy {
        match name {
            StrategyName::Resample => Strategy::Resample,
            StrategyName::Bootstrap => Strategy::Bootstrap,
            StrategyName::Synthetic => Strategy::Synthetic,
        }
    }
}

/// Sample-size sweep, `start..=end` stepping by `step`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl Default for GridSpec {
    /// The simulated-experiment sweep: 20..=500 by 20.
    fn default() -> Self {
        GridSpec { start: 20, end: 500, step: 20 }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    /// Parses `START:END:STEP`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid \"{s}\" is not START:END:STEP"));
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.parse::<usize>().map_err(|e| format!("grid part \"{p}\": {e}")))
            .collect::<std::result::Result<_, _>>()?;
        Ok(GridSpec { start: nums[0], end: nums[1], step: nums[2] })
    }
}

/// Settings shared by every scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Master seed all randomness derives from.
    pub seed: u64,
    /// Output directory; defaults to `./<scenario>-out`.
    pub out: Option<PathBuf>,
    /// Worker threads; None means the environment or rayon default.
    pub threads: Option<usize>,
    pub alpha: f64,
    /// Trials per grid point (K).
    pub trials: usize,
    pub grid: GridSpec,
    /// Permutations for kernel-test p-values.
    pub permutations: usize,
    /// Moving-average window for the smoothed power column (odd).
    pub smooth_window: usize,
    /// Power level a recommendation aims for.
    pub target: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: None,
            threads: None,
            alpha: 0.05,
            trials: 50,
            grid: GridSpec::default(),
            permutations: synthpower::twosample::DEFAULT_PERMUTATIONS,
            smooth_window: DEFAULT_WINDOW,
            target: POWER_TARGET,
        }
    }
}

/// Overrides for the preset training hyperparameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainTweaks {
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub noise_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda_gp: Option<f64>,
    /// Hidden layer widths for both networks.
    pub hidden: Option<Vec<usize>>,
    /// Generator output activation: "sigmoid" for unit-interval data,
    /// "identity" otherwise. Defaults per preset.
    pub final_activation: Option<String>,
}

/// Hyperparameter presets for the two training recipes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Simulated-data recipe: plain GAN, 3,000 iterations, batch 300.
    Naive,
    /// Conditional WGAN-gp recipe: 15,000 iterations, batch 50, noise 128,
    /// unit gradient penalty.
    Icw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSection {
    pub dim: usize,
    /// Per-coordinate mean of the second group; the first is centred.
    pub mean_shift: f64,
    /// Pool size per group for the bootstrap curve and GAN training.
    pub pool: usize,
    pub tests: Vec<TestName>,
    /// Skip GAN training; only resample and bootstrap curves are produced.
    pub skip_gan: bool,
    pub train: TrainTweaks,
}

impl Default for GaussianSection {
    fn default() -> Self {
        GaussianSection {
            dim: 10,
            mean_shift: 0.3,
            pool: 500,
            tests: vec![TestName::T, TestName::Mmd],
            skip_gan: false,
            train: TrainTweaks::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Training pool, a rank-2 F32D file.
    pub data: Option<PathBuf>,
    /// Tag sidecar keyed by row index; supplying one trains conditionally.
    pub tags: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub tweaks: TrainTweaks,
}

/// One group's data source for the generic power scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Isotropic Gaussian with a common per-coordinate mean.
    Gaussian {
        dim: usize,
        #[serde(default)]
        mean: f64,
    },
    /// Fixed pool loaded from a rank-2 F32D file.
    Pool { path: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub group1: Option<SourceSpec>,
    pub group2: Option<SourceSpec>,
    /// Checkpoints enabling the synthetic curve; both or neither.
    pub checkpoint1: Option<PathBuf>,
    pub checkpoint2: Option<PathBuf>,
    pub test: Option<TestName>,
    /// One strategy (both groups) or two (per group).
    pub strategies: Vec<StrategyName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmriSection {
    /// Directory of .nii volumes, read in filename order.
    pub volumes: Option<PathBuf>,
    /// Tag sidecar keyed by volume filename.
    pub tags: Option<PathBuf>,
    /// Pre-projected scores (F32D + row-indexed tag sidecar); skips
    /// ingestion and PCA.
    pub scores: Option<PathBuf>,
    /// Conditional checkpoint on score space.
    pub checkpoint: Option<PathBuf>,
    /// Train the conditional model inside the run instead.
    pub train_inline: bool,
    /// Tag splitting the dataset into the two compared groups.
    pub tag: Option<String>,
    /// Principal components to keep.
    pub components: usize,
    /// Saved projection to reuse instead of fitting one.
    pub pca_model: Option<PathBuf>,
    pub test: Option<TestName>,
    pub preset: Option<Preset>,
    pub train: TrainTweaks,
}

impl Default for FmriSection {
    fn default() -> Self {
        FmriSection {
            volumes: None,
            tags: None,
            scores: None,
            checkpoint: None,
            train_inline: false,
            tag: None,
            components: 10,
            pca_model: None,
            test: None,
            preset: None,
            train: TrainTweaks::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Curve tables to plot and summarize.
    pub tables: Vec<PathBuf>,
}

/// The complete merged configuration of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    pub run: RunSection,
    pub gaussian: GaussianSection,
    pub train: TrainSection,
    pub power: PowerSection,
    pub fmri: FmriSection,
    pub report: ReportSection,
}

impl RunConfig {
    /// Parses a TOML (`.toml`) or JSON (`.json`) config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "toml" => toml::from_str(&text)
                .map_err(|e| Error::Parse { what: "config", detail: e.to_string() }),
            "json" => serde_json::from_str(&text)
                .map_err(|e| Error::Parse { what: "config", detail: e.to_string() }),
            other => Err(Error::Config(format!(
                "config file must end in .toml or .json, not \"{other}\""
            ))),
        }
    }

    /// The output directory this run owns.
    pub fn out_dir(&self) -> PathBuf {
        match (&self.run.out, self.scenario) {
            (Some(path), _) => path.clone(),
            (None, Some(s)) => PathBuf::from(format!("{}-out", s.as_str())),
            (None, None) => PathBuf::from("synthpower-out"),
        }
    }

    /// Common numeric sanity checks shared by all scenarios.
    pub fn validate_common(&self) -> CmdResult<()> {
        let r = &self.run;
        if !(r.alpha > 0.0 && r.alpha < 1.0) {
            return Err(CmdError::config(format!("alpha {} must lie in (0, 1)", r.alpha)));
        }
        if !(r.target > 0.0 && r.target < 1.0) {
            return Err(CmdError::config(format!("target {} must lie in (0, 1)", r.target)));
        }
        if r.trials == 0 {
            return Err(CmdError::config("trials must be positive"));
        }
        if r.grid.step == 0 || r.grid.start == 0 || r.grid.start > r.grid.end {
            return Err(CmdError::config(format!(
                "grid {}:{}:{} is empty or starts at 0",
                r.grid.start, r.grid.end, r.grid.step
            )));
        }
        if r.smooth_window.is_multiple_of(2) {
            return Err(CmdError::config(format!(
                "smooth_window {} must be odd",
                r.smooth_window
            )));
        }
        Ok(())
    }

    /// Assembles the core power configuration for one curve.
    pub fn power_config(&self, test: TestSpec<f64>, strategy: (Strategy, Strategy)) -> PowerConfig {
        let mut cfg = PowerConfig::new(test, self.run.seed);
        cfg.n_start = self.run.grid.start;
        cfg.n_end = self.run.grid.end;
        cfg.n_step = self.run.grid.step;
        cfg.trials = self.run.trials;
        cfg.alpha = self.run.alpha;
        cfg.strategies = strategy;
        cfg.permutations = self.run.permutations;
        cfg
    }
}

/// Flag values that override the config file; None leaves the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub alpha: Option<f64>,
    pub trials: Option<usize>,
    pub grid: Option<GridSpec>,
    pub permutations: Option<usize>,
    pub smooth_window: Option<usize>,
    pub target: Option<f64>,
    pub tests: Vec<TestName>,
    pub strategies: Vec<StrategyName>,
    pub skip_gan: bool,
    pub dim: Option<usize>,
    pub mean_shift: Option<f64>,
    pub pool: Option<usize>,
    pub data: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub volumes: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub train_inline: bool,
    pub tag: Option<String>,
    pub components: Option<usize>,
    pub tables: Vec<PathBuf>,
}

/// Loads the config file (when given), checks any scenario it declares
/// against the invoked subcommand, and applies flag overrides on top.
pub fn merge(
    scenario: Scenario,
    config_path: Option<&Path>,
    flags: &Overrides,
) -> CmdResult<RunConfig> {
    let mut cfg = match config_path {
        Some(path) => RunConfig::from_file(path).map_err(|source| CmdError {
            stage: crate::Stage::Config,
            source,
        })?,
        None => RunConfig::default(),
    };
    if let Some(declared) = cfg.scenario {
        if declared != scenario {
            return Err(CmdError::config(format!(
                "config file is for the {} scenario but {} was invoked",
                declared.as_str(),
                scenario.as_str()
            )));
        }
    }
    cfg.scenario = Some(scenario);

    let r = &mut cfg.run;
    if let Some(v) = flags.seed {
        r.seed = v;
    }
    if let Some(v) = &flags.out {
        r.out = Some(v.clone());
    }
    if let Some(v) = flags.threads {
        r.threads = Some(v);
    } else if r.threads.is_none() {
        if let Ok(env) = std::env::var("SYNTHPOWER_THREADS") {
            let parsed: usize = env.parse().map_err(|_| {
                CmdError::config(format!("SYNTHPOWER_THREADS=\"{env}\" is not a thread count"))
            })?;
            r.threads = Some(parsed);
        }
    }
    if let Some(v) = flags.alpha {
        r.alpha = v;
    }
    if let Some(v) = flags.trials {
        r.trials = v;
    }
    if let Some(v) = flags.grid {
        r.grid = v;
    }
    if let Some(v) = flags.permutations {
        r.permutations = v;
    }
    if let Some(v) = flags.smooth_window {
        r.smooth_window = v;
    }
    if let Some(v) = flags.target {
        r.target = v;
    }

    if !flags.tests.is_empty() {
        cfg.gaussian.tests = flags.tests.clone();
        if flags.tests.len() == 1 {
            cfg.power.test = Some(flags.tests[0]);
            cfg.fmri.test = Some(flags.tests[0]);
        }
    }
    if !flags.strategies.is_empty() {
        cfg.power.strategies = flags.strategies.clone();
    }
    if flags.skip_gan {
        cfg.gaussian.skip_gan = true;
    }
    if let Some(v) = flags.dim {
        cfg.gaussian.dim = v;
    }
    if let Some(v) = flags.mean_shift {
        cfg.gaussian.mean_shift = v;
    }
    if let Some(v) = flags.pool {
        cfg.gaussian.pool = v;
    }
    if let Some(v) = &flags.data {
        cfg.train.data = Some(v.clone());
    }
    if let Some(v) = &flags.tags {
        cfg.train.tags = Some(v.clone());
        cfg.fmri.tags = Some(v.clone());
    }
    if let Some(v) = flags.preset {
        cfg.train.preset = Some(v);
        cfg.fmri.preset = Some(v);
    }
    if let Some(v) = &flags.volumes {
        cfg.fmri.volumes = Some(v.clone());
    }
    if let Some(v) = &flags.scores {
        cfg.fmri.scores = Some(v.clone());
    }
    if let Some(v) = &flags.checkpoint {
        cfg.fmri.checkpoint = Some(v.clone());
    }
    if flags.train_inline {
        cfg.fmri.train_inline = true;
    }
    if let Some(v) = &flags.tag {
        cfg.fmri.tag = Some(v.clone());
    }
    if let Some(v) = flags.components {
        cfg.fmri.components = v;
    }
    if !flags.tables.is_empty() {
        cfg.report.tables = flags.tables.clone();
    }
    Ok(cfg)
}
