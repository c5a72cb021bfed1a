//! `synthpower`: power analysis for two-sample comparisons, with bootstrap
//! and GAN-based synthetic sampling strategies.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use synthpower_cli::config::{self, GridSpec, Overrides, Preset, Scenario, StrategyName, TestName};

#[derive(Parser)]
#[command(
    name = "synthpower",
    version,
    about = "Monte-Carlo power curves for two-sample tests, with resample, \
             bootstrap, and GAN-based synthetic sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every scenario understands; each overrides the config file.
#[derive(Args)]
struct Common {
    /// Structured config file (.toml or .json); flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed all randomness derives from.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; the run must own it exclusively.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: SYNTHPOWER_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Significance level of the tests.
    #[arg(long)]
    alpha: Option<f64>,

    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    k_trials: Option<usize>,

    /// Per-group sample-size grid, START:END:STEP.
    #[arg(long)]
    grid: Option<GridSpec>,

    /// Test to run; repeat the flag for several.
    #[arg(long = "test", value_enum)]
    tests: Vec<TestName>,

    /// Sampling strategy; one applies to both groups, two pair up per group.
    #[arg(long = "strategy", value_enum)]
    strategies: Vec<StrategyName>,

    /// Permutations behind kernel-test p-values.
    #[arg(long)]
    permutations: Option<usize>,

    /// Moving-average window for the smoothed power column (odd).
    #[arg(long)]
    smooth_window: Option<usize>,

    /// Power level recommendations aim for.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated experiment: two isotropic Gaussian groups, with resample,
    /// bootstrap, and synthetic curves per test.
    Gaussian {
        #[command(flatten)]
        common: Common,

        /// Skip generator training; only resample and bootstrap curves.
        #[arg(long)]
        skip_gan: bool,

        /// Data dimension.
        #[arg(long)]
        dim: Option<usize>,

        /// Per-coordinate mean of the second group.
        #[arg(long)]
        mean_shift: Option<f64>,

        /// Observed pool size per group.
        #[arg(long)]
        pool: Option<usize>,
    },

    /// Train a generator/critic pair on a pool file and save the checkpoint.
    Train {
        #[command(flatten)]
        common: Common,

        /// Training pool, a rank-2 F32D file.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,

        /// Tag sidecar keyed by row index; supplying one trains conditionally.
        #[arg(long, value_name = "PATH")]
        tags_file: Option<PathBuf>,

        /// Hyperparameter preset.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },

    /// One power sweep over two sources configured in the config file.
    Power {
        #[command(flatten)]
        common: Common,
    },

    /// Tag-split power analysis of a volume directory or score file.
    Fmri {
        #[command(flatten)]
        common: Common,

        /// Directory of .nii volumes, read in filename order.
        #[arg(long, value_name = "DIR")]
        volumes: Option<PathBuf>,

        /// Tag sidecar keyed by volume filename.
        #[arg(long, value_name = "PATH")]
        tags_file: Option<PathBuf>,

        /// Pre-projected scores (F32D with a .tags sidecar); skips PCA.
        #[arg(long, value_name = "PATH")]
        scores: Option<PathBuf>,

        /// Conditional checkpoint on score space.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,

        /// Train the conditional model inside the run.
        #[arg(long)]
        train_inline: bool,

        /// Tag splitting the dataset into the two compared groups.
        #[arg(long)]
        tag: Option<String>,

        /// Principal components to keep.
        #[arg(long)]
        components: Option<usize>,

        /// Hyperparameter preset for inline training.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },

    /// Replot existing curve tables into one SVG and summarize their
    /// recommendations.
    Report {
        #[command(flatten)]
        common: Common,

        /// Curve tables to plot.
        #[arg(required = true, value_name = "TABLE")]
        tables: Vec<PathBuf>,
    },
}

fn overrides_from(common: &Common) -> Overrides {
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        threads: common.threads,
        alpha: common.alpha,
        trials: common.k_trials,
        grid: common.grid,
        permutations: common.permutations,
        smooth_window: common.smooth_window,
        target: common.target,
        tests: common.tests.clone(),
        strategies: common.strategies.clone(),
        ..Overrides::default()
    }
}

fn main() {
    let cli = Cli::parse();
    let (scenario, common, flags) = match &cli.command {
        Command::Gaussian { common, skip_gan, dim, mean_shift, pool } => {
            let mut flags = overrides_from(common);
            flags.skip_gan = *skip_gan;
            flags.dim = *dim;
            flags.mean_shift = *mean_shift;
            flags.pool = *pool;
            (Scenario::Gaussian, common, flags)
        }
        Command::Train { common, data, tags_file, preset } => {
            let mut flags = overrides_from(common);
            flags.data = data.clone();
            flags.tags = tags_file.clone();
            flags.preset = *preset;
            (Scenario::Train, common, flags)
        }
        Command::Power { common } => (Scenario::Power, common, overrides_from(common)),
        Command::Fmri {
            common,
            volumes,
            tags_file,
            scores,
            checkpoint,
            train_inline,
            tag,
            components,
            preset,
        } => {
            let mut flags = overrides_from(common);
            flags.volumes = volumes.clone();
            flags.tags = tags_file.clone();
            flags.scores = scores.clone();
            flags.checkpoint = checkpoint.clone();
            flags.train_inline = *train_inline;
            flags.tag = tag.clone();
            flags.components = *components;
            flags.preset = *preset;
            (Scenario::Fmri, common, flags)
        }
        Command::Report { common, tables } => {
            let mut flags = overrides_from(common);
            flags.tables = tables.clone();
            (Scenario::Report, common, flags)
        }
    };

    let result = config::merge(scenario, common.config.as_deref(), &flags)
        .and_then(|merged| synthpower_cli::run(&merged));
    match result {
        Ok(artifacts) => println!("outputs in {}", artifacts.out_dir.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.stage.exit_code());
        }
    }
}
