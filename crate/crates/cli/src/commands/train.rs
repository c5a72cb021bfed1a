//! The train scenario: fit a generator/critic pair on a pool file and write
//! the checkpoint plus its loss trace. Also home to the preset machinery the
//! other scenarios reuse.

use synthpower::error::Error;
use synthpower::gan::{self, FinalActivation, MlpSpec, Objective, TrainConfig};
use synthpower::linalg::Mat;
use synthpower::rng;
use synthpower::sampling::{parse_tag_sidecar, read_f32d};

use crate::config::{Preset, RunConfig, TrainTweaks};
use crate::manifest::RunManifest;
use crate::{CmdError, CmdResult, Stage, StageExt};

use super::{write_loss_trace, Artifacts, Staging};

/// Everything needed to call the trainer: hyperparameters and both
/// architectures, widths already adjusted for any condition bits.
pub(crate) struct TrainPlan {
    pub config: TrainConfig,
    pub spec_g: MlpSpec,
    pub spec_d: MlpSpec,
    pub preset: Preset,
}

impl TrainPlan {
    /// One-line description for manifests.
    pub fn describe(&self) -> String {
        format!(
            "{} preset: {} iterations, batch {}, noise {}, lr {}, hidden {:?}, generator output {:?}",
            match self.preset {
                Preset::Naive => "naive",
                Preset::Icw => "icw",
            },
            self.config.iterations,
            self.config.batch_size,
            self.config.noise_dim,
            self.config.learning_rate,
            &self.spec_g.layer_widths[1..self.spec_g.layer_widths.len() - 1],
            self.spec_g.final_activation,
        )
    }
}

fn parse_final(name: &str) -> CmdResult<FinalActivation> {
    match name {
        "sigmoid" => Ok(FinalActivation::Sigmoid),
        "identity" => Ok(FinalActivation::Identity),
        "linear" => Ok(FinalActivation::Linear),
        other => Err(CmdError::config(format!(
            "final_activation \"{other}\" is not sigmoid, identity, or linear"
        ))),
    }
}

/// Builds the training plan for a preset on `data_dim`-wide samples,
/// conditioned on `vocab` when given, with tweak overrides applied.
///
/// The naive preset is the simulated-data recipe: a plain GAN, 3,000
/// iterations of batch 300, 10-dimensional noise, two 64-wide hidden layers,
/// and an unbounded generator output. The icw preset is the conditional
/// WGAN-gp recipe: 15,000 iterations of batch 50, 128-dimensional noise,
/// unit gradient penalty, three shrinking hidden layers, and a sigmoid
/// output for unit-interval data (switch to identity for unbounded data such
/// as component scores).
pub(crate) fn build_plan(
    preset: Preset,
    data_dim: usize,
    vocab: Option<Vec<String>>,
    tweaks: &TrainTweaks,
    seed: u64,
) -> CmdResult<TrainPlan> {
    let (objective, iterations, batch, noise, hidden, final_g, final_d): (
        Objective,
        usize,
        usize,
        usize,
        Vec<usize>,
        FinalActivation,
        FinalActivation,
    ) = match preset {
        Preset::Naive => (
            Objective::NaiveGan,
            3000,
            300,
            10,
            vec![64, 64],
            FinalActivation::Identity,
            FinalActivation::Sigmoid,
        ),
        Preset::Icw => (
            Objective::WganGp,
            15_000,
            50,
            128,
            vec![256, 128, 64],
            FinalActivation::Sigmoid,
            FinalActivation::Linear,
        ),
    };
    let mut config = TrainConfig::new(
        objective,
        tweaks.iterations.unwrap_or(iterations),
        tweaks.batch_size.unwrap_or(batch),
        tweaks.noise_dim.unwrap_or(noise),
        seed,
    );
    if let Some(lr) = tweaks.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(l) = tweaks.lambda_gp {
        config.lambda_gp = l;
    }
    config.condition_vocab = vocab;
    let cond = config.condition_vocab.as_ref().map_or(0, |v| v.len());

    let hidden = tweaks.hidden.clone().unwrap_or(hidden);
    let final_g = match &tweaks.final_activation {
        Some(name) => parse_final(name)?,
        None => final_g,
    };
    let mut g_widths = vec![config.noise_dim + cond];
    g_widths.extend(&hidden);
    g_widths.push(data_dim);
    let mut d_widths = vec![data_dim + cond];
    d_widths.extend(&hidden);
    d_widths.push(1);
    Ok(TrainPlan {
        config,
        spec_g: MlpSpec::new(g_widths, final_g),
        spec_d: MlpSpec::new(d_widths, final_d),
        preset,
    })
}

/// Reads a row-indexed tag sidecar and builds the multi-hot condition matrix
/// for `rows` data rows: entry keys must be exactly the row indices 0..rows,
/// each exactly once.
pub(crate) fn conditions_from_sidecar(
    text: &str,
    rows: usize,
) -> Result<(Mat<f64>, Vec<String>), Error> {
    let sidecar = parse_tag_sidecar(text)?;
    let vocab = sidecar.vocab;
    let mut seen = vec![false; rows];
    let mut bits = vec![0.0f64; rows * vocab.len()];
    for (key, tags) in &sidecar.entries {
        let row: usize = key.parse().map_err(|_| {
            Error::Sidecar(format!("entry key \"{key}\" is not a row index"))
        })?;
        if row >= rows {
            return Err(Error::Sidecar(format!(
                "row index {row} out of range for {rows} data rows"
            )));
        }
        if seen[row] {
            return Err(Error::Sidecar(format!("row {row} appears more than once")));
        }
        seen[row] = true;
        for tag in tags {
            let j = vocab.iter().position(|t| t == tag).expect("parser extends the vocabulary");
            bits[row * vocab.len() + j] = 1.0;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Sidecar(format!("no entry for row {missing}")));
    }
    Ok((Mat::from_vec(rows, vocab.len(), bits), vocab))
}

/// Trains on a pool file per the configured preset and writes checkpoint,
/// loss trace, and manifest.
pub fn cmd_train(config: &RunConfig) -> CmdResult<Artifacts> {
    config.validate_common()?;
    let section = &config.train;
    let data_path = section
        .data
        .as_ref()
        .ok_or_else(|| CmdError::config("the train scenario needs a data file (--data)"))?;
    super::require_file(data_path, "data file")?;
    if let Some(tags) = &section.tags {
        super::require_file(tags, "tag sidecar")?;
    }
    let staging = Staging::new(config)?;

    let data = read_f32d(data_path)
        .and_then(|f| f.to_matrix())
        .stage(Stage::Ingest)?;
    let conditions = match &section.tags {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError { stage: Stage::Ingest, source: e.into() })?;
            Some(conditions_from_sidecar(&text, data.rows()).stage(Stage::Ingest)?)
        }
        None => None,
    };
    let (cond_mat, vocab) = match conditions {
        Some((m, v)) => (Some(m), Some(v)),
        None => (None, None),
    };

    let preset = section.preset.unwrap_or(Preset::Naive);
    let plan = build_plan(
        preset,
        data.cols(),
        vocab,
        &section.tweaks,
        rng::derive_seed(config.run.seed, &[12]),
    )?;
    println!(
        "training on {} rows of width {} ({})",
        data.rows(),
        data.cols(),
        plan.describe()
    );
    let checkpoint = gan::train(&data, cond_mat.as_ref(), &plan.spec_g, &plan.spec_d, &plan.config)
        .stage(Stage::Train)?;

    let mut artifacts = Artifacts::new(config.out_dir());
    let ckpt_path = staging.path().join("checkpoint.json");
    gan::save_checkpoint(&checkpoint, &ckpt_path).stage(Stage::Report)?;
    write_loss_trace(staging.path(), "loss_trace.csv", &checkpoint.loss_trace)?;

    let mut manifest = RunManifest::new(config);
    manifest.decide("training", plan.describe());
    manifest.observe(
        "final_losses",
        serde_json::json!({
            "critic": checkpoint.loss_trace.last().map(|p| p.critic),
            "generator": checkpoint.loss_trace.last().map(|p| p.generator),
        }),
    );
    manifest.save(&staging.path().join("manifest.json")).stage(Stage::Report)?;

    let out_dir = staging.commit()?;
    artifacts.out_dir = out_dir.clone();
    artifacts.manifest = out_dir.join("manifest.json");
    artifacts.checkpoints.push(out_dir.join("checkpoint.json"));
    Ok(artifacts)
}
