//! The fmri scenario: volumes (or pre-projected scores) are reduced to
//! principal-component scores and split by one tag, the tagged side is
//! compared against the rest by bootstrap, and a conditional generator
//! (loaded or trained inline) produces the synthetic comparison curve.

use std::path::Path;

use synthpower::gan::{self, FinalActivation, ModelCheckpoint};
use synthpower::linalg::Mat;
use synthpower::neuro;
use synthpower::pca;
use synthpower::power::{power_curve_fmri, PowerCurve};
use synthpower::rng;
use synthpower::sampling::{Strategy, TaggedDataset};

use crate::config::{Preset, RunConfig, TestName};
use crate::manifest::{CurveSummary, RunManifest};
use crate::{CmdError, CmdResult, Stage, StageExt};

use super::{
    build_plan, finish_curve, require_file, to_plot_curve, write_curve, write_loss_trace,
    write_plot, Artifacts, Staging,
};

/// Reads every `.nii` file in the directory in filename order, normalizes
/// each volume, and projects the flattened rows onto `components` principal
/// components (fitting a model unless one is supplied). Returns the tagged
/// score dataset, the model actually used, whether it was fit here, and the
/// total count of non-finite voxels replaced.
fn ingest_volumes(
    config: &RunConfig,
    manifest: &mut RunManifest,
) -> CmdResult<(TaggedDataset, pca::PcaModel<f64>, bool, usize)> {
    let section = &config.fmri;
    let dir = section.volumes.as_ref().expect("checked by cmd_fmri");
    if !dir.is_dir() {
        return Err(CmdError {
            stage: Stage::Ingest,
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("volume directory {} does not exist", dir.display()),
            )
            .into(),
        });
    }
    let tags_path = section
        .tags
        .as_ref()
        .ok_or_else(|| CmdError::config("volume ingestion needs a tag sidecar (--tags-file)"))?;
    require_file(tags_path, "tag sidecar")?;

    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CmdError { stage: Stage::Ingest, source: e.into() })?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.file_name().to_string_lossy().into_owned())
        .filter(|name| name.ends_with(".nii"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CmdError {
            stage: Stage::Ingest,
            source: synthpower::error::Error::Config(format!(
                "no .nii volumes in {}",
                dir.display()
            )),
        });
    }

    let mut volumes = Vec::with_capacity(names.len());
    let mut nan_replaced = 0usize;
    for name in &names {
        let volume = neuro::read_nifti_file(&dir.join(name)).stage(Stage::Ingest)?;
        nan_replaced += volume.nan_replaced;
        volumes.push(neuro::normalize(&volume));
    }
    let flat = neuro::flatten(&volumes).stage(Stage::Ingest)?;
    println!("ingested {} volumes of {} voxels", flat.rows(), flat.cols());

    let tag_text = std::fs::read_to_string(tags_path)
        .map_err(|e| CmdError { stage: Stage::Ingest, source: e.into() })?;
    let assignment = neuro::load_tags(&tag_text, &names).stage(Stage::Ingest)?;

    let (model, fit_here) = match &section.pca_model {
        Some(path) => {
            require_file(path, "PCA model")?;
            (pca::load_model::<f64>(path).stage(Stage::Ingest)?, false)
        }
        None => (pca::fit(&flat, section.components).stage(Stage::Ingest)?, true),
    };
    let scores = pca::transform(&model, &flat).stage(Stage::Ingest)?;
    manifest.decide(
        "pca",
        if fit_here {
            format!("fit {} components on this run's {} volumes", model.k, flat.rows())
        } else {
            format!("projection loaded from a saved {}-component model", model.k)
        },
    );

    let dataset = TaggedDataset::new(scores, assignment.tags, assignment.vocabulary)
        .stage(Stage::Ingest)?;
    for w in &assignment.warnings {
        println!("warning: {w}");
    }
    if !assignment.warnings.is_empty() {
        manifest.observe("sidecar_warnings", serde_json::json!(assignment.warnings));
    }
    Ok((dataset, model, fit_here, nan_replaced))
}

/// Multi-hot condition rows matching the dataset's tags.
fn condition_matrix(dataset: &TaggedDataset) -> Mat<f64> {
    let width = dataset.vocab.len();
    let mut bits = vec![0.0f64; dataset.len() * width];
    for (i, set) in dataset.tags.iter().enumerate() {
        for tag in set {
            let j = dataset.vocab.iter().position(|t| t == tag).expect("tags are vocabulary-checked");
            bits[i * width + j] = 1.0;
        }
    }
    Mat::from_vec(dataset.len(), width, bits)
}

fn train_inline(
    config: &RunConfig,
    dataset: &TaggedDataset,
    staging_dir: &Path,
    manifest: &mut RunManifest,
    artifacts: &mut Artifacts,
) -> CmdResult<ModelCheckpoint> {
    let section = &config.fmri;
    let mut plan = build_plan(
        section.preset.unwrap_or(Preset::Icw),
        dataset.rows.cols(),
        Some(dataset.vocab.clone()),
        &section.train,
        rng::derive_seed(config.run.seed, &[13]),
    )?;
    if section.train.final_activation.is_none() {
        // Component scores are unbounded, so the unit-interval sigmoid
        // default would clip them.
        plan.spec_g.final_activation = FinalActivation::Identity;
        manifest.decide(
            "generator_output",
            "identity activation: scores are unbounded, so the sigmoid used for \
             unit-interval voxel data does not apply",
        );
    }
    if plan.config.batch_size > dataset.len() {
        return Err(CmdError::config(format!(
            "training batch of {} exceeds the dataset of {} rows",
            plan.config.batch_size,
            dataset.len()
        )));
    }
    manifest.decide("training", plan.describe());
    println!("training conditional generator ({})", plan.describe());
    let checkpoint = gan::train(
        &dataset.rows,
        Some(&condition_matrix(dataset)),
        &plan.spec_g,
        &plan.spec_d,
        &plan.config,
    )
    .stage(Stage::Train)?;
    gan::save_checkpoint(&checkpoint, &staging_dir.join("checkpoint_inline.json"))
        .stage(Stage::Report)?;
    artifacts.checkpoints.push(config.out_dir().join("checkpoint_inline.json"));
    write_loss_trace(staging_dir, "loss_trace.csv", &checkpoint.loss_trace)?;
    Ok(checkpoint)
}

/// Fraction of grid points present on both curves where the synthetic curve
/// sits below the real one.
fn fraction_below(real: &PowerCurve, synthetic: &PowerCurve) -> Option<f64> {
    let mut shared = 0usize;
    let mut below = 0usize;
    for p in &real.points {
        if let Some(q) = synthetic.points.iter().find(|q| q.n == p.n) {
            shared += 1;
            if q.gamma < p.gamma {
                below += 1;
            }
        }
    }
    (shared > 0).then(|| below as f64 / shared as f64)
}

pub fn cmd_fmri(config: &RunConfig) -> CmdResult<Artifacts> {
    config.validate_common()?;
    let section = &config.fmri;
    let tag = section
        .tag
        .as_ref()
        .ok_or_else(|| CmdError::config("the fmri scenario needs a tag to split on (--tag)"))?;
    match (&section.volumes, &section.scores) {
        (Some(_), Some(_)) => {
            return Err(CmdError::config("give either a volume directory or a score file, not both"))
        }
        (None, None) => {
            return Err(CmdError::config(
                "the fmri scenario needs a volume directory (--volumes) or a score file (--scores)",
            ))
        }
        _ => {}
    }
    match (&section.checkpoint, section.train_inline) {
        (Some(_), true) => {
            return Err(CmdError::config("give a checkpoint or --train-inline, not both"))
        }
        (None, false) => {
            return Err(CmdError::config(
                "the synthetic curve needs a conditional checkpoint or --train-inline",
            ))
        }
        _ => {}
    }
    if section.components == 0 {
        return Err(CmdError::config("components must be ≥ 1"));
    }
    let staging = Staging::new(config)?;
    let mut artifacts = Artifacts::new(config.out_dir());
    let mut manifest = RunManifest::new(config);
    manifest.note_curve_conventions(config);

    let dataset = if section.volumes.is_some() {
        manifest.decide(
            "normalization",
            "per-volume min-max to [0, 1] before flattening; non-finite voxels read as 0",
        );
        let (dataset, model, fit_here, nan_replaced) = ingest_volumes(config, &mut manifest)?;
        if fit_here {
            pca::save_model(&model, &staging.path().join("pca_model.json")).stage(Stage::Report)?;
        }
        dataset.save(&staging.path().join("scores.f32d")).stage(Stage::Report)?;
        manifest.observe("nan_replaced", serde_json::json!(nan_replaced));
        dataset
    } else {
        let path = section.scores.as_ref().expect("checked above");
        require_file(path, "score file")?;
        let (dataset, warnings) = TaggedDataset::load(path).stage(Stage::Ingest)?;
        if !warnings.is_empty() {
            manifest.observe("sidecar_warnings", serde_json::json!(warnings));
        }
        dataset
    };
    println!(
        "dataset: {} rows, {} tagged \"{tag}\", vocabulary [{}]",
        dataset.len(),
        dataset.count_tagged(tag),
        dataset.vocab.join(", ")
    );

    let checkpoint = match &section.checkpoint {
        Some(path) => {
            require_file(path, "checkpoint")?;
            gan::load_checkpoint(path).stage(Stage::Ingest)?
        }
        None => train_inline(config, &dataset, staging.path(), &mut manifest, &mut artifacts)?,
    };

    let test = section.test.unwrap_or(TestName::Hotelling);
    let power_config = config.power_config(
        test.to_spec(dataset.rows.cols(), config.run.permutations),
        (Strategy::Bootstrap, Strategy::Bootstrap),
    );
    println!("sweeping {} over n = {:?}", test.as_str(), power_config.grid());
    let (real, synthetic) =
        power_curve_fmri(&dataset, tag, &checkpoint, &power_config).stage(Stage::Test)?;

    let (real, real_rec) = finish_curve(real, config)?;
    let (synthetic, synthetic_rec) = finish_curve(synthetic, config)?;
    manifest.observe(
        "synthetic_vs_real",
        serde_json::json!({
            "real_recommendation": real_rec.n_required,
            "synthetic_recommendation": synthetic_rec.n_required,
            "fraction_of_shared_grid_points_with_lower_synthetic_power":
                fraction_below(&real, &synthetic),
        }),
    );
    for (file, curve, rec) in
        [("real_bootstrap.csv", &real, &real_rec), ("synthetic.csv", &synthetic, &synthetic_rec)]
    {
        write_curve(staging.path(), file, curve)?;
        manifest.curves.push(CurveSummary::new(curve, file, rec));
        artifacts.curves.push(config.out_dir().join(file));
    }
    write_plot(
        staging.path(),
        "plot.svg",
        &[to_plot_curve(&real), to_plot_curve(&synthetic)],
        &format!("power vs per-group sample size ({} split)", tag),
        config.run.target,
    )?;
    artifacts.plots.push(config.out_dir().join("plot.svg"));

    manifest.save(&staging.path().join("manifest.json")).stage(Stage::Report)?;
    let out_dir = staging.commit()?;
    artifacts.out_dir = out_dir.clone();
    artifacts.manifest = out_dir.join("manifest.json");
    Ok(artifacts)
}
