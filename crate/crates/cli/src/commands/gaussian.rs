//! The gaussian scenario: the full simulated-data experiment. Two isotropic
//! Gaussian groups separated by a per-coordinate mean shift, a fixed
//! observed pool per group, and per test a resample curve (fresh draws from
//! the truth), a bootstrap curve (subsets of the pools), and a synthetic
//! curve (draws from generators trained on the pools).

use synthpower::gan;
use synthpower::power::{power_curve, GroupSources};
use synthpower::rng;
use synthpower::sampling::{draw, SourceDistribution, Strategy};

use crate::config::{Preset, RunConfig, TestName};
use crate::manifest::{CurveSummary, RunManifest};
use crate::{CmdError, CmdResult, Stage, StageExt};

use super::{
    build_plan, finish_curve, to_plot_curve, write_curve, write_loss_trace, write_plot, Artifacts,
    Staging,
};

pub fn cmd_gaussian(config: &RunConfig) -> CmdResult<Artifacts> {
    config.validate_common()?;
    let section = &config.gaussian;
    if section.dim == 0 {
        return Err(CmdError::config("dim must be ≥ 1"));
    }
    let mut tests: Vec<TestName> = Vec::new();
    for t in &section.tests {
        if !tests.contains(t) {
            tests.push(*t);
        }
    }
    if tests.is_empty() {
        return Err(CmdError::config("no tests selected"));
    }
    if section.pool < config.run.grid.end {
        return Err(CmdError::config(format!(
            "pool of {} rows cannot serve bootstrap draws up to n = {}",
            section.pool, config.run.grid.end
        )));
    }
    let staging = Staging::new(config)?;
    let seed = config.run.seed;

    let truth1 = SourceDistribution::isotropic_gaussian(section.dim, 0.0);
    let truth2 = SourceDistribution::isotropic_gaussian(section.dim, section.mean_shift);
    let pool1 = draw(&truth1, Strategy::Resample, section.pool, rng::derive_seed(seed, &[11, 1]))
        .stage(Stage::Ingest)?;
    let pool2 = draw(&truth2, Strategy::Resample, section.pool, rng::derive_seed(seed, &[11, 2]))
        .stage(Stage::Ingest)?;

    let mut artifacts = Artifacts::new(config.out_dir());
    let mut manifest = RunManifest::new(config);
    manifest.note_curve_conventions(config);
    manifest.decide(
        "sources",
        format!(
            "group 1 is N(0, I_{d}); group 2 is N({shift}·1, I_{d}); each group owns a fixed \
             pool of {p} observed rows drawn once up front",
            d = section.dim,
            shift = section.mean_shift,
            p = section.pool
        ),
    );

    let checkpoints = if section.skip_gan {
        manifest.decide("synthetic_curve", "skipped on request (--skip-gan)".to_string());
        None
    } else {
        let mut pair = Vec::new();
        for (g, pool) in [(1u64, &pool1), (2u64, &pool2)] {
            let plan = build_plan(
                Preset::Naive,
                section.dim,
                None,
                &section.train,
                rng::derive_seed(seed, &[12, g]),
            )?;
            if plan.config.batch_size > pool.rows() {
                return Err(CmdError::config(format!(
                    "training batch of {} exceeds the pool of {} rows",
                    plan.config.batch_size,
                    pool.rows()
                )));
            }
            if g == 1 {
                manifest.decide("training", plan.describe());
            }
            println!("training generator for group {g} ({})", plan.describe());
            let checkpoint = gan::train(pool, None, &plan.spec_g, &plan.spec_d, &plan.config)
                .stage(Stage::Train)?;
            let name = format!("checkpoint_group{g}.json");
            gan::save_checkpoint(&checkpoint, &staging.path().join(&name))
                .stage(Stage::Report)?;
            artifacts.checkpoints.push(config.out_dir().join(&name));
            write_loss_trace(staging.path(), &format!("loss_group{g}.csv"), &checkpoint.loss_trace)?;
            pair.push(checkpoint);
        }
        let second = pair.pop().expect("two checkpoints");
        Some((pair.pop().expect("two checkpoints"), second))
    };

    let empirical1 = SourceDistribution::Empirical { pool: pool1 };
    let empirical2 = SourceDistribution::Empirical { pool: pool2 };

    for test in tests {
        let spec = test.to_spec(section.dim, config.run.permutations);
        let mut variants = vec![
            ("resample", truth1.clone(), truth2.clone(), Strategy::Resample),
            ("bootstrap", empirical1.clone(), empirical2.clone(), Strategy::Bootstrap),
        ];
        if let Some((c1, c2)) = &checkpoints {
            variants.push((
                "synthetic",
                SourceDistribution::Generative { checkpoint: Box::new(c1.clone()), condition: None },
                SourceDistribution::Generative { checkpoint: Box::new(c2.clone()), condition: None },
                Strategy::Synthetic,
            ));
        }
        let mut plotted = Vec::new();
        for (name, src1, src2, strategy) in variants {
            println!("sweeping {} / {name}", test.as_str());
            let power_config = config.power_config(spec.clone(), (strategy, strategy));
            let (curve, _) = power_curve(
                &GroupSources::real_only(src1),
                &GroupSources::real_only(src2),
                &power_config,
            )
            .stage(Stage::Test)?;
            let (curve, rec) = finish_curve(curve, config)?;
            let file = format!("{}_{name}.csv", test.as_str());
            write_curve(staging.path(), &file, &curve)?;
            manifest.curves.push(CurveSummary::new(&curve, &file, &rec));
            artifacts.curves.push(config.out_dir().join(&file));
            plotted.push(to_plot_curve(&curve));
        }
        let plot_file = format!("{}.svg", test.as_str());
        write_plot(
            staging.path(),
            &plot_file,
            &plotted,
            &format!("power vs per-group sample size ({})", test.as_str()),
            config.run.target,
        )?;
        artifacts.plots.push(config.out_dir().join(&plot_file));
    }

    manifest.save(&staging.path().join("manifest.json")).stage(Stage::Report)?;
    let out_dir = staging.commit()?;
    artifacts.out_dir = out_dir.clone();
    artifacts.manifest = out_dir.join("manifest.json");
    Ok(artifacts)
}
