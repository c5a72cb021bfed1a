//! The power scenario: a single curve sweep over two explicitly configured
//! group sources, optionally paired with trained checkpoints for a
//! synthetic comparison curve.

use synthpower::gan;
use synthpower::power::{power_curve, GroupSources};
use synthpower::sampling::{read_f32d, SourceDistribution, Strategy};

use crate::config::{RunConfig, SourceSpec, TestName};
use crate::manifest::{CurveSummary, RunManifest};
use crate::{CmdError, CmdResult, Stage, StageExt};

use super::{
    finish_curve, require_file, to_plot_curve, write_curve, write_plot, Artifacts, Staging,
};

fn resolve_source(spec: &SourceSpec) -> CmdResult<SourceDistribution> {
    match spec {
        SourceSpec::Gaussian { dim, mean } => {
            if *dim == 0 {
                return Err(CmdError::config("gaussian source dim must be ≥ 1"));
            }
            Ok(SourceDistribution::isotropic_gaussian(*dim, *mean))
        }
        SourceSpec::Pool { path } => {
            require_file(path, "pool file")?;
            let pool = read_f32d(path).and_then(|f| f.to_matrix()).stage(Stage::Ingest)?;
            Ok(SourceDistribution::Empirical { pool })
        }
    }
}

fn describe(spec: &SourceSpec) -> String {
    match spec {
        SourceSpec::Gaussian { dim, mean } => format!("N({mean}·1, I_{dim})"),
        SourceSpec::Pool { path } => format!("pool {}", path.display()),
    }
}

/// The strategy a source supports when none is configured.
fn natural_strategy(source: &SourceDistribution) -> Strategy {
    match source {
        SourceDistribution::Gaussian { .. } => Strategy::Resample,
        SourceDistribution::Empirical { .. } => Strategy::Bootstrap,
        SourceDistribution::Generative { .. } => Strategy::Synthetic,
    }
}

pub fn cmd_power(config: &RunConfig) -> CmdResult<Artifacts> {
    config.validate_common()?;
    let section = &config.power;
    let (spec1, spec2) = match (&section.group1, &section.group2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CmdError::config(
                "the power scenario needs both group sources ([power] group1/group2)",
            ))
        }
    };
    let src1 = resolve_source(spec1)?;
    let src2 = resolve_source(spec2)?;
    if src1.dim() != src2.dim() {
        return Err(CmdError::config(format!(
            "group sources have widths {} and {}",
            src1.dim(),
            src2.dim()
        )));
    }

    let strategies = match section.strategies.as_slice() {
        [] => (natural_strategy(&src1), natural_strategy(&src2)),
        [s] => ((*s).into(), (*s).into()),
        [a, b] => ((*a).into(), (*b).into()),
        more => {
            return Err(CmdError::config(format!(
                "expected one or two strategies, got {}",
                more.len()
            )))
        }
    };
    let checkpoints = match (&section.checkpoint1, &section.checkpoint2) {
        (Some(p1), Some(p2)) => {
            require_file(p1, "checkpoint")?;
            require_file(p2, "checkpoint")?;
            let c1 = gan::load_checkpoint(p1).stage(Stage::Ingest)?;
            let c2 = gan::load_checkpoint(p2).stage(Stage::Ingest)?;
            Some((c1, c2))
        }
        (None, None) => None,
        _ => {
            return Err(CmdError::config(
                "the synthetic curve needs checkpoints for both groups or neither",
            ))
        }
    };

    let staging = Staging::new(config)?;
    let test = section.test.unwrap_or(TestName::Hotelling);
    let power_config =
        config.power_config(test.to_spec(src1.dim(), config.run.permutations), strategies);

    let (group1, group2) = match checkpoints {
        Some((c1, c2)) => {
            (GroupSources::with_checkpoint(src1, c1), GroupSources::with_checkpoint(src2, c2))
        }
        None => (GroupSources::real_only(src1), GroupSources::real_only(src2)),
    };
    println!("sweeping {} over n = {:?}", test.as_str(), power_config.grid());
    let (real, synthetic) = power_curve(&group1, &group2, &power_config).stage(Stage::Test)?;

    let mut artifacts = Artifacts::new(config.out_dir());
    let mut manifest = RunManifest::new(config);
    manifest.note_curve_conventions(config);
    manifest.decide("sources", format!("{} vs {}", describe(spec1), describe(spec2)));

    let mut plotted = Vec::new();
    let mut curves = vec![("real.csv", real)];
    if let Some(curve) = synthetic {
        curves.push(("synthetic.csv", curve));
    }
    for (file, curve) in curves {
        let (curve, rec) = finish_curve(curve, config)?;
        write_curve(staging.path(), file, &curve)?;
        manifest.curves.push(CurveSummary::new(&curve, file, &rec));
        artifacts.curves.push(config.out_dir().join(file));
        plotted.push(to_plot_curve(&curve));
    }
    write_plot(
        staging.path(),
        "plot.svg",
        &plotted,
        &format!("power vs per-group sample size ({})", test.as_str()),
        config.run.target,
    )?;
    artifacts.plots.push(config.out_dir().join("plot.svg"));

    manifest.save(&staging.path().join("manifest.json")).stage(Stage::Report)?;
    let out_dir = staging.commit()?;
    artifacts.out_dir = out_dir.clone();
    artifacts.manifest = out_dir.join("manifest.json");
    Ok(artifacts)
}
