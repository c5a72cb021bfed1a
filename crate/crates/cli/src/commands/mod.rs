//! The five scenario commands plus the plumbing they share: staged output
//! directories (partial outputs vanish on error), curve finishing, and file
//! writers.

mod fmri;
mod gaussian;
mod power_cmd;
mod report;
mod train;

use std::path::{Path, PathBuf};

pub use fmri::cmd_fmri;
pub use gaussian::cmd_gaussian;
pub use power_cmd::cmd_power;
pub use report::cmd_report;
pub use train::cmd_train;
pub(crate) use train::build_plan;

use synthpower::power::{
    curve_to_csv, recommend_sample_size, smooth, PowerCurve, Recommendation,
};

use crate::config::RunConfig;
use crate::svg::{PlotCurve, PlotPoint};
use crate::{CmdError, CmdResult, Stage, StageExt};

/// What a completed run left behind.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub curves: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Artifacts {
    fn new(out_dir: PathBuf) -> Self {
        Artifacts {
            manifest: out_dir.join("manifest.json"),
            out_dir,
            curves: Vec::new(),
            checkpoints: Vec::new(),
            plots: Vec::new(),
            summary: None,
        }
    }
}

/// A staging directory the run writes into; it becomes the output directory
/// only on success, so failed runs leave nothing behind.
pub(crate) struct Staging {
    temp: Option<tempfile::TempDir>,
    out_dir: PathBuf,
}

impl Staging {
    pub fn new(config: &RunConfig) -> CmdResult<Self> {
        let out_dir = config.out_dir();
        if out_dir.exists() {
            let occupied = std::fs::read_dir(&out_dir)
                .map(|mut d| d.next().is_some())
                .unwrap_or(true);
            if occupied {
                return Err(CmdError::config(format!(
                    "output directory {} is not empty; each run owns its directory exclusively",
                    out_dir.display()
                )));
            }
        }
        let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(p) = parent {
            std::fs::create_dir_all(p)
                .map_err(|e| CmdError::config(format!("cannot create {}: {e}", p.display())))?;
        }
        let temp = tempfile::TempDir::new_in(parent.unwrap_or(Path::new(".")))
            .map_err(|e| CmdError::config(format!("cannot stage outputs: {e}")))?;
        Ok(Staging { temp: Some(temp), out_dir })
    }

    pub fn path(&self) -> &Path {
        self.temp.as_ref().expect("staging already committed").path()
    }

    /// Moves the staged outputs into place and returns the final directory.
    pub fn commit(mut self) -> CmdResult<PathBuf> {
        let temp = self.temp.take().expect("staging already committed");
        if self.out_dir.exists() {
            std::fs::remove_dir(&self.out_dir).map_err(|e| CmdError {
                stage: Stage::Report,
                source: e.into(),
            })?;
        }
        let staged = temp.keep();
        if let Err(e) = std::fs::rename(&staged, &self.out_dir) {
            let _ = std::fs::remove_dir_all(&staged);
            return Err(CmdError { stage: Stage::Report, source: e.into() });
        }
        Ok(self.out_dir)
    }
}

/// Checks an input file exists before handing it to a reader, so the error
/// names the path.
pub(crate) fn require_file(path: &Path, what: &str) -> CmdResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CmdError {
            stage: Stage::Ingest,
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what} {} does not exist", path.display()),
            )
            .into(),
        })
    }
}

/// Smooths a curve and derives its recommendation from the config's window
/// and target.
pub(crate) fn finish_curve(
    curve: PowerCurve,
    config: &RunConfig,
) -> CmdResult<(PowerCurve, Recommendation)> {
    let smoothed = smooth(&curve, config.run.smooth_window).stage(Stage::Test)?;
    let rec = recommend_sample_size(&smoothed, config.run.target).stage(Stage::Test)?;
    Ok((smoothed, rec))
}

/// Writes one curve table into the staging directory.
pub(crate) fn write_curve(dir: &Path, file: &str, curve: &PowerCurve) -> CmdResult<PathBuf> {
    let path = dir.join(file);
    std::fs::write(&path, curve_to_csv(curve))
        .map_err(|e| CmdError { stage: Stage::Report, source: e.into() })?;
    Ok(path)
}

/// Turns a finished curve into its plotted form: raw power with the Wilson
/// band.
pub(crate) fn to_plot_curve(curve: &PowerCurve) -> PlotCurve {
    PlotCurve {
        label: curve.label.to_string(),
        points: curve
            .points
            .iter()
            .map(|p| PlotPoint {
                n: p.n as f64,
                value: p.gamma,
                band: Some((p.ci_low, p.ci_high)),
            })
            .collect(),
    }
}

/// Writes an SVG plot into the staging directory.
pub(crate) fn write_plot(
    dir: &Path,
    file: &str,
    curves: &[PlotCurve],
    title: &str,
    target: f64,
) -> CmdResult<PathBuf> {
    let svg = crate::svg::power_plot(
        curves,
        &crate::svg::PlotOptions { title: title.to_string(), target },
    );
    let path = dir.join(file);
    std::fs::write(&path, svg).map_err(|e| CmdError { stage: Stage::Report, source: e.into() })?;
    Ok(path)
}

/// Writes a loss trace as CSV, one row per recorded iteration.
pub(crate) fn write_loss_trace(
    dir: &Path,
    file: &str,
    trace: &[synthpower::gan::LossPoint],
) -> CmdResult<PathBuf> {
    let mut text = String::from("iteration,critic,generator\n");
    for (i, point) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{},{}\n", point.critic, point.generator));
    }
    let path = dir.join(file);
    std::fs::write(&path, text).map_err(|e| CmdError { stage: Stage::Report, source: e.into() })?;
    Ok(path)
}
