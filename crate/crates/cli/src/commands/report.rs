//! The report scenario: replot existing curve tables into one SVG and
//! summarize their recommendations, without re-estimating anything.

use std::path::Path;

use synthpower::error::Error;
use synthpower::power::{recommend_sample_size, CurveLabel, PowerCurve, PowerCurvePoint};

use crate::config::RunConfig;
use crate::manifest::{CurveSummary, RunManifest};
use crate::svg::{PlotCurve, PlotPoint};
use crate::{CmdError, CmdResult, Stage, StageExt};

use super::{require_file, write_plot, Artifacts, Staging};

pub(crate) const CURVE_HEADER: &str = "n,gamma,smoothed,ci_low,ci_high,rejections,K,errors_excluded";

/// A curve read back from its table: the points, whether the confidence
/// columns were filled in, and the name it is plotted under.
struct ParsedTable {
    curve: PowerCurve,
    has_ci: bool,
    name: String,
}

/// Rows, the optional smoothed column, and whether the confidence columns
/// were filled.
type TableRows = (Vec<PowerCurvePoint>, Option<Vec<f64>>, bool);

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T, Error> {
    field.trim().parse().map_err(|_| Error::Parse {
        what: "curve table",
        detail: format!("line {line}: {what} {field:?} is not a number"),
    })
}

/// Parses one curve table. The header must match [`CURVE_HEADER`] exactly.
/// The smoothed column must be filled for all rows or none; the two
/// confidence columns may be empty (jointly, per row), which drops the
/// plotted band.
fn parse_table(path: &Path) -> CmdResult<ParsedTable> {
    require_file(path, "curve table")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError { stage: Stage::Ingest, source: e.into() })?;
    let parse = || -> Result<TableRows, Error> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == CURVE_HEADER => {}
            other => {
                return Err(Error::Parse {
                    what: "curve table",
                    detail: format!(
                        "header {:?} does not match {CURVE_HEADER:?}",
                        other.map(|(_, h)| h).unwrap_or("")
                    ),
                })
            }
        }
        let mut points = Vec::new();
        let mut smoothed: Vec<f64> = Vec::new();
        let mut smoothed_blank = 0usize;
        let mut has_ci = true;
        for (i, row) in lines {
            let line = i + 1;
            if row.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse {
                    what: "curve table",
                    detail: format!("line {line}: expected 8 fields, got {}", fields.len()),
                });
            }
            let n: usize = parse_field(fields[0], "n", line)?;
            let gamma: f64 = parse_field(fields[1], "gamma", line)?;
            if fields[2].trim().is_empty() {
                smoothed_blank += 1;
            } else {
                smoothed.push(parse_field(fields[2], "smoothed", line)?);
            }
            let (ci_low, ci_high) = match (fields[3].trim(), fields[4].trim()) {
                ("", "") => {
                    has_ci = false;
                    (f64::NAN, f64::NAN)
                }
                _ => (
                    parse_field(fields[3], "ci_low", line)?,
                    parse_field(fields[4], "ci_high", line)?,
                ),
            };
            let rejections: usize = parse_field(fields[5], "rejections", line)?;
            let trials: usize = parse_field(fields[6], "K", line)?;
            let errors_excluded: usize = parse_field(fields[7], "errors_excluded", line)?;
            points.push(PowerCurvePoint {
                n,
                gamma,
                trials,
                ci_low,
                ci_high,
                rejections,
                errors_excluded,
            });
        }
        if points.is_empty() {
            return Err(Error::Parse { what: "curve table", detail: "no data rows".into() });
        }
        if smoothed_blank > 0 && !smoothed.is_empty() {
            return Err(Error::Parse {
                what: "curve table",
                detail: "the smoothed column must be filled for all rows or none".into(),
            });
        }
        let smoothed = (!smoothed.is_empty()).then_some(smoothed);
        Ok((points, smoothed, has_ci))
    };
    let (points, smoothed, has_ci) = parse().map_err(|source| CmdError {
        stage: Stage::Ingest,
        source: Error::Parse {
            what: "curve table",
            detail: format!("{}: {source}", path.display()),
        },
    })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(ParsedTable {
        curve: PowerCurve {
            label: CurveLabel {
                test: name.clone(),
                strategy: "reported".into(),
                sources: file,
            },
            points,
            smoothed,
            fingerprint: String::new(),
            skipped: Vec::new(),
        },
        has_ci,
        name,
    })
}

pub fn cmd_report(config: &RunConfig) -> CmdResult<Artifacts> {
    config.validate_common()?;
    if config.report.tables.is_empty() {
        return Err(CmdError::config("the report scenario needs at least one curve table"));
    }
    let staging = Staging::new(config)?;
    let mut artifacts = Artifacts::new(config.out_dir());
    let mut manifest = RunManifest::new(config);

    let mut plotted = Vec::new();
    let mut summaries = Vec::new();
    for path in &config.report.tables {
        let table = parse_table(path)?;
        let rec = recommend_sample_size(&table.curve, config.run.target).stage(Stage::Report)?;
        plotted.push(PlotCurve {
            label: table.name.clone(),
            points: table
                .curve
                .points
                .iter()
                .map(|p| PlotPoint {
                    n: p.n as f64,
                    value: p.gamma,
                    band: table.has_ci.then_some((p.ci_low, p.ci_high)),
                })
                .collect(),
        });
        let file = table.curve.label.sources.clone();
        manifest.curves.push(CurveSummary::new(&table.curve, &file, &rec));
        summaries.push(serde_json::json!({
            "file": file,
            "label": table.name,
            "points": table.curve.points.len(),
            "max_gamma": rec.max_gamma,
            "recommendation": rec.n_required,
            "basis": match rec.basis {
                synthpower::power::RecommendationBasis::Raw => "raw",
                synthpower::power::RecommendationBasis::Smoothed => "smoothed",
            },
        }));
    }
    let summary = serde_json::json!({
        "target": config.run.target,
        "curves": summaries,
    });
    let summary_text =
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    std::fs::write(staging.path().join("summary.json"), summary_text)
        .map_err(|e| CmdError { stage: Stage::Report, source: e.into() })?;

    write_plot(
        staging.path(),
        "plot.svg",
        &plotted,
        "power vs per-group sample size",
        config.run.target,
    )?;
    artifacts.plots.push(config.out_dir().join("plot.svg"));
    artifacts.summary = Some(config.out_dir().join("summary.json"));

    manifest.save(&staging.path().join("manifest.json")).stage(Stage::Report)?;
    let out_dir = staging.commit()?;
    artifacts.out_dir = out_dir.clone();
    artifacts.manifest = out_dir.join("manifest.json");
    Ok(artifacts)
}
