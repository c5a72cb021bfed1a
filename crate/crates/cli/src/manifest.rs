//! Run manifests: one JSON document per run capturing the merged config,
//! seeds, interpretation decisions, and a summary of every curve produced.
//! Manifests contain no timestamps or absolute paths, so rerunning the same
//! configuration rewrites the same bytes, and a manifest plus the tool
//! version is enough to reproduce a run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use synthpower::error::{Error, Result};
use synthpower::power::{PowerCurve, Recommendation, RecommendationBasis};

use crate::config::RunConfig;

/// Echo of one recommendation, kept flat for easy reading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecommendationEcho {
    pub target: f64,
    /// Smallest grid n reaching the target, when any does.
    pub n_required: Option<usize>,
    /// Whether the raw or smoothed values were consulted.
    pub basis: String,
    pub max_gamma: f64,
}

impl RecommendationEcho {
    pub fn from_core(rec: &Recommendation) -> Self {
        RecommendationEcho {
            target: rec.target,
            n_required: rec.n_required,
            basis: match rec.basis {
                RecommendationBasis::Raw => "raw".into(),
                RecommendationBasis::Smoothed => "smoothed".into(),
            },
            max_gamma: rec.max_gamma,
        }
    }
}

/// One produced curve: where it was written and what it concluded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSummary {
    /// "{test} / {strategy} / {sources}".
    pub label: String,
    /// CSV filename relative to the output directory.
    pub file: String,
    /// Hash of the power configuration that produced it.
    pub fingerprint: String,
    pub points: usize,
    /// Grid sizes skipped because a pool was too small.
    pub skipped: Vec<usize>,
    pub recommendation: RecommendationEcho,
}

impl CurveSummary {
    pub fn new(curve: &PowerCurve, file: &str, rec: &Recommendation) -> Self {
        CurveSummary {
            label: curve.label.to_string(),
            file: file.to_string(),
            fingerprint: curve.fingerprint.clone(),
            points: curve.points.len(),
            skipped: curve.skipped.clone(),
            recommendation: RecommendationEcho::from_core(rec),
        }
    }
}

/// The manifest document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub master_seed: u64,
    /// The merged configuration the run executed.
    pub config: RunConfig,
    /// Interpretation choices that shaped the outputs.
    pub decisions: BTreeMap<String, String>,
    pub curves: Vec<CurveSummary>,
    /// Free-form measured observations (e.g. synthetic-vs-real comparison).
    pub observations: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        let scenario =
            config.scenario.map(|s| s.as_str().to_string()).unwrap_or_else(|| "unknown".into());
        let mut decisions = BTreeMap::new();
        decisions.insert(
            "confidence_band".into(),
            "shaded plot regions render 95% Wilson score intervals".into(),
        );
        RunManifest {
            tool: "synthpower".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario,
            master_seed: config.run.seed,
            config: config.clone(),
            decisions,
            curves: Vec::new(),
            observations: BTreeMap::new(),
        }
    }

    pub fn decide(&mut self, key: &str, value: impl Into<String>) {
        self.decisions.insert(key.to_string(), value.into());
    }

    /// Decisions shared by every scenario that estimates curves itself (as
    /// opposed to replotting existing tables).
    pub fn note_curve_conventions(&mut self, config: &RunConfig) {
        self.decide(
            "smoothing",
            format!(
                "centered moving average, window {}, truncated at the grid ends",
                config.run.smooth_window
            ),
        );
        self.decide(
            "bootstrap",
            "bootstrap draws are subsets taken without replacement from the fixed pool",
        );
    }

    pub fn observe(&mut self, key: &str, value: serde_json::Value) {
        self.observations.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse { what: "manifest", detail: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse { what: "manifest", detail: e.to_string() })
    }
}
