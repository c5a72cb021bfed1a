//! Monte-Carlo power estimation: sweep a grid of per-group sample sizes,
//! repeatedly draw two replicates, run a two-sample test, and count
//! rejections. Produces paired real/synthetic power curves, a tag-split
//! variant for labelled datasets, curve smoothing, and sample-size
//! recommendation against a power target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{ConditionVector, ModelCheckpoint};
use crate::rng;
use crate::sampling::{draw, split_by_tag, SourceDistribution, Strategy, TaggedDataset};
use crate::twosample::{run_test, Method, TestSpec, DEFAULT_PERMUTATIONS};

/// Conventional power target for sample-size recommendations.
pub const POWER_TARGET: f64 = 0.8;

/// Default smoothing window (odd, centered, truncated at the ends).
pub const DEFAULT_WINDOW: usize = 5;

/// Fraction of trials at one grid point that may error out before the whole
/// run fails.
pub const EXCLUSION_BUDGET: f64 = 0.05;

/// Two-sided 97.5% standard-normal quantile, for Wilson 95% intervals.
const WILSON_Z: f64 = 1.959963984540054;

/// Default first grid point for data of width `dim`: at least 20 so the
/// binomial estimate is meaningful, and enough rows that a pooled covariance
/// of `dim` columns is invertible (2n − 2 > dim).
pub fn default_n_start(dim: usize) -> usize {
    20.max(dim + 3)
}

/// Smallest per-group n the given test accepts on `dim`-column data.
pub fn min_admissible_n(method: Method, dim: usize) -> usize {
    match method {
        Method::HotellingT2 => dim / 2 + 2,
        _ => 2,
    }
}

/// Everything a power run needs besides the sources: the sample-size grid,
/// trial count, significance level, test selection, strategy pairing for the
/// real-data curve, and the master seed all randomness derives from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n_start: usize,
    pub n_end: usize,
    pub n_step: usize,
    /// Trials per grid point (K).
    pub trials: usize,
    pub alpha: f64,
    pub test: TestSpec<f64>,
    /// Per-group strategies for the real-data curve; the synthetic curve
    /// always draws Synthetic/Synthetic.
    pub strategies: (Strategy, Strategy),
    pub master_seed: u64,
    /// Permutation count for kernel tests; overrides the count embedded in
    /// `test` so one knob controls the whole run.
    pub permutations: usize,
}

impl PowerConfig {
    /// Paper-style defaults: grid 20..=500 step 20, 50 trials, α = 0.05,
    /// Resample/Resample real pairing.
    pub fn new(test: TestSpec<f64>, master_seed: u64) -> Self {
        PowerConfig {
            n_start: 20,
            n_end: 500,
            n_step: 20,
            trials: 50,
            alpha: 0.05,
            test,
            strategies: (Strategy::Resample, Strategy::Resample),
            master_seed,
            permutations: DEFAULT_PERMUTATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_step == 0 {
            return Err(Error::Config("n_step must be ≥ 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trial count K must be ≥ 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if self.n_start == 0 || self.n_start > self.n_end {
            return Err(Error::Config(format!(
                "sample-size grid [{}, {}] is empty or starts at 0",
                self.n_start, self.n_end
            )));
        }
        if self.permutations == 0 {
            return Err(Error::Config("permutation count must be ≥ 1".into()));
        }
        Ok(())
    }

    /// The per-group sample sizes the run sweeps.
    pub fn grid(&self) -> Vec<usize> {
        (self.n_start..=self.n_end).step_by(self.n_step).collect()
    }

    /// The test spec actually dispatched: kernel permutation counts replaced
    /// by [`PowerConfig::permutations`].
    pub fn effective_test(&self) -> TestSpec<f64> {
        match &self.test {
            TestSpec::Mmd2 { kernel, .. } => {
                TestSpec::Mmd2 { kernel: *kernel, permutations: self.permutations }
            }
            TestSpec::MmdL1 { kernel, .. } => {
                TestSpec::MmdL1 { kernel: *kernel, permutations: self.permutations }
            }
            other => other.clone(),
        }
    }

    /// Stable hex digest of the full configuration, stamped on every curve so
    /// outputs can be traced back to the settings that produced them.
    pub fn fingerprint(&self) -> String {
        let encoded = serde_json::to_string(self).expect("config serializes");
        // FNV-1a over the canonical JSON encoding.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in encoded.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// One grid point of a power curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurvePoint {
    /// Per-group sample size.
    pub n: usize,
    /// Rejection rate over the effective trials; exactly
    /// `rejections / trials`.
    pub gamma: f64,
    /// Effective trial count K (requested trials minus exclusions).
    pub trials: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rejections: usize,
    /// Trials dropped because the draw or the test errored.
    pub errors_excluded: usize,
}

/// Names identifying what a curve measured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveLabel {
    pub test: String,
    pub strategy: String,
    pub sources: String,
}

impl std::fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} / {} / {}", self.test, self.strategy, self.sources)
    }
}

/// A power curve over the sample-size grid, with optional smoothed values
/// parallel to `points`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub label: CurveLabel,
    pub points: Vec<PowerCurvePoint>,
    pub smoothed: Option<Vec<f64>>,
    /// [`PowerConfig::fingerprint`] of the producing run.
    pub fingerprint: String,
    /// Grid sizes skipped because a data pool was too small (tag-split runs).
    pub skipped: Vec<usize>,
}

/// Which value sequence a recommendation was read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationBasis {
    Raw,
    Smoothed,
}

/// Smallest grid n whose power reaches the target, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub target: f64,
    pub n_required: Option<usize>,
    pub basis: RecommendationBasis,
    /// Largest power seen on the basis sequence; meaningful mainly when the
    /// target was never reached.
    pub max_gamma: f64,
}

/// Wilson 95% score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Estimate power at one per-group sample size: K independent trials, each
/// drawing `n` rows from both sources under its own derived seeds and running
/// the configured test. Trials run concurrently; the outcome is bit-identical
/// to sequential execution because every trial's randomness is a pure
/// function of the master seed and the trial index.
///
/// A trial whose draw or test errors is excluded; more than
/// [`EXCLUSION_BUDGET`] exclusions fail the point with the first error.
pub fn estimate_power(
    src1: &SourceDistribution,
    src2: &SourceDistribution,
    strategy1: Strategy,
    strategy2: Strategy,
    n: usize,
    config: &PowerConfig,
) -> Result<PowerCurvePoint> {
    config.validate()?;
    if src1.dim() != src2.dim() {
        return Err(Error::Shape {
            op: "estimate_power",
            detail: format!("sources have widths {} and {}", src1.dim(), src2.dim()),
        });
    }
    let method = config.test.method();
    let min_n = min_admissible_n(method, src1.dim());
    if n < min_n {
        return Err(Error::Config(format!(
            "n = {n} is below the minimum {min_n} for {method} on {}-column data",
            src1.dim()
        )));
    }
    let spec = config.effective_test();
    let outcomes: Vec<Result<bool>> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let path = |group: u64, strategy: Strategy| {
                rng::derive_seed(config.master_seed, &[strategy.id(), n as u64, k as u64, group])
            };
            let x = draw(src1, strategy1, n, path(0, strategy1))?;
            let y = draw(src2, strategy2, n, path(1, strategy2))?;
            let result = run_test(&spec, &x, &y, path(2, strategy1))?;
            Ok(result.p_value < config.alpha)
        })
        .collect();

    let mut rejections = 0usize;
    let mut excluded = 0usize;
    let mut first_error: Option<String> = None;
    for outcome in outcomes {
        match outcome {
            Ok(true) => rejections += 1,
            Ok(false) => {}
            Err(e) => {
                excluded += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if excluded as f64 > EXCLUSION_BUDGET * config.trials as f64 {
        return Err(Error::ExclusionBudget {
            excluded,
            trials: config.trials,
            n,
            budget: EXCLUSION_BUDGET * 100.0,
            first: first_error.unwrap_or_default(),
        });
    }
    let effective = config.trials - excluded;
    let (ci_low, ci_high) = wilson_interval(rejections, effective);
    Ok(PowerCurvePoint {
        n,
        gamma: rejections as f64 / effective as f64,
        trials: effective,
        ci_low,
        ci_high,
        rejections,
        errors_excluded: excluded,
    })
}

/// Real and (optionally) synthetic source for one group.
#[derive(Debug, Clone)]
pub struct GroupSources {
    pub real: SourceDistribution,
    /// Generative stand-in trained to mimic `real`; enables the synthetic
    /// curve when both groups carry one.
    pub synthetic: Option<SourceDistribution>,
}

impl GroupSources {
    pub fn real_only(real: SourceDistribution) -> Self {
        GroupSources { real, synthetic: None }
    }

    pub fn with_checkpoint(real: SourceDistribution, checkpoint: ModelCheckpoint) -> Self {
        let synthetic =
            SourceDistribution::Generative { checkpoint: Box::new(checkpoint), condition: None };
        GroupSources { real, synthetic: Some(synthetic) }
    }
}

fn assemble_curve(
    src1: &SourceDistribution,
    src2: &SourceDistribution,
    strategies: (Strategy, Strategy),
    config: &PowerConfig,
    sources_label: String,
    skip_above: Option<usize>,
) -> Result<PowerCurve> {
    let strategy_label = if strategies.0 == strategies.1 {
        strategies.0.to_string()
    } else {
        format!("{}/{}", strategies.0, strategies.1)
    };
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for n in config.grid() {
        if skip_above.is_some_and(|limit| n > limit) {
            skipped.push(n);
            continue;
        }
        points.push(estimate_power(src1, src2, strategies.0, strategies.1, n, config)?);
    }
    Ok(PowerCurve {
        label: CurveLabel {
            test: config.test.method().to_string(),
            strategy: strategy_label,
            sources: sources_label,
        },
        points,
        smoothed: None,
        fingerprint: config.fingerprint(),
        skipped,
    })
}

/// Sweep the grid for two groups, producing the real-strategy curve and,
/// when both groups carry a generative source, the Synthetic/Synthetic curve
/// beside it.
pub fn power_curve(
    group1: &GroupSources,
    group2: &GroupSources,
    config: &PowerConfig,
) -> Result<(PowerCurve, Option<PowerCurve>)> {
    config.validate()?;
    let real_label = format!("{} vs {}", group1.real.kind(), group2.real.kind());
    let real = assemble_curve(&group1.real, &group2.real, config.strategies, config, real_label, None)?;
    let synthetic = match (&group1.synthetic, &group2.synthetic) {
        (Some(s1), Some(s2)) => {
            let label = format!("{} vs {}", s1.kind(), s2.kind());
            Some(assemble_curve(
                s1,
                s2,
                (Strategy::Synthetic, Strategy::Synthetic),
                config,
                label,
                None,
            )?)
        }
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "synthetic curve needs a generative source for both groups".into(),
            ))
        }
    };
    Ok((real, synthetic))
}

/// Tag-split power analysis: partition the dataset by `tag`, bootstrap the
/// two sides against each other for the real curve, and draw
/// condition-present vs condition-absent samples from the checkpoint for the
/// synthetic curve.
///
/// Real-curve grid sizes exceeding the smaller side are skipped and recorded
/// on the curve rather than failing the run.
pub fn power_curve_fmri(
    dataset: &TaggedDataset,
    tag: &str,
    checkpoint: &ModelCheckpoint,
    config: &PowerConfig,
) -> Result<(PowerCurve, PowerCurve)> {
    config.validate()?;
    let vocab = checkpoint.config.condition_vocab.as_ref().ok_or_else(|| {
        Error::Config("tag-split analysis needs a conditional checkpoint".into())
    })?;
    if !vocab.iter().any(|t| t == tag) {
        return Err(Error::UnknownLabel { label: tag.to_string(), vocabulary: vocab.join(", ") });
    }
    let (d1, d0) = split_by_tag(dataset, tag)?;
    if d1.rows() == 0 || d0.rows() == 0 {
        return Err(Error::Degenerate {
            op: "power_curve_fmri",
            detail: format!(
                "tag {tag:?} leaves an empty side ({} tagged rows, {} untagged)",
                d1.rows(),
                d0.rows()
            ),
        });
    }
    let limit = d1.rows().min(d0.rows());
    let (rows1, rows0) = (d1.rows(), d0.rows());
    let real1 = SourceDistribution::Empirical { pool: d1 };
    let real0 = SourceDistribution::Empirical { pool: d0 };
    let real = assemble_curve(
        &real1,
        &real0,
        (Strategy::Bootstrap, Strategy::Bootstrap),
        config,
        format!("{tag} (pool {rows1}) vs rest (pool {rows0})"),
        Some(limit),
    )?;

    let present = ConditionVector::from_labels(&[tag], vocab)?;
    let absent = ConditionVector::from_labels(&[], vocab)?;
    let synth1 = SourceDistribution::Generative {
        checkpoint: Box::new(checkpoint.clone()),
        condition: Some(present),
    };
    let synth0 = SourceDistribution::Generative {
        checkpoint: Box::new(checkpoint.clone()),
        condition: Some(absent),
    };
    let synthetic = assemble_curve(
        &synth1,
        &synth0,
        (Strategy::Synthetic, Strategy::Synthetic),
        config,
        format!("generated {tag} vs generated rest"),
        None,
    )?;
    Ok((real, synthetic))
}

/// Centered moving average of the gamma sequence with an odd window,
/// truncated to one-sided windows at the curve's ends. Raw points are kept;
/// the smoothed values land in `smoothed`.
pub fn smooth(curve: &PowerCurve, window: usize) -> Result<PowerCurve> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!("smoothing window {window} must be odd and ≥ 1")));
    }
    let gammas: Vec<f64> = curve.points.iter().map(|p| p.gamma).collect();
    let half = window / 2;
    let smoothed = (0..gammas.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(gammas.len() - 1);
            gammas[lo..=hi].iter().sum::<f64>() / (hi + 1 - lo) as f64
        })
        .collect();
    Ok(PowerCurve { smoothed: Some(smoothed), ..curve.clone() })
}

/// Smallest grid n whose power (smoothed when available, raw otherwise)
/// reaches `target`; reports the maximum achieved power either way.
pub fn recommend_sample_size(curve: &PowerCurve, target: f64) -> Result<Recommendation> {
    if curve.points.is_empty() {
        return Err(Error::Config("cannot recommend a sample size from an empty curve".into()));
    }
    let (values, basis): (Vec<f64>, _) = match &curve.smoothed {
        Some(s) => (s.clone(), RecommendationBasis::Smoothed),
        None => (curve.points.iter().map(|p| p.gamma).collect(), RecommendationBasis::Raw),
    };
    let max_gamma = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_required = curve
        .points
        .iter()
        .zip(&values)
        .find(|(_, &v)| v >= target)
        .map(|(p, _)| p.n);
    Ok(Recommendation { target, n_required, basis, max_gamma })
}

/// Render a curve as the comma-separated table consumed by the report stage:
/// header `n,gamma,smoothed,ci_low,ci_high,rejections,K,errors_excluded`, one
/// row per point, shortest-round-trip number formatting (byte-stable for
/// identical curves). The smoothed column is empty when the curve is raw.
pub fn curve_to_csv(curve: &PowerCurve) -> String {
    let mut out = String::from("n,gamma,smoothed,ci_low,ci_high,rejections,K,errors_excluded\n");
    for (i, p) in curve.points.iter().enumerate() {
        let smoothed = match &curve.smoothed {
            Some(s) => s[i].to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.n, p.gamma, smoothed, p.ci_low, p.ci_high, p.rejections, p.trials, p.errors_excluded
        ));
    }
    out
}

/// Write [`curve_to_csv`] to a file.
pub fn write_curve_csv(path: &std::path::Path, curve: &PowerCurve) -> Result<()> {
    std::fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Covariance;

    fn null_config(test: TestSpec<f64>, trials: usize, seed: u64) -> PowerConfig {
        let mut c = PowerConfig::new(test, seed);
        c.trials = trials;
        c
    }

    fn constant_curve(ns: &[usize], gammas: &[f64]) -> PowerCurve {
        let points = ns
            .iter()
            .zip(gammas)
            .map(|(&n, &gamma)| {
                let rejections = (gamma * 50.0).round() as usize;
                let (ci_low, ci_high) = wilson_interval(rejections, 50);
                PowerCurvePoint {
                    n,
                    gamma,
                    trials: 50,
                    ci_low,
                    ci_high,
                    rejections,
                    errors_excluded: 0,
                }
            })
            .collect();
        PowerCurve {
            label: CurveLabel {
                test: "hotelling".into(),
                strategy: "resample".into(),
                sources: "gaussian vs gaussian".into(),
            },
            points,
            smoothed: None,
            fingerprint: "0".repeat(16),
            skipped: Vec::new(),
        }
    }

    #[test]
    fn wilson_matches_the_reference_value() {
        // 25 successes in 50: the score interval is (0.3664, 0.6336).
        let (lo, hi) = wilson_interval(25, 50);
        assert!((lo - 0.3664).abs() < 5e-4, "low {lo}");
        assert!((hi - 0.6336).abs() < 5e-4, "high {hi}");
        let (lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
        let (lo, hi) = wilson_interval(20, 20);
        assert!(lo > 0.8 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn wilson_interval_narrows_as_trials_grow() {
        let mut last = f64::INFINITY;
        for trials in [10usize, 50, 250, 1250] {
            let (lo, hi) = wilson_interval(trials / 2, trials);
            let width = hi - lo;
            assert!(width < last, "width {width} at {trials} trials");
            last = width;
        }
    }

    #[test]
    fn smoothing_truncates_at_the_boundaries() {
        let curve = constant_curve(&[20, 40, 60], &[0.0, 1.0, 0.0]);
        let s = smooth(&curve, 3).unwrap().smoothed.unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((s[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s[2] - 0.5).abs() < 1e-15);

        let identity = smooth(&curve, 1).unwrap().smoothed.unwrap();
        assert_eq!(identity, vec![0.0, 1.0, 0.0]);

        let flat = constant_curve(&[20, 40, 60, 80], &[0.4; 4]);
        let s = smooth(&flat, 5).unwrap().smoothed.unwrap();
        for v in s {
            assert!((v - 0.4).abs() < 1e-15);
        }

        assert!(matches!(smooth(&curve, 4), Err(Error::Config(_))));
        assert!(matches!(smooth(&curve, 0), Err(Error::Config(_))));
    }

    #[test]
    fn recommendation_picks_the_first_crossing() {
        let curve = constant_curve(&[20, 40, 60, 80], &[0.1, 0.2, 0.3, 0.4]);
        let smoothed = PowerCurve {
            smoothed: Some(vec![0.5, 0.79, 0.81, 0.9]),
            ..curve.clone()
        };
        let rec = recommend_sample_size(&smoothed, 0.8).unwrap();
        assert_eq!(rec.n_required, Some(60));
        assert_eq!(rec.basis, RecommendationBasis::Smoothed);
        assert!((rec.max_gamma - 0.9).abs() < 1e-15);

        let rec = recommend_sample_size(&smoothed, 0.95).unwrap();
        assert_eq!(rec.n_required, None);
        assert!((rec.max_gamma - 0.9).abs() < 1e-15);

        let rec = recommend_sample_size(&smoothed, 0.0).unwrap();
        assert_eq!(rec.n_required, Some(20));

        let raw = recommend_sample_size(&curve, 0.25).unwrap();
        assert_eq!(raw.basis, RecommendationBasis::Raw);
        assert_eq!(raw.n_required, Some(60));

        let empty = constant_curve(&[], &[]);
        assert!(matches!(recommend_sample_size(&empty, 0.8), Err(Error::Config(_))));
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut curve = constant_curve(&[20, 40], &[0.5, 1.0]);
        curve.points[0].ci_low = 0.2;
        curve.points[0].ci_high = 0.8;
        let text = curve_to_csv(&curve);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,gamma,smoothed,ci_low,ci_high,rejections,K,errors_excluded");
        assert_eq!(lines[1], "20,0.5,,0.2,0.8,25,50,0");
        assert_eq!(lines.len(), 3);
        assert_eq!(text, curve_to_csv(&curve));

        let smoothed = smooth(&curve, 1).unwrap();
        let line = curve_to_csv(&smoothed).lines().nth(1).unwrap().to_string();
        assert_eq!(line, "20,0.5,0.5,0.2,0.8,25,50,0");
    }

    #[test]
    fn fingerprints_track_the_configuration() {
        let a = PowerConfig::new(TestSpec::HotellingT2, 7);
        let same = PowerConfig::new(TestSpec::HotellingT2, 7);
        let mut b = a.clone();
        b.alpha = 0.01;
        assert_eq!(a.fingerprint(), same.fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let good = PowerConfig::new(TestSpec::HotellingT2, 0);
        assert!(good.validate().is_ok());
        for tweak in [
            |c: &mut PowerConfig| c.n_step = 0,
            |c: &mut PowerConfig| c.trials = 0,
            |c: &mut PowerConfig| c.alpha = 0.0,
            |c: &mut PowerConfig| c.alpha = 1.0,
            |c: &mut PowerConfig| c.n_start = 0,
            |c: &mut PowerConfig| (c.n_start, c.n_end) = (100, 40),
            |c: &mut PowerConfig| c.permutations = 0,
        ] {
            let mut c = good.clone();
            tweak(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn single_trial_power_is_zero_or_one() {
        let src = SourceDistribution::isotropic_gaussian(1, 0.0);
        let config = null_config(TestSpec::WelchT, 1, 11);
        let point =
            estimate_power(&src, &src, Strategy::Resample, Strategy::Resample, 30, &config).unwrap();
        assert!(point.gamma == 0.0 || point.gamma == 1.0);
        assert_eq!(point.trials, 1);
        assert_eq!(point.rejections, (point.gamma as usize));
    }

    #[test]
    fn gamma_is_exactly_the_rejection_fraction() {
        let src1 = SourceDistribution::isotropic_gaussian(2, 0.0);
        let src2 = SourceDistribution::isotropic_gaussian(2, 0.5);
        let config = null_config(TestSpec::HotellingT2, 37, 3);
        let point =
            estimate_power(&src1, &src2, Strategy::Resample, Strategy::Resample, 25, &config)
                .unwrap();
        assert_eq!(point.gamma, point.rejections as f64 / point.trials as f64);
        assert_eq!(point.trials, 37);
        assert_eq!(point.errors_excluded, 0);
        assert!(point.ci_low <= point.gamma && point.gamma <= point.ci_high);
    }

    #[test]
    fn null_size_stays_near_alpha() {
        // Identical 10-column Gaussians: the rejection rate at n = 100 over
        // 400 trials should sit in a 99% binomial band around 0.05.
        let src = SourceDistribution::isotropic_gaussian(10, 0.0);
        let config = null_config(TestSpec::HotellingT2, 400, 2024);
        let point =
            estimate_power(&src, &src, Strategy::Resample, Strategy::Resample, 100, &config)
                .unwrap();
        assert!(
            point.gamma >= 0.02 && point.gamma <= 0.08,
            "null rejection rate {} outside [0.02, 0.08]",
            point.gamma
        );
    }

    #[test]
    fn admissibility_and_shape_checks_fire() {
        let src = SourceDistribution::isotropic_gaussian(10, 0.0);
        let config = null_config(TestSpec::HotellingT2, 5, 0);
        // 2n − 2 must exceed the 10 columns; n = 6 gives exactly 10.
        assert!(matches!(
            estimate_power(&src, &src, Strategy::Resample, Strategy::Resample, 6, &config),
            Err(Error::Config(_))
        ));
        let narrow = SourceDistribution::isotropic_gaussian(3, 0.0);
        assert!(matches!(
            estimate_power(&src, &narrow, Strategy::Resample, Strategy::Resample, 30, &config),
            Err(Error::Shape { .. })
        ));
        assert_eq!(min_admissible_n(Method::HotellingT2, 10), 7);
        assert_eq!(min_admissible_n(Method::HotellingT2, 2), 3);
        assert_eq!(min_admissible_n(Method::WelchT, 1), 2);
        assert_eq!(default_n_start(10), 20);
        assert_eq!(default_n_start(40), 43);
    }

    #[test]
    fn exclusion_budget_fails_degenerate_runs() {
        // A constant pool makes every pooled covariance singular, so every
        // trial errors and the 5% budget trips.
        let pool = crate::linalg::Mat::from_vec(12, 2, vec![1.0; 24]);
        let src = SourceDistribution::Empirical { pool };
        let config = null_config(TestSpec::HotellingT2, 20, 1);
        match estimate_power(&src, &src, Strategy::Bootstrap, Strategy::Bootstrap, 6, &config) {
            Err(Error::ExclusionBudget { excluded, trials, n, first, .. }) => {
                assert_eq!((excluded, trials, n), (20, 20, 6));
                assert!(!first.is_empty());
            }
            other => panic!("expected exclusion-budget failure, got {other:?}"),
        }
    }

    #[test]
    fn trial_schedule_does_not_change_results() {
        let src1 = SourceDistribution::isotropic_gaussian(4, 0.0);
        let src2 = SourceDistribution::Gaussian {
            mean: vec![0.4; 4],
            covariance: Covariance::Diagonal(vec![1.0; 4]),
        };
        let config = null_config(TestSpec::HotellingT2, 60, 99);
        let run = || {
            estimate_power(&src1, &src2, Strategy::Resample, Strategy::Resample, 40, &config)
                .unwrap()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single, four);
        assert_eq!(curve_to_csv(&constant_curve(&[], &[])).lines().count(), 1);
    }
}
