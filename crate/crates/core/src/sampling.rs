//! Sampleable data sources and the three drawing strategies used by the power
//! engines: fresh resampling from a known Gaussian, bootstrap subsampling from
//! a fixed pool, and synthetic sampling from a trained generator checkpoint.
//! Also hosts tag-based dataset splitting and the `F32D` dataset file format
//! with its tag sidecar.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gan::{self, ConditionVector, ModelCheckpoint};
use crate::linalg::{sym_eigen, Mat};
use crate::rng::{self};

/// `F32D` file format revision written by [`write_f32d`].
pub const F32D_VERSION: u32 = 1;

const F32D_MAGIC: &[u8; 4] = b"F32D";

/// Covariance of a Gaussian source: either the diagonal or a full symmetric
/// positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(Mat<f64>),
}

/// A distribution that replicates can be drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceDistribution {
    /// A known multivariate Gaussian, sampled fresh on every draw.
    Gaussian { mean: Vec<f64>, covariance: Covariance },
    /// A fixed pool of observed rows, subsampled on every draw.
    Empirical { pool: Mat<f64> },
    /// A trained generator, sampled through [`gan::sample`]. Boxed so the
    /// enum stays small next to the other variants.
    Generative { checkpoint: Box<ModelCheckpoint>, condition: Option<ConditionVector> },
}

impl SourceDistribution {
    /// Spherical Gaussian `N(mean_value * 1, I_d)`.
    pub fn isotropic_gaussian(dim: usize, mean_value: f64) -> Self {
        SourceDistribution::Gaussian {
            mean: vec![mean_value; dim],
            covariance: Covariance::Diagonal(vec![1.0; dim]),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SourceDistribution::Gaussian { .. } => "gaussian",
            SourceDistribution::Empirical { .. } => "empirical",
            SourceDistribution::Generative { .. } => "generative",
        }
    }

    /// Width of the rows this source produces.
    pub fn dim(&self) -> usize {
        match self {
            SourceDistribution::Gaussian { mean, .. } => mean.len(),
            SourceDistribution::Empirical { pool } => pool.cols(),
            SourceDistribution::Generative { checkpoint, .. } => checkpoint.sample_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceDistribution::Gaussian { mean, covariance } => {
                if mean.is_empty() {
                    return Err(Error::Config("Gaussian mean must be nonempty".into()));
                }
                check_covariance(mean.len(), covariance).map(|_| ())
            }
            SourceDistribution::Empirical { pool } => {
                if pool.rows() == 0 || pool.cols() == 0 {
                    return Err(Error::Config("empirical pool must be nonempty".into()));
                }
                Ok(())
            }
            SourceDistribution::Generative { checkpoint, condition } => {
                match (condition, checkpoint.is_conditional()) {
                    (None, true) => Err(Error::Config(
                        "the checkpoint is conditional; the source needs a condition".into(),
                    )),
                    (Some(_), false) => Err(Error::Config(
                        "the checkpoint is unconditional; the source must not carry a condition".into(),
                    )),
                    _ => Ok(()),
                }
            }
        }
    }
}

/// How replicates are produced from a source. Each strategy applies to exactly
/// one source variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Resample,
    Bootstrap,
    Synthetic,
}

impl Strategy {
    /// Stable small integer used in derived-seed paths.
    pub fn id(self) -> u64 {
        match self {
            Strategy::Resample => 0,
            Strategy::Bootstrap => 1,
            Strategy::Synthetic => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Resample => "resample",
            Strategy::Bootstrap => "bootstrap",
            Strategy::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_pairing(source: &SourceDistribution, strategy: Strategy) -> Result<()> {
    let ok = matches!(
        (strategy, source),
        (Strategy::Resample, SourceDistribution::Gaussian { .. })
            | (Strategy::Bootstrap, SourceDistribution::Empirical { .. })
            | (Strategy::Synthetic, SourceDistribution::Generative { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(Error::IncompatibleStrategy { strategy: strategy.as_str(), source_kind: source.kind() })
    }
}

/// Options for [`draw_with_options`]. The default draws bootstrap replicates
/// without replacement (a uniform subset of the pool).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DrawOptions {
    /// Classical bootstrap: draw pool rows independently with replacement,
    /// allowing `n` to exceed the pool size.
    pub bootstrap_with_replacement: bool,
}

/// Draw `n` replicate rows from a source under the matching strategy.
/// Deterministic given `seed`; see [`draw_with_options`] for the bootstrap
/// replacement flag.
pub fn draw(source: &SourceDistribution, strategy: Strategy, n: usize, seed: u64) -> Result<Mat<f64>> {
    draw_with_options(source, strategy, n, seed, DrawOptions::default())
}

pub fn draw_with_options(
    source: &SourceDistribution,
    strategy: Strategy,
    n: usize,
    seed: u64,
    options: DrawOptions,
) -> Result<Mat<f64>> {
    check_pairing(source, strategy)?;
    source.validate()?;
    match source {
        SourceDistribution::Gaussian { mean, covariance } => gaussian_sampler(mean, covariance, n, seed),
        SourceDistribution::Empirical { pool } => {
            let mut r = rng::prng(seed);
            if options.bootstrap_with_replacement {
                let idx: Vec<usize> =
                    (0..n).map(|_| rng::uniform_index(&mut r, pool.rows())).collect();
                Ok(pool.select_rows(&idx))
            } else {
                if n > pool.rows() {
                    return Err(Error::Config(format!(
                        "bootstrap draw of {n} rows exceeds the pool of {}; \
                         enable replacement or enlarge the pool",
                        pool.rows()
                    )));
                }
                let mut idx: Vec<usize> = (0..pool.rows()).collect();
                rng::partial_shuffle(&mut r, &mut idx, n);
                idx.truncate(n);
                Ok(pool.select_rows(&idx))
            }
        }
        SourceDistribution::Generative { checkpoint, condition } => {
            gan::sample(checkpoint, n, condition.as_ref(), seed)
        }
    }
}

/// Validate a covariance against the mean dimension and return its factor
/// `A` (d x d) such that `A^T A` equals the covariance; `z A` then has the
/// requested covariance for standard-normal rows `z`.
fn check_covariance(dim: usize, covariance: &Covariance) -> Result<Mat<f64>> {
    match covariance {
        Covariance::Diagonal(diag) => {
            if diag.len() != dim {
                return Err(Error::Shape {
                    op: "gaussian_sampler",
                    detail: format!("diagonal has {} entries for dimension {dim}", diag.len()),
                });
            }
            let mut a = Mat::zeros(dim, dim);
            for (j, &v) in diag.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Domain {
                        op: "gaussian_sampler",
                        detail: format!("variance {v} at coordinate {j} is not a nonnegative real"),
                    });
                }
                a[(j, j)] = v.sqrt();
            }
            Ok(a)
        }
        Covariance::Full(sigma) => {
            if sigma.rows() != dim || sigma.cols() != dim {
                return Err(Error::Shape {
                    op: "gaussian_sampler",
                    detail: format!("covariance is {}x{} for dimension {dim}", sigma.rows(), sigma.cols()),
                });
            }
            let scale = sigma.frobenius().max(1.0);
            for i in 0..dim {
                for j in (i + 1)..dim {
                    if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-8 * scale {
                        return Err(Error::Domain {
                            op: "gaussian_sampler",
                            detail: format!(
                                "covariance is not symmetric at ({i},{j}): {} vs {}",
                                sigma[(i, j)],
                                sigma[(j, i)]
                            ),
                        });
                    }
                }
            }
            let eig = sym_eigen(sigma)?;
            let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
            let tol = 1e-10 * lambda_max.max(1.0);
            let mut a = Mat::zeros(dim, dim);
            for (k, &lam) in eig.values.iter().enumerate() {
                if lam < -tol {
                    return Err(Error::Domain {
                        op: "gaussian_sampler",
                        detail: format!("covariance is not positive semidefinite (eigenvalue {lam})"),
                    });
                }
                let s = lam.max(0.0).sqrt();
                for j in 0..dim {
                    a[(k, j)] = s * eig.vectors[(k, j)];
                }
            }
            Ok(a)
        }
    }
}

/// Draw `n` rows from `N(mean, covariance)`: standard normals transformed by
/// a factor of the covariance, plus the mean. Deterministic given `seed`.
pub fn gaussian_sampler(mean: &[f64], covariance: &Covariance, n: usize, seed: u64) -> Result<Mat<f64>> {
    if mean.is_empty() {
        return Err(Error::Config("Gaussian mean must be nonempty".into()));
    }
    let d = mean.len();
    let factor = check_covariance(d, covariance)?;
    let mut r = rng::prng(seed);
    let z = Mat::from_vec(n, d, rng::standard_normals(&mut r, n * d));
    let mut out = z.matmul(&factor);
    for i in 0..n {
        for (o, &m) in out.row_mut(i).iter_mut().zip(mean) {
            *o += m;
        }
    }
    Ok(out)
}

/// Rows of samples with a per-row set of tags over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedDataset {
    pub rows: Mat<f64>,
    pub tags: Vec<Vec<String>>,
    pub vocab: Vec<String>,
}

impl TaggedDataset {
    /// Assemble a dataset, checking that every row has a tag set and every tag
    /// is in the vocabulary.
    pub fn new(rows: Mat<f64>, tags: Vec<Vec<String>>, vocab: Vec<String>) -> Result<Self> {
        if tags.len() != rows.rows() {
            return Err(Error::Shape {
                op: "TaggedDataset",
                detail: format!("{} tag sets for {} rows", tags.len(), rows.rows()),
            });
        }
        for (i, set) in tags.iter().enumerate() {
            for tag in set {
                if !vocab.contains(tag) {
                    return Err(Error::UnknownLabel {
                        label: format!("{tag} (row {i})"),
                        vocabulary: vocab.join(", "),
                    });
                }
            }
        }
        Ok(TaggedDataset { rows, tags, vocab })
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    /// Rows carrying `tag`, without splitting off the rest.
    pub fn count_tagged(&self, tag: &str) -> usize {
        self.tags.iter().filter(|set| set.iter().any(|t| t == tag)).count()
    }

    /// Write the rows as `F32D` plus a `.tags` sidecar keyed by row index.
    pub fn save(&self, data_path: &Path) -> Result<()> {
        write_f32d(data_path, &F32d::from_matrix(&self.rows))?;
        let entries: Vec<(String, Vec<String>)> =
            self.tags.iter().enumerate().map(|(i, set)| (i.to_string(), set.clone())).collect();
        write_tag_sidecar(&sidecar_path(data_path), &self.vocab, &entries)
    }

    /// Read rows from `F32D` and tags from the sidecar next to it. Returns the
    /// dataset plus any vocabulary warnings from the sidecar.
    pub fn load(data_path: &Path) -> Result<(Self, Vec<String>)> {
        let rows = read_f32d(data_path)?.to_matrix()?;
        let sidecar = parse_tag_sidecar(&fs::read_to_string(sidecar_path(data_path))?)?;
        let mut tags: Vec<Option<Vec<String>>> = vec![None; rows.rows()];
        for (key, set) in sidecar.entries {
            let index: usize = key.parse().map_err(|_| {
                Error::Sidecar(format!("entry key {key:?} is not a row index"))
            })?;
            if index >= rows.rows() {
                return Err(Error::Sidecar(format!(
                    "row index {index} out of range for {} rows",
                    rows.rows()
                )));
            }
            if tags[index].is_some() {
                return Err(Error::Sidecar(format!("duplicate entry for row {index}")));
            }
            tags[index] = Some(set);
        }
        let tags = tags
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| Error::Sidecar(format!("row {i} has no tag entry"))))
            .collect::<Result<Vec<_>>>()?;
        let dataset = TaggedDataset::new(rows, tags, sidecar.vocab)?;
        Ok((dataset, sidecar.warnings))
    }
}

/// Partition a dataset by presence of one tag: rows carrying `tag` on the
/// left, every other row on the right. Either side may be empty; callers
/// decide whether that is acceptable.
pub fn split_by_tag(dataset: &TaggedDataset, tag: &str) -> Result<(Mat<f64>, Mat<f64>)> {
    if !dataset.vocab.iter().any(|t| t == tag) {
        return Err(Error::UnknownLabel { label: tag.to_string(), vocabulary: dataset.vocab.join(", ") });
    }
    let mut with = Vec::new();
    let mut without = Vec::new();
    for (i, set) in dataset.tags.iter().enumerate() {
        if set.iter().any(|t| t == tag) {
            with.push(i);
        } else {
            without.push(i);
        }
    }
    Ok((dataset.rows.select_rows(&with), dataset.rows.select_rows(&without)))
}

/// In-memory form of an `F32D` file: dimensions and a row-major 32-bit payload.
///
/// On disk the format is little-endian: the magic bytes `F32D`, a `u32`
/// format version, a `u32` rank, `rank` dimensions as `u32`, then the payload
/// as 32-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct F32d {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl F32d {
    /// Narrow a matrix to the 32-bit storage format.
    pub fn from_matrix(m: &Mat<f64>) -> Self {
        F32d {
            dims: vec![m.rows(), m.cols()],
            data: m.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Widen a rank-2 payload back into a matrix (exact: every 32-bit real is
    /// representable in 64 bits).
    pub fn to_matrix(&self) -> Result<Mat<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Shape {
                op: "F32d::to_matrix",
                detail: format!("rank {} payload, need rank 2", self.dims.len()),
            });
        }
        Ok(Mat::from_vec(self.dims[0], self.dims[1], self.data.iter().map(|&v| v as f64).collect()))
    }

    fn len_checked(dims: &[usize]) -> Result<usize> {
        dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| Error::Parse {
            what: "F32D",
            detail: format!("dimensions {dims:?} overflow"),
        })
    }
}

/// The sidecar path next to a dataset file: same basename, `tags` extension.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("tags")
}

pub fn write_f32d(path: &Path, payload: &F32d) -> Result<()> {
    let expect = F32d::len_checked(&payload.dims)?;
    if payload.data.len() != expect {
        return Err(Error::Shape {
            op: "write_f32d",
            detail: format!("{} values for dimensions {:?}", payload.data.len(), payload.dims),
        });
    }
    let mut bytes = Vec::with_capacity(16 + 4 * (payload.dims.len() + payload.data.len()));
    bytes.extend_from_slice(F32D_MAGIC);
    bytes.extend_from_slice(&F32D_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(payload.dims.len() as u32).to_le_bytes());
    for &d in &payload.dims {
        let d = u32::try_from(d).map_err(|_| Error::Shape {
            op: "write_f32d",
            detail: format!("dimension {d} exceeds the 32-bit limit"),
        })?;
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for &v in &payload.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f32d(path: &Path) -> Result<F32d> {
    let bytes = fs::read(path)?;
    parse_f32d(&bytes)
}

/// Decode `F32D` bytes; rejects wrong magic, unknown versions, and truncation.
pub fn parse_f32d(bytes: &[u8]) -> Result<F32d> {
    let take = |offset: usize| -> Result<[u8; 4]> {
        bytes
            .get(offset..offset + 4)
            .map(|s| [s[0], s[1], s[2], s[3]])
            .ok_or_else(|| Error::Parse {
                what: "F32D",
                detail: format!("file truncated at byte {offset}"),
            })
    };
    let magic = take(0)?;
    if &magic != F32D_MAGIC {
        return Err(Error::Parse { what: "F32D", detail: format!("bad magic bytes {magic:?}") });
    }
    let version = u32::from_le_bytes(take(4)?);
    if version != F32D_VERSION {
        return Err(Error::Version { found: version, supported: "1" });
    }
    let rank = u32::from_le_bytes(take(8)?) as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Parse { what: "F32D", detail: format!("implausible rank {rank}") });
    }
    let mut dims = Vec::with_capacity(rank);
    for i in 0..rank {
        dims.push(u32::from_le_bytes(take(12 + 4 * i)?) as usize);
    }
    let count = F32d::len_checked(&dims)?;
    let start = 12 + 4 * rank;
    let payload = bytes.get(start..).unwrap_or_default();
    if payload.len() != 4 * count {
        return Err(Error::Parse {
            what: "F32D",
            detail: format!(
                "payload holds {} bytes, dimensions {dims:?} require {}",
                payload.len(),
                4 * count
            ),
        });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(F32d { dims, data })
}

/// Parsed tag sidecar: the declared vocabulary (extended by any tags seen only
/// in entries, with a warning each) and the entries in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TagSidecar {
    pub vocab: Vec<String>,
    pub entries: Vec<(String, Vec<String>)>,
    pub warnings: Vec<String>,
}

/// Parse the text sidecar format: `#` starts a comment, one `vocab:` line
/// declares the tag vocabulary, and every other nonempty line is
/// `key: tag, tag, ...` (an empty tag list is allowed).
pub fn parse_tag_sidecar(text: &str) -> Result<TagSidecar> {
    let mut vocab: Option<Vec<String>> = None;
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(':').ok_or_else(|| {
            Error::Sidecar(format!("line {}: expected `key: tags`, got {line:?}", lineno + 1))
        })?;
        let key = key.trim();
        let tags: Vec<String> = rest
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if key == "vocab" {
            if vocab.is_some() {
                return Err(Error::Sidecar(format!("line {}: duplicate vocab line", lineno + 1)));
            }
            vocab = Some(tags);
        } else {
            if key.is_empty() {
                return Err(Error::Sidecar(format!("line {}: empty entry key", lineno + 1)));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(Error::Sidecar(format!("line {}: duplicate entry for {key:?}", lineno + 1)));
            }
            let mut deduped: Vec<String> = Vec::new();
            for t in tags {
                if !deduped.contains(&t) {
                    deduped.push(t);
                }
            }
            entries.push((key.to_string(), deduped));
        }
    }
    let mut vocab = vocab.ok_or_else(|| Error::Sidecar("missing vocab line".into()))?;
    let mut warnings = Vec::new();
    for (key, tags) in &entries {
        for tag in tags {
            if !vocab.contains(tag) {
                warnings.push(format!("tag {tag:?} (entry {key:?}) is not in the vocabulary; added"));
                vocab.push(tag.clone());
            }
        }
    }
    Ok(TagSidecar { vocab, entries, warnings })
}

/// Write a sidecar that [`parse_tag_sidecar`] reads back verbatim.
pub fn write_tag_sidecar(path: &Path, vocab: &[String], entries: &[(String, Vec<String>)]) -> Result<()> {
    let mut text = String::new();
    text.push_str("vocab: ");
    text.push_str(&vocab.join(", "));
    text.push('\n');
    for (key, tags) in entries {
        text.push_str(key);
        text.push(':');
        if !tags.is_empty() {
            text.push(' ');
            text.push_str(&tags.join(", "));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
