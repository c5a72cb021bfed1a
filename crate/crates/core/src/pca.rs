//! Principal component analysis: fit a k-component linear reduction of a
//! sample matrix and project data through it. Wide data (fewer rows than
//! columns, the imaging regime) is fitted through the rows×rows Gram matrix
//! instead of the d×d covariance, which is what makes PCA on hundred-row,
//! hundred-thousand-column matrices tractable.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Mat};
use crate::scalar::Real;

/// Model-file format revision written by [`save_model`].
pub const PCA_MODEL_VERSION: u32 = 1;

/// A fitted principal-component reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T: Real> {
    pub format_version: u32,
    /// Column means of the training data (width d).
    pub mean: Vec<T>,
    /// k×d matrix with one orthonormal component per row.
    pub components: Mat<T>,
    /// Variance along each component, nonincreasing.
    pub eigenvalues: Vec<T>,
    pub k: usize,
}

/// Which eigenproblem [`fit_with`] solves; `Auto` picks the smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitPath {
    Auto,
    /// rows×rows Gram matrix, eigenvectors mapped back to feature space.
    Gram,
    /// d×d sample covariance.
    Covariance,
}

impl<T: Real> PcaModel<T> {
    /// Data width the model was fitted on.
    pub fn input_width(&self) -> usize {
        self.mean.len()
    }

    /// Check the structural invariants: shapes consistent, rows orthonormal
    /// within 1e-8, eigenvalues nonnegative and nonincreasing.
    pub fn validate(&self) -> Result<()> {
        let (k, d) = (self.k, self.mean.len());
        if self.components.rows() != k
            || self.components.cols() != d
            || self.eigenvalues.len() != k
            || k == 0
            || d == 0
        {
            return Err(Error::Shape {
                op: "PcaModel",
                detail: format!(
                    "k = {k}, d = {d}, components {}x{}, {} eigenvalues",
                    self.components.rows(),
                    self.components.cols(),
                    self.eigenvalues.len()
                ),
            });
        }
        let tol = T::of(1e-8);
        for i in 0..k {
            for j in i..k {
                let mut dot = T::zero();
                for c in 0..d {
                    dot = dot + self.components[(i, c)] * self.components[(j, c)];
                }
                let target = if i == j { T::one() } else { T::zero() };
                if (dot - target).abs() > tol {
                    return Err(Error::Degenerate {
                        op: "PcaModel",
                        detail: format!("components {i} and {j} not orthonormal (dot {dot})"),
                    });
                }
            }
        }
        for (i, pair) in self.eigenvalues.windows(2).enumerate() {
            if pair[1] > pair[0] {
                return Err(Error::Degenerate {
                    op: "PcaModel",
                    detail: format!("eigenvalues out of order at {i}: {} < {}", pair[0], pair[1]),
                });
            }
        }
        if self.eigenvalues.iter().any(|&v| v < -tol) {
            return Err(Error::Degenerate {
                op: "PcaModel",
                detail: "negative eigenvalue".into(),
            });
        }
        Ok(())
    }
}

fn centered<T: Real>(x: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let mean = x.col_means();
    let mut xc = x.clone();
    for i in 0..x.rows() {
        for (v, m) in xc.row_mut(i).iter_mut().zip(&mean) {
            *v = *v - *m;
        }
    }
    (mean, xc)
}

/// Make each component's largest-magnitude entry positive, so fits are
/// reproducible rather than sign-ambiguous.
fn fix_signs<T: Real>(components: &mut Mat<T>) {
    for i in 0..components.rows() {
        let row = components.row_mut(i);
        let mut lead = 0usize;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[lead].abs() {
                lead = j;
            }
        }
        if row[lead] < T::zero() {
            for v in row.iter_mut() {
                *v = T::zero() - *v;
            }
        }
    }
}

/// Fit a k-component model on the rows of `x`, choosing the Gram path when
/// the data is wider than it is tall.
pub fn fit<T: Real>(x: &Mat<T>, k: usize) -> Result<PcaModel<T>> {
    fit_with(x, k, FitPath::Auto)
}

/// [`fit`] with the eigenproblem forced, for verifying that both paths agree.
pub fn fit_with<T: Real>(x: &Mat<T>, k: usize, path: FitPath) -> Result<PcaModel<T>> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 rows, got {n}")));
    }
    let k_max = (n - 1).min(d);
    if k == 0 || k > k_max {
        return Err(Error::Config(format!(
            "component count {k} outside 1..={k_max} for {n}x{d} data"
        )));
    }
    if !x.all_finite() {
        return Err(Error::Domain { op: "pca_fit", detail: "data contains non-finite values".into() });
    }
    let (mean, xc) = centered(x);
    let denom = T::of((n - 1) as f64);

    let use_gram = match path {
        FitPath::Auto => n < d,
        FitPath::Gram => true,
        FitPath::Covariance => false,
    };

    let (eigenvalues, mut components) = if use_gram {
        // Gram matrix X_c X_cᵀ/(n−1) shares the covariance's nonzero
        // eigenvalues; an eigenvector u maps back to the feature-space
        // component X_cᵀ u / √((n−1)λ).
        let gram = xc.matmul(&xc.transpose()).scale(T::one() / denom);
        let eig = sym_eigen(&gram)?;
        let scale = eig.values.first().copied().unwrap_or(T::zero()).max(T::one());
        let mut comps = Mat::zeros(k, d);
        for i in 0..k {
            let lambda = eig.values[i];
            if lambda <= T::of(1e-12) * scale {
                return Err(Error::Degenerate {
                    op: "pca_fit",
                    detail: format!(
                        "component {i} has (numerically) zero variance; the Gram path cannot \
                         recover directions outside the data's span — request fewer components"
                    ),
                });
            }
            let norm = (denom * lambda).sqrt();
            for j in 0..d {
                let mut v = T::zero();
                for r in 0..n {
                    v = v + xc[(r, j)] * eig.vectors[(i, r)];
                }
                comps[(i, j)] = v / norm;
            }
        }
        (eig.values[..k].to_vec(), comps)
    } else {
        let cov = xc.transpose().matmul(&xc).scale(T::one() / denom);
        let eig = sym_eigen(&cov)?;
        (eig.values[..k].to_vec(), eig.vectors.select_rows(&(0..k).collect::<Vec<_>>()))
    };

    fix_signs(&mut components);
    let model =
        PcaModel { format_version: PCA_MODEL_VERSION, mean, components, eigenvalues, k };
    model.validate()?;
    Ok(model)
}

/// Project rows into the component space: (X − mean)·componentsᵀ.
pub fn transform<T: Real>(model: &PcaModel<T>, x: &Mat<T>) -> Result<Mat<T>> {
    if x.cols() != model.input_width() {
        return Err(Error::Shape {
            op: "pca_transform",
            detail: format!("data width {} but model expects {}", x.cols(), model.input_width()),
        });
    }
    let mut out = Mat::zeros(x.rows(), model.k);
    for i in 0..x.rows() {
        for c in 0..model.k {
            let mut v = T::zero();
            for j in 0..x.cols() {
                v = v + (x[(i, j)] - model.mean[j]) * model.components[(c, j)];
            }
            out[(i, c)] = v;
        }
    }
    Ok(out)
}

/// Write the model as a JSON document (value-exact round trip).
pub fn save_model<T: Real + Serialize>(model: &PcaModel<T>, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string_pretty(model).map_err(|e| Error::Parse {
        what: "PCA model",
        detail: e.to_string(),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a model back, checking the format version and every structural
/// invariant before returning it.
pub fn load_model<T: Real + DeserializeOwned>(path: &std::path::Path) -> Result<PcaModel<T>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "PCA model",
        detail: e.to_string(),
    })?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or(Error::Parse { what: "PCA model", detail: "missing format_version".into() })?;
    if version != PCA_MODEL_VERSION as u64 {
        return Err(Error::Version { found: version as u32, supported: "1" });
    }
    let model: PcaModel<T> = serde_json::from_value(value).map_err(|e| Error::Parse {
        what: "PCA model",
        detail: e.to_string(),
    })?;
    model.validate()?;
    Ok(model)
}
