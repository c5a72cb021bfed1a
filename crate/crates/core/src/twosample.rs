//! Two-sample hypothesis tests: Welch and pooled-variance Student t-tests,
//! Hotelling's T², and Gaussian-kernel MMD statistics (biased quadratic and
//! L1 witness) with permutation p-values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::rng;
use crate::scalar::Real;
use crate::special;

/// Condition-number ceiling for the pooled covariance in Hotelling's T².
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default permutation count for kernel-test p-values.
pub const DEFAULT_PERMUTATIONS: usize = 200;

/// Identifies which test produced a [`TestResult`].
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Method {
    WelchT,
    StudentT,
    BonferroniWelch,
    HotellingT2,
    Mmd2Biased,
    MmdL1,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::WelchT => "welch",
            Method::StudentT => "student",
            Method::BonferroniWelch => "bonferroni_welch",
            Method::HotellingT2 => "hotelling",
            Method::Mmd2Biased => "mmd2",
            Method::MmdL1 => "mmd_l1",
        };
        f.write_str(s)
    }
}

/// Outcome of one two-sample test.
#[derive(Clone, Debug)]
pub struct TestResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    /// Degrees of freedom, where the test has them.
    pub df: Option<T>,
    /// Kernel bandwidth actually used, for kernel tests.
    pub bandwidth: Option<T>,
    /// Permutation count behind the p-value, for permutation tests.
    pub permutations: Option<usize>,
}

impl<T: Real> TestResult<T> {
    fn new(method: Method, statistic: T, p_value: T, n1: usize, n2: usize) -> Self {
        TestResult { statistic, p_value, method, n1, n2, df: None, bandwidth: None, permutations: None }
    }
}

/// Bandwidth selection for the Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth<T> {
    Fixed(T),
    /// Median pairwise distance of the pooled sample.
    MedianHeuristic,
}

/// Gaussian kernel exp(−‖a−b‖²/(2σ²)) with a bandwidth rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    pub bandwidth: Bandwidth<T>,
}

impl<T: Real> Default for KernelSpec<T> {
    fn default() -> Self {
        KernelSpec { bandwidth: Bandwidth::MedianHeuristic }
    }
}

impl<T: Real> KernelSpec<T> {
    pub fn fixed(sigma: T) -> Self {
        KernelSpec { bandwidth: Bandwidth::Fixed(sigma) }
    }

    /// Resolve the bandwidth against a pooled sample.
    pub fn resolve(&self, pooled: &Mat<T>) -> Result<T> {
        match self.bandwidth {
            Bandwidth::Fixed(s) => {
                if !(s > T::zero()) {
                    return Err(Error::Domain {
                        op: "kernel",
                        detail: format!("bandwidth {s} must be positive"),
                    });
                }
                Ok(s)
            }
            Bandwidth::MedianHeuristic => median_heuristic(pooled),
        }
    }
}

/// Permutation-test settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub permutations: usize,
    pub seed: u64,
}

/// Full test selection passed around by the power engine.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum TestSpec<T> {
    /// Welch t on 1-dimensional data.
    WelchT,
    /// Pooled-variance Student t on 1-dimensional data.
    StudentT,
    /// Per-dimension Welch tests with Bonferroni-combined minimum p-value.
    BonferroniWelch,
    HotellingT2,
    Mmd2 { kernel: KernelSpec<T>, permutations: usize },
    MmdL1 { kernel: KernelSpec<T>, permutations: usize },
}

impl<T: Real> TestSpec<T> {
    pub fn method(&self) -> Method {
        match self {
            TestSpec::WelchT => Method::WelchT,
            TestSpec::StudentT => Method::StudentT,
            TestSpec::BonferroniWelch => Method::BonferroniWelch,
            TestSpec::HotellingT2 => Method::HotellingT2,
            TestSpec::Mmd2 { .. } => Method::Mmd2Biased,
            TestSpec::MmdL1 { .. } => Method::MmdL1,
        }
    }
}

fn mean_and_var<T: Real>(xs: &[T]) -> (T, T) {
    let n = T::of(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let ss = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
    (mean, ss / (n - T::one()))
}

/// Welch's unequal-variance t-test with Satterthwaite degrees of freedom.
pub fn welch_t_test<T: Real>(x: &[T], y: &[T]) -> Result<TestResult<T>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Degenerate {
            op: "welch_t_test",
            detail: format!("need ≥ 2 observations per group (got {}, {})", x.len(), y.len()),
        });
    }
    let (mx, vx) = mean_and_var(x);
    let (my, vy) = mean_and_var(y);
    let nx = T::of(x.len() as f64);
    let ny = T::of(y.len() as f64);
    if vx == T::zero() && vy == T::zero() {
        if mx == my {
            let mut r = TestResult::new(Method::WelchT, T::zero(), T::one(), x.len(), y.len());
            r.df = Some(nx + ny - T::of(2.0));
            return Ok(r);
        }
        return Err(Error::Degenerate {
            op: "welch_t_test",
            detail: "both groups constant with unequal means".into(),
        });
    }
    let sx = vx / nx;
    let sy = vy / ny;
    let se2 = sx + sy;
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (sx * sx / (nx - T::one()) + sy * sy / (ny - T::one()));
    let p = special::t_two_sided_p(t, df)?;
    let mut r = TestResult::new(Method::WelchT, t, p, x.len(), y.len());
    r.df = Some(df);
    Ok(r)
}

/// Student's pooled-variance t-test.
pub fn student_t_test<T: Real>(x: &[T], y: &[T]) -> Result<TestResult<T>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Degenerate {
            op: "student_t_test",
            detail: format!("need ≥ 2 observations per group (got {}, {})", x.len(), y.len()),
        });
    }
    let (mx, vx) = mean_and_var(x);
    let (my, vy) = mean_and_var(y);
    let nx = T::of(x.len() as f64);
    let ny = T::of(y.len() as f64);
    let df = nx + ny - T::of(2.0);
    let sp2 = ((nx - T::one()) * vx + (ny - T::one()) * vy) / df;
    if sp2 == T::zero() {
        if mx == my {
            let mut r = TestResult::new(Method::StudentT, T::zero(), T::one(), x.len(), y.len());
            r.df = Some(df);
            return Ok(r);
        }
        return Err(Error::Degenerate {
            op: "student_t_test",
            detail: "zero pooled variance with unequal means".into(),
        });
    }
    let t = (mx - my) / (sp2 * (T::one() / nx + T::one() / ny)).sqrt();
    let p = special::t_two_sided_p(t, df)?;
    let mut r = TestResult::new(Method::StudentT, t, p, x.len(), y.len());
    r.df = Some(df);
    Ok(r)
}

/// Per-dimension Welch tests combined by the Bonferroni rule: reported p is
/// min(1, d · min_j p_j) and the statistic is the largest |t|.
pub fn bonferroni_welch<T: Real>(x: &Mat<T>, y: &Mat<T>) -> Result<TestResult<T>> {
    if x.cols() != y.cols() || x.cols() == 0 {
        return Err(Error::Shape {
            op: "bonferroni_welch",
            detail: format!("widths {} and {} must match and be positive", x.cols(), y.cols()),
        });
    }
    let d = x.cols();
    let mut min_p = T::infinity();
    let mut max_abs_t = T::zero();
    for j in 0..d {
        let xj: Vec<T> = (0..x.rows()).map(|i| x[(i, j)]).collect();
        let yj: Vec<T> = (0..y.rows()).map(|i| y[(i, j)]).collect();
        let r = welch_t_test(&xj, &yj)?;
        if r.p_value < min_p {
            min_p = r.p_value;
        }
        if r.statistic.abs() > max_abs_t {
            max_abs_t = r.statistic.abs();
        }
    }
    let p = (min_p * T::of(d as f64)).min(T::one());
    let mut r = TestResult::new(Method::BonferroniWelch, max_abs_t, p, x.rows(), y.rows());
    r.df = None;
    Ok(r)
}

/// Hotelling's T² test with p-value through the exact F transform.
pub fn hotelling_t2<T: Real>(x: &Mat<T>, y: &Mat<T>) -> Result<TestResult<T>> {
    let d = x.cols();
    if d == 0 || y.cols() != d {
        return Err(Error::Shape {
            op: "hotelling_t2",
            detail: format!("widths {} and {} must match and be positive", d, y.cols()),
        });
    }
    let n1 = x.rows();
    let n2 = y.rows();
    if n1 < 2 || n2 < 2 || n1 + n2 <= d + 2 {
        return Err(Error::Degenerate {
            op: "hotelling_t2",
            detail: format!("need n1+n2−2 > d (n1={n1}, n2={n2}, d={d})"),
        });
    }
    let s1 = linalg::sample_covariance(x);
    let s2 = linalg::sample_covariance(y);
    let nf1 = T::of((n1 - 1) as f64);
    let nf2 = T::of((n2 - 1) as f64);
    let denom = T::of((n1 + n2 - 2) as f64);
    let pooled = s1.scale(nf1).add(&s2.scale(nf2)).scale(T::one() / denom);

    let eig = linalg::sym_eigen(&pooled)?;
    let mut max_l = T::zero();
    let mut min_l = T::infinity();
    for &l in &eig.values {
        max_l = max_l.max(l.abs());
        min_l = min_l.min(l.abs());
    }
    let cond = if min_l > T::zero() { max_l / min_l } else { T::infinity() };
    if !(cond.as_f64() <= CONDITION_LIMIT) {
        return Err(Error::SingularCovariance { cond: cond.as_f64(), limit: CONDITION_LIMIT });
    }

    let mx = x.col_means();
    let my = y.col_means();
    let diff: Vec<T> = mx.iter().zip(&my).map(|(&a, &b)| a - b).collect();
    // S⁻¹·diff through the eigendecomposition: Σ_k (v_k·diff / λ_k) v_k.
    let mut quad = T::zero();
    for (k, &l) in eig.values.iter().enumerate() {
        let v = eig.vectors.row(k);
        let proj = v.iter().zip(&diff).map(|(&vi, &di)| vi * di).sum::<T>();
        quad = quad + proj * proj / l;
    }
    let scale = T::of((n1 * n2) as f64 / (n1 + n2) as f64);
    let t2 = scale * quad;

    let df2 = T::of((n1 + n2 - d - 1) as f64);
    let f_stat = t2 * df2 / (denom * T::of(d as f64));
    let p = special::f_sf(f_stat, T::of(d as f64), df2)?;
    let mut r = TestResult::new(Method::HotellingT2, t2, p, n1, n2);
    r.df = Some(df2);
    Ok(r)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

/// Median of pairwise Euclidean distances over distinct pairs of the pooled
/// sample; the default Gaussian-kernel bandwidth.
pub fn median_heuristic<T: Real>(pooled: &Mat<T>) -> Result<T> {
    let n = pooled.rows();
    if n < 2 {
        return Err(Error::Degenerate {
            op: "median_heuristic",
            detail: format!("need ≥ 2 rows, got {n}"),
        });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(linalg::euclidean(pooled.row(i), pooled.row(j)));
        }
    }
    let m = median(dists);
    if !(m > T::zero()) {
        return Err(Error::Degenerate {
            op: "median_heuristic",
            detail: "median pairwise distance is zero (too many identical rows)".into(),
        });
    }
    Ok(m)
}

fn gaussian_kernel<T: Real>(a: &[T], b: &[T], sigma: T) -> T {
    let d2 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>();
    (-d2 / (T::of(2.0) * sigma * sigma)).exp()
}

fn check_widths<T: Real>(op: &'static str, x: &Mat<T>, y: &Mat<T>) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::Shape {
            op,
            detail: format!("widths {} and {} differ", x.cols(), y.cols()),
        });
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Degenerate { op, detail: "empty group".into() });
    }
    Ok(())
}

/// Biased quadratic MMD²: (1/m²)Σk(x,x′) + (1/n²)Σk(y,y′) − (2/mn)Σk(x,y).
pub fn mmd2_biased<T: Real>(x: &Mat<T>, y: &Mat<T>, kernel: &KernelSpec<T>) -> Result<T> {
    check_widths("mmd2_biased", x, y)?;
    let sigma = kernel.resolve(&x.vstack(y))?;
    Ok(mmd2_with_sigma(x, y, sigma))
}

fn mmd2_with_sigma<T: Real>(x: &Mat<T>, y: &Mat<T>, sigma: T) -> T {
    let m = x.rows();
    let n = y.rows();
    let mut s_xx = T::zero();
    for i in 0..m {
        for j in 0..m {
            s_xx = s_xx + gaussian_kernel(x.row(i), x.row(j), sigma);
        }
    }
    let mut s_yy = T::zero();
    for i in 0..n {
        for j in 0..n {
            s_yy = s_yy + gaussian_kernel(y.row(i), y.row(j), sigma);
        }
    }
    let mut s_xy = T::zero();
    for i in 0..m {
        for j in 0..n {
            s_xy = s_xy + gaussian_kernel(x.row(i), y.row(j), sigma);
        }
    }
    let mf = T::of(m as f64);
    let nf = T::of(n as f64);
    s_xx / (mf * mf) + s_yy / (nf * nf) - T::of(2.0) * s_xy / (mf * nf)
}

/// L1 witness statistic: Σ_j |(1/m)Σᵢ k(xᵢ,t_j) − (1/n)Σᵢ k(yᵢ,t_j)| over the
/// given test locations.
pub fn mmd_l1<T: Real>(
    x: &Mat<T>,
    y: &Mat<T>,
    kernel: &KernelSpec<T>,
    locations: &Mat<T>,
) -> Result<T> {
    check_widths("mmd_l1", x, y)?;
    if locations.rows() == 0 || locations.cols() != x.cols() {
        return Err(Error::Shape {
            op: "mmd_l1",
            detail: format!(
                "need ≥ 1 locations of width {} (got {}×{})",
                x.cols(),
                locations.rows(),
                locations.cols()
            ),
        });
    }
    let sigma = kernel.resolve(&x.vstack(y))?;
    let mf = T::of(x.rows() as f64);
    let nf = T::of(y.rows() as f64);
    let mut total = T::zero();
    for j in 0..locations.rows() {
        let t = locations.row(j);
        let wx = (0..x.rows()).map(|i| gaussian_kernel(x.row(i), t, sigma)).sum::<T>() / mf;
        let wy = (0..y.rows()).map(|i| gaussian_kernel(y.row(i), t, sigma)).sum::<T>() / nf;
        total = total + (wx - wy).abs();
    }
    Ok(total)
}

/// Draw L1 test locations from a pooled sample: half are pooled rows sampled
/// without replacement, half are those same rows jittered by N(0, σ²I/4).
pub fn draw_l1_locations<T: Real>(pooled: &Mat<T>, sigma: T, seed: u64) -> Mat<T> {
    let base = 5.min(pooled.rows());
    let mut rng = rng::prng(seed);
    let mut idx: Vec<usize> = (0..pooled.rows()).collect();
    rng::partial_shuffle(&mut rng, &mut idx, base);
    let d = pooled.cols();
    let mut out = Mat::zeros(2 * base, d);
    for (r, &i) in idx[..base].iter().enumerate() {
        out.row_mut(r).copy_from_slice(pooled.row(i));
    }
    let half_sigma = sigma * T::of(0.5);
    for (r, &i) in idx[..base].iter().enumerate() {
        let noise = rng::standard_normals(&mut rng, d);
        for (c, (o, &v)) in out.row_mut(base + r).iter_mut().zip(pooled.row(i)).enumerate() {
            *o = v + half_sigma * T::of(noise[c]);
        }
    }
    out
}

/// Shared permutation driver: shuffles a pooled index vector B times with the
/// seeded generator and compares the statistic of each split against the
/// observed value. `stat_of` sees the permuted indices (first `m` form group
/// one) and must not consume randomness of its own.
///
/// Each segment is sorted after the shuffle (a canonical representation of
/// the set partition), and the comparison carries a small tie tolerance so a
/// permutation that is a mathematical tie of the observed split (the split
/// itself, or its complement at equal group sizes) counts as ≥ regardless of
/// floating-point summation order.
fn permutation_p_over_indices<T: Real>(
    observed: T,
    m: usize,
    total: usize,
    config: &PermutationConfig,
    mut stat_of: impl FnMut(&[usize]) -> Result<T>,
) -> Result<T> {
    if config.permutations == 0 {
        return Err(Error::Config("permutation count must be ≥ 1".into()));
    }
    let tie_tol = T::of(1e-9) * (T::one() + observed.abs());
    let threshold = observed - tie_tol;
    let mut rng = rng::prng(config.seed);
    let mut idx: Vec<usize> = (0..total).collect();
    let mut at_least = 0usize;
    for _ in 0..config.permutations {
        rng::shuffle(&mut rng, &mut idx);
        idx[..m].sort_unstable();
        idx[m..].sort_unstable();
        if stat_of(&idx)? >= threshold {
            at_least += 1;
        }
    }
    Ok(T::of((1 + at_least) as f64 / (config.permutations + 1) as f64))
}

/// Permutation p-value for an arbitrary two-sample statistic: pooled rows are
/// reassigned to groups of the original sizes B times; p = (1 + #{≥ observed})
/// / (B + 1).
pub fn permutation_pvalue<T: Real>(
    statistic_fn: impl Fn(&Mat<T>, &Mat<T>) -> Result<T>,
    x: &Mat<T>,
    y: &Mat<T>,
    config: &PermutationConfig,
) -> Result<T> {
    check_widths("permutation_pvalue", x, y)?;
    let observed = statistic_fn(x, y)?;
    let pooled = x.vstack(y);
    let m = x.rows();
    permutation_p_over_indices(observed, m, pooled.rows(), config, |idx| {
        let xp = pooled.select_rows(&idx[..m]);
        let yp = pooled.select_rows(&idx[m..]);
        statistic_fn(&xp, &yp)
    })
}

/// MMD² permutation test on a precomputed pooled Gram matrix; avoids
/// re-evaluating kernels for every permutation. Consumes the identical RNG
/// stream as [`permutation_pvalue`] would.
pub fn mmd2_permutation_test<T: Real>(
    x: &Mat<T>,
    y: &Mat<T>,
    kernel: &KernelSpec<T>,
    config: &PermutationConfig,
) -> Result<TestResult<T>> {
    check_widths("mmd2_biased", x, y)?;
    let pooled = x.vstack(y);
    let sigma = kernel.resolve(&pooled)?;
    let total = pooled.rows();
    let m = x.rows();
    let n = y.rows();

    // Symmetric Gram matrix of the pooled rows plus its row sums.
    let mut gram = Mat::zeros(total, total);
    for i in 0..total {
        gram[(i, i)] = T::one();
        for j in i + 1..total {
            let k = gaussian_kernel(pooled.row(i), pooled.row(j), sigma);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    let row_sums: Vec<T> = (0..total).map(|i| gram.row(i).iter().copied().sum::<T>()).collect();
    let grand_total = row_sums.iter().copied().sum::<T>();
    let mf = T::of(m as f64);
    let nf = T::of(n as f64);

    // Statistic of the split given by an index set for group one; only the
    // within-group-one block is summed, the rest follows from row sums.
    let stat_of = |group_one: &[usize]| {
        let mut s_xx = T::zero();
        let mut s_x_all = T::zero();
        for &i in group_one {
            let row = gram.row(i);
            for &j in group_one {
                s_xx = s_xx + row[j];
            }
            s_x_all = s_x_all + row_sums[i];
        }
        let s_xy = s_x_all - s_xx;
        let s_yy = grand_total - s_x_all - s_xy;
        s_xx / (mf * mf) + s_yy / (nf * nf) - T::of(2.0) * s_xy / (mf * nf)
    };

    let identity: Vec<usize> = (0..total).collect();
    let observed = stat_of(&identity[..m]);
    let p = permutation_p_over_indices(observed, m, total, config, |idx| Ok(stat_of(&idx[..m])))?;
    let mut r = TestResult::new(Method::Mmd2Biased, observed, p, m, n);
    r.bandwidth = Some(sigma);
    r.permutations = Some(config.permutations);
    Ok(r)
}

/// L1-witness permutation test; test locations are drawn once from the pooled
/// sample (a permutation-invariant quantity) and kernel evaluations against
/// them are cached.
pub fn mmd_l1_permutation_test<T: Real>(
    x: &Mat<T>,
    y: &Mat<T>,
    kernel: &KernelSpec<T>,
    config: &PermutationConfig,
) -> Result<TestResult<T>> {
    check_widths("mmd_l1", x, y)?;
    let pooled = x.vstack(y);
    let sigma = kernel.resolve(&pooled)?;
    let locations = draw_l1_locations(&pooled, sigma, rng::derive_seed(config.seed, &[1]));
    let total = pooled.rows();
    let m = x.rows();
    let n = y.rows();
    let j_count = locations.rows();

    // Kernel of every pooled row against every location.
    let mut kloc = Mat::zeros(total, j_count);
    for i in 0..total {
        for j in 0..j_count {
            kloc[(i, j)] = gaussian_kernel(pooled.row(i), locations.row(j), sigma);
        }
    }
    let col_totals: Vec<T> =
        (0..j_count).map(|j| (0..total).map(|i| kloc[(i, j)]).sum::<T>()).collect();
    let mf = T::of(m as f64);
    let nf = T::of(n as f64);

    let stat_of = |group_one: &[usize]| {
        let mut total_stat = T::zero();
        for j in 0..j_count {
            let mut s_x = T::zero();
            for &i in group_one {
                s_x = s_x + kloc[(i, j)];
            }
            let s_y = col_totals[j] - s_x;
            total_stat = total_stat + (s_x / mf - s_y / nf).abs();
        }
        total_stat
    };

    let identity: Vec<usize> = (0..total).collect();
    let observed = stat_of(&identity[..m]);
    let perm_cfg =
        PermutationConfig { permutations: config.permutations, seed: rng::derive_seed(config.seed, &[0]) };
    let p = permutation_p_over_indices(observed, m, total, &perm_cfg, |idx| Ok(stat_of(&idx[..m])))?;
    let mut r = TestResult::new(Method::MmdL1, observed, p, m, n);
    r.bandwidth = Some(sigma);
    r.permutations = Some(config.permutations);
    Ok(r)
}

fn column<T: Real>(m: &Mat<T>) -> Result<Vec<T>> {
    if m.cols() != 1 {
        return Err(Error::Shape {
            op: "scalar_test",
            detail: format!("scalar t-tests need width 1, got {}", m.cols()),
        });
    }
    Ok((0..m.rows()).map(|i| m[(i, 0)]).collect())
}

/// Dispatch a [`TestSpec`] on two sample matrices. `seed` feeds permutation
/// shuffles and L1 location draws; classical tests ignore it.
pub fn run_test<T: Real>(
    spec: &TestSpec<T>,
    x: &Mat<T>,
    y: &Mat<T>,
    seed: u64,
) -> Result<TestResult<T>> {
    match spec {
        TestSpec::WelchT => welch_t_test(&column(x)?, &column(y)?),
        TestSpec::StudentT => student_t_test(&column(x)?, &column(y)?),
        TestSpec::BonferroniWelch => bonferroni_welch(x, y),
        TestSpec::HotellingT2 => hotelling_t2(x, y),
        TestSpec::Mmd2 { kernel, permutations } => {
            let cfg = PermutationConfig { permutations: *permutations, seed };
            mmd2_permutation_test(x, y, kernel, &cfg)
        }
        TestSpec::MmdL1 { kernel, permutations } => {
            let cfg = PermutationConfig { permutations: *permutations, seed };
            mmd_l1_permutation_test(x, y, kernel, &cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{prng, standard_normals};
    use approx::assert_relative_eq;

    fn gaussian_mat(seed: u64, n: usize, d: usize, shift: f64) -> Mat<f64> {
        let mut r = prng(seed);
        let data = standard_normals(&mut r, n * d).into_iter().map(|v| v + shift).collect();
        Mat::from_vec(n, d, data)
    }

    #[test]
    fn welch_identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&x, &x).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_antisymmetry() {
        let x = [0.3, -1.2, 0.7, 2.2, 0.1];
        let y = [1.4, 0.9, -0.3, 2.0];
        let a = welch_t_test(&x, &y).unwrap();
        let b = welch_t_test(&y, &x).unwrap();
        assert_relative_eq!(a.statistic, -b.statistic, epsilon = 1e-15);
        assert_relative_eq!(a.p_value, b.p_value, epsilon = 1e-15);
    }

    #[test]
    fn welch_degenerate_cases() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
        // Both constant, equal means: p = 1.
        let r = welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        // Both constant, unequal means: degenerate.
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn student_matches_welch_for_equal_sizes_and_variances() {
        // With equal group sizes the pooled and Welch statistics coincide.
        let x = [0.1, 0.9, -0.4, 1.3];
        let y = [1.0, 0.2, 0.8, -0.1];
        let s = student_t_test(&x, &y).unwrap();
        let w = welch_t_test(&x, &y).unwrap();
        assert_relative_eq!(s.statistic, w.statistic, epsilon = 1e-12);
    }

    #[test]
    fn hotelling_equal_samples_gives_p_one() {
        let x = gaussian_mat(1, 20, 3, 0.0);
        let r = hotelling_t2(&x, &x).unwrap();
        assert!(r.statistic.abs() < 1e-18);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hotelling_needs_enough_rows() {
        let x = gaussian_mat(2, 3, 5, 0.0);
        let y = gaussian_mat(3, 3, 5, 0.0);
        assert!(hotelling_t2(&x, &y).is_err());
    }

    #[test]
    fn hotelling_rejects_singular_covariance() {
        // One column duplicated: pooled covariance exactly singular.
        let base = gaussian_mat(4, 15, 2, 0.0);
        let mut data = Vec::new();
        for i in 0..base.rows() {
            data.extend_from_slice(base.row(i));
            data.push(base[(i, 0)]);
        }
        let x = Mat::from_vec(15, 3, data.clone());
        let y = {
            let base = gaussian_mat(5, 15, 2, 0.0);
            let mut d2 = Vec::new();
            for i in 0..base.rows() {
                d2.extend_from_slice(base.row(i));
                d2.push(base[(i, 0)]);
            }
            Mat::from_vec(15, 3, d2)
        };
        match hotelling_t2(&x, &y) {
            Err(Error::SingularCovariance { .. }) => {}
            other => panic!("expected singular covariance, got {other:?}"),
        }
    }

    #[test]
    fn median_heuristic_pair_and_scaling() {
        let z = Mat::from_rows(&[&[0.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(median_heuristic(&z).unwrap(), 3.0);
        let z5 = gaussian_mat(6, 5, 2, 0.0);
        let m1 = median_heuristic(&z5).unwrap();
        let m2 = median_heuristic(&z5.scale(2.5)).unwrap();
        assert_relative_eq!(m2, 2.5 * m1, epsilon = 1e-12);
    }

    #[test]
    fn median_heuristic_rejects_identical_rows() {
        let z = Mat::from_rows(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert!(median_heuristic(&z).is_err());
    }

    #[test]
    fn mmd2_hand_value() {
        // X = {0}, Y = {1}, σ = 1: 1 + 1 − 2e^{−1/2}.
        let x = Mat::from_vec(1, 1, vec![0.0]);
        let y = Mat::from_vec(1, 1, vec![1.0]);
        let v = mmd2_biased(&x, &y, &KernelSpec::fixed(1.0)).unwrap();
        assert_relative_eq!(v, 2.0 - 2.0 * (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn mmd2_zero_on_equal_and_symmetric_on_swap() {
        let x = gaussian_mat(7, 12, 3, 0.0);
        let y = gaussian_mat(8, 9, 3, 0.5);
        let k = KernelSpec::fixed(1.3);
        assert_eq!(mmd2_biased(&x, &x, &k).unwrap(), 0.0);
        let a = mmd2_biased(&x, &y, &k).unwrap();
        let b = mmd2_biased(&y, &x, &k).unwrap();
        assert!((a - b).abs() < 1e-12, "swap changed the statistic: {a} vs {b}");
        assert!(a >= 0.0);
    }

    #[test]
    fn mmd_l1_hand_value() {
        // X = {0}, Y = {2}, location 0, σ = 1: |1 − e^{−2}|.
        let x = Mat::from_vec(1, 1, vec![0.0]);
        let y = Mat::from_vec(1, 1, vec![2.0]);
        let t = Mat::from_vec(1, 1, vec![0.0]);
        let v = mmd_l1(&x, &y, &KernelSpec::fixed(1.0), &t).unwrap();
        assert_relative_eq!(v, 1.0 - (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn mmd_l1_symmetric_cancellation() {
        // Groups mirrored about the single location: witness difference 0.
        let x = Mat::from_rows(&[&[-1.0], &[-2.0]]);
        let y = Mat::from_rows(&[&[1.0], &[2.0]]);
        let t = Mat::from_vec(1, 1, vec![0.0]);
        let v: f64 = mmd_l1(&x, &y, &KernelSpec::fixed(1.0), &t).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn mmd_l1_zero_on_equal() {
        let x = gaussian_mat(9, 6, 2, 0.0);
        let locs = gaussian_mat(10, 4, 2, 0.0);
        assert_eq!(mmd_l1(&x, &x, &KernelSpec::fixed(1.0), &locs).unwrap(), 0.0);
    }

    #[test]
    fn permutation_minimum_p() {
        // Wildly separated groups: observed beats every permutation, so the
        // add-one convention gives exactly 1/(B+1).
        let x = gaussian_mat(11, 8, 1, 0.0);
        let y = gaussian_mat(12, 8, 1, 50.0);
        let cfg = PermutationConfig { permutations: 99, seed: 5 };
        let k = KernelSpec::fixed(1.0);
        let p = permutation_pvalue(|a, b| mmd2_biased(a, b, &k), &x, &y, &cfg).unwrap();
        assert_relative_eq!(p, 1.0 / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn permutation_deterministic() {
        let x = gaussian_mat(13, 7, 2, 0.0);
        let y = gaussian_mat(14, 7, 2, 0.3);
        let cfg = PermutationConfig { permutations: 50, seed: 77 };
        let k = KernelSpec::default();
        let p1 = permutation_pvalue(|a, b| mmd2_biased(a, b, &k), &x, &y, &cfg).unwrap();
        let p2 = permutation_pvalue(|a, b| mmd2_biased(a, b, &k), &x, &y, &cfg).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn fast_mmd2_path_matches_generic_permutation() {
        for case in 0..20u64 {
            let m = 3 + (case % 7) as usize;
            let n = 4 + (case % 5) as usize;
            let x = gaussian_mat(100 + case, m, 2, 0.0);
            let y = gaussian_mat(200 + case, n, 2, 0.4);
            let cfg = PermutationConfig { permutations: 60, seed: 300 + case };
            let k = KernelSpec::default();
            let fast = mmd2_permutation_test(&x, &y, &k, &cfg).unwrap();
            let slow = permutation_pvalue(|a, b| mmd2_biased(a, b, &k), &x, &y, &cfg).unwrap();
            assert_eq!(fast.p_value, slow, "case {case}");
            let direct = mmd2_biased(&x, &y, &k).unwrap();
            assert_relative_eq!(fast.statistic, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_invariance_translation_and_scale() {
        let x = gaussian_mat(15, 10, 3, 0.0);
        let y = gaussian_mat(16, 12, 3, 0.6);
        let k = KernelSpec::default();
        let base = mmd2_biased(&x, &y, &k).unwrap();
        // Joint translation.
        let shift = |m: &Mat<f64>| m.map(|v| v + 17.25);
        let t = mmd2_biased(&shift(&x), &shift(&y), &k).unwrap();
        assert!((t - base).abs() / base.abs() < 1e-10, "translation moved {base} to {t}");
        // Joint positive scaling.
        let s = mmd2_biased(&x.scale(3.7), &y.scale(3.7), &k).unwrap();
        assert!((s - base).abs() / base.abs() < 1e-10, "scaling moved {base} to {s}");
    }

    #[test]
    fn l1_locations_shape_and_determinism() {
        let pooled = gaussian_mat(17, 30, 4, 0.0);
        let a = draw_l1_locations(&pooled, 1.0, 9);
        let b = draw_l1_locations(&pooled, 1.0, 9);
        assert_eq!(a.shape(), (10, 4));
        assert_eq!(a, b);
        // First half must be pooled rows verbatim.
        for i in 0..5 {
            let found = (0..pooled.rows()).any(|r| pooled.row(r) == a.row(i));
            assert!(found, "location {i} is not a pooled row");
        }
    }

    #[test]
    fn run_test_dispatches_every_method() {
        let x = gaussian_mat(18, 25, 1, 0.0);
        let y = gaussian_mat(19, 25, 1, 1.0);
        for spec in [
            TestSpec::WelchT,
            TestSpec::StudentT,
            TestSpec::BonferroniWelch,
            TestSpec::HotellingT2,
            TestSpec::Mmd2 { kernel: KernelSpec::default(), permutations: 40 },
            TestSpec::MmdL1 { kernel: KernelSpec::default(), permutations: 40 },
        ] {
            let r = run_test(&spec, &x, &y, 42).unwrap();
            assert_eq!(r.method, spec.method());
            assert!(r.p_value >= 0.0 && r.p_value <= 1.0);
            assert_eq!((r.n1, r.n2), (25, 25));
        }
    }

    #[test]
    fn scalar_tests_reject_wide_input() {
        let x = gaussian_mat(20, 10, 2, 0.0);
        assert!(run_test(&TestSpec::WelchT, &x, &x, 0).is_err());
    }

    #[test]
    fn bonferroni_p_is_capped_and_sensitive() {
        let x = gaussian_mat(21, 30, 4, 0.0);
        let y = gaussian_mat(22, 30, 4, 0.0);
        let r = bonferroni_welch(&x, &y).unwrap();
        assert!(r.p_value <= 1.0);
        let y_shift = gaussian_mat(22, 30, 4, 2.0);
        let r2 = bonferroni_welch(&x, &y_shift).unwrap();
        assert!(r2.p_value < 0.01);
    }
}
