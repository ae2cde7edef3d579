//! The Forward Search iteration.
//!
//! Starting from an initial estimate `beta(m0)`, each step `m` computes the
//! absolute residuals `xi_i(m) = |y_i - x_i' beta(m)|`, records the forward
//! residual `z(m)` (the `(m+1)`-st smallest) and the deletion residual `d(m)`
//! (the smallest residual outside the current subset `S(m)`), then refits
//! least squares on the `m + 1` observations with the smallest residuals.
//!
//! Residual ties are broken by observation index, ascending.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FsError, Result};
use crate::linalg::{dot, Matrix, PivotedCholesky};
use crate::refdist::ReferenceDistribution;

/// Default number of elemental subsets tried by the LMS initializer.
pub const DEFAULT_LMS_CANDIDATES: usize = 500;

/// Response vector and regressor matrix, optionally with the truth that
/// generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    true_beta: Option<Vec<f64>>,
    true_sigma: Option<f64>,
    errors: Option<Vec<f64>>,
}

impl Dataset {
    /// Validates dimensions, finiteness and full column rank.
    pub fn new(y: Vec<f64>, x: Matrix) -> Result<Self> {
        let n = y.len();
        let p = x.cols();
        if x.rows() != n {
            return Err(FsError::InvalidDataset(format!(
                "y has {n} rows but X has {}",
                x.rows()
            )));
        }
        if p == 0 {
            return Err(FsError::InvalidDataset("X has no columns".into()));
        }
        if n <= p {
            return Err(FsError::InvalidDataset(format!(
                "need n > dim x, got n = {n}, dim x = {p}"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(FsError::InvalidDataset(format!("y[{i}] is not finite")));
        }
        if let Some(k) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(FsError::InvalidDataset(format!(
                "X[{}, {}] is not finite",
                k / p,
                k % p
            )));
        }
        let all: Vec<usize> = (0..n).collect();
        if PivotedCholesky::new(&gram(&x, &all)).is_none() {
            return Err(FsError::InvalidDataset(
                "X does not have full column rank".into(),
            ));
        }
        Ok(Dataset {
            y,
            x,
            true_beta: None,
            true_sigma: None,
            errors: None,
        })
    }

    /// Location model: a single column of ones.
    pub fn location(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, Matrix::from_row_major(n, 1, vec![1.0; n]))
    }

    /// Attaches the data-generating truth (used in simulation mode).
    pub fn with_truth(mut self, beta: Vec<f64>, sigma: f64, errors: Vec<f64>) -> Self {
        debug_assert_eq!(beta.len(), self.dim_x());
        debug_assert_eq!(errors.len(), self.n());
        self.true_beta = Some(beta);
        self.true_sigma = Some(sigma);
        self.errors = Some(errors);
        self
    }

    /// Prepends a column of ones to the regressors.
    pub fn with_intercept(self) -> Result<Self> {
        let n = self.n();
        let p = self.dim_x();
        let mut data = Vec::with_capacity(n * (p + 1));
        for i in 0..n {
            data.push(1.0);
            data.extend_from_slice(self.x.row(i));
        }
        Self::new(self.y, Matrix::from_row_major(n, p + 1, data))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim_x(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn true_beta(&self) -> Option<&[f64]> {
        self.true_beta.as_deref()
    }

    pub fn true_sigma(&self) -> Option<f64> {
        self.true_sigma
    }

    /// The drawn errors `e_i` when the dataset was simulated.
    pub fn errors(&self) -> Option<&[f64]> {
        self.errors.as_deref()
    }

    /// Absolute residuals `|y_i - x_i' beta|` for every observation.
    pub fn abs_residuals(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| (self.y[i] - dot(self.x.row(i), beta)).abs())
            .collect()
    }

    /// Reorders observations: row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let p = self.dim_x();
        let y = perm.iter().map(|&i| self.y[i]).collect();
        let mut data = Vec::with_capacity(perm.len() * p);
        for &i in perm {
            data.extend_from_slice(self.x.row(i));
        }
        let mut out = Self::new(y, Matrix::from_row_major(perm.len(), p, data))?;
        out.true_beta = self.true_beta.clone();
        out.true_sigma = self.true_sigma;
        out.errors = self
            .errors
            .as_ref()
            .map(|e| perm.iter().map(|&i| e[i]).collect());
        Ok(out)
    }
}

fn gram(x: &Matrix, subset: &[usize]) -> Matrix {
    let p = x.cols();
    let mut g = Matrix::zeros(p, p);
    for &i in subset {
        let row = x.row(i);
        for a in 0..p {
            for b in a..p {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

/// Least squares coefficients and variance estimate on a subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeastSquaresFit {
    pub beta: Vec<f64>,
    pub sigma_sq: f64,
}

/// Least squares on `subset`.
///
/// The variance divisor is `|S|`, or `|S| - dim x` when `dof_correct` is set.
pub fn least_squares(dataset: &Dataset, subset: &[usize], dof_correct: bool) -> Result<LeastSquaresFit> {
    let p = dataset.dim_x();
    let size = subset.len();
    let rank_err = FsError::RankDeficient { subset_size: size };
    if size < p || (dof_correct && size <= p) {
        return Err(rank_err);
    }
    let x = dataset.x();
    let g = gram(x, subset);
    let mut xty = vec![0.0; p];
    for &i in subset {
        let yi = dataset.y[i];
        for (acc, xv) in xty.iter_mut().zip(x.row(i)) {
            *acc += xv * yi;
        }
    }
    let chol = PivotedCholesky::new(&g).ok_or(rank_err)?;
    let beta = chol.solve(&xty);
    let rss: f64 = subset
        .iter()
        .map(|&i| {
            let r = dataset.y[i] - dot(x.row(i), &beta);
            r * r
        })
        .sum();
    let divisor = if dof_correct { size - p } else { size };
    Ok(LeastSquaresFit {
        beta,
        sigma_sq: rss / divisor as f64,
    })
}

/// How the search is started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMethod {
    /// Least median of squares over random elemental subsets.
    Lms { candidates: usize },
    /// Full-sample least squares.
    FullLs,
    /// A supplied coefficient vector.
    Known(Vec<f64>),
}

impl Default for InitialMethod {
    fn default() -> Self {
        InitialMethod::Lms {
            candidates: DEFAULT_LMS_CANDIDATES,
        }
    }
}

/// Initial coefficient estimate `beta(m0)`.
pub fn initial_estimate(dataset: &Dataset, method: &InitialMethod, m0: usize, seed: u64) -> Result<Vec<f64>> {
    let p = dataset.dim_x();
    if m0 < p + 1 {
        return Err(FsError::InvalidConfig(format!(
            "m0 = {m0} must be at least dim x + 1 = {}",
            p + 1
        )));
    }
    match method {
        InitialMethod::FullLs => {
            let all: Vec<usize> = (0..dataset.n()).collect();
            Ok(least_squares(dataset, &all, false)?.beta)
        }
        InitialMethod::Known(beta) => {
            if beta.len() != p {
                return Err(FsError::InvalidConfig(format!(
                    "known beta has {} entries, dim x is {p}",
                    beta.len()
                )));
            }
            Ok(beta.clone())
        }
        InitialMethod::Lms { candidates } => lms(dataset, *candidates, seed),
    }
}

/// Position of the order statistic minimized by least median of squares.
pub fn lms_rank(n: usize, p: usize) -> usize {
    (n + p).div_ceil(2).clamp(1, n)
}

/// The LMS criterion: the `lms_rank`-th smallest squared residual.
pub fn lms_criterion(dataset: &Dataset, beta: &[f64]) -> f64 {
    let mut sq: Vec<f64> = dataset
        .abs_residuals(beta)
        .into_iter()
        .map(|r| r * r)
        .collect();
    let k = lms_rank(dataset.n(), dataset.dim_x()) - 1;
    let (_, kth, _) = sq.select_nth_unstable_by(k, f64::total_cmp);
    *kth
}

/// Exact fit through the observations in `elemental`, if nonsingular.
pub fn elemental_fit(dataset: &Dataset, elemental: &[usize]) -> Option<Vec<f64>> {
    least_squares(dataset, elemental, false).ok().map(|f| f.beta)
}

fn lms(dataset: &Dataset, candidates: usize, seed: u64) -> Result<Vec<f64>> {
    let n = dataset.n();
    let p = dataset.dim_x();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..candidates.max(1) {
        let elemental = sample(&mut rng, n, p).into_vec();
        let Some(beta) = elemental_fit(dataset, &elemental) else {
            continue;
        };
        let crit = lms_criterion(dataset, &beta);
        if best.as_ref().is_none_or(|(b, _)| crit < *b) {
            best = Some((crit, beta));
        }
    }
    best.map(|(_, beta)| beta).ok_or_else(|| {
        FsError::Initialization(format!(
            "all {candidates} elemental subsets were singular"
        ))
    })
}

/// One record of the forward plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardStep {
    /// Subset size.
    pub m: usize,
    /// `S(m)`, sorted by observation index.
    pub subset: Vec<usize>,
    /// `beta(m)`.
    pub beta: Vec<f64>,
    /// `sigma(m)^2` on `S(m)`.
    pub sigma_sq: f64,
    /// Forward residual `z(m)`.
    pub z: f64,
    /// Deletion residual `d(m)`.
    pub d: f64,
    /// Least squares on `S(m+1)`, i.e. `beta(m+1)` and `sigma(m+1)^2`.
    pub next: LeastSquaresFit,
}

fn by_residual(resid: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| resid[a].total_cmp(&resid[b]).then(a.cmp(&b))
}

/// Indices of the `k` smallest residuals, sorted by index.
fn smallest(resid: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..resid.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_residual(resid));
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Computes `z(m)`, `d(m)` and the refit on `S(m+1)` from `beta(m)` and `S(m)`.
///
/// When `hold_beta` is set the refit is skipped and `beta(m)` is carried over.
pub fn forward_step(
    dataset: &Dataset,
    subset: &[usize],
    beta: &[f64],
    sigma_sq: f64,
    dof_correct: bool,
    hold_beta: bool,
) -> Result<(ForwardStep, Vec<usize>)> {
    let n = dataset.n();
    let m = subset.len();
    if m < dataset.dim_x() || m >= n {
        return Err(FsError::InvalidConfig(format!(
            "forward step needs dim x <= m < n, got m = {m}, n = {n}"
        )));
    }
    let resid = dataset.abs_residuals(beta);

    let mut order: Vec<usize> = (0..n).collect();
    order.select_nth_unstable_by(m, by_residual(&resid));
    let z = resid[order[m]];
    let mut next_subset = order[..=m].to_vec();
    next_subset.sort_unstable();

    let mut in_subset = vec![false; n];
    for &i in subset {
        in_subset[i] = true;
    }
    let d = (0..n)
        .filter(|&i| !in_subset[i])
        .map(|i| resid[i])
        .fold(f64::INFINITY, f64::min);
    debug_assert!(d <= z, "deletion residual exceeds forward residual");

    let next = if hold_beta {
        held_fit(dataset, &next_subset, beta, dof_correct)
    } else {
        least_squares(dataset, &next_subset, dof_correct).map_err(|e| match e {
            FsError::RankDeficient { subset_size } => {
                FsError::RankDeficientAtStep { m, subset_size }
            }
            other => other,
        })?
    };

    Ok((
        ForwardStep {
            m,
            subset: subset.to_vec(),
            beta: beta.to_vec(),
            sigma_sq,
            z,
            d,
            next,
        },
        next_subset,
    ))
}

// Variance of the residuals on `subset` under a fixed coefficient vector.
fn held_fit(dataset: &Dataset, subset: &[usize], beta: &[f64], dof_correct: bool) -> LeastSquaresFit {
    let rss: f64 = subset
        .iter()
        .map(|&i| {
            let r = dataset.y[i] - dot(dataset.x.row(i), beta);
            r * r
        })
        .sum();
    let divisor = if dof_correct {
        subset.len().saturating_sub(dataset.dim_x()).max(1)
    } else {
        subset.len()
    };
    LeastSquaresFit {
        beta: beta.to_vec(),
        sigma_sq: rss / divisor as f64,
    }
}

/// Settings of one forward search run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    /// Initial subset size; `None` means `int(n / 2)`.
    pub m0: Option<usize>,
    pub initial: InitialMethod,
    pub seed: u64,
    /// Divide subset variances by `m - dim x` instead of `m`.
    pub dof_correct: bool,
    /// Keep the initial coefficients at every step (no estimation).
    #[serde(default)]
    pub hold_beta: bool,
}

impl ForwardConfig {
    pub fn resolve_m0(&self, n: usize) -> usize {
        self.m0.unwrap_or(n / 2)
    }
}

/// The forward plot for `m = m0, ..., n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardPath {
    pub n: usize,
    pub dim_x: usize,
    pub config: ForwardConfig,
    pub steps: Vec<ForwardStep>,
}

impl ForwardPath {
    pub fn m0(&self) -> usize {
        self.steps.first().map_or(self.n, |s| s.m)
    }

    /// Step with subset size `m`, if recorded.
    pub fn step(&self, m: usize) -> Option<&ForwardStep> {
        let m0 = self.m0();
        if m < m0 {
            return None;
        }
        self.steps.get(m - m0)
    }

    /// Full-sample least squares, produced by the last step's refit.
    pub fn final_fit(&self) -> Option<&LeastSquaresFit> {
        self.steps.last().map(|s| &s.next)
    }

    /// The step selected by the `D[0,1]` embedding at `psi`: `m = int(n psi)`
    /// when `m0 / n <= psi <= 1`, otherwise `None`. `psi = 1` maps to the last step.
    pub fn embed_step(&self, psi: f64) -> Option<&ForwardStep> {
        if !(0.0..=1.0).contains(&psi) {
            return None;
        }
        let m = embed_index(self.n, psi).min(self.n - 1);
        self.step(m)
    }
}

/// `int(n psi)`, robust to `psi = m / n` rounding down.
pub fn embed_index(n: usize, psi: f64) -> usize {
    let x = n as f64 * psi;
    (x + x.abs() * 1e-12).floor() as usize
}

/// Runs the search for `m = m0, ..., n - 1`.
pub fn run_forward_search(dataset: &Dataset, config: &ForwardConfig) -> Result<ForwardPath> {
    let n = dataset.n();
    let p = dataset.dim_x();
    let m0 = config.resolve_m0(n);
    if m0 < p + 1 || m0 >= n {
        return Err(FsError::InvalidConfig(format!(
            "m0 = {m0} must satisfy dim x + 1 <= m0 < n (dim x = {p}, n = {n})"
        )));
    }
    let beta0 = initial_estimate(dataset, &config.initial, m0, config.seed)?;
    let mut subset = smallest(&dataset.abs_residuals(&beta0), m0);
    let mut fit = held_fit(dataset, &subset, &beta0, config.dof_correct);

    let mut steps = Vec::with_capacity(n - m0);
    for _ in m0..n {
        let (step, next_subset) = forward_step(
            dataset,
            &subset,
            &fit.beta,
            fit.sigma_sq,
            config.dof_correct,
            config.hold_beta,
        )?;
        fit = step.next.clone();
        subset = next_subset;
        steps.push(step);
    }
    Ok(ForwardPath {
        n,
        dim_x: p,
        config: config.clone(),
        steps,
    })
}

/// `sigma^2 / varsigma^2_{m/n}`; the factor is 1 when `m = n`.
pub fn corrected_sigma_sq(sigma_sq: f64, m: usize, n: usize, dist: &ReferenceDistribution) -> Result<f64> {
    if m >= n {
        return Ok(sigma_sq);
    }
    let psi = m as f64 / n as f64;
    if psi == 0.0 {
        return Err(FsError::domain("psi", psi, "bias correction needs m > 0"));
    }
    Ok(sigma_sq / dist.varsigma_sq(psi)?)
}

/// Bias-corrected scale `sigma_corr(m)` for every step of the path.
pub fn bias_corrected_sigma(path: &ForwardPath, dist: &ReferenceDistribution) -> Result<Vec<f64>> {
    if path.steps.is_empty() {
        return Err(FsError::InvalidConfig("empty forward path".into()));
    }
    path.steps
        .iter()
        .map(|s| corrected_sigma_sq(s.sigma_sq, s.m, path.n, dist).map(f64::sqrt))
        .collect()
}

/// Leverage-scaled absolute residuals at one step.
///
/// In-subset residuals are divided by `sigma sqrt(1 - h_i)`, the others by
/// `sigma sqrt(1 + h_i)`, with `h_i = x_i' (sum_{S(m)} x x')^{-1} x_i`.
pub fn leverage_scaled_residuals(dataset: &Dataset, step: &ForwardStep) -> Result<Vec<f64>> {
    let x = dataset.x();
    let chol = PivotedCholesky::new(&gram(x, &step.subset)).ok_or(FsError::RankDeficient {
        subset_size: step.subset.len(),
    })?;
    let mut in_subset = vec![false; dataset.n()];
    for &i in &step.subset {
        in_subset[i] = true;
    }
    let sigma = step.sigma_sq.sqrt();
    let resid = dataset.abs_residuals(&step.beta);
    (0..dataset.n())
        .map(|i| {
            let h = chol.quadratic_form_inverse(x.row(i));
            if in_subset[i] {
                if h >= 1.0 {
                    return Err(FsError::LeverageOverflow { index: i, leverage: h });
                }
                Ok(resid[i] / (sigma * (1.0 - h).sqrt()))
            } else {
                Ok(resid[i] / (sigma * (1.0 + h).sqrt()))
            }
        })
        .collect()
}

/// Samples a step statistic through the `D[0,1]` embedding; 0 outside `[m0/n, 1]`.
pub fn embed<F>(path: &ForwardPath, psi_grid: &[f64], statistic: F) -> Vec<f64>
where
    F: Fn(&ForwardStep) -> f64,
{
    psi_grid
        .iter()
        .map(|&psi| path.embed_step(psi).map_or(0.0, &statistic))
        .collect()
}

/// Empirical `psi`-quantile of `|e_i - x_in' b| / sigma`, i.e.
/// `inf{c : G_n(b, c) >= psi}` for `0 < psi <= 1`.
pub fn perturbed_abs_quantile(errors: &[f64], xn: &Matrix, b: &[f64], sigma: f64, psi: f64) -> f64 {
    let n = errors.len();
    let mut v: Vec<f64> = (0..n)
        .map(|i| (errors[i] - dot(xn.row(i), b)).abs() / sigma)
        .collect();
    let k = ((n as f64 * psi - 1e-9).ceil() as usize).clamp(1, n) - 1;
    let (_, kth, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    *kth
}
