//! Scalar path statistics whose replicate distributions shrink with `n`, and
//! the order statistic probe for t-distributed absolute residuals.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsError, Result};
use crate::forward_search::ForwardPath;
use crate::refdist::ReferenceDistribution;

use super::replicate_rng;

/// `c_{m/n}` and `f(c_{m/n})` for `m = 0, ..., n - 1`.
#[derive(Debug, Clone)]
pub(crate) struct StepTable {
    c: Vec<f64>,
    density: Vec<f64>,
}

impl StepTable {
    pub(crate) fn new(dist: &ReferenceDistribution, n: usize, from: usize) -> Result<Self> {
        let mut c = vec![f64::NAN; n];
        let mut density = vec![f64::NAN; n];
        for m in from.max(1)..n {
            c[m] = dist.abs_quantile(m as f64 / n as f64)?;
            density[m] = dist.pdf(c[m]);
        }
        Ok(StepTable { c, density })
    }
}

fn check_fraction(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(FsError::domain(name, value, "needs a value strictly between 0 and 1"))
    }
}

fn first_step(n: usize, psi: f64) -> usize {
    (n as f64 * psi - 1e-9).ceil().max(1.0) as usize
}

/// `max_{m / n >= psi1} f(c_{m/n}) sqrt(n) (z(m) - d(m))`.
///
/// Steps below `psi1` are ignored; an empty range yields 0.
pub fn deletion_gap(path: &ForwardPath, dist: &ReferenceDistribution, psi1: f64) -> Result<f64> {
    check_fraction("psi1", psi1)?;
    let table = StepTable::new(dist, path.n, first_step(path.n, psi1))?;
    Ok(gap_with(path, &table, psi1))
}

pub(crate) fn gap_with(path: &ForwardPath, table: &StepTable, psi1: f64) -> f64 {
    let from = first_step(path.n, psi1);
    let root_n = (path.n as f64).sqrt();
    path.steps
        .iter()
        .filter(|s| s.m >= from)
        .map(|s| table.density[s.m] * root_n * (s.z - s.d))
        .fold(0.0, f64::max)
}

/// `max_{psi0 <= m / n} |2 f(c) sqrt(n) (z(m) / sigma - c) + G_n(c)|` with
/// `c = c_{m/n}`, using the true errors and scale for `G_n`.
pub fn bahadur_discrepancy(
    path: &ForwardPath,
    errors: &[f64],
    sigma: f64,
    dist: &ReferenceDistribution,
    psi0: f64,
) -> Result<f64> {
    check_fraction("psi0", psi0)?;
    if errors.len() != path.n {
        return Err(FsError::InvalidConfig(format!(
            "{} errors for a path with n = {}",
            errors.len(),
            path.n
        )));
    }
    let table = StepTable::new(dist, path.n, first_step(path.n, psi0))?;
    Ok(bahadur_with(path, errors, sigma, &table, psi0))
}

pub(crate) fn bahadur_with(path: &ForwardPath, errors: &[f64], sigma: f64, table: &StepTable, psi0: f64) -> f64 {
    let n = path.n as f64;
    let root_n = n.sqrt();
    let from = first_step(path.n, psi0);
    let mut scaled: Vec<f64> = errors.iter().map(|e| (e / sigma).abs()).collect();
    scaled.sort_unstable_by(f64::total_cmp);
    path.steps
        .iter()
        .filter(|s| s.m >= from)
        .map(|s| {
            let c = table.c[s.m];
            let inside = scaled.partition_point(|&u| u <= c) as f64;
            let g = (inside - s.m as f64) / root_n;
            (2.0 * table.density[s.m] * root_n * (s.z / sigma - c) + g).abs()
        })
        .fold(0.0, f64::max)
}

/// Law of the variables in [`t_order_statistic_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatisticFamily {
    /// Student t with `m - dim x` degrees of freedom (not rescaled).
    StudentT,
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub n: usize,
    pub m: usize,
    pub dim_x: usize,
    pub replicates: usize,
    pub psi: f64,
    /// Mean of `2 phi(c) sqrt(n) (v_(m+1) - c)`.
    pub mean: f64,
    /// Variance of the same statistic.
    pub variance: f64,
    /// `psi (1 - psi)`.
    pub target_variance: f64,
}

/// Replicates `2 phi(c_{m/n}) sqrt(n) (v_(m+1) - c_{m/n})`, where `v_(m+1)` is the
/// `(m+1)`-st smallest of `n` absolute draws and `c` is the normal absolute quantile.
pub fn t_order_statistic_probe(
    m: usize,
    dim_x: usize,
    n: usize,
    replicates: usize,
    seed: u64,
    family: OrderStatisticFamily,
) -> Result<ProbeSummary> {
    if m <= dim_x + 2 {
        return Err(FsError::InvalidConfig(format!(
            "need m - dim x > 2, got m = {m}, dim x = {dim_x}"
        )));
    }
    if m >= n {
        return Err(FsError::InvalidConfig(format!("need m < n, got m = {m}, n = {n}")));
    }
    if replicates == 0 {
        return Err(FsError::InvalidConfig("need at least one replicate".into()));
    }
    let normal = ReferenceDistribution::standard_normal();
    let psi = m as f64 / n as f64;
    let c = normal.abs_quantile(psi)?;
    let scale = 2.0 * normal.pdf(c) * (n as f64).sqrt();
    let t = StudentT::new((m - dim_x) as f64).map_err(|e| FsError::InvalidDistribution(e.to_string()))?;

    let values: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let mut v: Vec<f64> = match family {
                OrderStatisticFamily::StudentT => (0..n).map(|_| t.sample(&mut rng).abs()).collect(),
                OrderStatisticFamily::StandardNormal => {
                    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect()
                }
            };
            let (_, kth, _) = v.select_nth_unstable_by(m, f64::total_cmp);
            scale * (*kth - c)
        })
        .collect();

    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let variance = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    };
    Ok(ProbeSummary {
        n,
        m,
        dim_x,
        replicates,
        psi,
        mean,
        variance,
        target_variance: psi * (1.0 - psi),
    })
}
