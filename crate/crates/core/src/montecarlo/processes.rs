//! Direct evaluation of the empirical processes `G_n`, `L_n` and `K_n` from
//! known errors.
//!
//! All three are indexed by `psi` through the absolute quantile `c_psi`;
//! `psi = 0` and `psi = 1` are allowed (`c_0 = 0`, `c_1 = +inf`).

use crate::error::{FsError, Result};
use crate::linalg::Matrix;
use crate::refdist::ReferenceDistribution;

/// `(psi, c_psi, tau_psi)` for every grid point.
#[derive(Debug, Clone)]
pub struct ProcessGrid {
    points: Vec<(f64, f64, f64)>,
}

impl ProcessGrid {
    pub fn new(dist: &ReferenceDistribution, psi_grid: &[f64]) -> Result<Self> {
        let points = psi_grid
            .iter()
            .map(|&psi| {
                if !(0.0..=1.0).contains(&psi) {
                    return Err(FsError::domain("psi", psi, "needs 0 <= psi <= 1"));
                }
                let c = dist.abs_quantile_closed(psi)?;
                let tau = if psi == 1.0 { 1.0 } else { dist.tau(psi)? };
                Ok((psi, c, tau))
            })
            .collect::<Result<_>>()?;
        Ok(ProcessGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `G_n(c_psi) = n^{-1/2} sum {1(|e_i / sigma| <= c_psi) - psi}`.
    pub fn g(&self, errors: &[f64], sigma: f64) -> Vec<f64> {
        let root_n = (errors.len() as f64).sqrt();
        self.points
            .iter()
            .map(|&(psi, c, _)| {
                if psi == 0.0 {
                    return 0.0;
                }
                let s: f64 = errors
                    .iter()
                    .map(|e| if (e / sigma).abs() <= c { 1.0 - psi } else { -psi })
                    .sum();
                s / root_n
            })
            .collect()
    }

    /// `L_n(c_psi) = tau^{-1} n^{-1/2} sum [{(e_i/sigma)^2 - c^2} 1(..) - (tau - c^2 psi)]`.
    pub fn l(&self, errors: &[f64], sigma: f64) -> Vec<f64> {
        let root_n = (errors.len() as f64).sqrt();
        self.points
            .iter()
            .map(|&(psi, c, tau)| {
                if psi == 0.0 {
                    return 0.0;
                }
                let s: f64 = if c.is_infinite() {
                    errors.iter().map(|e| (e / sigma).powi(2) - 1.0).sum()
                } else {
                    let c2 = c * c;
                    let centre = tau - c2 * psi;
                    errors
                        .iter()
                        .map(|e| {
                            let u = e / sigma;
                            let inside = if u.abs() <= c { u * u - c2 } else { 0.0 };
                            inside - centre
                        })
                        .sum()
                };
                s / (tau * root_n)
            })
            .collect()
    }

    /// `K_n(c_psi) = sum N' x_i e_i 1(|e_i / sigma| <= c_psi)`, one vector per grid point.
    pub fn k(&self, errors: &[f64], sigma: f64, x: &Matrix, normalization: &[f64]) -> Vec<Vec<f64>> {
        let p = x.cols();
        self.points
            .iter()
            .map(|&(_, c, _)| {
                let mut acc = vec![0.0; p];
                for (i, e) in errors.iter().enumerate() {
                    if (e / sigma).abs() <= c {
                        for (j, a) in acc.iter_mut().enumerate() {
                            *a += normalization[j] * x[(i, j)] * e;
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

pub fn empirical_g(errors: &[f64], sigma: f64, dist: &ReferenceDistribution, psi_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(ProcessGrid::new(dist, psi_grid)?.g(errors, sigma))
}

pub fn empirical_l(errors: &[f64], sigma: f64, dist: &ReferenceDistribution, psi_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(ProcessGrid::new(dist, psi_grid)?.l(errors, sigma))
}

pub fn empirical_k(
    errors: &[f64],
    sigma: f64,
    x: &Matrix,
    normalization: &[f64],
    dist: &ReferenceDistribution,
    psi_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    Ok(ProcessGrid::new(dist, psi_grid)?.k(errors, sigma, x, normalization))
}
