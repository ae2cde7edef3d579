//! Asymptotic variances and pointwise confidence bands for forward plots.
//!
//! The forward residual and the bias-corrected scale are driven by two
//! Gaussian processes: the empirical process of the absolute errors, with
//! variance `psi (1 - psi)`, and the truncated-variance process `L`. Their
//! variances and covariance combine into `omega_psi`, the asymptotic variance
//! of `sqrt(n) (z_psi / sigma_corr - c_psi)`.

use serde::{Deserialize, Serialize};

use crate::error::{FsError, Result};
use crate::linalg::{Matrix, PivotedCholesky};
use crate::refdist::{PsiFunctions, ReferenceDistribution};

/// Number of points in the default band grid.
pub const DEFAULT_GRID_POINTS: usize = 181;
pub const DEFAULT_GRID_MIN: f64 = 0.05;
pub const DEFAULT_GRID_MAX: f64 = 0.95;

/// Which forward statistic a band describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandStatistic {
    /// `z_psi / sigma_psi` with the raw subset scale.
    ZOverSigmaHat,
    /// `z_psi / sigma_corr_psi` with the bias-corrected scale.
    ZOverSigmaCorr,
    /// `z_psi / (sigma varsigma_psi)` with the true scale.
    ZOverKnownSigma,
    /// One coefficient error `beta_psi - beta`, for unit `sigma` and `Sigma = 1`.
    BetaComponent,
}

/// Pointwise asymptotic mean and quantile curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandCurve {
    pub statistic: BandStatistic,
    pub n: usize,
    pub level: f64,
    pub psi_grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `psi (1 - psi)`.
pub fn var_g(psi: f64) -> f64 {
    psi * (1.0 - psi)
}

/// Variance of `L(c_psi)` from the scalar inputs.
pub fn var_l_from(psi: f64, c: f64, tau: f64, kappa: f64) -> f64 {
    let c2 = c * c;
    (kappa - tau * tau + c2 * (1.0 - psi) * (c2 * psi - 2.0 * tau)) / (tau * tau)
}

/// Covariance of `G(c_psi)` and `L(c_psi)` from the scalar inputs.
pub fn cov_gl_from(psi: f64, c: f64, tau: f64) -> f64 {
    (tau - c * c * psi) * (1.0 - psi) / tau
}

fn interior(dist: &ReferenceDistribution, psi: f64) -> Result<PsiFunctions> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(FsError::domain("psi", psi, "needs 0 < psi < 1"));
    }
    dist.psi_functions(psi)
}

pub fn var_l(dist: &ReferenceDistribution, psi: f64) -> Result<f64> {
    let pf = interior(dist, psi)?;
    Ok(var_l_from(pf.psi, pf.c, pf.tau, pf.kappa))
}

pub fn cov_gl(dist: &ReferenceDistribution, psi: f64) -> Result<f64> {
    let pf = interior(dist, psi)?;
    Ok(cov_gl_from(pf.psi, pf.c, pf.tau))
}

fn omega_from(pf: &PsiFunctions) -> f64 {
    let cf = pf.c * pf.density;
    let vg = var_g(pf.psi);
    let cov = cov_gl_from(pf.psi, pf.c, pf.tau);
    let vl = var_l_from(pf.psi, pf.c, pf.tau, pf.kappa);
    let two_f = 2.0 * pf.density;
    (vg + 2.0 * cf * cov + cf * cf * vl) / (two_f * two_f)
}

/// `omega_psi`: asymptotic variance of `sqrt(n) (z_psi / sigma_corr - c_psi)`.
pub fn omega(dist: &ReferenceDistribution, psi: f64) -> Result<f64> {
    Ok(omega_from(&interior(dist, psi)?))
}

/// `omega_psi` assembled as `v' C v / (2 f)^2` with `v = (1, c f)` and `C`
/// the covariance matrix of `(G, L)`.
pub fn omega_quadratic_form(dist: &ReferenceDistribution, psi: f64) -> Result<f64> {
    let pf = interior(dist, psi)?;
    let cov = [
        [var_g(pf.psi), cov_gl_from(pf.psi, pf.c, pf.tau)],
        [
            cov_gl_from(pf.psi, pf.c, pf.tau),
            var_l_from(pf.psi, pf.c, pf.tau, pf.kappa),
        ],
    ];
    let v = [1.0, pf.c * pf.density];
    let mut q = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            q += v[i] * cov[i][j] * v[j];
        }
    }
    Ok(q / (4.0 * pf.density * pf.density))
}

/// Evenly spaced grid on `[min, max]` with `points` entries, inside `(0, 1)`.
pub fn psi_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && min < 1.0) {
        return Err(FsError::domain("psi_min", min, "needs 0 < psi_min < 1"));
    }
    if !(max > 0.0 && max < 1.0) {
        return Err(FsError::domain("psi_max", max, "needs 0 < psi_max < 1"));
    }
    if points == 0 || (points > 1 && max <= min) {
        return Err(FsError::InvalidConfig(format!(
            "grid needs points >= 1 and psi_min < psi_max, got [{min}, {max}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { max } else { min + step * k as f64 })
        .collect())
}

pub fn default_psi_grid() -> Vec<f64> {
    psi_grid(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS).expect("valid default grid")
}

/// Two-sided standard normal critical value for `level`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(FsError::domain("level", level, "needs 0 < level < 1"));
    }
    ReferenceDistribution::standard_normal().quantile(0.5 + 0.5 * level)
}

/// Asymptotic mean and standard deviation of a statistic at one `psi`, for sample size `n`.
pub fn mean_and_sd(dist: &ReferenceDistribution, statistic: BandStatistic, psi: f64, n: usize) -> Result<(f64, f64)> {
    let pf = interior(dist, psi)?;
    let root_n = (n as f64).sqrt();
    let varsigma = pf.varsigma_sq.sqrt();
    Ok(match statistic {
        BandStatistic::ZOverSigmaHat => (pf.c / varsigma, omega_from(&pf).sqrt() / (root_n * varsigma)),
        BandStatistic::ZOverSigmaCorr => (pf.c, omega_from(&pf).sqrt() / root_n),
        BandStatistic::ZOverKnownSigma => {
            let sd = var_g(pf.psi).sqrt() / (2.0 * pf.density);
            (pf.c / varsigma, sd / (root_n * varsigma))
        }
        BandStatistic::BetaComponent => {
            let denom = pf.psi - 2.0 * pf.c * pf.density;
            ((0.0), (pf.tau / (denom * denom)).sqrt() / root_n)
        }
    })
}

/// Pointwise band on an interior `psi` grid at two-sided `level` for sample size `n`.
pub fn band(
    dist: &ReferenceDistribution,
    statistic: BandStatistic,
    psi_grid: &[f64],
    n: usize,
    level: f64,
) -> Result<BandCurve> {
    if n == 0 {
        return Err(FsError::domain("n", 0.0, "needs n >= 1"));
    }
    let z = critical_value(level)?;
    if psi_grid.is_empty() {
        return Err(FsError::InvalidConfig("empty psi grid".into()));
    }
    for w in psi_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(FsError::InvalidConfig("psi grid must be increasing".into()));
        }
    }
    let mut mean = Vec::with_capacity(psi_grid.len());
    let mut lower = Vec::with_capacity(psi_grid.len());
    let mut upper = Vec::with_capacity(psi_grid.len());
    for &psi in psi_grid {
        let (mu, sd) = mean_and_sd(dist, statistic, psi, n)?;
        mean.push(mu);
        lower.push(mu - z * sd);
        upper.push(mu + z * sd);
    }
    Ok(BandCurve {
        statistic,
        n,
        level,
        psi_grid: psi_grid.to_vec(),
        mean,
        lower,
        upper,
    })
}

/// `tau_psi sigma^2 / (psi - 2 c_psi f(c_psi))^2 * Sigma^{-1}`.
pub fn beta_asymptotic_variance(
    dist: &ReferenceDistribution,
    psi: f64,
    sigma: f64,
    sigma_matrix: &Matrix,
) -> Result<Matrix> {
    let pf = interior(dist, psi)?;
    if sigma_matrix.rows() != sigma_matrix.cols() {
        return Err(FsError::InvalidConfig("Sigma must be square".into()));
    }
    let chol = PivotedCholesky::new(sigma_matrix).ok_or(FsError::RankDeficient {
        subset_size: sigma_matrix.rows(),
    })?;
    let denom = pf.psi - 2.0 * pf.c * pf.density;
    let mut out = chol.inverse();
    out.scale(pf.tau * sigma * sigma / (denom * denom));
    Ok(out)
}
