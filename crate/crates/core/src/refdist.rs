//! Reference error distributions and the scalar functions of the trimming
//! proportion `psi` derived from them.
//!
//! For a symmetric unit-variance density `f` with distribution function `F`,
//! the absolute error `|e|` has distribution `G(c) = 2F(c) - 1`. Everything
//! the forward search needs is a function of the absolute quantile
//! `c_psi = G^{-1}(psi)`:
//!
//! * `tau_psi`, `kappa_psi`: second and fourth moments of `f` truncated to
//!   `[-c_psi, c_psi]`;
//! * `varsigma_psi^2 = tau_psi / psi`: variance of the truncated error, used to
//!   undo the truncation bias of subset variance estimates;
//! * `rho_psi = 2 c_psi f(c_psi) / psi`: the contraction factor of one forward step.
//!
//! Closed forms are provided for the standard normal and the unit-variance
//! scaled Student t. [`ReferenceDistribution::truncated_moment_numeric`] is an
//! independent quadrature route used to cross-check them.

use serde::{Deserialize, Serialize};

use crate::error::{FsError, Result};
use crate::quadrature;
use crate::special::{erf, erfc, t_abs_cdf, t_abs_pair, t_log_norm};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;

/// Trimming proportions at or above this value are clamped to it.
pub const PSI_CLAMP: f64 = 1.0 - 1e-12;

/// Absolute tolerance of the quadrature oracle.
pub const QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    StandardNormal,
    ScaledT,
}

/// A symmetric, unit-variance reference law for `e_i / sigma`.
///
/// The scaled t with `d` degrees of freedom has density
/// `f(c) = delta_d f_d(c delta_d)` with `delta_d^2 = d / (d - 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct ReferenceDistribution {
    kind: DistributionKind,
    dof: f64,
    delta: f64,
    log_norm: f64,
}

/// Serialized form of a [`ReferenceDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
}

impl TryFrom<DistributionSpec> for ReferenceDistribution {
    type Error = FsError;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match (spec.kind, spec.dof) {
            (DistributionKind::StandardNormal, _) => Ok(Self::standard_normal()),
            (DistributionKind::ScaledT, Some(d)) => Self::scaled_t(d),
            (DistributionKind::ScaledT, None) => Err(FsError::InvalidDistribution(
                "scaled t needs a dof".into(),
            )),
        }
    }
}

impl From<ReferenceDistribution> for DistributionSpec {
    fn from(dist: ReferenceDistribution) -> Self {
        DistributionSpec {
            kind: dist.kind,
            dof: dist.dof(),
        }
    }
}

/// Scalar functions of one trimming proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiFunctions {
    pub psi: f64,
    pub c: f64,
    pub tau: f64,
    pub kappa: f64,
    pub varsigma_sq: f64,
    pub rho: f64,
    /// Density at the quantile, `f(c_psi)`.
    pub density: f64,
    /// Set when `psi` was clamped to [`PSI_CLAMP`].
    pub clamped: bool,
}

impl ReferenceDistribution {
    pub fn standard_normal() -> Self {
        ReferenceDistribution {
            kind: DistributionKind::StandardNormal,
            dof: f64::INFINITY,
            delta: 1.0,
            log_norm: FRAC_1_SQRT_2PI.ln(),
        }
    }

    /// Unit-variance Student t with `dof > 2` degrees of freedom.
    pub fn scaled_t(dof: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 2.0) {
            return Err(FsError::InvalidDistribution(format!(
                "scaled t needs finite dof > 2 for unit variance, got {dof}"
            )));
        }
        Ok(ReferenceDistribution {
            kind: DistributionKind::ScaledT,
            dof,
            delta: (dof / (dof - 2.0)).sqrt(),
            log_norm: t_log_norm(dof),
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    /// Degrees of freedom; `None` for the normal.
    pub fn dof(&self) -> Option<f64> {
        match self.kind {
            DistributionKind::StandardNormal => None,
            DistributionKind::ScaledT => Some(self.dof),
        }
    }

    pub fn pdf(&self, c: f64) -> f64 {
        match self.kind {
            DistributionKind::StandardNormal => FRAC_1_SQRT_2PI * (-0.5 * c * c).exp(),
            DistributionKind::ScaledT => {
                let u = c * self.delta;
                let d = self.dof;
                self.delta * (self.log_norm - 0.5 * (d + 1.0) * (u * u / d).ln_1p()).exp()
            }
        }
    }

    /// `G(c) = P(|e| <= c)` for `c >= 0`.
    pub fn abs_cdf(&self, c: f64) -> f64 {
        self.abs_pair(c).0
    }

    /// `1 - G(c) = P(|e| > c)` for `c >= 0`.
    pub fn abs_sf(&self, c: f64) -> f64 {
        self.abs_pair(c).1
    }

    fn abs_pair(&self, c: f64) -> (f64, f64) {
        let c = c.abs();
        match self.kind {
            DistributionKind::StandardNormal => {
                let z = c * std::f64::consts::FRAC_1_SQRT_2;
                (erf(z), erfc(z))
            }
            DistributionKind::ScaledT => t_abs_pair(self.dof, c * self.delta),
        }
    }

    pub fn cdf(&self, c: f64) -> f64 {
        let (inside, outside) = self.abs_pair(c);
        if c >= 0.0 {
            if inside <= 0.5 {
                0.5 + 0.5 * inside
            } else {
                1.0 - 0.5 * outside
            }
        } else if inside <= 0.5 {
            0.5 - 0.5 * inside
        } else {
            0.5 * outside
        }
    }

    /// `F^{-1}(p)` for `0 < p < 1`, by bisection on the distribution function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(FsError::domain("p", p, "quantile needs 0 < p < 1"));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        if p > 0.5 {
            Ok(self.solve_abs(2.0 * p - 1.0, 2.0 * (1.0 - p)))
        } else {
            Ok(-self.solve_abs(1.0 - 2.0 * p, 2.0 * p))
        }
    }

    /// `c_psi = G^{-1}(psi) = F^{-1}((1 + psi) / 2)` for `0 <= psi < 1`.
    pub fn abs_quantile(&self, psi: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&psi) {
            return Err(FsError::domain(
                "psi",
                psi,
                "absolute quantile needs 0 <= psi < 1",
            ));
        }
        if psi == 0.0 {
            return Ok(0.0);
        }
        Ok(self.solve_abs(psi, 1.0 - psi))
    }

    /// Like [`abs_quantile`](Self::abs_quantile) but maps `psi = 1` to `+inf`.
    pub(crate) fn abs_quantile_closed(&self, psi: f64) -> Result<f64> {
        if psi == 1.0 {
            Ok(f64::INFINITY)
        } else {
            self.abs_quantile(psi)
        }
    }

    // Solves G(c) = inside (equivalently 1 - G(c) = outside) using whichever
    // side is smaller, so both ends of (0, 1) keep full relative accuracy.
    fn solve_abs(&self, inside: f64, outside: f64) -> f64 {
        let use_tail = outside < inside;
        let target = if use_tail { outside } else { inside };
        // residual > 0 means c is too small
        let residual = |c: f64| {
            let (g, s) = self.abs_pair(c);
            if use_tail {
                s - target
            } else {
                target - g
            }
        };
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        while residual(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick the endpoint with the smaller residual
        if residual(lo).abs() < residual(hi).abs() {
            lo
        } else {
            hi
        }
    }

    fn clamp_psi(psi: f64) -> Result<(f64, bool)> {
        if !(0.0..1.0).contains(&psi) || psi.is_nan() {
            return Err(FsError::domain("psi", psi, "needs 0 <= psi < 1"));
        }
        if psi > PSI_CLAMP {
            Ok((PSI_CLAMP, true))
        } else {
            Ok((psi, false))
        }
    }

    /// Truncated second moment `tau_psi`, closed form.
    pub fn tau(&self, psi: f64) -> Result<f64> {
        let (psi, _) = Self::clamp_psi(psi)?;
        if psi == 0.0 {
            return Ok(0.0);
        }
        let c = self.abs_quantile(psi)?;
        Ok(self.tau_at(psi, c))
    }

    fn tau_at(&self, psi: f64, c: f64) -> f64 {
        match self.kind {
            DistributionKind::StandardNormal => psi - 2.0 * c * self.pdf(c),
            DistributionKind::ScaledT => {
                let d = self.dof;
                (d - 1.0) * t_abs_cdf(d - 2.0, c) - (d - 2.0) * t_abs_cdf(d, c * self.delta)
            }
        }
    }

    fn kappa_at(&self, psi: f64, c: f64) -> Result<f64> {
        match self.kind {
            DistributionKind::StandardNormal => {
                Ok(3.0 * psi - 2.0 * (c * c * c + 3.0 * c) * self.pdf(c))
            }
            DistributionKind::ScaledT => {
                let d = self.dof;
                if d <= 4.0 {
                    return Err(FsError::UnsupportedDof { dof: d });
                }
                let delta_dm2 = ((d - 2.0) / (d - 4.0)).sqrt();
                let lead = (d - 1.0) * (d - 3.0) / ((d - 2.0) * (d - 4.0));
                let bracket = lead * t_abs_cdf(d - 4.0, c / delta_dm2)
                    - 2.0 * (d - 1.0) / (d - 2.0) * t_abs_cdf(d - 2.0, c)
                    + t_abs_cdf(d, c * self.delta);
                Ok((d - 2.0) * (d - 2.0) * bracket)
            }
        }
    }

    /// Truncated moments `(tau_psi, kappa_psi)` from their closed forms.
    ///
    /// `psi = 0` gives exact zeros; `psi` above [`PSI_CLAMP`] is clamped.
    pub fn truncated_moments(&self, psi: f64) -> Result<(f64, f64)> {
        let (psi, _) = Self::clamp_psi(psi)?;
        if let Some(d) = self.dof() {
            if d <= 4.0 {
                return Err(FsError::UnsupportedDof { dof: d });
            }
        }
        if psi == 0.0 {
            return Ok((0.0, 0.0));
        }
        let c = self.abs_quantile(psi)?;
        Ok((self.tau_at(psi, c), self.kappa_at(psi, c)?))
    }

    /// `int_{-c_psi}^{c_psi} u^order f(u) du` by adaptive quadrature.
    pub fn truncated_moment_numeric(&self, psi: f64, order: u32) -> Result<f64> {
        if order != 2 && order != 4 {
            return Err(FsError::InvalidConfig(format!(
                "moment order must be 2 or 4, got {order}"
            )));
        }
        let (psi, _) = Self::clamp_psi(psi)?;
        let c = self.abs_quantile(psi)?;
        let half = quadrature::integrate(
            |u| u.powi(order as i32) * self.pdf(u),
            0.0,
            c,
            0.5 * QUADRATURE_TOL,
        )?;
        Ok(2.0 * half)
    }

    /// `int u^order f(u) du` over the real line by quadrature.
    pub fn full_moment_numeric(&self, order: u32) -> Result<f64> {
        let half = quadrature::integrate_to_infinity(
            |u| u.powi(order as i32) * self.pdf(u),
            0.0,
            0.5 * QUADRATURE_TOL,
        )?;
        Ok(2.0 * half)
    }

    /// `varsigma_psi^2 = tau_psi / psi`, with the limit 0 at `psi = 0`.
    pub fn varsigma_sq(&self, psi: f64) -> Result<f64> {
        let (psi, _) = Self::clamp_psi(psi)?;
        if psi == 0.0 {
            return Ok(0.0);
        }
        Ok(self.tau(psi)? / psi)
    }

    /// `rho_psi = 2 c_psi f(c_psi) / psi`.
    pub fn rho(&self, psi: f64) -> Result<f64> {
        if !(psi > 0.0 && psi < 1.0) {
            return Err(FsError::domain("psi", psi, "rho needs 0 < psi < 1"));
        }
        let c = self.abs_quantile(psi)?;
        Ok(2.0 * c * self.pdf(c) / psi)
    }

    /// All scalar functions of `psi` for `0 < psi < 1`.
    pub fn psi_functions(&self, psi: f64) -> Result<PsiFunctions> {
        if !(psi > 0.0 && psi < 1.0) {
            return Err(FsError::domain("psi", psi, "needs 0 < psi < 1"));
        }
        let (psi, clamped) = Self::clamp_psi(psi)?;
        let c = self.abs_quantile(psi)?;
        let density = self.pdf(c);
        let tau = self.tau_at(psi, c);
        let kappa = self.kappa_at(psi, c)?;
        Ok(PsiFunctions {
            psi,
            c,
            tau,
            kappa,
            varsigma_sq: tau / psi,
            rho: 2.0 * c * density / psi,
            density,
            clamped,
        })
    }
}

impl Default for ReferenceDistribution {
    fn default() -> Self {
        Self::standard_normal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn normal() -> ReferenceDistribution {
        ReferenceDistribution::standard_normal()
    }

    fn t(d: f64) -> ReferenceDistribution {
        ReferenceDistribution::scaled_t(d).unwrap()
    }

    // Independent bisection on a quadrature-built distribution function.
    fn quadrature_quantile(dist: &ReferenceDistribution, p: f64) -> f64 {
        let cdf = |x: f64| 0.5 + integrate(|u| dist.pdf(u), 0.0, x, 1e-14).unwrap();
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn normal_density_at_zero() {
        let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((normal().pdf(0.0) - expected).abs() < 1e-16);
        assert!((normal().pdf(0.0) - 0.398_942).abs() < 1e-6);
    }

    #[test]
    fn densities_are_symmetric() {
        for dist in [normal(), t(5.0), t(30.0)] {
            for i in 0..50 {
                let c = 0.13 * i as f64;
                assert_eq!(dist.pdf(c), dist.pdf(-c));
            }
        }
    }

    #[test]
    fn scaled_t_density_at_zero() {
        // delta_5 f_5(0) with the t density normalized by quadrature
        let kernel = |u: f64| (1.0 + u * u / 5.0).powf(-3.0);
        let mass = 2.0 * crate::quadrature::integrate_to_infinity(kernel, 0.0, 1e-13).unwrap();
        let expected = (5.0f64 / 3.0).sqrt() / mass;
        assert!((t(5.0).pdf(0.0) - expected).abs() < 1e-11);
    }

    #[test]
    fn unit_variance_and_total_mass() {
        for dist in [normal(), t(5.0), t(7.0), t(9.0), t(30.0)] {
            let mass = dist.full_moment_numeric(0).unwrap();
            let var = dist.full_moment_numeric(2).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "{dist:?} mass {mass}");
            assert!((var - 1.0).abs() < 1e-8, "{dist:?} var {var}");
        }
    }

    #[test]
    fn cdf_basics() {
        for dist in [normal(), t(5.0)] {
            assert_eq!(dist.cdf(0.0), 0.5);
            let mut prev = 0.0;
            for i in -40..=40 {
                let v = dist.cdf(0.25 * i as f64);
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!((t(5.0).cdf(1e6) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normal_cdf_against_quadrature() {
        let c = 1.959964;
        let oracle = 0.5 + integrate(|u| normal().pdf(u), 0.0, c, 1e-14).unwrap();
        assert!((normal().cdf(c) - oracle).abs() < 1e-13, "{}", normal().cdf(c) - oracle);
        assert!((normal().cdf(c) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn quantiles() {
        assert_eq!(normal().quantile(0.5).unwrap(), 0.0);
        assert_eq!(t(5.0).quantile(0.5).unwrap(), 0.0);
        let q = normal().quantile(0.75).unwrap();
        assert!((q - quadrature_quantile(&normal(), 0.75)).abs() < 1e-8);
        assert!((q - 0.674_489_750_196_081_7).abs() < 1e-8);
        let qt = t(7.0).quantile(0.9).unwrap();
        assert!((qt - quadrature_quantile(&t(7.0), 0.9)).abs() < 1e-8);
        assert!(normal().quantile(0.0).is_err());
        assert!(normal().quantile(1.0).is_err());
        assert!(normal().quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for dist in [normal(), t(5.0), t(9.0)] {
            for i in 1..40 {
                let p = i as f64 / 40.0;
                let q = dist.quantile(p).unwrap();
                assert!((dist.cdf(q) - p).abs() < 1e-12, "{dist:?} p {p}");
            }
            for i in -30..=30 {
                let x = 0.17 * i as f64;
                let back = dist.quantile(dist.cdf(x)).unwrap();
                assert!((back - x).abs() < 1e-8, "{dist:?} x {x} back {back}");
            }
        }
    }

    #[test]
    fn abs_quantile_values() {
        for dist in [normal(), t(5.0)] {
            assert_eq!(dist.abs_quantile(0.0).unwrap(), 0.0);
            assert!(dist.abs_quantile(1.0).is_err());
            assert!(dist.abs_quantile(-0.1).is_err());
            let mut prev = -1.0;
            for i in 0..100 {
                let c = dist.abs_quantile(i as f64 / 100.0).unwrap();
                assert!(c > prev);
                prev = c;
            }
        }
        let c95 = normal().abs_quantile(0.95).unwrap();
        assert!((c95 - quadrature_quantile(&normal(), 0.975)).abs() < 1e-8);
        assert!((c95 - 1.959_963_984_540_054).abs() < 1e-8);
    }

    #[test]
    fn abs_cdf_round_trip() {
        for dist in [normal(), t(5.0), t(30.0)] {
            for i in 1..100 {
                let psi = i as f64 / 100.0;
                let c = dist.abs_quantile(psi).unwrap();
                assert!((2.0 * dist.cdf(c) - 1.0 - psi).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_at_zero() {
        for dist in [normal(), t(9.0)] {
            assert_eq!(dist.truncated_moments(0.0).unwrap(), (0.0, 0.0));
            assert_eq!(dist.truncated_moment_numeric(0.0, 2).unwrap(), 0.0);
        }
    }

    #[test]
    fn normal_closed_form_matches_quadrature_at_half() {
        let (tau, _) = normal().truncated_moments(0.5).unwrap();
        let numeric = normal().truncated_moment_numeric(0.5, 2).unwrap();
        assert!((tau - numeric).abs() < 1e-10);
    }

    #[test]
    fn scaled_t_kappa_matches_quadrature() {
        let (_, kappa) = t(7.0).truncated_moments(0.8).unwrap();
        let numeric = t(7.0).truncated_moment_numeric(0.8, 4).unwrap();
        assert!((kappa - numeric).abs() < 1e-8);
    }

    #[test]
    fn moment_limits() {
        let (tau, kappa) = normal().truncated_moments(1.0 - 1e-12).unwrap();
        assert!((tau - 1.0).abs() < 1e-6);
        assert!((kappa - 3.0).abs() < 1e-6);
        let (_, kappa) = t(9.0).truncated_moments(1.0 - 1e-12).unwrap();
        assert!((kappa - 4.2).abs() < 1e-4, "kappa {kappa}");
        // the t tail still holds part of the fourth moment at 0.9999
        let (_, kappa) = t(9.0).truncated_moments(0.9999).unwrap();
        assert!((kappa - 3.971_393_825_026_53).abs() < 1e-9, "kappa {kappa}");
    }

    #[test]
    fn low_dof_kappa_is_unsupported() {
        let dist = t(4.0);
        assert_eq!(
            dist.truncated_moments(0.5),
            Err(FsError::UnsupportedDof { dof: 4.0 })
        );
        assert!(dist.psi_functions(0.5).is_err());
        // tau is still available
        assert!(dist.tau(0.5).unwrap() > 0.0);
        assert!(ReferenceDistribution::scaled_t(2.0).is_err());
    }

    #[test]
    fn small_psi_ratio_tends_to_three() {
        let pf = normal().psi_functions(1e-5).unwrap();
        let ratio = pf.c * pf.c / pf.varsigma_sq;
        assert!((ratio - 3.0).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn gaussian_varsigma_identity() {
        let pf = normal().psi_functions(0.5).unwrap();
        let identity = 1.0 - 2.0 * pf.c * normal().pdf(pf.c) / 0.5;
        assert!((pf.varsigma_sq - identity).abs() < 1e-12);
    }

    #[test]
    fn rho_in_unit_interval() {
        for dist in [normal(), t(5.0)] {
            for i in 1..20 {
                let psi = 0.05 * i as f64;
                let rho = dist.rho(psi).unwrap();
                assert!(rho > 0.0 && rho < 1.0, "psi {psi} rho {rho}");
            }
            assert!(dist.rho(1.0 - 1e-9).unwrap() < 1e-3);
        }
    }

    #[test]
    fn psi_function_invariants() {
        for dist in [normal(), t(9.0)] {
            let mut prev_tau = 0.0;
            let mut prev_vs = 0.0;
            for i in 1..100 {
                let pf = dist.psi_functions(i as f64 / 100.0).unwrap();
                assert!(pf.tau >= prev_tau && pf.tau <= 1.0);
                assert!(pf.varsigma_sq > prev_vs);
                assert!(pf.varsigma_sq <= pf.c * pf.c);
                prev_tau = pf.tau;
                prev_vs = pf.varsigma_sq;
            }
        }
        let near_one = normal().psi_functions(1.0 - 1e-12).unwrap();
        assert!((near_one.varsigma_sq - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clamping_sets_flag() {
        let pf = normal().psi_functions(1.0 - 1e-14).unwrap();
        assert!(pf.clamped);
        assert_eq!(pf.psi, PSI_CLAMP);
        assert!(!normal().psi_functions(0.5).unwrap().clamped);
        assert!(normal().psi_functions(0.0).is_err());
        assert!(normal().psi_functions(1.0).is_err());
    }

    #[test]
    fn rejects_bad_moment_order() {
        assert!(normal().truncated_moment_numeric(0.5, 3).is_err());
    }
}
