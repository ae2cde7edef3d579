//! Data-generating processes for the regressor regimes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{FsError, Result};
use crate::forward_search::Dataset;
use crate::linalg::{dot, Matrix};
use crate::refdist::{DistributionKind, ReferenceDistribution};

use super::replicate_rng;

/// Regressor regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "coef")]
pub enum Regime {
    /// `x_i = 1`; requires `dim x = 1`.
    LocationScale,
    /// Stationary AR(1) columns with N(0, 1) innovations, started from the
    /// stationary law. With `dim x > 1` the first column is a constant.
    StationaryAr1(f64),
    /// `x_i = (1, i)'`; requires `dim x = 2`.
    LinearTrend,
    /// `x_i = sum_{s < i} e_s` built from the model errors; with `dim x = 2`
    /// a constant is prepended.
    RandomWalk,
}

/// Full description of a simulated regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub regime: Regime,
    pub n: usize,
    pub dim_x: usize,
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub error_dist: ReferenceDistribution,
}

impl DgpSpec {
    /// Location-scale model with `beta = 0` and unit scale.
    pub fn location(n: usize, error_dist: ReferenceDistribution) -> Self {
        DgpSpec {
            regime: Regime::LocationScale,
            n,
            dim_x: 1,
            beta: vec![0.0],
            sigma: 1.0,
            error_dist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FsError::InvalidConfig(msg));
        if self.beta.len() != self.dim_x {
            return bad(format!(
                "beta has {} entries, dim x is {}",
                self.beta.len(),
                self.dim_x
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.n <= self.dim_x + 1 {
            return bad(format!("n = {} too small for dim x = {}", self.n, self.dim_x));
        }
        match self.regime {
            Regime::LocationScale if self.dim_x != 1 => {
                bad("location-scale regime needs dim x = 1".into())
            }
            Regime::StationaryAr1(a) if !(a.abs() < 1.0) => {
                bad(format!("AR(1) coefficient must satisfy |a| < 1, got {a}"))
            }
            Regime::StationaryAr1(_) if self.dim_x == 0 => bad("dim x must be positive".into()),
            Regime::LinearTrend if self.dim_x != 2 => bad("linear trend regime needs dim x = 2".into()),
            Regime::RandomWalk if !(1..=2).contains(&self.dim_x) => {
                bad("random walk regime needs dim x of 1 or 2".into())
            }
            _ => Ok(()),
        }
    }

    /// Diagonal of the normalization matrix `N`.
    pub fn normalization(&self) -> Vec<f64> {
        let n = self.n as f64;
        let root = n.sqrt().recip();
        match self.regime {
            Regime::LocationScale | Regime::StationaryAr1(_) => vec![root; self.dim_x],
            Regime::LinearTrend => vec![root, n.powf(-1.5)],
            Regime::RandomWalk => {
                if self.dim_x == 1 {
                    vec![1.0 / n]
                } else {
                    vec![root, 1.0 / n]
                }
            }
        }
    }
}

/// Draws `n` errors `e_i / sigma` from a reference law.
pub fn draw_standardized(dist: &ReferenceDistribution, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match dist.kind() {
        DistributionKind::StandardNormal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        DistributionKind::ScaledT => {
            let d = dist.dof().expect("scaled t has dof");
            let t = StudentT::new(d).expect("dof validated at construction");
            let scale = ((d - 2.0) / d).sqrt();
            (0..n).map(|_| t.sample(rng) * scale).collect()
        }
    }
}

/// Generates a dataset from an RNG stream.
pub fn generate_with(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let p = spec.dim_x;
    let errors: Vec<f64> = draw_standardized(&spec.error_dist, n, rng)
        .into_iter()
        .map(|e| e * spec.sigma)
        .collect();

    let mut data = vec![0.0; n * p];
    match spec.regime {
        Regime::LocationScale => data.iter_mut().for_each(|v| *v = 1.0),
        Regime::StationaryAr1(a) => {
            let first = if p > 1 { 1 } else { 0 };
            for i in 0..n {
                for j in 0..first {
                    data[i * p + j] = 1.0;
                }
            }
            let stationary_sd = (1.0 - a * a).sqrt().recip();
            for j in first..p {
                let mut prev = stationary_sd * rng.sample::<f64, _>(StandardNormal);
                data[j] = prev;
                for i in 1..n {
                    prev = a * prev + rng.sample::<f64, _>(StandardNormal);
                    data[i * p + j] = prev;
                }
            }
        }
        Regime::LinearTrend => {
            for i in 0..n {
                data[i * 2] = 1.0;
                data[i * 2 + 1] = (i + 1) as f64;
            }
        }
        Regime::RandomWalk => {
            let col = p - 1;
            let mut level = 0.0;
            for i in 0..n {
                if p == 2 {
                    data[i * 2] = 1.0;
                }
                data[i * p + col] = level;
                level += errors[i];
            }
        }
    }
    let x = Matrix::from_row_major(n, p, data);
    let y = (0..n).map(|i| dot(x.row(i), &spec.beta) + errors[i]).collect();
    Ok(Dataset::new(y, x)?.with_truth(spec.beta.clone(), spec.sigma, errors))
}

/// Generates a dataset deterministically from `seed`.
pub fn generate(spec: &DgpSpec, seed: u64) -> Result<Dataset> {
    generate_with(spec, &mut replicate_rng(seed, 0))
}

/// `Sigma_n = N' (sum x_i x_i') N` for a dataset and diagonal normalization.
pub fn normalized_gram(x: &Matrix, normalization: &[f64]) -> Matrix {
    let p = x.cols();
    let mut g = Matrix::zeros(p, p);
    for i in 0..x.rows() {
        let row = x.row(i);
        for a in 0..p {
            for b in 0..p {
                g[(a, b)] += row[a] * row[b] * normalization[a] * normalization[b];
            }
        }
    }
    g
}

/// Rows `N' x_i`.
pub fn normalized_regressors(x: &Matrix, normalization: &[f64]) -> Matrix {
    let p = x.cols();
    let data = (0..x.rows())
        .flat_map(|i| x.row(i).iter().zip(normalization).map(|(v, s)| v * s).collect::<Vec<_>>())
        .collect();
    Matrix::from_row_major(x.rows(), p, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(regime: Regime, dim_x: usize) -> DgpSpec {
        DgpSpec {
            regime,
            n: 100,
            dim_x,
            beta: vec![0.5; dim_x],
            sigma: 2.0,
            error_dist: ReferenceDistribution::standard_normal(),
        }
    }

    #[test]
    fn location_regressors_are_ones() {
        let ds = generate(&spec(Regime::LocationScale, 1), 3).unwrap();
        assert!(ds.x().as_slice().iter().all(|&v| v == 1.0));
        assert_eq!(ds.n(), 100);
    }

    #[test]
    fn linear_trend_regressors() {
        let ds = generate(&spec(Regime::LinearTrend, 2), 3).unwrap();
        for i in 0..100 {
            assert_eq!(ds.x().row(i), &[1.0, (i + 1) as f64]);
        }
    }

    #[test]
    fn random_walk_accumulates_errors() {
        let ds = generate(&spec(Regime::RandomWalk, 1), 5).unwrap();
        let e = ds.errors().unwrap();
        assert_eq!(ds.x()[(0, 0)], 0.0);
        let mut level = 0.0;
        for i in 0..100 {
            assert!((ds.x()[(i, 0)] - level).abs() < 1e-12);
            level += e[i];
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let s = spec(Regime::StationaryAr1(0.5), 2);
        let a = generate(&s, 11).unwrap();
        let b = generate(&s, 11).unwrap();
        let c = generate(&s, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y(), c.y());
        let bits = |d: &Dataset| d.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn response_matches_model() {
        let ds = generate(&spec(Regime::StationaryAr1(0.3), 3), 1).unwrap();
        let e = ds.errors().unwrap();
        for i in 0..ds.n() {
            let fitted = dot(ds.x().row(i), ds.true_beta().unwrap());
            assert!((ds.y()[i] - fitted - e[i]).abs() < 1e-12);
        }
        assert!(ds.x().as_slice().iter().step_by(3).all(|&v| v == 1.0));
    }

    #[test]
    fn scaled_t_errors_have_unit_variance() {
        let dist = ReferenceDistribution::scaled_t(9.0).unwrap();
        let mut rng = replicate_rng(2, 0);
        let draws = draw_standardized(&dist, 200_000, &mut rng);
        let var = draws.iter().map(|e| e * e).sum::<f64>() / draws.len() as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(Regime::LocationScale, 2).validate().is_err());
        assert!(spec(Regime::StationaryAr1(1.0), 1).validate().is_err());
        assert!(spec(Regime::LinearTrend, 1).validate().is_err());
        let mut s = spec(Regime::LocationScale, 1);
        s.sigma = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn normalization_by_regime() {
        let n = 100.0f64;
        assert_eq!(spec(Regime::LinearTrend, 2).normalization(), vec![0.1, n.powf(-1.5)]);
        assert_eq!(spec(Regime::RandomWalk, 1).normalization(), vec![0.01]);
        let ds = generate(&spec(Regime::LinearTrend, 2), 0).unwrap();
        let xn = normalized_regressors(ds.x(), &spec(Regime::LinearTrend, 2).normalization());
        // sqrt(n) N' x_i = (1, i / n)
        assert!((xn[(99, 1)] * 10.0 - 1.0).abs() < 1e-12);
    }
}
