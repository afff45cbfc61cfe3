//! Heteroscedastic sparse additive model on `[−1, 1]^d`.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::additive::{build_basis, BasisFamily, BasisSpec};
use crate::error::{GqrError, Result};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model2Config {
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub basis: BasisFamily,
    pub n_reps: usize,
    pub seed: u64,
    pub theta: f64,
    pub c: f64,
    /// Monte-Carlo draws for each `L₂` error.
    pub n_mc: usize,
}

impl Default for Model2Config {
    fn default() -> Self {
        Self {
            n: 400,
            d: 100,
            tau: 0.5,
            basis: BasisFamily::CubicBSpline { interior_knots: 4 },
            n_reps: 50,
            seed: 42,
            theta: 0.2,
            c: 1.0,
            n_mc: 10_000,
        }
    }
}

impl Model2Config {
    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(GqrError::InvalidParameter(format!("need d >= 3, got {}", self.d)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(GqrError::InvalidParameter(format!(
                "tau must lie in (0,1), got {}",
                self.tau
            )));
        }
        if self.n == 0 || self.n_mc == 0 {
            return Err(GqrError::InvalidParameter("need n >= 1 and n_mc >= 1".into()));
        }
        Ok(())
    }

    /// The configured family on the known support `[−1, 1]` of every covariate.
    pub fn basis_spec(&self) -> Result<BasisSpec> {
        build_basis(self.basis, &vec![(-1.0, 1.0); self.d])
    }
}

pub fn g1(z: f64) -> f64 {
    z
}

pub fn g2(z: f64) -> f64 {
    (std::f64::consts::PI * z).cos()
}

/// `e(e^z − e + e^{−1})`.
pub fn g3(z: f64) -> f64 {
    let e = std::f64::consts::E;
    e * (z.exp() - e + 1.0 / e)
}

/// Conditional `τ`-quantile of `y` given `z`: `0.1 + g₁(z₁) + g₂(z₂) + g₃(z₃)`.
pub fn g_true(z: &[f64]) -> f64 {
    0.1 + g1(z[0]) + g2(z[1]) + g3(z[2])
}

/// `σ(z) = √(0.7 + 0.1(z₁² + z₂² + z₃²))`.
pub fn sigma(z: &[f64]) -> f64 {
    (0.7 + 0.1 * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2])).sqrt()
}

/// One draw from `Unif[−1, 1]^d`.
pub fn sample_z<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[derive(Debug, Clone)]
pub struct Model2Data {
    pub z: Matrix,
    pub y: Vec<f64>,
}

/// `y = g(z) + 0.5σ(z)e` with `e − Φ^{−1}(τ) ~ N(0, 1)`, so the `τ`-quantile
/// of `e` is 0 and that of `y | z` is [`g_true`].
pub fn gen_model2<R: Rng + ?Sized>(config: &Model2Config, rng: &mut R) -> Result<Model2Data> {
    config.validate()?;
    let shift = Normal::standard().inverse_cdf(config.tau);
    let mut z = Matrix::zeros(config.n, config.d);
    let mut y = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let zi = sample_z(config.d, rng);
        let noise: f64 = StandardNormal.sample(rng);
        y.push(g_true(&zi) + 0.5 * sigma(&zi) * (shift + noise));
        for (k, v) in zi.into_iter().enumerate() {
            z[(i, k)] = v;
        }
    }
    Ok(Model2Data { z, y })
}
