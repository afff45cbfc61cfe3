//! Linear model with AR(1)-correlated Gaussian covariates and grouped signal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::{GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::Matrix;

/// Where the six nonzero coefficients sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Intercept and the whole first covariate group.
    One,
    /// Intercept and the first coefficient of each of the first five groups.
    Two,
}

impl TryFrom<u8> for Case {
    type Error = GqrError;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            _ => Err(GqrError::InvalidParameter(format!("case must be 1 or 2, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model1Config {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub group_size: usize,
    pub tau: f64,
    pub case: Case,
    /// Correlation `ρ` in `corr(x_j, x_k) = ρ^{|j−k|}`.
    pub rho: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub theta: f64,
    pub c: f64,
}

impl Default for Model1Config {
    fn default() -> Self {
        Self {
            n: 200,
            p: 501,
            q: 101,
            group_size: 5,
            tau: 0.5,
            case: Case::One,
            rho: 0.25,
            n_reps: 100,
            seed: 42,
            theta: 0.1,
            c: 1.1,
        }
    }
}

impl Model1Config {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 || self.group_size == 0 || self.p != 1 + (self.q - 1) * self.group_size {
            return Err(GqrError::InvalidParameter(format!(
                "need p = 1 + (q−1)·group_size, got p={}, q={}, group_size={}",
                self.p, self.q, self.group_size
            )));
        }
        let need = match self.case {
            Case::One => 1,
            Case::Two => 5,
        };
        if self.q - 1 < need || (self.case == Case::One && self.group_size != 5) {
            return Err(GqrError::InvalidParameter(
                "case 1 needs groups of size 5, case 2 needs at least 5 groups".into(),
            ));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(GqrError::InvalidParameter(format!(
                "tau must lie in (0,1), got {}",
                self.tau
            )));
        }
        if !(self.rho.abs() < 1.0) || self.n == 0 {
            return Err(GqrError::InvalidParameter("need |rho| < 1 and n >= 1".into()));
        }
        Ok(())
    }

    pub fn partition(&self) -> Result<GroupPartition> {
        GroupPartition::uniform(self.q - 1, self.group_size)
    }

    pub fn beta_bar(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.p];
        b[0] = 1.0;
        match self.case {
            Case::One => b[1..6].fill(1.0),
            Case::Two => (0..5).for_each(|g| b[1 + g * self.group_size] = 1.0),
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct Model1Data {
    pub design: GroupedDesign,
    pub y: Vec<f64>,
    pub beta_bar: Vec<f64>,
}

/// Multiplies i.i.d. standard normals by the lower Cholesky factor of the
/// AR(1) correlation matrix, which has the closed form
/// `L_{j0} = ρ^j`, `L_{jk} = ρ^{j−k}√(1−ρ²)` for `1 ≤ k ≤ j`; applied as the
/// recursion `x_j = ρ x_{j−1} + √(1−ρ²) ε_j`.
pub fn ar1_row<R: Rng + ?Sized>(len: usize, rho: f64, rng: &mut R, out: &mut [f64]) {
    let s = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (j, o) in out.iter_mut().take(len).enumerate() {
        let e: f64 = StandardNormal.sample(rng);
        prev = if j == 0 { e } else { rho * prev + s * e };
        *o = prev;
    }
}

/// One sample: design with intercept, response and the true coefficients.
pub fn gen_model1<R: Rng + ?Sized>(config: &Model1Config, rng: &mut R) -> Result<Model1Data> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let beta_bar = config.beta_bar();
    let shift = Normal::standard().inverse_cdf(config.tau);
    let mut x = Matrix::zeros(n, p);
    let mut row = vec![0.0; p - 1];
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        ar1_row(p - 1, config.rho, rng, &mut row);
        x[(i, 0)] = 1.0;
        let mut yi = beta_bar[0];
        for j in 0..p - 1 {
            x[(i, j + 1)] = row[j];
            yi += beta_bar[j + 1] * row[j];
        }
        let e: f64 = StandardNormal.sample(rng);
        y.push(yi + shift + e);
    }
    let design = GroupedDesign::new(x, config.partition()?)?;
    Ok(Model1Data { design, y, beta_bar })
}
