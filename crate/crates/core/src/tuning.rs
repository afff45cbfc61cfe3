//! Simulation-based choice of `λ`.
//!
//! The pivot
//!
//! ```text
//! Λ̃ = max_{1≤k≤q} ‖ Σ_i (τ − B_i) Σ̂_k^{-1/2} x_{iG_k} / √p_k ‖₂,   B_i ~ Bernoulli(τ) i.i.d.
//! ```
//!
//! has a conditional law given the design that is free of unknowns, so its
//! `(1−θ)`-quantile can be simulated and `λ = c·Λ̃(1−θ)` used for the fit.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::GroupedDesign;
use crate::error::{GqrError, Result};
use crate::objective::CheckLoss;
use crate::{Matrix, Vector};

/// Draws simulated per batch matrix product.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotConfig {
    pub tau: f64,
    /// Tail level `θ ∈ (0, 1)`.
    pub theta: f64,
    /// Multiplier `c > 0`.
    pub c: f64,
    pub n_sim: usize,
    pub seed: u64,
}

impl PivotConfig {
    /// `θ = 0.1`, `c = 1.1`, 2000 draws.
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            theta: 0.1,
            c: 1.1,
            n_sim: 2000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        CheckLoss::new(self.tau)?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(GqrError::InvalidParameter(format!(
                "theta must lie in (0,1), got {}",
                self.theta
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(GqrError::InvalidParameter(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if self.n_sim == 0 {
            return Err(GqrError::InvalidParameter("n_sim must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningResult {
    pub draws: Vec<f64>,
    /// Empirical `(1−θ)`-quantile of the draws, "higher" rule.
    pub quantile_value: f64,
    pub lambda: f64,
    pub config: PivotConfig,
    pub warnings: Vec<String>,
}

/// Design columns with each block replaced by `X_{G_k} Σ̂_k^{-1/2} / √p_k`,
/// so that a pivot draw is `max_k ‖(Z'ξ)_{G_k}‖₂`.
#[derive(Debug, Clone)]
pub struct PivotDesign {
    normalized: Matrix,
    groups: Vec<Vec<usize>>,
}

impl PivotDesign {
    pub fn new(design: &GroupedDesign) -> Self {
        let x = design.x();
        let part = design.partition();
        let mut normalized = Matrix::zeros(x.nrows(), x.ncols());
        for k in 0..part.num_groups() {
            let idx = part.group(k);
            let cols = design.group_columns(k) * design.gram_sqrt_pinv(k) / (idx.len() as f64).sqrt();
            for (c, &j) in idx.iter().enumerate() {
                normalized.set_column(j, &cols.column(c));
            }
        }
        Self {
            normalized,
            groups: part.groups().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.normalized.nrows()
    }

    /// `max_k ‖Σ_i ξ_i z_{iG_k}‖₂` for a given sign vector.
    pub fn statistic(&self, xi: &[f64]) -> f64 {
        let s = self.normalized.tr_mul(&Vector::from_column_slice(xi));
        self.max_group_norm(s.as_slice())
    }

    fn max_group_norm(&self, s: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&j| s[j] * s[j]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// One pivot draw using `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> f64 {
        let xi = sign_draws(self.n(), tau, rng);
        self.statistic(&xi)
    }

    fn draw_batch(&self, tau: f64, seed: u64, range: std::ops::Range<usize>) -> Vec<f64> {
        let n = self.n();
        let b = range.len();
        let mut xi = Matrix::zeros(n, b);
        for (c, idx) in range.enumerate() {
            let mut rng = draw_rng(seed, idx as u64);
            for i in 0..n {
                xi[(i, c)] = sign_draw(tau, &mut rng);
            }
        }
        let s = self.normalized.tr_mul(&xi);
        (0..b).map(|c| self.max_group_norm(s.column(c).as_slice())).collect()
    }
}

#[inline]
fn sign_draw<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < tau {
        tau - 1.0
    } else {
        tau
    }
}

fn sign_draws<R: Rng + ?Sized>(n: usize, tau: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sign_draw(tau, rng)).collect()
}

/// RNG substream used for draw number `index` under `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One draw of `Λ̃` conditional on the design.
pub fn pivot_draw<R: Rng + ?Sized>(design: &GroupedDesign, tau: f64, rng: &mut R) -> f64 {
    PivotDesign::new(design).draw(tau, rng)
}

/// Smallest sample value whose empirical CDF is at least `level`.
pub fn quantile_higher(sorted: &[f64], level: f64) -> f64 {
    let m = sorted.len();
    let raw = level * m as f64;
    // guard against 0.9·2000 = 1800.0000000000002
    let j = ((raw - 1e-9 * m as f64).ceil() as usize).clamp(1, m);
    sorted[j - 1]
}

/// Simulates `n_sim` pivot draws and returns `λ = c·Λ̃(1−θ)`.
///
/// Draw `i` uses [`draw_rng`]`(seed, i)`, so the result does not depend on
/// how the work is split across threads.
pub fn select_lambda(design: &GroupedDesign, config: &PivotConfig) -> Result<TuningResult> {
    config.validate()?;
    let pd = PivotDesign::new(design);
    select_lambda_with(&pd, config)
}

/// [`select_lambda`] on a prebuilt [`PivotDesign`].
pub fn select_lambda_with(pd: &PivotDesign, config: &PivotConfig) -> Result<TuningResult> {
    config.validate()?;
    let starts: Vec<usize> = (0..config.n_sim).step_by(BATCH).collect();
    let draws: Vec<f64> = starts
        .par_iter()
        .map(|&s| pd.draw_batch(config.tau, config.seed, s..(s + BATCH).min(config.n_sim)))
        .collect::<Vec<_>>()
        .concat();
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    let quantile_value = quantile_higher(&sorted, 1.0 - config.theta);
    let mut warnings = Vec::new();
    if (config.n_sim as f64) * config.theta < 1.0 {
        warnings.push(format!(
            "n_sim·θ = {} < 1: the (1−θ)-quantile is poorly estimated",
            config.n_sim as f64 * config.theta
        ));
    }
    Ok(TuningResult {
        draws,
        quantile_value,
        lambda: config.c * quantile_value,
        config: config.clone(),
        warnings,
    })
}

/// `θ = max(e, q^{1/p_min})^{−t²}`.
pub fn theta_schedule(q: usize, p_min: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(GqrError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if q < 2 || p_min == 0 {
        return Err(GqrError::InvalidParameter("need q >= 2 and p_min >= 1".into()));
    }
    let base = std::f64::consts::E.max((q as f64).powf(1.0 / p_min as f64));
    Ok(base.powf(-t * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::GroupPartition;

    fn intercept_design(n: usize) -> GroupedDesign {
        GroupedDesign::new(
            Matrix::from_element(n, 1, 1.0),
            GroupPartition::from_sizes(&[1]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_signs() {
        let pd = PivotDesign::new(&intercept_design(7));
        // all B_i = 0 → ξ_i = τ
        assert!((pd.statistic(&[0.3; 7]) - 7.0 * 0.3).abs() < 1e-14);
    }

    #[test]
    fn single_observation_half() {
        let d = intercept_design(1);
        let mut rng = draw_rng(5, 0);
        for _ in 0..20 {
            assert!((pivot_draw(&d, 0.5, &mut rng) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_matches_single_draws() {
        let mut rng = draw_rng(1, 0);
        let x = Matrix::from_fn(9, 4, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 3]).unwrap()).unwrap();
        let cfg = PivotConfig {
            n_sim: 300,
            seed: 17,
            ..PivotConfig::new(0.4)
        };
        let res = select_lambda(&d, &cfg).unwrap();
        for i in [0usize, 1, 255, 256, 299] {
            let mut r = draw_rng(17, i as u64);
            let v = pivot_draw(&d, 0.4, &mut r);
            assert!((v - res.draws[i]).abs() < 1e-12);
        }
        assert!(res.draws.iter().all(|&v| v >= 0.0));
        assert!((res.lambda - 1.1 * res.quantile_value).abs() < 1e-15);
    }

    #[test]
    fn quantile_rule_limits() {
        let sorted = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(quantile_higher(&sorted, 0.9), 9.0);
        assert_eq!(quantile_higher(&sorted, 0.91), 10.0);
        assert_eq!(quantile_higher(&sorted, 1e-9), 1.0);
        assert_eq!(quantile_higher(&[4.0], 0.5), 4.0);
        let mut s = vec![0.0; 2000];
        for (i, v) in s.iter_mut().enumerate() {
            *v = i as f64;
        }
        assert_eq!(quantile_higher(&s, 1.0 - 0.1), 1799.0);
    }

    #[test]
    fn single_draw_and_theta_near_one() {
        let d = intercept_design(5);
        let one = select_lambda(
            &d,
            &PivotConfig {
                n_sim: 1,
                ..PivotConfig::new(0.5)
            },
        )
        .unwrap();
        assert_eq!(one.quantile_value, one.draws[0]);
        assert!(!one.warnings.is_empty());
        let cfg = PivotConfig {
            n_sim: 50,
            theta: 1.0 - 1e-12,
            ..PivotConfig::new(0.5)
        };
        let r = select_lambda(&d, &cfg).unwrap();
        let min = r.draws.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.quantile_value, min);
    }

    #[test]
    fn invalid_configs() {
        let d = intercept_design(3);
        for cfg in [
            PivotConfig {
                theta: 0.0,
                ..PivotConfig::new(0.5)
            },
            PivotConfig {
                theta: 1.0,
                ..PivotConfig::new(0.5)
            },
            PivotConfig {
                c: 0.0,
                ..PivotConfig::new(0.5)
            },
            PivotConfig {
                n_sim: 0,
                ..PivotConfig::new(0.5)
            },
            PivotConfig::new(1.5),
        ] {
            assert!(select_lambda(&d, &cfg).is_err());
        }
    }

    #[test]
    fn theta_schedule_values() {
        // q^{1/p_min} ≤ e
        assert!((theta_schedule(10, 5, 1.5).unwrap() - (-2.25f64).exp()).abs() < 1e-15);
        // q = e^{p_min} (rounded to an integer q, still below e ⇒ e^{-1})
        let v = theta_schedule(20, 3, 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        // t = 2, q = 100, p_min = 5: 100^{0.2} ≈ 2.5119 < e → e^{-4}
        let v = theta_schedule(100, 5, 2.0).unwrap();
        let by_logs = (-4.0 * 1.0f64.max(100f64.ln() / 5.0)).exp();
        assert!((v - by_logs).abs() < 1e-15);
        // q^{1/p_min} > e
        let v = theta_schedule(1000, 2, 1.0).unwrap();
        assert!((v - 1.0 / 1000f64.sqrt()).abs() < 1e-14);
        assert!(theta_schedule(10, 2, 2.0).unwrap() < theta_schedule(10, 2, 1.0).unwrap());
        assert!(theta_schedule(10, 2, 0.0).is_err());
    }
}
