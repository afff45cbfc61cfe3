//! Heuristic checks of the quantities the error bounds are stated in.
//!
//! None of these feed back into fitting. The restricted eigenvalue estimates
//! come from random sampling of the cone and are only one-sided bounds.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{sqrt_psd, GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::tuning::draw_rng;
use crate::{Matrix, Vector};

/// Sampling setup for [`estimate_restricted_eigs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSampleConfig {
    /// Cone constant, must exceed 3.
    pub c0: f64,
    /// Zero-based active groups; must contain the intercept group 0.
    pub active: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
}

impl ConeSampleConfig {
    pub fn validate(&self, partition: &GroupPartition) -> Result<()> {
        if !(self.c0 > 3.0) {
            return Err(GqrError::InvalidParameter(format!("c0 must exceed 3, got {}", self.c0)));
        }
        if !self.active.contains(&0) {
            return Err(GqrError::InvalidParameter(
                "active set must contain the intercept group".into(),
            ));
        }
        if let Some(&k) = self.active.iter().find(|&&k| k >= partition.num_groups()) {
            return Err(GqrError::InvalidParameter(format!("active group {k} out of range")));
        }
        if self.n_samples == 0 {
            return Err(GqrError::InvalidParameter("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedEigs {
    /// Smallest sampled `‖G^{1/2}α‖₂`; an upper bound on the true minimum.
    pub phi_min: f64,
    /// Largest sampled value; a lower bound on the true maximum.
    pub phi_max: f64,
}

/// One unit vector of the cone `Σ_{k∉S} √p_k‖α_k‖ ≤ c₀ Σ_{k∈S} √p_k‖α_k‖`:
/// Gaussian blocks everywhere, the inactive part rescaled so that it uses a
/// uniform fraction of the cone budget.
pub fn sample_cone_vector<R: Rng + ?Sized>(
    partition: &GroupPartition,
    active: &[usize],
    c0: f64,
    rng: &mut R,
) -> Vec<f64> {
    let p = partition.p();
    let mut alpha: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let weighted = |a: &[f64], inside: bool| -> f64 {
        (0..partition.num_groups())
            .filter(|k| active.contains(k) == inside)
            .map(|k| (partition.group(k).len() as f64).sqrt() * partition.block_norm(a, k))
            .sum()
    };
    let on = weighted(&alpha, true);
    let off = weighted(&alpha, false);
    let slack: f64 = rng.random();
    if off > 0.0 {
        let scale = slack * c0 * on / off;
        for k in (0..partition.num_groups()).filter(|k| !active.contains(k)) {
            for &j in partition.group(k) {
                alpha[j] *= scale;
            }
        }
    }
    let norm = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    alpha.iter_mut().for_each(|v| *v /= norm);
    alpha
}

/// Range of `‖gram^{1/2} α‖₂ = √(α' gram α)` over sampled cone directions.
/// Sample `i` uses substream `i` of the seed, so a longer run only ever
/// lowers `phi_min` and raises `phi_max`.
pub fn estimate_restricted_eigs(
    gram: &Matrix,
    partition: &GroupPartition,
    config: &ConeSampleConfig,
) -> Result<RestrictedEigs> {
    config.validate(partition)?;
    if gram.nrows() != partition.p() || gram.ncols() != partition.p() {
        return Err(GqrError::DimensionMismatch("gram must be p×p".into()));
    }
    // symmetry and PSD checks
    sqrt_psd(gram)?;
    let values: Vec<f64> = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(config.seed, i as u64);
            let a = Vector::from_vec(sample_cone_vector(partition, &config.active, config.c0, &mut rng));
            a.dot(&(gram * &a)).max(0.0).sqrt()
        })
        .collect();
    Ok(RestrictedEigs {
        phi_min: values.iter().copied().fold(f64::INFINITY, f64::min),
        phi_max: values.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega0 {
    pub holds: bool,
    /// `max_{k≥1} ‖Σ̂_k^{1/2} − I‖` in operator norm.
    pub max_deviation: f64,
}

/// Checks `‖Σ̂_k^{1/2} − I_{p_k}‖ ≤ 0.5` for every non-intercept group.
pub fn omega0_check(design: &GroupedDesign) -> Omega0 {
    let max_deviation = (1..design.num_groups())
        .map(|k| {
            let s = design.gram_sqrt(k);
            let dev = s - Matrix::identity(s.nrows(), s.ncols());
            dev.symmetric_eigenvalues().amax()
        })
        .fold(0.0, f64::max);
    Omega0 {
        holds: max_deviation <= 0.5,
        max_deviation,
    }
}

/// `(4√2 + Δ + A₁)√n + A₂√(n log q / p_min)`.
pub fn theoretical_lambda(n: usize, q: usize, p_min: usize, a1: f64, a2: f64, delta: f64) -> Result<f64> {
    if n == 0 || q < 2 || p_min == 0 {
        return Err(GqrError::InvalidParameter("need n >= 1, q >= 2, p_min >= 1".into()));
    }
    if [a1, a2, delta].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(GqrError::InvalidParameter(
            "A1, A2 and Delta must be nonnegative".into(),
        ));
    }
    let n = n as f64;
    Ok((4.0 * 2f64.sqrt() + delta + a1) * n.sqrt() + a2 * (n * (q as f64).ln() / p_min as f64).sqrt())
}
