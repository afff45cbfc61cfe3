//! Selection counts, estimation error and the cone check.

use serde::{Deserialize, Serialize};

use crate::design::GroupPartition;
use crate::error::{GqrError, Result};

/// `1e-6·max(1, ‖β‖∞)`.
pub fn coef_zero_tol(beta: &[f64]) -> f64 {
    1e-6 * beta.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Per-replication metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    /// Selected groups, intercept group always included.
    pub nsg: usize,
    /// Selected variables.
    pub nsv: usize,
    /// `‖β̂ − β̄‖₂` (linear model) or `‖ĝ − g‖_{L₂}` (additive model).
    pub error: f64,
}

/// Linear-model metrics against the true coefficients. `partition` is the
/// grouping used for NSG even when the fit used another one (e.g. ℓ₁);
/// NSV counts coefficients among all `p`, the intercept included.
pub fn linear_metrics(beta: &[f64], beta_bar: &[f64], partition: &GroupPartition) -> Result<RepMetrics> {
    if beta.len() != beta_bar.len() || beta.len() != partition.p() {
        return Err(GqrError::DimensionMismatch("beta, truth and partition disagree".into()));
    }
    let tol = coef_zero_tol(beta);
    let nsv = beta.iter().filter(|v| v.abs() > tol).count();
    let nsg = 1
        + (1..partition.num_groups())
            .filter(|&k| partition.group(k).iter().any(|&j| beta[j].abs() > tol))
            .count();
    let error = beta
        .iter()
        .zip(beta_bar)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(RepMetrics { nsg, nsv, error })
}

/// Additive-model metrics: NSV counts covariates (not coefficients) with a
/// nonzero block, NSG = NSV + 1.
pub fn additive_metrics(beta: &[f64], m: usize, l2_error: f64) -> RepMetrics {
    let tol = coef_zero_tol(beta);
    let d = (beta.len() - 1) / m;
    let nsv = (0..d)
        .filter(|&k| beta[1 + k * m..1 + (k + 1) * m].iter().any(|v| v.abs() > tol))
        .count();
    RepMetrics {
        nsg: nsv + 1,
        nsv,
        error: l2_error,
    }
}

/// Both sides of `Σ_{k∉S̄} √p_k ‖α_{G_k}‖₂ ≤ c₀ Σ_{k∈S̄} √p_k ‖α_{G_k}‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub in_cone: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates the cone inequality at `α = β̂ − β̄`, with `S̄` the groups on
/// which `β̄` is nonzero together with the intercept group.
pub fn cone_diagnostic(beta_hat: &[f64], beta_bar: &[f64], partition: &GroupPartition, c0: f64) -> Result<ConeCheck> {
    if !(c0 > 3.0) {
        return Err(GqrError::InvalidParameter(format!("c0 must exceed 3, got {c0}")));
    }
    if beta_hat.len() != beta_bar.len() || beta_hat.len() != partition.p() {
        return Err(GqrError::DimensionMismatch("beta, truth and partition disagree".into()));
    }
    let alpha: Vec<f64> = beta_hat.iter().zip(beta_bar).map(|(a, b)| a - b).collect();
    let active = partition.support(beta_bar, 0.0);
    if active.len() == 1 {
        // nothing beyond the intercept: degenerate, reported as inside
        return Ok(ConeCheck {
            in_cone: true,
            lhs: 0.0,
            rhs: 0.0,
        });
    }
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..partition.num_groups() {
        let w = (partition.group(k).len() as f64).sqrt() * partition.block_norm(&alpha, k);
        if active.contains(&k) {
            rhs += w;
        } else {
            lhs += w;
        }
    }
    rhs *= c0;
    Ok(ConeCheck {
        in_cone: lhs <= rhs,
        lhs,
        rhs,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_unit_error() {
        let part = GroupPartition::uniform(2, 2).unwrap();
        let truth = [1.0, 1.0, 0.0, 0.0, 0.0];
        let m = linear_metrics(&truth, &truth, &part).unwrap();
        assert_eq!((m.nsg, m.nsv, m.error), (2, 2, 0.0));
        let est = [2.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(linear_metrics(&est, &truth, &part).unwrap().error, 1.0);
        let zero = [0.0; 5];
        assert_eq!(linear_metrics(&zero, &truth, &part).unwrap().nsg, 1);
    }

    #[test]
    fn cone_examples() {
        let part = GroupPartition::uniform(3, 2).unwrap();
        let truth = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let c = cone_diagnostic(&truth, &truth, &part, 4.0).unwrap();
        assert!(c.in_cone && c.lhs == 0.0 && c.rhs == 0.0);
        let on_support = [1.5, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let c = cone_diagnostic(&on_support, &truth, &part, 4.0).unwrap();
        assert!(c.in_cone && c.lhs == 0.0 && c.rhs > 0.0);
        let off = [1.0, 1.0, 1.0, 3.0, 0.0, 0.0, 0.0];
        assert!(!cone_diagnostic(&off, &truth, &part, 4.0).unwrap().in_cone);
        assert!(cone_diagnostic(&truth, &truth, &part, 3.0).is_err());
        let c = cone_diagnostic(&off, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &part, 4.0).unwrap();
        assert!(c.in_cone);
    }

    #[test]
    fn mean_sd_values() {
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
