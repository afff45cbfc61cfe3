//! Check loss, group penalty and the proximal maps the solver is built from.

use serde::{Deserialize, Serialize};

use crate::design::{GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::Vector;

/// Quantile level `τ ∈ (0, 1)` together with its check function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckLoss {
    tau: f64,
}

impl CheckLoss {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(GqrError::InvalidParameter(format!("tau must lie in (0,1), got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `ρ_τ(u)`. Ties at `u = 0` contribute zero loss.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        rho(u, self.tau)
    }
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u > 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// `ρ_τ(u) = {τ − I(u ≤ 0)} u`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    if u.is_nan() {
        return Err(GqrError::NonFinite("check_loss argument"));
    }
    Ok(CheckLoss::new(tau)?.eval(u))
}

/// Penalty level and per-group weights.
///
/// The weight of the intercept group is always zero; by default the other
/// groups get `√p_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl PenaltySpec {
    /// `w_k = √p_k` for every non-intercept group.
    pub fn new(lambda: f64, partition: &GroupPartition) -> Result<Self> {
        let weights = partition
            .groups()
            .iter()
            .enumerate()
            .map(|(k, g)| if k == 0 { 0.0 } else { (g.len() as f64).sqrt() })
            .collect();
        Self::with_weights(lambda, weights)
    }

    /// The same weight for every non-intercept group (the additive-model
    /// estimator uses `√m`).
    pub fn uniform(lambda: f64, partition: &GroupPartition, weight: f64) -> Result<Self> {
        let q = partition.num_groups();
        let weights = (0..q).map(|k| if k == 0 { 0.0 } else { weight }).collect();
        Self::with_weights(lambda, weights)
    }

    pub fn with_weights(lambda: f64, weights: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(GqrError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if weights.first().copied() != Some(0.0) {
            return Err(GqrError::InvalidParameter("intercept weight must be 0".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(GqrError::InvalidParameter(
                "group weights must be finite and >= 0".into(),
            ));
        }
        Ok(Self { lambda, weights })
    }

    /// `λ_k = λ w_k`.
    #[inline]
    pub fn group_level(&self, k: usize) -> f64 {
        self.lambda * self.weights[k]
    }
}

/// The two terms of the penalized objective, both divided by `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub penalty: f64,
    pub total: f64,
}

/// `Σ_k λ_k ‖Σ̂_k^{1/2} β_{G_k}‖₂` (not divided by `n`).
pub(crate) fn penalty_sum(design: &GroupedDesign, beta: &[f64], penalty: &PenaltySpec) -> f64 {
    let part = design.partition();
    let mut total = 0.0;
    for k in 1..part.num_groups() {
        let level = penalty.group_level(k);
        if level == 0.0 {
            continue;
        }
        let block = Vector::from_vec(part.gather(beta, k));
        total += level * (design.gram_sqrt(k) * block).norm();
    }
    total
}

pub(crate) fn loss_sum(residuals: &[f64], tau: f64) -> f64 {
    residuals.iter().map(|&u| rho(u, tau)).sum()
}

fn check_dims(design: &GroupedDesign, y: &[f64], beta: &[f64], penalty: &PenaltySpec) -> Result<()> {
    if y.len() != design.n() {
        return Err(GqrError::DimensionMismatch(format!(
            "y has length {}, design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if beta.len() != design.p() {
        return Err(GqrError::DimensionMismatch(format!(
            "beta has length {}, design has {} columns",
            beta.len(),
            design.p()
        )));
    }
    if penalty.weights.len() != design.num_groups() {
        return Err(GqrError::DimensionMismatch(format!(
            "{} penalty weights for {} groups",
            penalty.weights.len(),
            design.num_groups()
        )));
    }
    Ok(())
}

/// Penalized objective `(1/n)Σρ_τ(y_i − x_i'β) + (λ/n)Σ_k w_k‖Σ̂_k^{1/2}β_{G_k}‖₂`.
pub fn objective_value(
    design: &GroupedDesign,
    y: &[f64],
    beta: &[f64],
    tau: f64,
    penalty: &PenaltySpec,
) -> Result<ObjectiveValue> {
    CheckLoss::new(tau)?;
    check_dims(design, y, beta, penalty)?;
    let n = design.n() as f64;
    let fitted = design.x() * Vector::from_column_slice(beta);
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let loss = loss_sum(&resid, tau) / n;
    let pen = penalty_sum(design, beta, penalty) / n;
    Ok(ObjectiveValue {
        loss,
        penalty: pen,
        total: loss + pen,
    })
}

#[inline]
pub(crate) fn prox_check_raw(v: f64, step: f64, tau: f64) -> f64 {
    if v > step * tau {
        v - step * tau
    } else if v < -step * (1.0 - tau) {
        v + step * (1.0 - tau)
    } else {
        0.0
    }
}

/// `argmin_x { t·ρ_τ(x) + ½(x − v)² }`.
pub fn prox_check(v: f64, step: f64, tau: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(GqrError::InvalidParameter(format!("prox step must be > 0, got {step}")));
    }
    if v.is_nan() {
        return Err(GqrError::NonFinite("prox_check argument"));
    }
    CheckLoss::new(tau)?;
    Ok(prox_check_raw(v, step, tau))
}

/// In-place block soft threshold; returns the input norm.
#[inline]
pub(crate) fn shrink_in_place(v: &mut [f64], threshold: f64) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= threshold {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let s = 1.0 - threshold / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

/// `max(0, 1 − t/‖v‖₂)·v`, the proximal map of `t‖·‖₂`.
pub fn group_soft_threshold(v: &[f64], threshold: f64) -> Result<Vec<f64>> {
    if !(threshold >= 0.0) {
        return Err(GqrError::InvalidParameter(format!(
            "threshold must be >= 0, got {threshold}"
        )));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(GqrError::NonFinite("group_soft_threshold argument"));
    }
    let mut out = v.to_vec();
    shrink_in_place(&mut out, threshold);
    Ok(out)
}

/// The two right-hand terms of Knight's identity
///
/// ```text
/// ρ_τ(u − v) − ρ_τ(u) = −{τ − I(u ≤ 0)} v + ∫₀ᵛ {I(u ≤ s) − I(u ≤ 0)} ds
/// ```
///
/// returned as `(linear_part, integral_part)`; the integral is evaluated in
/// closed form and is never negative.
pub fn knight_decomposition(u: f64, v: f64, tau: f64) -> Result<(f64, f64)> {
    if u.is_nan() || v.is_nan() {
        return Err(GqrError::NonFinite("knight_decomposition argument"));
    }
    CheckLoss::new(tau)?;
    let ind = if u <= 0.0 { 1.0 } else { 0.0 };
    let linear = -(tau - ind) * v;
    let integral = if v >= 0.0 {
        if u > 0.0 {
            (v - u).max(0.0)
        } else {
            0.0
        }
    } else if u <= 0.0 {
        (u - v).max(0.0)
    } else {
        0.0
    };
    Ok((linear, integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;
    use proptest::prelude::*;

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(check_loss(1.0, 0.5).unwrap(), 0.5);
        assert_eq!(check_loss(-2.0, 0.25).unwrap(), 1.5);
        assert!(check_loss(f64::NAN, 0.5).is_err());
        assert!(check_loss(1.0, 1.0).is_err());
        assert!(check_loss(1.0, 0.0).is_err());
    }

    #[test]
    fn prox_check_examples() {
        assert_eq!(prox_check(0.0, 1.0, 0.3).unwrap(), 0.0);
        assert!((prox_check(0.7, 1e-12, 0.3).unwrap() - 0.7).abs() < 1e-11);
        // frozen from a 1-D grid minimization at resolution 1e-6
        assert!((prox_check(2.0, 1.0, 0.25).unwrap() - 1.75).abs() < 1e-12);
        assert!(prox_check(1.0, 0.0, 0.5).is_err());
        assert!(prox_check(1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(group_soft_threshold(&[1.0, -2.0], 0.0).unwrap(), vec![1.0, -2.0]);
        let out = group_soft_threshold(&[3.0, 4.0], 2.5).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] - 2.0).abs() < 1e-15);
        // 0 ∈ (x − v) + t·x/‖x‖ at the output
        let (x, v, t): ([f64; 2], [f64; 2], f64) = ([1.5, 2.0], [3.0, 4.0], 2.5);
        let nx = (x[0] * x[0] + x[1] * x[1]).sqrt();
        for i in 0..2 {
            assert!((x[i] - v[i] + t * x[i] / nx).abs() < 1e-14);
        }
        assert!(group_soft_threshold(&[f64::NAN], 1.0).is_err());
        assert!(group_soft_threshold(&[1.0], -1.0).is_err());
    }

    #[test]
    fn knight_examples() {
        assert_eq!(knight_decomposition(0.7, 0.0, 0.4).unwrap(), (0.0, 0.0));
        let (l, i) = knight_decomposition(1.0, 0.5, 0.5).unwrap();
        assert!((l + 0.25).abs() < 1e-15);
        assert_eq!(i, 0.0);
        // (0.3, 1.0, 0.25): integrand is 1 on [0.3, 1], quadrature gives 0.7
        let (l, i) = knight_decomposition(0.3, 1.0, 0.25).unwrap();
        assert!((i - 0.7).abs() < 1e-12);
        let rhs = rho(-0.7, 0.25) - rho(0.3, 0.25);
        assert!((l + i - rhs).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let x = Matrix::from_element(2, 1, 1.0);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1]).unwrap()).unwrap();
        let pen = PenaltySpec::new(3.0, d.partition()).unwrap();
        let v = objective_value(&d, &[1.0, -1.0], &[0.0], 0.5, &pen).unwrap();
        assert!((v.total - 0.5).abs() < 1e-15);
        assert_eq!(v.penalty, 0.0);
        assert!(objective_value(&d, &[1.0], &[0.0], 0.5, &pen).is_err());
        assert!(objective_value(&d, &[1.0, 2.0], &[0.0, 1.0], 0.5, &pen).is_err());
    }

    #[test]
    fn penalty_weights() {
        let part = GroupPartition::from_sizes(&[1, 4, 9]).unwrap();
        let p = PenaltySpec::new(2.0, &part).unwrap();
        assert_eq!(p.weights, vec![0.0, 2.0, 3.0]);
        assert_eq!(p.group_level(2), 6.0);
        assert!(PenaltySpec::with_weights(1.0, vec![1.0, 1.0]).is_err());
        assert!(PenaltySpec::new(-1.0, &part).is_err());
    }

    fn grid_prox(v: f64, t: f64, tau: f64) -> f64 {
        // brute force over a window containing the minimizer
        let (lo, hi) = (v - 2.0 * t - 1.0, v + 2.0 * t + 1.0);
        let steps = ((hi - lo) / 1e-4) as usize;
        let mut best = (f64::INFINITY, 0.0);
        for s in 0..=steps {
            let x = lo + s as f64 * 1e-4;
            let f = t * rho(x, tau) + 0.5 * (x - v) * (x - v);
            if f < best.0 {
                best = (f, x);
            }
        }
        // refine
        let c = best.1;
        for s in 0..=2000 {
            let x = c - 1e-4 + s as f64 * 1e-7;
            let f = t * rho(x, tau) + 0.5 * (x - v) * (x - v);
            if f < best.0 {
                best = (f, x);
            }
        }
        best.1
    }

    #[test]
    fn prox_matches_grid_on_a_few_points() {
        for &(v, t, tau) in &[(2.0, 1.0, 0.25), (-0.3, 0.5, 0.9), (0.05, 2.0, 0.5), (-3.0, 1.5, 0.1)] {
            assert!((prox_check(v, t, tau).unwrap() - grid_prox(v, t, tau)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn check_loss_symmetry(u in -1e3..1e3f64, tau in 0.01..0.99f64) {
            let a = check_loss(u, tau).unwrap();
            let b = check_loss(-u, 1.0 - tau).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn knight_identity(u in -10.0..10.0f64, v in -10.0..10.0f64, tau in 0.01..0.99f64) {
            let (l, i) = knight_decomposition(u, v, tau).unwrap();
            prop_assert!(i >= 0.0);
            let rhs = rho(u - v, tau) - rho(u, tau);
            prop_assert!((l + i - rhs).abs() < 1e-12);
        }

        #[test]
        fn prox_check_nonexpansive(a in -5.0..5.0f64, b in -5.0..5.0f64, t in 0.01..3.0f64, tau in 0.01..0.99f64) {
            let pa = prox_check(a, t, tau).unwrap();
            let pb = prox_check(b, t, tau).unwrap();
            prop_assert!((pa - pb).abs() <= (a - b).abs() + 1e-15);
        }

        #[test]
        fn soft_threshold_nonexpansive(
            a in proptest::collection::vec(-5.0..5.0f64, 3),
            b in proptest::collection::vec(-5.0..5.0f64, 3),
            t in 0.0..4.0f64,
        ) {
            let pa = group_soft_threshold(&a, t).unwrap();
            let pb = group_soft_threshold(&b, t).unwrap();
            let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let d_out: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let npa: f64 = pa.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(npa <= na + 1e-15);
        }
    }
}
