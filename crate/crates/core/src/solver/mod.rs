//! Group-Lasso quantile regression solver.
//!
//! [`fit`] runs ADMM on the splitting `r = y − Xβ`, `θ_k = Σ̂_k^{1/2} β_{G_k}`
//! and stops once a feasible point of the cone dual certifies the current
//! iterate (see [`dual_certificate`]).

mod admm;
mod certificate;
mod socp;

use serde::{Deserialize, Serialize};

pub use certificate::{dual_certificate, DualCertificate};
pub use socp::{ConeBlock, SocpLayout, SocpProblem};

use crate::design::{GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::objective::{CheckLoss, PenaltySpec};
use crate::Vector;

/// ADMM and certificate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Absolute duality-gap floor (in units of the `n`-scaled objective).
    pub abs_tol: f64,
    /// Relative duality gap `gap / (1 + |n·objective|)` needed to stop.
    pub rel_tol: f64,
    /// Initial augmented-Lagrangian penalty.
    pub admm_rho: f64,
    /// Residual balancing of `admm_rho`.
    pub adaptive_rho: bool,
    /// Over-relaxation factor in `(0, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
    /// Group norm threshold for `selected_groups`; `None` means
    /// `1e-6·max(1, ‖β̂‖₂)`.
    pub group_zero_tol: Option<f64>,
    /// Iterations between dual-certificate evaluations.
    pub certificate_interval: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            admm_rho: 1.0,
            adaptive_rho: true,
            relaxation: 1.6,
            group_zero_tol: None,
            certificate_interval: 10,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GqrError::InvalidParameter(m.to_string()));
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.admm_rho > 0.0) || !self.admm_rho.is_finite() {
            return bad("admm_rho must be positive");
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return bad("relaxation must lie in (0, 2)");
        }
        if let Some(t) = self.group_zero_tol {
            if !(t > 0.0) {
                return bad("group_zero_tol must be positive");
            }
        }
        if self.certificate_interval == 0 {
            return bad("certificate_interval must be >= 1");
        }
        Ok(())
    }

    /// Settings used by the simulation harness: a looser gap and a larger
    /// iteration budget for the occasional slow ℓ₁ fit.
    pub fn simulation() -> Self {
        Self {
            rel_tol: 1e-5,
            max_iter: 100_000,
            ..Self::default()
        }
    }
}

/// A certified group-Lasso quantile regression fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileFit {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub lambda: f64,
    /// Objective divided by `n`.
    pub objective: f64,
    pub loss_term: f64,
    pub penalty_term: f64,
    /// `n·objective − y'a` for the best certified dual point `a`.
    pub duality_gap: f64,
    /// `duality_gap / (1 + |n·objective|)`.
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Zero-based group indices `{0} ∪ {k : ‖β̂_{G_k}‖₂ > tol}`.
    pub selected_groups: Vec<usize>,
    pub group_zero_tol: f64,
    /// Raw `‖β̂_{G_k}‖₂` for every group.
    pub group_norms: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Dual-feasible point `a ∈ [τ−1, τ]ⁿ` behind the certificate.
    pub dual: Vec<f64>,
    /// Ridge added to a singular β-update system, if any.
    pub ridge: Option<f64>,
    pub final_rho: f64,
}

impl QuantileFit {
    /// Number of coefficients with `|β̂_j| > tol`.
    pub fn count_nonzero(&self, tol: f64) -> usize {
        self.beta.iter().filter(|b| b.abs() > tol).count()
    }

    /// Bare fit around given coefficients, no solver diagnostics.
    #[cfg(test)]
    pub(crate) fn from_beta(beta: Vec<f64>, tau: f64) -> Self {
        Self {
            tau,
            lambda: 0.0,
            objective: f64::NAN,
            loss_term: f64::NAN,
            penalty_term: f64::NAN,
            duality_gap: f64::NAN,
            relative_gap: f64::NAN,
            iterations: 0,
            converged: false,
            selected_groups: Vec::new(),
            group_zero_tol: 1e-6,
            group_norms: Vec::new(),
            residuals: Vec::new(),
            dual: Vec::new(),
            ridge: None,
            final_rho: f64::NAN,
            beta,
        }
    }
}

fn validate_inputs(design: &GroupedDesign, y: &[f64], tau: f64, penalty: &PenaltySpec) -> Result<()> {
    CheckLoss::new(tau)?;
    if y.len() != design.n() {
        return Err(GqrError::DimensionMismatch(format!(
            "y has length {}, design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GqrError::NonFinite("response"));
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

/// Penalized fit at the given penalty.
///
/// When the intercept-only dual point already satisfies every group
/// constraint the intercept-only solution is returned without iterating.
pub fn fit(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<QuantileFit> {
    validate_inputs(design, y, tau, penalty)?;
    opts.validate()?;
    if let Some(f) = admm::intercept_only(design, y, tau, penalty, opts) {
        return Ok(f);
    }
    admm::run(design, y, tau, penalty, opts)
}

/// Unpenalized quantile regression (`λ = 0`).
pub fn fit_unpenalized(design: &GroupedDesign, y: &[f64], tau: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    let penalty = PenaltySpec::new(0.0, design.partition())?;
    fit(design, y, tau, &penalty, opts)
}

/// ℓ₁-penalized quantile regression: [`fit`] on the all-singleton partition.
pub fn fit_l1(design: &GroupedDesign, y: &[f64], tau: f64, lambda: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    let singleton = singleton_design(design)?;
    let penalty = PenaltySpec::new(lambda, singleton.partition())?;
    fit(&singleton, y, tau, &penalty, opts)
}

/// The same design under the all-singleton partition.
pub fn singleton_design(design: &GroupedDesign) -> Result<GroupedDesign> {
    design.repartition(GroupPartition::singletons(design.p())?)
}

/// Intercept-only optimum: the sample `τ`-quantile and a dual point
/// `a* ∈ ∂ρ_τ(y − β₀)` with `1'a* = 0`.
pub(crate) fn intercept_only_dual(y: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((n as f64 * tau).ceil() as usize).clamp(1, n);
    let b0 = sorted[k - 1];
    let mut a = vec![0.0; n];
    let mut ties = Vec::new();
    let mut s = 0.0;
    for i in 0..n {
        let r = y[i] - b0;
        if r > 0.0 {
            a[i] = tau;
            s += tau;
        } else if r < 0.0 {
            a[i] = tau - 1.0;
            s += tau - 1.0;
        } else {
            ties.push(i);
        }
    }
    if !ties.is_empty() {
        let share = -s / ties.len() as f64;
        for i in ties {
            a[i] = share.clamp(tau - 1.0, tau);
        }
    }
    (b0, a)
}

/// Smallest `λ` at which every non-intercept group is zero, using the
/// default `√p_k` weights:
/// `max_{k≥2} ‖Σ̂_k^{-1/2} X'_{G_k} a*‖₂ / √p_k`.
pub fn lambda_max(design: &GroupedDesign, y: &[f64], tau: f64) -> Result<f64> {
    let penalty = PenaltySpec::new(1.0, design.partition())?;
    lambda_max_weighted(design, y, tau, &penalty.weights)
}

/// [`lambda_max`] for arbitrary positive group weights.
pub fn lambda_max_weighted(design: &GroupedDesign, y: &[f64], tau: f64, weights: &[f64]) -> Result<f64> {
    CheckLoss::new(tau)?;
    if y.len() != design.n() {
        return Err(GqrError::DimensionMismatch("y length differs from design rows".into()));
    }
    if weights.len() != design.num_groups() {
        return Err(GqrError::DimensionMismatch("one weight per group required".into()));
    }
    let (_, a) = intercept_only_dual(y, tau);
    let score = design.x().tr_mul(&Vector::from_vec(a));
    let part = design.partition();
    let mut best: f64 = 0.0;
    for k in 1..part.num_groups() {
        if weights[k] <= 0.0 {
            continue;
        }
        let block = Vector::from_vec(part.gather(score.as_slice(), k));
        let b = design.gram_sqrt_pinv(k) * block;
        best = best.max(b.norm() / weights[k]);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intercept_design(n: usize) -> GroupedDesign {
        GroupedDesign::new(
            Matrix::from_element(n, 1, 1.0),
            GroupPartition::from_sizes(&[1]).unwrap(),
        )
        .unwrap()
    }

    fn random_problem(n: usize, sizes: &[usize], seed: u64) -> (GroupedDesign, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: usize = sizes.iter().sum();
        let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(sizes).unwrap()).unwrap();
        let y = (0..n)
            .map(|i| d.x()[(i, 1)] * 2.0 + rng.random_range(-1.0..1.0))
            .collect();
        (d, y)
    }

    #[test]
    fn sample_median() {
        let d = intercept_design(5);
        let f = fit_unpenalized(&d, &[1.0, 2.0, 3.0, 4.0, 5.0], 0.5, &SolverOptions::default()).unwrap();
        assert!(f.converged);
        assert!((f.beta[0] - 3.0).abs() < 1e-5, "{:?}", f.beta);
        assert!((f.objective - 6.0 / 2.0 / 5.0).abs() < 1e-6);
    }

    #[test]
    fn quarter_quantile_objective() {
        // any point in [0, 1] minimizes; objective 0.25·(1+2+3)/4 at b = 0
        let d = intercept_design(4);
        let y = [0.0, 1.0, 2.0, 3.0];
        let f = fit_unpenalized(&d, &y, 0.25, &SolverOptions::default()).unwrap();
        assert!(f.converged);
        assert!(f.beta[0] >= -1e-6 && f.beta[0] <= 1.0 + 1e-6);
        assert!((f.objective - 1.5 / 4.0).abs() < 1e-6);
    }

    #[test]
    fn huge_lambda_kills_groups() {
        let (d, y) = random_problem(30, &[1, 2, 3], 4);
        let lm = lambda_max(&d, &y, 0.5).unwrap();
        let pen = PenaltySpec::new(lm * 10.0, d.partition()).unwrap();
        let f = fit(&d, &y, 0.5, &pen, &SolverOptions::default()).unwrap();
        assert!(f.converged);
        assert_eq!(f.selected_groups, vec![0]);
        let (b0, _) = intercept_only_dual(&y, 0.5);
        let mut z = vec![0.0; d.p()];
        z[0] = b0;
        let exact = crate::objective_value(&d, &y, &z, 0.5, &pen).unwrap().total;
        assert!((f.objective - exact).abs() < 1e-6 * (1.0 + exact));
    }

    #[test]
    fn lambda_max_threshold_property() {
        let (d, y) = random_problem(25, &[1, 3, 2], 7);
        let lm = lambda_max(&d, &y, 0.3).unwrap();
        assert!(lm > 0.0);
        let pen = PenaltySpec::new(lm * (1.0 + 1e-8), d.partition()).unwrap();
        let f = fit(&d, &y, 0.3, &pen, &SolverOptions::default()).unwrap();
        assert!(f.converged);
        for k in 1..d.num_groups() {
            assert!(f.group_norms[k] <= f.group_zero_tol, "group {k}: {}", f.group_norms[k]);
        }
        // just below the threshold something enters
        let pen = PenaltySpec::new(lm * 0.8, d.partition()).unwrap();
        let f = fit(&d, &y, 0.3, &pen, &SolverOptions::default()).unwrap();
        assert!(f.selected_groups.len() > 1);
    }

    #[test]
    fn lambda_max_zero_columns_and_scale_invariance() {
        let x = Matrix::from_fn(6, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        let y = [1.0, 3.0, 2.0, 0.5, 4.0, 2.5];
        assert_eq!(lambda_max(&d, &y, 0.5).unwrap(), 0.0);

        let (d, y) = random_problem(20, &[1, 2, 2], 2);
        let mut x2 = d.x() * 2.0;
        x2.column_mut(0).fill(1.0);
        let d2 = GroupedDesign::new(x2, d.partition().clone()).unwrap();
        let a = lambda_max(&d, &y, 0.5).unwrap();
        let b = lambda_max(&d2, &y, 0.5).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn singleton_partition_equals_fit_l1() {
        let (d, y) = random_problem(20, &[1, 2, 2], 9);
        let opts = SolverOptions::default();
        let a = fit_l1(&d, &y, 0.5, 2.0, &opts).unwrap();
        let s = singleton_design(&d).unwrap();
        let pen = PenaltySpec::new(2.0, s.partition()).unwrap();
        let b = fit(&s, &y, 0.5, &pen, &opts).unwrap();
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn collinear_group_falls_back_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(15, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let mut x = x;
        for i in 0..15 {
            let v: f64 = rng.random_range(-1.0..1.0);
            x[(i, 1)] = v;
            x[(i, 2)] = 2.0 * v;
        }
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2]).unwrap()).unwrap();
        let y: Vec<f64> = (0..15).map(|i| d.x()[(i, 1)] + rng.random_range(-0.5..0.5)).collect();
        let f = fit_unpenalized(&d, &y, 0.5, &SolverOptions::default()).unwrap();
        assert!(f.ridge.is_some());
        assert!(f.converged, "gap {}", f.relative_gap);
    }

    #[test]
    fn rejects_bad_options() {
        let d = intercept_design(3);
        let bad = SolverOptions {
            relaxation: 2.5,
            ..Default::default()
        };
        assert!(fit_unpenalized(&d, &[1.0, 2.0, 3.0], 0.5, &bad).is_err());
        let bad = SolverOptions {
            max_iter: 0,
            ..Default::default()
        };
        assert!(fit_unpenalized(&d, &[1.0, 2.0, 3.0], 0.5, &bad).is_err());
        assert!(fit_unpenalized(&d, &[1.0, 2.0], 0.5, &SolverOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let (d, y) = random_problem(30, &[1, 3, 3], 5);
        let opts = SolverOptions {
            max_iter: 3,
            certificate_interval: 1,
            ..Default::default()
        };
        let pen = PenaltySpec::new(1.0, d.partition()).unwrap();
        let f = fit(&d, &y, 0.5, &pen, &opts).unwrap();
        assert!(!f.converged);
        assert!(f.duality_gap.is_finite());
        assert_eq!(f.iterations, 3);
    }
}
