//! Feasible points of the cone dual
//!
//! ```text
//! max_{a,b} y'a  s.t.  1'a = 0,  ‖b_{G_k}‖₂ ≤ λ_k,  Σ̂_k^{1/2} b_{G_k} = X'_{G_k} a,  a ∈ [τ−1, τ]ⁿ
//! ```
//!
//! Any such point bounds the primal optimum from below, so `n·f(β) − y'a`
//! is a rigorous optimality gap for whatever `β` the solver holds.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::design::{GroupedDesign, RANK_TOL};
use crate::error::{GqrError, Result};
use crate::objective::{loss_sum, penalty_sum, CheckLoss, PenaltySpec};
use crate::{Matrix, Vector};

/// A dual-feasible point and the gap it certifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    /// `primal − dual_value`; `+∞` when no feasible point could be built.
    pub gap: f64,
    /// `n`-scaled primal objective at the supplied β.
    pub primal: f64,
    /// `y'a`.
    pub dual_value: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl DualCertificate {
    /// `gap / (1 + |primal|)`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / (1.0 + self.primal.abs())
    }
}

/// Columns whose dual constraint is an equality (`X'_{G_k} a = 0`): the
/// intercept and any group with `λ_k = 0`.
enum HardConstraints {
    /// Only the intercept: exact projection onto `box ∩ {1'a = 0}`.
    Intercept,
    /// Orthonormal basis of `range(X_H)`.
    Range(Matrix),
    /// `range(X_H) = ℝⁿ`; only `a = 0` is feasible.
    Full,
}

/// Reusable projector onto the dual-feasible set for one problem.
pub(crate) struct DualProjector {
    lo: f64,
    hi: f64,
    hard: HardConstraints,
    soft_groups: Vec<usize>,
    levels: Vec<f64>,
}

fn range_basis(xh: &Matrix) -> Option<Matrix> {
    let (n, h) = xh.shape();
    let raw = if h <= n {
        let eig = SymmetricEigen::new(xh.tr_mul(xh));
        let tol = RANK_TOL * eig.eigenvalues.max().max(1.0);
        let keep: Vec<usize> = (0..h).filter(|&i| eig.eigenvalues[i] > tol).collect();
        if keep.len() == n {
            return None;
        }
        let mut v = eig.eigenvectors.select_columns(&keep);
        for (c, &i) in keep.iter().enumerate() {
            v.column_mut(c).scale_mut(1.0 / eig.eigenvalues[i].sqrt());
        }
        xh * v
    } else {
        let eig = SymmetricEigen::new(xh * xh.transpose());
        let tol = RANK_TOL * eig.eigenvalues.max().max(1.0);
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
        if keep.len() == n {
            return None;
        }
        eig.eigenvectors.select_columns(&keep)
    };
    if raw.ncols() == 0 {
        return Some(raw);
    }
    // re-orthonormalize
    Some(raw.qr().q())
}

impl DualProjector {
    pub(crate) fn new(design: &GroupedDesign, tau: f64, penalty: &PenaltySpec) -> Self {
        let part = design.partition();
        let q = part.num_groups();
        let levels: Vec<f64> = (0..q).map(|k| penalty.group_level(k)).collect();
        let hard_groups: Vec<usize> = (1..q).filter(|&k| levels[k] == 0.0).collect();
        let soft_groups: Vec<usize> = (1..q).filter(|&k| levels[k] > 0.0).collect();
        let hard = if hard_groups.is_empty() {
            HardConstraints::Intercept
        } else {
            let mut cols = vec![0];
            for &k in &hard_groups {
                cols.extend_from_slice(part.group(k));
            }
            match range_basis(&design.x().select_columns(&cols)) {
                Some(qb) => HardConstraints::Range(qb),
                None => HardConstraints::Full,
            }
        };
        Self {
            lo: tau - 1.0,
            hi: tau,
            hard,
            soft_groups,
            levels,
        }
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Euclidean projection onto `[lo, hi]ⁿ ∩ {1'a = 0}` by bisection on the
    /// shift `μ` in `clip(a − μ)`.
    fn project_box_hyperplane(&self, a: &mut [f64]) {
        let n = a.len();
        let sum_at = |mu: f64| a.iter().map(|&v| (v - mu).clamp(self.lo, self.hi)).sum::<f64>();
        let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
        let amax = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut left, mut right) = (amin - self.hi, amax - self.lo);
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if mid <= left || mid >= right {
                break;
            }
            if sum_at(mid) > 0.0 {
                left = mid;
            } else {
                right = mid;
            }
        }
        let mu = 0.5 * (left + right);
        for v in a.iter_mut() {
            *v = (*v - mu).clamp(self.lo, self.hi);
        }
        // spread the leftover round-off over the free coordinates
        for _ in 0..3 {
            let e: f64 = a.iter().sum();
            if e == 0.0 {
                break;
            }
            let free: Vec<usize> = (0..n)
                .filter(|&i| {
                    let t = a[i] - e / n as f64;
                    t > self.lo && t < self.hi
                })
                .collect();
            if free.is_empty() {
                break;
            }
            let d = e / free.len() as f64;
            for i in free {
                a[i] = self.clip(a[i] - d);
            }
        }
    }

    fn project_range_complement(basis: &Matrix, a: &mut Vector) {
        if basis.ncols() > 0 {
            let coef = basis.tr_mul(a);
            *a -= basis * coef;
        }
    }

    /// Maps an arbitrary seed to a dual-feasible `(a, b)`.
    pub(crate) fn project(&self, design: &GroupedDesign, seed: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = seed.len();
        let mut a: Vec<f64> = seed
            .iter()
            .map(|&v| if v.is_finite() { self.clip(v) } else { 0.0 })
            .collect();
        match &self.hard {
            HardConstraints::Intercept => self.project_box_hyperplane(&mut a),
            HardConstraints::Full => a.iter_mut().for_each(|v| *v = 0.0),
            HardConstraints::Range(basis) => {
                let mut av = Vector::from_vec(a);
                for _ in 0..20 {
                    Self::project_range_complement(basis, &mut av);
                    let viol = av.iter().map(|&v| (v - self.hi).max(self.lo - v)).fold(0.0, f64::max);
                    if viol <= 0.0 {
                        break;
                    }
                    av.iter_mut().for_each(|v| *v = v.clamp(self.lo, self.hi));
                }
                Self::project_range_complement(basis, &mut av);
                // scale toward 0 until the box holds
                let mut s: f64 = 1.0;
                for &v in av.iter() {
                    if v > self.hi {
                        s = s.min(self.hi / v);
                    } else if v < self.lo {
                        s = s.min(self.lo / v);
                    }
                }
                av *= s;
                a = av.as_slice().to_vec();
            }
        }

        let part = design.partition();
        let mut b = vec![0.0; design.p()];
        if n == 0 {
            return (a, b);
        }
        let av = Vector::from_column_slice(&a);
        let score = design.x().tr_mul(&av);
        let mut shrink: f64 = 1.0;
        for k in 1..part.num_groups() {
            let block = Vector::from_vec(part.gather(score.as_slice(), k));
            let bk = design.gram_sqrt_pinv(k) * block;
            if self.levels[k] > 0.0 {
                let norm = bk.norm();
                if norm > self.levels[k] {
                    shrink = shrink.min(self.levels[k] / norm);
                }
            }
            part.scatter(bk.as_slice(), k, &mut b);
        }
        debug_assert!(self.soft_groups.iter().all(|&k| self.levels[k] > 0.0));
        if shrink < 1.0 {
            a.iter_mut().for_each(|v| *v *= shrink);
            b.iter_mut().for_each(|v| *v *= shrink);
        }
        (a, b)
    }
}

pub(crate) fn certify(
    projector: &DualProjector,
    design: &GroupedDesign,
    y: &[f64],
    primal: f64,
    seed: &[f64],
) -> DualCertificate {
    let (a, b) = projector.project(design, seed);
    let dual_value: f64 = y.iter().zip(&a).map(|(u, v)| u * v).sum();
    let gap = if dual_value.is_finite() && primal.is_finite() {
        primal - dual_value
    } else {
        f64::INFINITY
    };
    DualCertificate {
        gap,
        primal,
        dual_value,
        a,
        b,
    }
}

pub(crate) fn primal_n(design: &GroupedDesign, y: &[f64], beta: &[f64], tau: f64, penalty: &PenaltySpec) -> f64 {
    let fitted = design.x() * Vector::from_column_slice(beta);
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    loss_sum(&resid, tau) + penalty_sum(design, beta, penalty)
}

/// Projects `a_seed` onto the dual-feasible set and reports the duality gap
/// at `beta` (both sides scaled by `n`).
///
/// The projection clips to `[τ−1, τ]ⁿ`, enforces `1'a = 0` (and
/// `X'_{G_k} a = 0` for groups with `λ_k = 0`), sets
/// `b_{G_k} = Σ̂_k^{-1/2} X'_{G_k} a` and finally scales `(a, b)` toward
/// zero until every `‖b_{G_k}‖₂ ≤ λ_k`.
pub fn dual_certificate(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    penalty: &PenaltySpec,
    beta: &[f64],
    a_seed: &[f64],
) -> Result<DualCertificate> {
    CheckLoss::new(tau)?;
    let n = design.n();
    if y.len() != n || a_seed.len() != n || beta.len() != design.p() {
        return Err(GqrError::DimensionMismatch(
            "y, a_seed must have n entries and beta p entries".into(),
        ));
    }
    if penalty.weights.len() != design.num_groups() {
        return Err(GqrError::DimensionMismatch(
            "one penalty weight per group required".into(),
        ));
    }
    let projector = DualProjector::new(design, tau, penalty);
    let primal = primal_n(design, y, beta, tau, penalty);
    Ok(certify(&projector, design, y, primal, a_seed))
}
