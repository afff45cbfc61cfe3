//! Explicit cone form of the estimator, for cross-checking with an external
//! conic solver.
//!
//! Primal, over `x = (β, v, η⁺, η⁻)`:
//!
//! ```text
//! min τ·1'η⁺ + (1−τ)·1'η⁻ + Σ_{k≥2} λ_k v_k
//! s.t. Xβ + η⁺ − η⁻ = y,  ‖Σ̂_k^{1/2} β_{G_k}‖₂ ≤ v_k,  η± ≥ 0
//! ```
//!
//! stored as `A x + s = b`, `s ∈ K` with `K` a product of a zero cone, a
//! nonnegative orthant and one second-order cone `(v_k, Σ̂_k^{1/2}β_{G_k})`
//! per non-intercept group. The optimal value equals `n` times the penalized
//! objective.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::design::GroupedDesign;
use crate::error::{GqrError, Result};
use crate::objective::{CheckLoss, PenaltySpec};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeBlock {
    Zero(usize),
    Nonnegative(usize),
    /// `{(t, z) : ‖z‖₂ ≤ t}` of the given total dimension.
    SecondOrder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocpLayout {
    pub beta: Range<usize>,
    pub v: Range<usize>,
    pub eta_plus: Range<usize>,
    pub eta_minus: Range<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocpProblem {
    pub n_vars: usize,
    pub n_rows: usize,
    pub c: Vec<f64>,
    /// `(row, col, value)` triplets of `A`, one per structural nonzero.
    pub entries: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    pub layout: SocpLayout,
    pub tau: f64,
    /// `λ_k` per group (0 for the intercept).
    pub levels: Vec<f64>,
    y: Vec<f64>,
}

impl SocpProblem {
    pub fn assemble(design: &GroupedDesign, y: &[f64], tau: f64, penalty: &PenaltySpec) -> Result<Self> {
        CheckLoss::new(tau)?;
        let (n, p) = design.x().shape();
        if y.len() != n {
            return Err(GqrError::DimensionMismatch("y length differs from design rows".into()));
        }
        let part = design.partition();
        let q = part.num_groups();
        let levels: Vec<f64> = (0..q).map(|k| penalty.group_level(k)).collect();
        let layout = SocpLayout {
            beta: 0..p,
            v: p..p + q - 1,
            eta_plus: p + q - 1..p + q - 1 + n,
            eta_minus: p + q - 1 + n..p + q - 1 + 2 * n,
        };
        let n_vars = layout.eta_minus.end;

        let mut c = vec![0.0; n_vars];
        for k in 1..q {
            c[layout.v.start + k - 1] = levels[k];
        }
        for i in 0..n {
            c[layout.eta_plus.start + i] = tau;
            c[layout.eta_minus.start + i] = 1.0 - tau;
        }

        let x = design.x();
        let mut entries = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        // Xβ + η⁺ − η⁻ = y
        for i in 0..n {
            for j in 0..p {
                let v = x[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
            entries.push((i, layout.eta_plus.start + i, 1.0));
            entries.push((i, layout.eta_minus.start + i, -1.0));
            b.push(y[i]);
        }
        cones.push(ConeBlock::Zero(n));
        // η± ≥ 0
        let mut row = n;
        for j in layout.eta_plus.start..layout.eta_minus.end {
            entries.push((row, j, -1.0));
            b.push(0.0);
            row += 1;
        }
        cones.push(ConeBlock::Nonnegative(2 * n));
        // (v_k, Σ̂_k^{1/2} β_{G_k}) ∈ SOC
        for k in 1..q {
            entries.push((row, layout.v.start + k - 1, -1.0));
            b.push(0.0);
            row += 1;
            let idx = part.group(k);
            let s = design.gram_sqrt(k);
            for r in 0..idx.len() {
                for (cc, &j) in idx.iter().enumerate() {
                    let v = s[(r, cc)];
                    if v != 0.0 {
                        entries.push((row, j, -v));
                    }
                }
                b.push(0.0);
                row += 1;
            }
            cones.push(ConeBlock::SecondOrder(1 + idx.len()));
        }
        Ok(Self {
            n_vars,
            n_rows: row,
            c,
            entries,
            b,
            cones,
            layout,
            tau,
            levels,
            y: y.to_vec(),
        })
    }

    /// Completes `β` to a feasible primal point: `v_k = ‖Σ̂_k^{1/2}β_{G_k}‖₂`,
    /// `η±` the positive and negative parts of the residual.
    pub fn feasible_point(&self, design: &GroupedDesign, beta: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars];
        x[self.layout.beta.clone()].copy_from_slice(beta);
        let part = design.partition();
        for k in 1..part.num_groups() {
            let block = Vector::from_vec(part.gather(beta, k));
            x[self.layout.v.start + k - 1] = (design.gram_sqrt(k) * block).norm();
        }
        let fitted = design.x() * Vector::from_column_slice(beta);
        for i in 0..self.y.len() {
            let r = self.y[i] - fitted[i];
            x[self.layout.eta_plus.start + i] = r.max(0.0);
            x[self.layout.eta_minus.start + i] = (-r).max(0.0);
        }
        x
    }

    pub fn beta_of<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.layout.beta.clone()]
    }

    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest violation of `Ax + s = b, s ∈ K` at `x`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_rows];
        for &(r, c, v) in &self.entries {
            ax[r] += v * x[c];
        }
        let s: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut worst: f64 = 0.0;
        let mut start = 0;
        for cone in &self.cones {
            match *cone {
                ConeBlock::Zero(d) => {
                    worst = s[start..start + d].iter().fold(worst, |m, v| m.max(v.abs()));
                    start += d;
                }
                ConeBlock::Nonnegative(d) => {
                    worst = s[start..start + d].iter().fold(worst, |m, v| m.max(-v));
                    start += d;
                }
                ConeBlock::SecondOrder(d) => {
                    let t = s[start];
                    let z: f64 = s[start + 1..start + d].iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max(z - t);
                    start += d;
                }
            }
        }
        worst
    }

    /// `y'a`.
    pub fn dual_objective(&self, a: &[f64]) -> f64 {
        self.y.iter().zip(a).map(|(u, v)| u * v).sum()
    }

    /// Largest violation of the dual constraints at `(a, b)`.
    pub fn dual_violation(&self, design: &GroupedDesign, a: &[f64], b: &[f64]) -> f64 {
        let part = design.partition();
        let mut worst: f64 = 0.0;
        for &v in a {
            worst = worst.max(v - self.tau).max(self.tau - 1.0 - v);
        }
        worst = worst.max(a.iter().sum::<f64>().abs()).max(b[0].abs());
        let score = design.x().tr_mul(&Vector::from_column_slice(a));
        for k in 1..part.num_groups() {
            let bk = Vector::from_vec(part.gather(b, k));
            worst = worst.max(bk.norm() - self.levels[k]);
            let lhs = design.gram_sqrt(k) * &bk;
            let rhs = Vector::from_vec(part.gather(score.as_slice(), k));
            worst = worst.max((lhs - rhs).amax());
        }
        worst
    }

    /// Compressed-sparse-column form `(colptr, rowval, nzval)` of `A`.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0; self.n_vars + 1];
        for &(_, c, _) in &sorted {
            colptr[c + 1] += 1;
        }
        for j in 0..self.n_vars {
            colptr[j + 1] += colptr[j];
        }
        let rowval = sorted.iter().map(|e| e.0).collect();
        let nzval = sorted.iter().map(|e| e.2).collect();
        (colptr, rowval, nzval)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::GroupPartition;
    use crate::solver::dual_certificate;
    use crate::Matrix;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn feasible_point_value_matches_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(9, 4, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 2, 1]).unwrap()).unwrap();
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pen = PenaltySpec::new(0.8, d.partition()).unwrap();
        let prob = SocpProblem::assemble(&d, &y, 0.3, &pen).unwrap();
        assert_eq!(prob.cones.len(), 4);
        let beta = [0.2, -0.5, 0.1, 0.7];
        let xp = prob.feasible_point(&d, &beta);
        assert!(prob.primal_violation(&xp) < 1e-12);
        let f = crate::objective_value(&d, &y, &beta, 0.3, &pen).unwrap().total;
        assert!((prob.primal_objective(&xp) - 9.0 * f).abs() < 1e-12);
        let (colptr, rowval, nzval) = prob.to_csc();
        assert_eq!(colptr.len(), prob.n_vars + 1);
        assert_eq!(rowval.len(), nzval.len());
    }

    #[test]
    fn weak_duality_on_three_observations() {
        // every feasible (a, b) built by the certificate lies below every
        // feasible primal point, checked over a grid of β values
        let x = Matrix::from_row_slice(3, 2, &[1.0, -1.0, 1.0, 0.5, 1.0, 2.0]);
        let d = GroupedDesign::new(x, GroupPartition::from_sizes(&[1, 1]).unwrap()).unwrap();
        let y = [0.3, -0.2, 1.4];
        let pen = PenaltySpec::new(0.4, d.partition()).unwrap();
        let prob = SocpProblem::assemble(&d, &y, 0.35, &pen).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let seed: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cert = dual_certificate(&d, &y, 0.35, &pen, &[0.0, 0.0], &seed).unwrap();
            assert!(prob.dual_violation(&d, &cert.a, &cert.b) < 1e-12);
            let dv = prob.dual_objective(&cert.a);
            for i in -10..=10 {
                for j in -10..=10 {
                    let beta = [i as f64 * 0.3, j as f64 * 0.3];
                    let xp = prob.feasible_point(&d, &beta);
                    assert!(dv <= prob.primal_objective(&xp) + 1e-9);
                }
            }
        }
    }
}
