//! ADMM over `(β; r = y − Xβ; θ_k = Σ̂_k^{1/2} β_{G_k})`.
//!
//! With one penalty parameter `ρ` for both constraint blocks the β-update
//! matrix `X'X + n Σ_k Σ̂_k` does not depend on `ρ`, so it is factored once
//! and `ρ` can be rebalanced freely. The θ-block carries a factor `√n` so that
//! both constraint blocks have comparable column norms.

use nalgebra::Cholesky;

use super::certificate::{certify, DualProjector};
use super::{QuantileFit, SolverOptions};
use crate::design::GroupedDesign;
use crate::error::{GqrError, Result};
use crate::objective::{loss_sum, prox_check_raw, shrink_in_place, PenaltySpec};
use crate::{Matrix, Vector};

/// Residual ratio that triggers a ρ update.
const BALANCE_RATIO: f64 = 10.0;
/// Bounds on a single ρ rescaling.
const MIN_STEP: f64 = 0.2;
const MAX_STEP: f64 = 5.0;
/// ρ is frozen after this many rebalancing rounds.
const MAX_RHO_UPDATES: usize = 60;

struct GroupOps<'a> {
    design: &'a GroupedDesign,
    /// Non-intercept groups.
    groups: Vec<usize>,
    levels: Vec<f64>,
    /// Multiplier on `Σ̂_k^{1/2}` in the θ-constraint.
    scale: f64,
}

impl GroupOps<'_> {
    /// `out_{G_k} = scale·Σ̂_k^{1/2} v_{G_k}` for k ≥ 1; intercept slot left at 0.
    fn apply(&self, v: &Vector, out: &mut Vector) {
        let part = self.design.partition();
        out[0] = 0.0;
        for &k in &self.groups {
            let idx = part.group(k);
            let s = self.design.gram_sqrt(k);
            if idx.len() == 1 {
                out[idx[0]] = self.scale * s[(0, 0)] * v[idx[0]];
                continue;
            }
            for (r, &jr) in idx.iter().enumerate() {
                let mut acc = 0.0;
                for (c, &jc) in idx.iter().enumerate() {
                    acc += s[(r, c)] * v[jc];
                }
                out[jr] = self.scale * acc;
            }
        }
    }

    /// `Σ λ_k ‖Σ̂_k^{1/2} β_{G_k}‖₂` via a precomputed `Wβ`.
    fn penalty_from(&self, wb: &Vector) -> f64 {
        let part = self.design.partition();
        self.groups
            .iter()
            .filter(|&&k| self.levels[k] > 0.0)
            .map(|&k| {
                let sq: f64 = part.group(k).iter().map(|&j| wb[j] * wb[j]).sum();
                self.levels[k] * sq.sqrt()
            })
            .sum::<f64>()
            / self.scale
    }
}

fn factor_system(design: &GroupedDesign, groups: &[usize]) -> (Cholesky<f64, nalgebra::Dyn>, Option<f64>) {
    let x = design.x();
    let (n, p) = x.shape();
    let mut m = x.tr_mul(x);
    let part = design.partition();
    for &k in groups {
        let s = design.gram_sqrt(k);
        let ss = s * s * n as f64;
        let idx = part.group(k);
        for (r, &jr) in idx.iter().enumerate() {
            for (c, &jc) in idx.iter().enumerate() {
                m[(jr, jc)] += ss[(r, c)];
            }
        }
    }
    let max_diag = (0..p).map(|j| m[(j, j)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if let Some(ch) = Cholesky::new(m.clone()) {
        let l = ch.l_dirty();
        let min_piv = (0..p).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
        if min_piv > 1e-12 * max_diag {
            return (ch, None);
        }
    }
    // ε = 1e-10·trace(Σ̂)/p on the n-normalized system
    let trace_sigma = (0..p).map(|j| x.column(j).norm_squared()).sum::<f64>() / n as f64;
    let eps = (1e-10 * trace_sigma / p as f64 * n as f64).max(1e-14 * max_diag);
    for j in 0..p {
        m[(j, j)] += eps;
    }
    let ch = Cholesky::new(m).expect("ridge-regularized system is positive definite");
    (ch, Some(eps))
}

pub(crate) fn run(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<QuantileFit> {
    let x: &Matrix = design.x();
    let (n, p) = x.shape();
    let part = design.partition();
    let q = part.num_groups();
    let levels: Vec<f64> = (0..q).map(|k| penalty.group_level(k)).collect();
    let ops = GroupOps {
        design,
        groups: (1..q).collect(),
        levels: levels.clone(),
        scale: (n as f64).sqrt(),
    };

    let (chol, ridge) = factor_system(design, &ops.groups);
    if chol.l_dirty().iter().any(|v| !v.is_finite()) {
        return Err(GqrError::SingularSystem);
    }
    let projector = DualProjector::new(design, tau, penalty);

    let yv = Vector::from_column_slice(y);
    let alpha = opts.relaxation;
    let mut rho = opts.admm_rho;

    let mut beta = Vector::zeros(p);
    let mut r = yv.clone();
    let mut theta = Vector::zeros(p);
    let mut u = Vector::zeros(n);
    let mut w = Vector::zeros(p);

    let mut xb = Vector::zeros(n);
    let mut wb = Vector::zeros(p);
    let mut tmp_n = Vector::zeros(n);
    let mut tmp_p = Vector::zeros(p);
    let mut rhs = Vector::zeros(p);
    let mut r_old = r.clone();
    let mut theta_old = theta.clone();

    let mut best_primal = f64::INFINITY;
    let mut best_beta = beta.clone();
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_a = vec![0.0; n];
    let mut rho_updates = 0;
    let mut converged = false;
    let mut iterations = 0;

    let mut sparse_beta = Vector::zeros(p);
    let mut sparse_xb = Vector::zeros(n);
    let mut sparse_wb = Vector::zeros(p);

    for it in 1..=opts.max_iter {
        iterations = it;
        let check = it % opts.certificate_interval == 0 || it == opts.max_iter;
        if check {
            r_old.copy_from(&r);
            theta_old.copy_from(&theta);
        }

        // β-update: (X'X + W'W) β = X'(y − r − u) + W(θ − w)  [+ ε β_prev]
        tmp_n.copy_from(&yv);
        tmp_n -= &r;
        tmp_n -= &u;
        rhs.gemv_tr(1.0, x, &tmp_n, 0.0);
        tmp_p.copy_from(&theta);
        tmp_p -= &w;
        ops.apply(&tmp_p, &mut wb);
        rhs += &wb;
        if let Some(eps) = ridge {
            rhs.axpy(eps, &beta, 1.0);
        }
        chol.solve_mut(&mut rhs);
        beta.copy_from(&rhs);

        xb.gemv(1.0, x, &beta, 0.0);
        ops.apply(&beta, &mut wb);

        // relaxed images; r-update and θ-update
        let inv_rho = 1.0 / rho;
        for i in 0..n {
            let xh = alpha * xb[i] + (1.0 - alpha) * (y[i] - r[i]);
            let ri = prox_check_raw(y[i] - xh - u[i], inv_rho, tau);
            u[i] += xh + ri - y[i];
            r[i] = ri;
        }
        for &k in &ops.groups {
            let idx = part.group(k);
            let mut block: Vec<f64> = idx
                .iter()
                .map(|&j| alpha * wb[j] + (1.0 - alpha) * theta[j] + w[j])
                .collect();
            let wh: Vec<f64> = idx.iter().map(|&j| alpha * wb[j] + (1.0 - alpha) * theta[j]).collect();
            if levels[k] > 0.0 {
                shrink_in_place(&mut block, levels[k] * inv_rho / ops.scale);
            }
            for (c, &j) in idx.iter().enumerate() {
                theta[j] = block[c];
                w[j] += wh[c] - block[c];
            }
        }

        if !check {
            continue;
        }

        // residuals
        let mut pri_sq = 0.0;
        for i in 0..n {
            let d = xb[i] + r[i] - y[i];
            pri_sq += d * d;
        }
        for j in 1..p {
            let d = wb[j] - theta[j];
            pri_sq += d * d;
        }
        let pri = pri_sq.sqrt();
        tmp_n.copy_from(&r);
        tmp_n -= &r_old;
        tmp_p.copy_from(&theta);
        tmp_p -= &theta_old;
        let mut wdiff = Vector::zeros(p);
        ops.apply(&tmp_p, &mut wdiff);
        let mut s = Vector::zeros(p);
        s.gemv_tr(1.0, x, &tmp_n, 0.0);
        s -= &wdiff;
        let dual_res = rho * s.norm();

        // primal candidate: zero every group the θ-block has killed
        sparse_beta.copy_from(&beta);
        for &k in &ops.groups {
            if levels[k] > 0.0 && part.group(k).iter().all(|&j| theta[j] == 0.0) {
                for &j in part.group(k) {
                    sparse_beta[j] = 0.0;
                }
            }
        }
        sparse_xb.gemv(1.0, x, &sparse_beta, 0.0);
        ops.apply(&sparse_beta, &mut sparse_wb);
        let resid: Vec<f64> = (0..n).map(|i| y[i] - sparse_xb[i]).collect();
        let primal = loss_sum(&resid, tau) + ops.penalty_from(&sparse_wb);
        if primal < best_primal {
            best_primal = primal;
            best_beta.copy_from(&sparse_beta);
        }

        // dual candidate a = −ρu
        let seed: Vec<f64> = u.iter().map(|v| -rho * v).collect();
        let cert = certify(&projector, design, y, best_primal, &seed);
        if cert.dual_value > best_dual {
            best_dual = cert.dual_value;
            best_a = cert.a;
        }
        let gap = best_primal - best_dual;
        if gap <= opts.rel_tol * (1.0 + best_primal.abs()) || gap <= opts.abs_tol {
            converged = true;
            break;
        }

        if opts.adaptive_rho && rho_updates < MAX_RHO_UPDATES {
            // ρ·√(primal/dual residual) once they drift more than 10× apart
            let ratio = pri / dual_res.max(f64::MIN_POSITIVE);
            let scale = if !(1.0 / BALANCE_RATIO..=BALANCE_RATIO).contains(&ratio) {
                ratio.sqrt().clamp(MIN_STEP, MAX_STEP)
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                u /= scale;
                w /= scale;
                rho_updates += 1;
            }
        }
    }

    let beta_out: Vec<f64> = best_beta.iter().copied().collect();
    Ok(package(
        &ops,
        y,
        tau,
        penalty.lambda,
        beta_out,
        Packaging {
            dual: best_a,
            dual_value: best_dual,
            iterations,
            converged,
            ridge,
            final_rho: rho,
        },
        opts,
    ))
}

pub(super) struct Packaging {
    pub dual: Vec<f64>,
    pub dual_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ridge: Option<f64>,
    pub final_rho: f64,
}

/// Objective terms, gap and support of `beta` against a certified dual value.
fn package(
    ops: &GroupOps,
    y: &[f64],
    tau: f64,
    lambda: f64,
    beta_out: Vec<f64>,
    info: Packaging,
    opts: &SolverOptions,
) -> QuantileFit {
    let design = ops.design;
    let x = design.x();
    let n = x.nrows();
    let part = design.partition();
    let q = part.num_groups();
    let best_beta = Vector::from_column_slice(&beta_out);
    let fitted = x * &best_beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let loss_n = loss_sum(&residuals, tau);
    let mut wbb = Vector::zeros(x.ncols());
    ops.apply(&best_beta, &mut wbb);
    let pen_n = ops.penalty_from(&wbb);
    let primal_n = loss_n + pen_n;
    let gap = primal_n - info.dual_value;

    let beta_norm = best_beta.norm();
    let zero_tol = opts.group_zero_tol.unwrap_or(1e-6 * beta_norm.max(1.0));
    let group_norms: Vec<f64> = (0..q).map(|k| part.block_norm(&beta_out, k)).collect();
    let selected_groups = part.support(&beta_out, zero_tol);

    QuantileFit {
        beta: beta_out,
        tau,
        lambda,
        objective: primal_n / n as f64,
        loss_term: loss_n / n as f64,
        penalty_term: pen_n / n as f64,
        duality_gap: gap,
        relative_gap: gap / (1.0 + primal_n.abs()),
        iterations: info.iterations,
        converged: info.converged,
        selected_groups,
        group_zero_tol: zero_tol,
        group_norms,
        residuals,
        dual: info.dual,
        ridge: info.ridge,
        final_rho: info.final_rho,
    }
}

/// The intercept-only fit when its dual point already certifies it, i.e.
/// every penalized group satisfies `‖Σ̂_k^{-1/2} X'_{G_k} a*‖₂ ≤ λ_k`.
pub(crate) fn intercept_only(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
) -> Option<QuantileFit> {
    let part = design.partition();
    let q = part.num_groups();
    let levels: Vec<f64> = (0..q).map(|k| penalty.group_level(k)).collect();
    let (b0, a) = super::intercept_only_dual(y, tau);
    if a.iter().sum::<f64>().abs() > 1e-12 * y.len() as f64 {
        return None;
    }
    let score = design.x().tr_mul(&Vector::from_column_slice(&a));
    for k in 1..q {
        let block = Vector::from_vec(part.gather(score.as_slice(), k));
        if (design.gram_sqrt_pinv(k) * block).norm() > levels[k] {
            return None;
        }
    }
    let ops = GroupOps {
        design,
        groups: (1..q).collect(),
        levels,
        scale: 1.0,
    };
    let mut beta = vec![0.0; design.p()];
    beta[0] = b0;
    let dual_value = y.iter().zip(&a).map(|(u, v)| u * v).sum();
    let fit = package(
        &ops,
        y,
        tau,
        penalty.lambda,
        beta,
        Packaging {
            dual: a,
            dual_value,
            iterations: 0,
            converged: true,
            ridge: None,
            final_rho: opts.admm_rho,
        },
        opts,
    );
    (fit.duality_gap
        <= opts
            .abs_tol
            .max(opts.rel_tol * (1.0 + (fit.objective * y.len() as f64).abs())))
    .then_some(fit)
}
