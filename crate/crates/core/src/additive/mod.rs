//! Sparse additive quantile regression.
//!
//! Each covariate `z_k` is expanded into `m` centered basis functions; the
//! resulting design has an intercept plus `d` groups of size `m`, and a group
//! Lasso fit with weight `√m` selects covariates.

mod basis;

pub use basis::{build_basis, BasisFamily, BasisSpec, OutOfDomain, CLAMP_TOL, DOMAIN_MARGIN};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::objective::PenaltySpec;
use crate::solver::{self, QuantileFit, SolverOptions};
use crate::tuning::{select_lambda, PivotConfig};
use crate::Matrix;

/// Monte-Carlo draws per RNG substream in [`l2_error`].
const MC_CHUNK: usize = 1024;

/// Intercept column followed by the basis of each covariate. Values outside a
/// domain by more than [`CLAMP_TOL`] (relative to its width) are an error.
pub fn expand_design(z: &Matrix, basis: &BasisSpec) -> Result<GroupedDesign> {
    expand_design_with(z, basis, OutOfDomain::Error)
}

pub fn expand_design_with(z: &Matrix, basis: &BasisSpec, policy: OutOfDomain) -> Result<GroupedDesign> {
    let (n, d) = z.shape();
    if d != basis.d() {
        return Err(GqrError::DimensionMismatch(format!(
            "z has {d} columns, basis has {} domains",
            basis.d()
        )));
    }
    if n == 0 {
        return Err(GqrError::DegenerateDesign("no observations".into()));
    }
    let m = basis.m();
    let mut x = Matrix::zeros(n, 1 + d * m);
    x.column_mut(0).fill(1.0);
    let mut row = vec![0.0; m];
    for k in 0..d {
        for i in 0..n {
            let v = z[(i, k)];
            if !v.is_finite() {
                return Err(GqrError::NonFinite("covariate"));
            }
            let (t, outside) = basis.to_unit(k, v);
            if outside && policy == OutOfDomain::Error {
                let (lo, hi) = basis.domains[k];
                return Err(GqrError::OutOfDomain {
                    covariate: k,
                    value: v,
                    lo,
                    hi,
                });
            }
            basis.eval_unit(t, &mut row);
            for (j, &b) in row.iter().enumerate() {
                x[(i, 1 + k * m + j)] = b;
            }
        }
    }
    GroupedDesign::new(x, GroupPartition::uniform(d, m)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub basis: BasisSpec,
    /// `β̂₀` followed by `d` blocks of `m` coefficients.
    pub beta: Vec<f64>,
    /// Zero-based covariate indices whose block is nonzero.
    pub selected_covariates: Vec<usize>,
    pub lambda: f64,
    /// `Λ̃(1−θ)` when `λ` came from pivotal tuning.
    pub pivot_quantile: Option<f64>,
    pub fit: QuantileFit,
}

impl AdditiveModel {
    /// Packages a fit on an expanded design (any partition over the same
    /// columns, e.g. the singleton one of an ℓ₁ fit).
    pub fn from_fit(basis: BasisSpec, fit: QuantileFit, pivot_quantile: Option<f64>) -> Result<Self> {
        let m = basis.m();
        if fit.beta.len() != 1 + basis.d() * m {
            return Err(GqrError::DimensionMismatch(
                "coefficients do not match the basis".into(),
            ));
        }
        let selected_covariates = (0..basis.d())
            .filter(|&k| {
                let block = &fit.beta[1 + k * m..1 + (k + 1) * m];
                block.iter().map(|v| v * v).sum::<f64>().sqrt() > fit.group_zero_tol
            })
            .collect();
        Ok(Self {
            beta: fit.beta.clone(),
            selected_covariates,
            lambda: fit.lambda,
            pivot_quantile,
            basis,
            fit,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    /// `Σ_j β̂_{kj} ψ_{kj}(z)` for covariate `k`.
    pub fn component(&self, k: usize, z: f64) -> f64 {
        let m = self.basis.m();
        let mut row = vec![0.0; m];
        self.basis.eval_into(k, z, &mut row);
        row.iter()
            .zip(&self.beta[1 + k * m..1 + (k + 1) * m])
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Expands, tunes `λ` on the expanded design and fits with weight `√m` on
/// every covariate group.
pub fn fit_additive(
    z: &Matrix,
    y: &[f64],
    tau: f64,
    basis: &BasisSpec,
    pivot: &PivotConfig,
    opts: &SolverOptions,
) -> Result<AdditiveModel> {
    let design = expand_design(z, basis)?;
    let tuned = select_lambda(&design, &PivotConfig { tau, ..pivot.clone() })?;
    let fit = fit_expanded(&design, y, tau, basis, tuned.lambda, opts)?;
    AdditiveModel::from_fit(basis.clone(), fit, Some(tuned.quantile_value))
}

/// [`fit_additive`] at a fixed `λ`.
pub fn fit_additive_at(
    z: &Matrix,
    y: &[f64],
    tau: f64,
    basis: &BasisSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<AdditiveModel> {
    let design = expand_design(z, basis)?;
    let fit = fit_expanded(&design, y, tau, basis, lambda, opts)?;
    AdditiveModel::from_fit(basis.clone(), fit, None)
}

fn fit_expanded(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    basis: &BasisSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<QuantileFit> {
    let penalty = PenaltySpec::uniform(lambda, design.partition(), (basis.m() as f64).sqrt())?;
    solver::fit(design, y, tau, &penalty, opts)
}

/// `ĝ(z) = β̂₀ + Σ_k Σ_j β̂_{kj} ψ_{kj}(z_k)`, clamping `z` into the domains.
pub fn predict_g(model: &AdditiveModel, z: &[f64]) -> Result<f64> {
    predict_g_with(model, z, OutOfDomain::Clamp)
}

pub fn predict_g_with(model: &AdditiveModel, z: &[f64], policy: OutOfDomain) -> Result<f64> {
    let d = model.basis.d();
    if z.len() != d {
        return Err(GqrError::DimensionMismatch(format!(
            "expected {d} covariates, got {}",
            z.len()
        )));
    }
    let m = model.basis.m();
    let mut row = vec![0.0; m];
    let mut g = model.beta[0];
    for (k, &v) in z.iter().enumerate() {
        let block = &model.beta[1 + k * m..1 + (k + 1) * m];
        let (t, outside) = model.basis.to_unit(k, v);
        if outside && policy == OutOfDomain::Error {
            let (lo, hi) = model.basis.domains[k];
            return Err(GqrError::OutOfDomain {
                covariate: k,
                value: v,
                lo,
                hi,
            });
        }
        if block.iter().all(|&b| b == 0.0) {
            continue;
        }
        model.basis.eval_unit(t, &mut row);
        g += row.iter().zip(block).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(g)
}

/// Monte-Carlo `‖ĝ − g‖_{L₂}` over `n_mc` draws from `sampler`.
///
/// Draws are taken in chunks of 1024, chunk `c` from substream `c` of
/// `seed`, and summed in chunk order, so the result does not depend on the
/// thread count.
pub fn l2_error<G, S>(model: &AdditiveModel, g_true: G, sampler: S, n_mc: usize, seed: u64) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + Sync,
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    if n_mc == 0 {
        return Err(GqrError::InvalidParameter("n_mc must be >= 1".into()));
    }
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut s = 0.0;
            for _ in 0..count {
                let z = sampler(&mut rng);
                let e = predict_g(model, &z)? - g_true(&z);
                s += e * e;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok((partial.iter().sum::<f64>() / n_mc as f64).sqrt())
}
