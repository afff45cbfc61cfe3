//! Replicated comparison of the grouped, ℓ₁ and unpenalized estimators.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{additive_metrics, cone_diagnostic, linear_metrics, mean_sd, ConeCheck, RepMetrics};
use super::model1::{gen_model1, Model1Config};
use super::model2::{g_true, gen_model2, sample_z, Model2Config};
use crate::additive::{expand_design, l2_error, AdditiveModel};
use crate::design::GroupedDesign;
use crate::error::{GqrError, Result};
use crate::objective::PenaltySpec;
use crate::solver::{self, QuantileFit, SolverOptions};
use crate::tuning::{select_lambda, PivotConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Group Lasso with pivotal `λ`.
    GrLasso,
    /// ℓ₁ penalty (singleton groups) with pivotal `λ`.
    Lasso,
    /// Unpenalized quantile regression.
    Qr,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::GrLasso, Estimator::Lasso, Estimator::Qr];

    /// Substream tag; fixed per estimator so adding one never moves another.
    fn tag(self) -> u64 {
        match self {
            Estimator::GrLasso => 1,
            Estimator::Lasso => 2,
            Estimator::Qr => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::GrLasso => "grlasso",
            Estimator::Lasso => "lasso",
            Estimator::Qr => "qr",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = GqrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grlasso" | "group" => Ok(Estimator::GrLasso),
            "lasso" | "l1" => Ok(Estimator::Lasso),
            "qr" => Ok(Estimator::Qr),
            _ => Err(GqrError::Parse(format!("unknown estimator '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelConfig {
    Model1(Model1Config),
    Model2(Model2Config),
}

impl ModelConfig {
    pub fn n_reps(&self) -> usize {
        match self {
            ModelConfig::Model1(c) => c.n_reps,
            ModelConfig::Model2(c) => c.n_reps,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Model1(c) => c.seed,
            ModelConfig::Model2(c) => c.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Model1(c) => c.validate(),
            ModelConfig::Model2(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub solver: SolverOptions,
    /// Pivot draws per tuning.
    pub n_sim: usize,
    /// Cone constant for the membership check on grouped fits (linear model).
    pub c0: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::simulation(),
            n_sim: 2000,
            c0: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub estimator: Estimator,
    pub metrics: Option<RepMetrics>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub relative_gap: f64,
    pub cone: Option<ConeCheck>,
    /// Set when the replication failed outright.
    pub error: Option<String>,
}

impl RepRecord {
    /// Failed replications are excluded from summaries.
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.converged && self.metrics.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub n_ok: usize,
    pub n_failed: usize,
    pub nsg_mean: f64,
    pub nsg_sd: f64,
    pub nsv_mean: f64,
    pub nsv_sd: f64,
    /// `√(mean of squared errors)`.
    pub rmse: f64,
    /// Standard deviation of the per-replication error.
    pub error_sd: f64,
    pub cone_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    /// Mean seconds per (replication, estimator) over all replications.
    pub mean_fit_seconds: Vec<(Estimator, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ModelConfig,
    pub options: ExperimentOptions,
    pub estimators: Vec<Estimator>,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<RepRecord>,
    /// Not covered by the reproducibility guarantee.
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn summary(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == e)
    }
}

/// Runs every replication (in parallel, aggregated in replication order) and
/// optionally writes `report.json` and `table.csv` into `out_dir`.
///
/// Replication `r` draws its data from substream `4r` of the master seed and
/// estimator `e` tunes from substream `4r + tag(e)`.
pub fn run_experiment(
    config: &ModelConfig,
    estimators: &[Estimator],
    options: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    config.validate()?;
    options.solver.validate()?;
    if estimators.is_empty() {
        return Err(GqrError::InvalidParameter("no estimators requested".into()));
    }
    let start = Instant::now();
    let per_rep: Vec<Vec<(RepRecord, f64)>> = (0..config.n_reps())
        .into_par_iter()
        .map(|rep| run_replication(config, rep, estimators, options))
        .collect();
    let wall_seconds = start.elapsed().as_secs_f64();

    let mut records = Vec::new();
    let mut seconds: Vec<(Estimator, f64, usize)> = estimators.iter().map(|&e| (e, 0.0, 0)).collect();
    for (rec, secs) in per_rep.into_iter().flatten() {
        if let Some(s) = seconds.iter_mut().find(|s| s.0 == rec.estimator) {
            s.1 += secs;
            s.2 += 1;
        }
        records.push(rec);
    }
    let summaries = estimators.iter().map(|&e| summarize(e, &records)).collect();
    let report = ExperimentReport {
        config: config.clone(),
        options: options.clone(),
        estimators: estimators.to_vec(),
        summaries,
        records,
        timing: Timing {
            wall_seconds,
            mean_fit_seconds: seconds.iter().map(|&(e, s, c)| (e, s / c.max(1) as f64)).collect(),
        },
    };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn substream(seed: u64, rep: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 2) | tag);
    rng
}

enum RepData {
    Linear {
        design: GroupedDesign,
        y: Vec<f64>,
        beta_bar: Vec<f64>,
    },
    Additive {
        design: GroupedDesign,
        y: Vec<f64>,
        mc_seed: u64,
    },
}

fn run_replication(
    config: &ModelConfig,
    rep: usize,
    estimators: &[Estimator],
    options: &ExperimentOptions,
) -> Vec<(RepRecord, f64)> {
    let mut rng = substream(config.seed(), rep, 0);
    let data = match config {
        ModelConfig::Model1(c) => gen_model1(c, &mut rng).map(|d| RepData::Linear {
            design: d.design,
            y: d.y,
            beta_bar: d.beta_bar,
        }),
        ModelConfig::Model2(c) => gen_model2(c, &mut rng).and_then(|d| {
            let design = expand_design(&d.z, &c.basis_spec()?)?;
            Ok(RepData::Additive {
                design,
                y: d.y,
                mc_seed: rng.random(),
            })
        }),
    };
    estimators
        .iter()
        .map(|&e| {
            let t = Instant::now();
            let rec = match &data {
                Ok(d) => run_estimator(config, d, rep, e, options),
                Err(err) => Err(GqrError::InvalidParameter(err.to_string())),
            };
            let rec = rec.unwrap_or_else(|err| RepRecord {
                rep,
                estimator: e,
                metrics: None,
                lambda: f64::NAN,
                converged: false,
                iterations: 0,
                relative_gap: f64::NAN,
                cone: None,
                error: Some(err.to_string()),
            });
            (rec, t.elapsed().as_secs_f64())
        })
        .collect()
}

fn tuned_fit(
    design: &GroupedDesign,
    y: &[f64],
    tau: f64,
    theta: f64,
    c: f64,
    seed: u64,
    options: &ExperimentOptions,
) -> Result<QuantileFit> {
    let pivot = PivotConfig {
        tau,
        theta,
        c,
        n_sim: options.n_sim,
        seed,
    };
    let lambda = select_lambda(design, &pivot)?.lambda;
    let penalty = PenaltySpec::new(lambda, design.partition())?;
    solver::fit(design, y, tau, &penalty, &options.solver)
}

fn run_estimator(
    config: &ModelConfig,
    data: &RepData,
    rep: usize,
    estimator: Estimator,
    options: &ExperimentOptions,
) -> Result<RepRecord> {
    let (tau, theta, c) = match config {
        ModelConfig::Model1(m) => (m.tau, m.theta, m.c),
        ModelConfig::Model2(m) => (m.tau, m.theta, m.c),
    };
    let seed: u64 = substream(config.seed(), rep, estimator.tag()).random();
    let design = match data {
        RepData::Linear { design, .. } | RepData::Additive { design, .. } => design,
    };
    let y = match data {
        RepData::Linear { y, .. } | RepData::Additive { y, .. } => y,
    };
    let fit = match estimator {
        Estimator::GrLasso => tuned_fit(design, y, tau, theta, c, seed, options)?,
        Estimator::Lasso => {
            let single = solver::singleton_design(design)?;
            tuned_fit(&single, y, tau, theta, c, seed, options)?
        }
        Estimator::Qr => solver::fit_unpenalized(design, y, tau, &options.solver)?,
    };
    let (metrics, cone) = match (data, config) {
        (RepData::Linear { beta_bar, .. }, _) => {
            let m = linear_metrics(&fit.beta, beta_bar, design.partition())?;
            let cone = if estimator == Estimator::GrLasso {
                Some(cone_diagnostic(&fit.beta, beta_bar, design.partition(), options.c0)?)
            } else {
                None
            };
            (m, cone)
        }
        (RepData::Additive { mc_seed, .. }, ModelConfig::Model2(m2)) => {
            let basis = m2.basis_spec()?;
            let m = basis.m();
            let model = AdditiveModel::from_fit(basis, fit.clone(), None)?;
            let d = m2.d;
            let err = l2_error(&model, g_true, |r: &mut ChaCha8Rng| sample_z(d, r), m2.n_mc, *mc_seed)?;
            (additive_metrics(&fit.beta, m, err), None)
        }
        _ => unreachable!("additive data only comes from the additive model"),
    };
    Ok(RepRecord {
        rep,
        estimator,
        metrics: Some(metrics),
        lambda: fit.lambda,
        converged: fit.converged,
        iterations: fit.iterations,
        relative_gap: fit.relative_gap,
        cone,
        error: None,
    })
}

fn summarize(estimator: Estimator, records: &[RepRecord]) -> EstimatorSummary {
    let mine: Vec<&RepRecord> = records.iter().filter(|r| r.estimator == estimator).collect();
    let ok: Vec<RepMetrics> = mine.iter().filter(|r| r.ok()).filter_map(|r| r.metrics).collect();
    let nsg: Vec<f64> = ok.iter().map(|m| m.nsg as f64).collect();
    let nsv: Vec<f64> = ok.iter().map(|m| m.nsv as f64).collect();
    let err: Vec<f64> = ok.iter().map(|m| m.error).collect();
    let (nsg_mean, nsg_sd) = mean_sd(&nsg);
    let (nsv_mean, nsv_sd) = mean_sd(&nsv);
    let (_, error_sd) = mean_sd(&err);
    let rmse = if err.is_empty() {
        f64::NAN
    } else {
        (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt()
    };
    let cones: Vec<bool> = mine
        .iter()
        .filter(|r| r.ok())
        .filter_map(|r| r.cone.map(|c| c.in_cone))
        .collect();
    let cone_rate = (!cones.is_empty()).then(|| cones.iter().filter(|&&b| b).count() as f64 / cones.len() as f64);
    EstimatorSummary {
        estimator,
        n_ok: ok.len(),
        n_failed: mine.len() - ok.len(),
        nsg_mean,
        nsg_sd,
        nsv_mean,
        nsv_sd,
        rmse,
        error_sd,
        cone_rate,
    }
}

#[derive(Serialize)]
struct TableRow<'a> {
    estimator: &'a str,
    n_ok: usize,
    n_failed: usize,
    nsg_mean: f64,
    nsg_sd: f64,
    nsv_mean: f64,
    nsv_sd: f64,
    rmse: f64,
    error_sd: f64,
}

/// Writes `report.json` and `table.csv` into `dir` (created if missing).
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(json), report)?;
    let mut w = csv::Writer::from_path(dir.join("table.csv"))?;
    for s in &report.summaries {
        w.serialize(TableRow {
            estimator: s.estimator.name(),
            n_ok: s.n_ok,
            n_failed: s.n_failed,
            nsg_mean: s.nsg_mean,
            nsg_sd: s.nsg_sd,
            nsv_mean: s.nsv_mean,
            nsv_sd: s.nsv_sd,
            rmse: s.rmse,
            error_sd: s.error_sd,
        })?;
    }
    w.flush()?;
    Ok(())
}
