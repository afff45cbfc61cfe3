use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gqr::diagnostics::{estimate_restricted_eigs, omega0_check, theoretical_lambda, ConeSampleConfig};
use gqr::io::{design_from_columns, read_csv, read_group_sizes, ResponseColumn};
use gqr::sim::{run_experiment, Case, Estimator, ExperimentOptions, Model1Config, Model2Config, ModelConfig};
use gqr::solver::{self, SolverOptions};
use gqr::tuning::{select_lambda, PivotConfig};
use gqr::{BasisFamily, BasisSpec, GqrError, GroupedDesign, PenaltySpec, Result};

#[derive(Parser)]
#[command(name = "gqr", version, about = "Group-Lasso quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at a given λ (or a tuned one when --lambda is omitted).
    Fit(FitArgs),
    /// Simulate the pivot and report λ = c·Λ̃(1−θ).
    Tune(TuneArgs),
    /// Sparse additive model on a spline or Fourier basis.
    Additive(AdditiveArgs),
    /// Replicated simulation study.
    Simulate(SimulateArgs),
    /// Heuristic design diagnostics.
    Diag(DiagArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file; header row optional.
    #[arg(long)]
    data: PathBuf,
    /// Response column: header name or 1-based number (default: first).
    #[arg(long)]
    response: Option<String>,
    /// Treat the first row as data even if it does not parse.
    #[arg(long)]
    no_header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<(Vec<f64>, gqr::Matrix, Option<Vec<String>>)> {
        let table = read_csv(&self.data, if self.no_header { Some(false) } else { None })?;
        let which = self
            .response
            .clone()
            .map_or(ResponseColumn::First, ResponseColumn::Named);
        let r = table.column_index(&which)?;
        let (y, x) = table.split_response(&which)?;
        let names = table.names.map(|mut n| {
            n.remove(r);
            n
        });
        Ok((y, x, names))
    }

    fn grouped(&self, groups: &Path) -> Result<(Vec<f64>, GroupedDesign)> {
        let (y, x, _) = self.load()?;
        let sizes = read_group_sizes(groups)?;
        Ok((y, design_from_columns(&x, &sizes)?))
    }
}

#[derive(Args)]
struct PivotArgs {
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    #[arg(long, default_value_t = 1.1)]
    c: f64,
    #[arg(long, default_value_t = 2000)]
    nsim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PivotArgs {
    fn config(&self, tau: f64) -> PivotConfig {
        PivotConfig {
            tau,
            theta: self.theta,
            c: self.c,
            n_sim: self.nsim,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Relative duality gap at which to stop.
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated group sizes, intercept group first.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long)]
    lambda: Option<f64>,
    /// ℓ₁ penalty (every column its own group).
    #[arg(long, conflicts_with = "unpenalized")]
    l1: bool,
    #[arg(long)]
    unpenalized: bool,
    #[command(flatten)]
    pivot: PivotArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Tune for the ℓ₁ penalty instead.
    #[arg(long)]
    l1: bool,
    #[command(flatten)]
    pivot: PivotArgs,
    /// Include all simulated draws in the output.
    #[arg(long)]
    draws: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Bspline,
    Fourier,
}

#[derive(Args)]
struct AdditiveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = BasisArg::Bspline)]
    basis: BasisArg,
    /// Interior knots of the cubic B-spline basis.
    #[arg(long, default_value_t = 4)]
    knots: usize,
    /// Functions per covariate for the Fourier basis.
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long, default_value_t = 0.2)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 2000)]
    nsim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed λ instead of pivotal tuning.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    model: u8,
    /// Coefficient layout for model 1.
    #[arg(long, default_value_t = 1)]
    case: u8,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Sample size (default 200 for model 1, 400 for model 2).
    #[arg(long)]
    n: Option<usize>,
    /// Covariates in model 2.
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated subset of grlasso,lasso,qr.
    #[arg(long, default_value = "grlasso,lasso,qr")]
    estimators: String,
    #[arg(long, default_value_t = 2000)]
    nsim: usize,
    /// Monte-Carlo draws per L2 error (model 2).
    #[arg(long, default_value_t = 10_000)]
    n_mc: usize,
    /// Output directory for report.json and table.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    c0: f64,
    /// 1-based active groups; the intercept group 1 is always added.
    #[arg(long, value_delimiter = ',')]
    active: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    a1: f64,
    #[arg(long, default_value_t = 0.0)]
    a2: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn one_based(groups: &[usize]) -> Vec<usize> {
    groups.iter().map(|k| k + 1).collect()
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let (y, design) = a.data.grouped(&a.groups)?;
    let opts = a.solver.options();
    let design = if a.l1 {
        solver::singleton_design(&design)?
    } else {
        design
    };
    let (lambda, tuned) = if a.unpenalized {
        (0.0, None)
    } else if let Some(l) = a.lambda {
        (l, None)
    } else {
        let t = select_lambda(&design, &a.pivot.config(a.tau))?;
        (t.lambda, Some(t.quantile_value))
    };
    let penalty = PenaltySpec::new(lambda, design.partition())?;
    let fit = solver::fit(&design, &y, a.tau, &penalty, &opts)?;
    if !fit.converged {
        eprintln!(
            "warning: stopped after {} iterations, relative gap {:.3e}",
            fit.iterations, fit.relative_gap
        );
    }
    emit(
        &json!({
            "tau": fit.tau,
            "lambda": fit.lambda,
            "pivot_quantile": tuned,
            "penalty": if a.unpenalized { "none" } else if a.l1 { "l1" } else { "group" },
            "beta": fit.beta,
            "selected_groups": one_based(&fit.selected_groups),
            "group_norms": fit.group_norms,
            "objective": fit.objective,
            "loss": fit.loss_term,
            "penalty_value": fit.penalty_term,
            "duality_gap": fit.duality_gap,
            "relative_gap": fit.relative_gap,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "ridge": fit.ridge,
            "options": opts,
        }),
        a.out.as_deref(),
    )
}

fn tune_cmd(a: TuneArgs) -> Result<()> {
    let (_, design) = a.data.grouped(&a.groups)?;
    let design = if a.l1 {
        solver::singleton_design(&design)?
    } else {
        design
    };
    let t = select_lambda(&design, &a.pivot.config(a.tau))?;
    for w in &t.warnings {
        eprintln!("warning: {w}");
    }
    let lm = solver::lambda_max(&design, &a.data.load()?.0, a.tau)?;
    emit(
        &json!({
            "lambda": t.lambda,
            "quantile_value": t.quantile_value,
            "lambda_max": lm,
            "config": t.config,
            "warnings": t.warnings,
            "draws": if a.draws { Some(&t.draws) } else { None },
        }),
        a.out.as_deref(),
    )
}

fn additive_cmd(a: AdditiveArgs) -> Result<()> {
    let (y, z, names) = a.data.load()?;
    let family = match a.basis {
        BasisArg::Bspline => BasisFamily::CubicBSpline {
            interior_knots: a.knots,
        },
        BasisArg::Fourier => BasisFamily::Fourier { m: a.m },
    };
    let basis = BasisSpec::from_data(family, &z)?;
    let opts = a.solver.options();
    let model = match a.lambda {
        Some(l) => gqr::fit_additive_at(&z, &y, a.tau, &basis, l, &opts)?,
        None => {
            let pivot = PivotConfig {
                tau: a.tau,
                theta: a.theta,
                c: a.c,
                n_sim: a.nsim,
                seed: a.seed,
            };
            gqr::fit_additive(&z, &y, a.tau, &basis, &pivot, &opts)?
        }
    };
    let selected_names: Option<Vec<&String>> = names
        .as_ref()
        .map(|n| model.selected_covariates.iter().map(|&k| &n[k]).collect());
    emit(
        &json!({
            "basis": model.basis,
            "m": model.basis.m(),
            "knots": model.basis.knots(),
            "tau": a.tau,
            "lambda": model.lambda,
            "pivot_quantile": model.pivot_quantile,
            "beta": model.beta,
            "selected_covariates": one_based(&model.selected_covariates),
            "selected_names": selected_names,
            "objective": model.fit.objective,
            "duality_gap": model.fit.duality_gap,
            "relative_gap": model.fit.relative_gap,
            "iterations": model.fit.iterations,
            "converged": model.fit.converged,
        }),
        a.out.as_deref(),
    )
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let estimators = a
        .estimators
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<Estimator>>>()?;
    let config = match a.model {
        1 => ModelConfig::Model1(Model1Config {
            n: a.n.unwrap_or(200),
            tau: a.tau,
            case: Case::try_from(a.case)?,
            n_reps: a.reps,
            seed: a.seed,
            ..Model1Config::default()
        }),
        2 => ModelConfig::Model2(Model2Config {
            n: a.n.unwrap_or(400),
            d: a.d,
            tau: a.tau,
            n_reps: a.reps,
            seed: a.seed,
            n_mc: a.n_mc,
            ..Model2Config::default()
        }),
        m => return Err(GqrError::InvalidParameter(format!("model must be 1 or 2, got {m}"))),
    };
    let options = ExperimentOptions {
        n_sim: a.nsim,
        ..ExperimentOptions::default()
    };
    let report = run_experiment(&config, &estimators, &options, a.out.as_deref())?;
    println!(
        "{:<8} {:>5} {:>6} {:>8} {:>8} {:>8}",
        "", "ok", "failed", "NSG", "NSV", "RMSE"
    );
    for s in &report.summaries {
        println!(
            "{:<8} {:>5} {:>6} {:>8.2} {:>8.2} {:>8.3}",
            s.estimator.name(),
            s.n_ok,
            s.n_failed,
            s.nsg_mean,
            s.nsv_mean,
            s.rmse
        );
        println!(
            "{:<8} {:>5} {:>6} {:>8.2} {:>8.2} {:>8.3}",
            "", "", "", s.nsg_sd, s.nsv_sd, s.error_sd
        );
    }
    if let Some(rate) = report.summary(Estimator::GrLasso).and_then(|s| s.cone_rate) {
        println!("grlasso cone membership: {rate:.2}");
    }
    Ok(())
}

fn diag_cmd(a: DiagArgs) -> Result<()> {
    let (_, design) = a.data.grouped(&a.groups)?;
    let part = design.partition();
    let mut active = vec![0];
    for &k in &a.active {
        if k == 0 || k > part.num_groups() {
            return Err(GqrError::InvalidParameter(format!("active group {k} out of range")));
        }
        if k > 1 {
            active.push(k - 1);
        }
    }
    let cfg = ConeSampleConfig {
        c0: a.c0,
        active: active.clone(),
        n_samples: a.samples,
        seed: a.seed,
    };
    let eigs = estimate_restricted_eigs(&design.full_gram(), part, &cfg)?;
    let omega = omega0_check(&design);
    let lambda_a = if part.num_groups() >= 2 {
        Some(theoretical_lambda(
            design.n(),
            part.num_groups(),
            part.p_min(),
            a.a1,
            a.a2,
            a.delta,
        )?)
    } else {
        None
    };
    emit(
        &json!({
            "active_groups": one_based(&active),
            "c0": a.c0,
            "samples": a.samples,
            "phi_min_upper_estimate": eigs.phi_min,
            "phi_max_lower_estimate": eigs.phi_max,
            "omega0_holds": omega.holds,
            "omega0_max_deviation": omega.max_deviation,
            "lambda_a": lambda_a,
            "heuristic": true,
        }),
        a.out.as_deref(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit_cmd(a),
        Command::Tune(a) => tune_cmd(a),
        Command::Additive(a) => additive_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Diag(a) => diag_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
