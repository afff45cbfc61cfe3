//! Fits Model 1 data at the tuned λ and prints the selected groups.

use gqr::sim::{gen_model1, Model1Config};
use gqr::tuning::draw_rng;
use gqr::{fit, lambda_max, select_lambda, PenaltySpec, PivotConfig, SolverOptions};

fn main() -> gqr::Result<()> {
    let config = Model1Config::default();
    let data = gen_model1(&config, &mut draw_rng(7, 0))?;
    let tuned = select_lambda(&data.design, &PivotConfig::new(config.tau))?;
    let lm = lambda_max(&data.design, &data.y, config.tau)?;
    println!("lambda = {:.3} (lambda_max = {:.3})", tuned.lambda, lm);

    let penalty = PenaltySpec::new(tuned.lambda, data.design.partition())?;
    let f = fit(&data.design, &data.y, config.tau, &penalty, &SolverOptions::default())?;
    println!(
        "objective {:.6}  gap {:.2e}  iterations {}  converged {}",
        f.objective, f.relative_gap, f.iterations, f.converged
    );
    let groups: Vec<usize> = f.selected_groups.iter().map(|k| k + 1).collect();
    println!("selected groups (1-based): {groups:?}");
    println!("beta[0..6] = {:.3?}", &f.beta[..6]);
    Ok(())
}
