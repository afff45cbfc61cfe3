//! Sparse additive median regression on Model 2 data with d = 20.

use gqr::sim::{g_true, gen_model2, sample_z, Model2Config};
use gqr::tuning::draw_rng;
use gqr::{fit_additive, l2_error, predict_g, PivotConfig, SolverOptions};

fn main() -> gqr::Result<()> {
    let config = Model2Config {
        d: 20,
        ..Model2Config::default()
    };
    let data = gen_model2(&config, &mut draw_rng(5, 0))?;
    let basis = config.basis_spec()?;
    let pivot = PivotConfig {
        theta: config.theta,
        c: config.c,
        ..PivotConfig::new(config.tau)
    };
    let model = fit_additive(&data.z, &data.y, config.tau, &basis, &pivot, &SolverOptions::default())?;

    let selected: Vec<usize> = model.selected_covariates.iter().map(|k| k + 1).collect();
    println!(
        "m = {}, lambda = {:.3}, selected covariates {selected:?}",
        basis.m(),
        model.lambda
    );
    let err = l2_error(&model, g_true, |rng| sample_z(config.d, rng), 10_000, 1)?;
    println!("L2 error {err:.4}");

    let mut z = vec![0.0; config.d];
    for v in [-0.8, -0.4, 0.0, 0.4, 0.8] {
        z[0] = v;
        println!(
            "z1 = {v:>4}: g = {:.3}, ghat = {:.3}",
            g_true(&z),
            predict_g(&model, &z)?
        );
    }
    Ok(())
}
