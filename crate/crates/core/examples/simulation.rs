//! A short Model 1 run with all three estimators.

use gqr::sim::{run_experiment, Estimator, ExperimentOptions, Model1Config, ModelConfig};

fn main() -> gqr::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let config = ModelConfig::Model1(Model1Config {
        n_reps: reps,
        ..Model1Config::default()
    });
    let report = run_experiment(&config, &Estimator::ALL, &ExperimentOptions::default(), None)?;
    for s in &report.summaries {
        println!(
            "{:<8} NSG {:6.2}  NSV {:6.2}  RMSE {:.3} ({:.3})  failed {}",
            s.estimator.name(),
            s.nsg_mean,
            s.nsv_mean,
            s.rmse,
            s.error_sd,
            s.n_failed
        );
    }
    println!("{:.1} s", report.timing.wall_seconds);
    Ok(())
}
