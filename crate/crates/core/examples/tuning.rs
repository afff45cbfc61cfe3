//! Pivotal λ selection: quantiles for a few tail levels and the schedule
//! θ = max(e, q^{1/p_min})^{−t²}.

use gqr::sim::{gen_model1, Model1Config};
use gqr::tuning::draw_rng;
use gqr::{select_lambda, theta_schedule, PivotConfig};

fn main() -> gqr::Result<()> {
    let config = Model1Config::default();
    let data = gen_model1(&config, &mut draw_rng(3, 0))?;
    for theta in [0.2, 0.1, 0.05] {
        let cfg = PivotConfig {
            theta,
            n_sim: 4000,
            ..PivotConfig::new(0.5)
        };
        let t = select_lambda(&data.design, &cfg)?;
        println!(
            "theta {theta:<5} quantile {:.3}  lambda {:.3}",
            t.quantile_value, t.lambda
        );
    }
    let part = data.design.partition();
    for t in [0.5, 1.0, 1.5] {
        println!(
            "t = {t}: theta = {:.4}",
            theta_schedule(part.num_groups(), part.p_min(), t)?
        );
    }
    Ok(())
}
