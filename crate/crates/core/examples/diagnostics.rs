//! Restricted eigenvalue range, the Ω₀ check and the reference λ_A for a
//! Model 1 design.

use gqr::diagnostics::{estimate_restricted_eigs, omega0_check, theoretical_lambda, ConeSampleConfig};
use gqr::sim::{gen_model1, Model1Config};
use gqr::tuning::draw_rng;

fn main() -> gqr::Result<()> {
    let config = Model1Config::default();
    let data = gen_model1(&config, &mut draw_rng(2, 0))?;
    let part = data.design.partition();
    let cfg = ConeSampleConfig {
        c0: 4.0,
        active: vec![0, 1],
        n_samples: 20_000,
        seed: 0,
    };
    let eigs = estimate_restricted_eigs(&data.design.full_gram(), part, &cfg)?;
    println!("phi_min <= {:.4}, phi_max >= {:.4}", eigs.phi_min, eigs.phi_max);
    let o = omega0_check(&data.design);
    println!("omega0 holds: {} (max deviation {:.3})", o.holds, o.max_deviation);
    let lam = theoretical_lambda(config.n, config.q, part.p_min(), 0.0, 0.0, 0.0)?;
    println!("lambda_A with A1 = A2 = Delta = 0: {lam:.2}");
    Ok(())
}
