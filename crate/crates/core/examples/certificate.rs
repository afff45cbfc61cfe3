//! Checks a fit against its dual certificate and the explicit cone program.

use gqr::tuning::draw_rng;
use gqr::{dual_certificate, fit, GroupPartition, GroupedDesign, Matrix, PenaltySpec, SocpProblem, SolverOptions};
use rand::RngExt;

fn main() -> gqr::Result<()> {
    let mut rng = draw_rng(11, 0);
    let (n, sizes) = (40, [1usize, 3, 3, 2]);
    let p: usize = sizes.iter().sum();
    let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let design = GroupedDesign::new(x, GroupPartition::from_sizes(&sizes)?)?;
    let y: Vec<f64> = (0..n)
        .map(|i| design.x()[(i, 1)] * 2.0 + rng.random_range(-0.5..0.5))
        .collect();

    let tau = 0.3;
    let penalty = PenaltySpec::new(2.0, design.partition())?;
    let f = fit(&design, &y, tau, &penalty, &SolverOptions::default())?;
    println!("n*objective = {:.10}", n as f64 * f.objective);
    println!("dual value  = {:.10}", n as f64 * f.objective - f.duality_gap);
    println!("relative gap {:.3e}", f.relative_gap);

    // any dual seed gives a valid lower bound
    let crude = dual_certificate(&design, &y, tau, &penalty, &f.beta, &vec![0.0; n])?;
    println!("gap from the zero seed: {:.4}", crude.gap);

    let socp = SocpProblem::assemble(&design, &y, tau, &penalty)?;
    let xp = socp.feasible_point(&design, &f.beta);
    println!(
        "cone program: {} variables, {} rows, value {:.10}, violation {:.1e}",
        socp.n_vars,
        socp.n_rows,
        socp.primal_objective(&xp),
        socp.primal_violation(&xp)
    );
    Ok(())
}
