#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use gqr::tuning::draw_rng;
use gqr::{GroupPartition, GroupedDesign, Matrix, SocpProblem};
use rand::RngExt;

pub struct Instance {
    pub design: GroupedDesign,
    pub y: Vec<f64>,
    pub tau: f64,
}

/// Small random problem: n in 10..=30, 2 or 3 groups, p ≤ 8.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = draw_rng(0xACE, seed);
    let n = rng.random_range(10..=30);
    let q = rng.random_range(2..=3);
    let mut sizes = vec![1usize, rng.random_range(1..=4)];
    if q == 3 {
        sizes.push(rng.random_range(1..=(7 - sizes[1]).min(4)));
    }
    let p: usize = sizes.iter().sum();
    let x = Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
    let signal: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
    let y = (0..n)
        .map(|i| (0..p).map(|j| x[(i, j)] * signal[j]).sum::<f64>() + rng.random_range(-1.0..1.0))
        .collect();
    let tau = [0.25, 0.5, 0.7][rng.random_range(0..3usize)];
    let design = GroupedDesign::new(x, GroupPartition::from_sizes(&sizes).unwrap()).unwrap();
    Instance { design, y, tau }
}

fn solve(p_dim: usize, c: Vec<f64>, a: CscMatrix<f64>, b: Vec<f64>, cones: Vec<SupportedConeT<f64>>) -> Vec<f64> {
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        ..DefaultSettings::default()
    };
    let pm = CscMatrix::zeros((p_dim, p_dim));
    let mut solver = DefaultSolver::new(&pm, &c, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(
            solver.solution.status,
            SolverStatus::Solved | SolverStatus::AlmostSolved
        ),
        "conic solver status {:?}",
        solver.solution.status
    );
    solver.solution.x.clone()
}

fn csc(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0; cols + 1];
    for &(_, c, _) in &triplets {
        colptr[c + 1] += 1;
    }
    for j in 0..cols {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(
        rows,
        cols,
        colptr,
        triplets.iter().map(|t| t.0).collect(),
        triplets.iter().map(|t| t.2).collect(),
    )
}

/// Epigraph form built straight from the raw design, using
/// `‖Σ̂_k^{1/2} β_k‖ = ‖X_k β_k‖ / √n`:
///
/// min τ1'u + (1−τ)1'w + Σ λ√p_k t_k  s.t.  Xβ + u − w = y, u, w ≥ 0,
/// (t_k, X_k β_k / √n) in the second-order cone.
///
/// Returns the β part of the conic solution.
pub fn oracle_beta(design: &GroupedDesign, y: &[f64], tau: f64, lambda: f64) -> Vec<f64> {
    let x = design.x();
    let (n, p) = x.shape();
    let part = design.partition();
    let q = part.num_groups();
    let t0 = p;
    let u0 = p + q - 1;
    let w0 = u0 + n;
    let nv = w0 + n;
    let mut c = vec![0.0; nv];
    for k in 1..q {
        c[t0 + k - 1] = lambda * (part.group(k).len() as f64).sqrt();
    }
    for i in 0..n {
        c[u0 + i] = tau;
        c[w0 + i] = 1.0 - tau;
    }
    let mut trip = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    for i in 0..n {
        for j in 0..p {
            if x[(i, j)] != 0.0 {
                trip.push((i, j, x[(i, j)]));
            }
        }
        trip.push((i, u0 + i, 1.0));
        trip.push((i, w0 + i, -1.0));
        b.push(y[i]);
    }
    cones.push(SupportedConeT::ZeroConeT(n));
    let mut row = n;
    for j in 0..2 * n {
        trip.push((row, u0 + j, -1.0));
        b.push(0.0);
        row += 1;
    }
    cones.push(SupportedConeT::NonnegativeConeT(2 * n));
    let sn = (n as f64).sqrt();
    for k in 1..q {
        trip.push((row, t0 + k - 1, -1.0));
        b.push(0.0);
        row += 1;
        for i in 0..n {
            for &j in part.group(k) {
                trip.push((row, j, -x[(i, j)] / sn));
            }
            b.push(0.0);
            row += 1;
        }
        cones.push(SupportedConeT::SecondOrderConeT(n + 1));
    }
    let sol = solve(nv, c, csc(row, nv, trip), b, cones);
    sol[..p].to_vec()
}

/// The library's own cone assembly handed to the same external solver.
pub fn assembled_beta(problem: &SocpProblem) -> Vec<f64> {
    let (colptr, rowval, nzval) = problem.to_csc();
    let a = CscMatrix::new(problem.n_rows, problem.n_vars, colptr, rowval, nzval);
    let cones = problem
        .cones
        .iter()
        .map(|c| match *c {
            gqr::solver::ConeBlock::Zero(d) => SupportedConeT::ZeroConeT(d),
            gqr::solver::ConeBlock::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
            gqr::solver::ConeBlock::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
        })
        .collect();
    let sol = solve(problem.n_vars, problem.c.clone(), a, problem.b.clone(), cones);
    problem.beta_of(&sol).to_vec()
}

/// Minimizes a convex function of one variable on `[lo, hi]` by repeated
/// grid refinement.
pub fn grid_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const POINTS: usize = 64;
    loop {
        let h = (hi - lo) / POINTS as f64;
        let mut best = (lo, f(lo));
        for i in 1..=POINTS {
            let x = lo + h * i as f64;
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        if h < 1e-11 * (1.0 + best.0.abs()) {
            return best.0;
        }
        lo = (best.0 - 2.0 * h).max(lo);
        hi = (best.0 + 2.0 * h).min(hi);
    }
}

pub fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}
