//! Small-instance oracle checks of the closed forms and the path solver.

use fairchannel_core::correction::{correction_function, principal_functions};
use fairchannel_core::oracle::{
    brute_force_min_delta, grid_simplex_min, maximal_correlation_svd, random_binary_context, random_direction,
    richardson_delta, seeded_rng, DEFAULT_EPS_LADDER,
};
use fairchannel_core::perturbation::delta_lambda;
use fairchannel_core::{solve_correction_path, LambdaWeights, SolverConfig};
use serde::Serialize;

use crate::error::Result;

const SEED: u64 = 20_190_601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

const WEIGHTS: [[f64; 4]; 5] = [
    [0.0, 1.0, 0.0, 1.0],
    [1.0, 0.5, 0.25, 1.5],
    [0.2, 2.0, 0.0, 0.3],
    [0.0, 0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0],
];

fn check(name: &'static str, instances: usize, max_error: f64, tolerance: f64) -> Check {
    Check {
        name,
        instances,
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    }
}

pub fn run_selftest() -> Result<SelftestReport> {
    let mut rng = seeded_rng(SEED);
    let mut checks = Vec::new();

    let mut err = 0.0f64;
    let mut count = 0;
    for n in 2..=6 {
        for w in WEIGHTS {
            let lam = LambdaWeights::from_array(w)?;
            let ctx = random_binary_context(&mut rng, n)?;
            let f = random_direction(&mut rng, ctx.p0());
            let analytic = delta_lambda(&lam, &ctx, &f)?;
            let numeric = richardson_delta(&lam, &ctx, &f, &DEFAULT_EPS_LADDER)?;
            err = err.max((analytic - numeric).abs() / 1e-4f64.max(1e-3 * analytic.abs()));
            count += 1;
        }
    }
    checks.push(check("first_order_change_vs_finite_difference", count, err, 1.0));

    let mut err = 0.0f64;
    let mut count = 0;
    for (n, w) in [(3, WEIGHTS[0]), (4, WEIGHTS[1]), (4, WEIGHTS[2])] {
        let lam = LambdaWeights::from_array(w)?;
        let ctx = random_binary_context(&mut rng, n)?;
        let closed = correction_function(&lam, &ctx)?.delta_opt;
        let bf = brute_force_min_delta(&lam, &ctx, 5_000, true, SEED + count as u64)?;
        // the search may only match the closed form, never beat it
        err = err.max((closed - bf.delta_best).max(0.0));
        count += 1;
    }
    checks.push(check("closed_form_not_beaten_by_search", count, err, 1e-6));

    let mut err = 0.0f64;
    for n in 2..=6 {
        let ctx = random_binary_context(&mut rng, n)?;
        let rho = principal_functions(&ctx)?.rho_m;
        err = err.max((rho - maximal_correlation_svd(&ctx)?).abs());
    }
    checks.push(check("maximal_correlation_vs_svd", 5, err, 1e-9));

    let mut err = 0.0f64;
    for w in [WEIGHTS[1], WEIGHTS[4]] {
        let lam = LambdaWeights::from_array(w)?;
        let ctx = random_binary_context(&mut rng, 3)?;
        let solved = solve_correction_path(&lam, &ctx, &SolverConfig::default())?;
        let (_, grid) = grid_simplex_min(&lam, &ctx, 200)?;
        // the lattice can only approach the continuous minimum from above
        err = err.max((solved.objective - grid).max(0.0));
    }
    checks.push(check("path_solver_vs_simplex_grid", 2, err, 1e-9));

    Ok(SelftestReport {
        seed: SEED,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        let report = super::run_selftest().unwrap();
        assert!(report.passed, "{report:?}");
    }
}
