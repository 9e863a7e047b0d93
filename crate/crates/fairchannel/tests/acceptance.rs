//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Criteria 9 and 10 need the COMPAS export (`COMPAS_CSV` or
//! `data/compas-scores-two-years.csv`, see `scripts/fetch_compas.sh`).

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fairchannel_core::correction::{
    correction_function, delta_at_optimum, delta_lambda_logistic, fl_from_membership_model, log_likelihood_ratio_fl,
    output_alignment_delta, principal_functions,
};
use fairchannel_core::distributions::{expectation, inner_product, kl_divergence, objective, Divergence};
use fairchannel_core::oracle::{
    brute_force_min_delta, grid_simplex_min, maximal_correlation_svd, random_binary_context, random_direction,
    richardson_delta, seeded_rng, DEFAULT_EPS_LADDER,
};
use fairchannel_core::perturbation::{delta_lambda, perturbed_distribution};
use fairchannel_core::{
    solve_correction_path, AuditContext, Channel, DiscreteDistribution, LambdaWeights, SolverConfig, Support,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn lam(w: [f64; 4]) -> LambdaWeights {
    LambdaWeights::from_array(w).unwrap()
}

fn uniform_weights(rng: &mut ChaCha8Rng, hi: f64) -> [f64; 4] {
    [0; 4].map(|_| hi * rng.random::<f64>())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Random instances of the first three criteria, shared so criterion 3 can
/// check every one of them.
fn instances(seed: u64, count: usize, sizes: std::ops::RangeInclusive<usize>) -> Vec<(LambdaWeights, AuditContext)> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(sizes.clone());
            let ctx = random_binary_context(&mut rng, n).unwrap();
            let mut w = uniform_weights(&mut rng, 2.0);
            // keep the first-order problem non-degenerate
            w[1] = w[1].max(0.05);
            (lam(w), ctx)
        })
        .collect()
}

fn criterion_1(cases: &[(LambdaWeights, AuditContext)]) -> Verdict {
    let mut rng = seeded_rng(11);
    let (worst, elapsed) = timed(|| {
        let mut worst = 0.0f64;
        for (l, ctx) in cases {
            let f_star = correction_function(l, ctx).unwrap().f_star;
            for f in [f_star, random_direction(&mut rng, ctx.p0())] {
                let analytic = delta_lambda(l, ctx, &f).unwrap();
                let numeric = richardson_delta(l, ctx, &f, &DEFAULT_EPS_LADDER).unwrap();
                worst = worst.max((analytic - numeric).abs() / 1e-4f64.max(1e-3 * analytic.abs()));
            }
        }
        worst
    });
    verdict(
        worst <= 1.0 && elapsed < Duration::from_secs(5),
        format!(
            "{} instances, worst error / tolerance = {worst:.3e}, {:.2?}",
            cases.len(),
            elapsed
        ),
    )
}

fn criterion_2(cases: &[(LambdaWeights, AuditContext)]) -> Verdict {
    let ((undercut, min_cos), elapsed) = timed(|| {
        let mut undercut = f64::NEG_INFINITY;
        let mut min_cos = f64::INFINITY;
        for (i, (l, ctx)) in cases.iter().enumerate() {
            let opt = correction_function(l, ctx).unwrap();
            let bf = brute_force_min_delta(l, ctx, 100_000, true, 200 + i as u64).unwrap();
            undercut = undercut.max(opt.delta_opt - bf.delta_best);
            let cos = inner_product(ctx.p0(), &bf.f_best, &opt.f_star).unwrap();
            min_cos = min_cos.min(cos.abs());
        }
        (undercut, min_cos)
    });
    verdict(
        undercut <= 1e-6 && min_cos > 0.999 && elapsed < Duration::from_secs(60),
        format!(
            "{} instances, max(delta_opt - search) = {undercut:.3e}, min |cos| = {min_cos:.9}, {:.2?}",
            cases.len(),
            elapsed
        ),
    )
}

fn criterion_3(cases: &[(LambdaWeights, AuditContext)]) -> Verdict {
    let mut worst = 0.0f64;
    for (l, ctx) in cases {
        let f_star = correction_function(l, ctx).unwrap().f_star;
        let at = delta_lambda(l, ctx, &f_star).unwrap();
        worst = worst.max((at - delta_at_optimum(l, ctx).unwrap()).abs());
    }
    verdict(
        worst <= 1e-10,
        format!("{} instances, max |diff| = {worst:.3e}", cases.len()),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = seeded_rng(4);
    let (mut pointwise, mut delta) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let ctx = random_binary_context(&mut rng, n).unwrap();
        let w = uniform_weights(&mut rng, 2.0);
        let l = lam([w[0], 0.0, w[2], 0.05 + w[3]]);
        let res = correction_function(&l, &ctx).unwrap();
        let f_m = &res.principal.as_ref().unwrap().f_m;
        let sign = res.coefficients.b1.signum();
        for (a, b) in res.f_star.values().iter().zip(f_m.values()) {
            pointwise = pointwise.max((a + sign * b).abs());
        }
        delta = delta.max((res.delta_opt - output_alignment_delta(&l, &ctx).unwrap()).abs());
    }
    verdict(
        pointwise <= 1e-12 && delta <= 1e-10,
        format!("50 instances, max |f* + sign(b1) f_m| = {pointwise:.3e}, max delta gap = {delta:.3e}"),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = seeded_rng(5);
    let (mut rho_gap, mut moment_gap) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let ctx = random_binary_context(&mut rng, n).unwrap();
        let pair = principal_functions(&ctx).unwrap();
        rho_gap = rho_gap.max((pair.rho_m - maximal_correlation_svd(&ctx).unwrap()).abs());
        let mean = expectation(ctx.q0(), &pair.g_m).unwrap();
        let second = inner_product(ctx.q0(), &pair.g_m, &pair.g_m).unwrap();
        moment_gap = moment_gap.max(mean.abs()).max((second - 1.0).abs());
    }
    verdict(
        rho_gap <= 1e-9 && moment_gap <= 1e-12,
        format!("50 instances, max |rho_m - svd| = {rho_gap:.3e}, max g_m moment error = {moment_gap:.3e}"),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = seeded_rng(6);
    let eps = 1e-4;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let ctx = random_binary_context(&mut rng, n).unwrap();
        let f = random_direction(&mut rng, ctx.p0());
        let p = perturbed_distribution(ctx.p0(), &f, eps).unwrap();
        let ratio = kl_divergence(&p, ctx.p0()).unwrap() / (eps * eps);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    verdict(
        lo >= 0.4 && hi <= 0.6,
        format!("50 directions, KL/eps^2 in [{lo:.6}, {hi:.6}]"),
    )
}

/// `P(S=1|x) = 1/(1 + exp(theta0 + theta.x))` with cell marginal `px`.
/// Returns the context, features, `theta` and the posteriors `P(S=1|x)`.
fn logistic_instance(rng: &mut ChaCha8Rng, n: usize) -> (AuditContext, Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![4.0 * rng.random::<f64>() - 2.0, rng.random::<f64>()])
        .collect();
    let theta = vec![2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0];
    let theta0 = rng.random::<f64>() - 0.5;
    let px: Vec<f64> = (0..n).map(|_| 0.1 + rng.random::<f64>()).collect();
    let s1: Vec<f64> = features
        .iter()
        .map(|x| 1.0 / (1.0 + (theta0 + theta[0] * x[0] + theta[1] * x[1]).exp()))
        .collect();
    let support = Arc::new(Support::indexed(n).unwrap());
    let w0: Vec<f64> = px.iter().zip(&s1).map(|(p, s)| p * (1.0 - s)).collect();
    let w1: Vec<f64> = px.iter().zip(&s1).map(|(p, s)| p * s).collect();
    let channel_w: Vec<f64> = (0..n).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect();
    let ctx = AuditContext::new(
        DiscreteDistribution::from_weights(support.clone(), &w0).unwrap(),
        DiscreteDistribution::from_weights(support.clone(), &w1).unwrap(),
        Channel::binary(support, &channel_w).unwrap(),
    )
    .unwrap();
    (ctx, features, theta, s1)
}

fn criterion_7() -> Verdict {
    let mut rng = seeded_rng(7);
    let (mut fl_gap, mut delta_gap) = (0.0f64, 0.0f64);
    for _ in 0..30 {
        let n = rng.random_range(2..=6);
        let (ctx, features, theta, posterior) = logistic_instance(&mut rng, n);
        let general = log_likelihood_ratio_fl(&ctx).unwrap();
        let membership = fl_from_membership_model(&posterior, &ctx).unwrap();
        for (a, b) in membership.f_l.values().iter().zip(general.values()) {
            fl_gap = fl_gap.max((a - b).abs());
        }
        let q = (ctx.q0(), ctx.q1());
        let gamma1 = (q.0.mass(1) / q.1.mass(1)).ln() - (q.0.mass(0) / q.1.mass(0)).ln();
        let l = lam(uniform_weights(&mut rng, 2.0));
        let f = random_direction(&mut rng, ctx.p0());
        let a = delta_lambda_logistic(&l, &ctx, &f, &features, &theta, gamma1).unwrap();
        let b = delta_lambda(&l, &ctx, &f).unwrap();
        delta_gap = delta_gap.max((a - b).abs());
    }
    verdict(
        fl_gap <= 1e-12 && delta_gap <= 1e-10,
        format!("30 logistic instances, max f_l gap = {fl_gap:.3e}, max delta gap = {delta_gap:.3e}"),
    )
}

fn max_abs_diff(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    a.masses()
        .iter()
        .zip(b.masses())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn criterion_8() -> Verdict {
    let mut rng = seeded_rng(8);
    let cfg = SolverConfig::default();
    let (mut endpoint, mut aligned) = (0.0f64, 0.0f64);
    let mut unconverged = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let ctx = random_binary_context(&mut rng, n).unwrap();
        let a = solve_correction_path(&lam([1.0, 0.0, 0.0, 0.0]), &ctx, &cfg).unwrap();
        let b = solve_correction_path(&lam([0.0, 1.0, 0.0, 0.0]), &ctx, &cfg).unwrap();
        let both = lam([0.0, 1.0, 0.0, 1.0]);
        let c = solve_correction_path(&both, &ctx, &cfg).unwrap();
        unconverged += [&a, &b, &c].iter().filter(|p| !p.converged).count();
        endpoint = endpoint
            .max(max_abs_diff(&a.qx, ctx.p0()))
            .max(max_abs_diff(&b.qx, ctx.p1()));
        let at_p1 = objective(&both, ctx.p1(), &ctx, Divergence::Kl).unwrap();
        aligned = aligned.max(at_p1).max(c.objective);
    }
    let mut grid_gap = 0.0f64;
    let mut grid_below = 0.0f64;
    let (_, elapsed) = timed(|| {
        for n in [2, 3, 3, 4] {
            let ctx = random_binary_context(&mut rng, n).unwrap();
            let l = lam(uniform_weights(&mut rng, 2.0));
            let solved = solve_correction_path(&l, &ctx, &cfg).unwrap();
            let (_, grid) = grid_simplex_min(&l, &ctx, 400).unwrap();
            grid_gap = grid_gap.max((grid - solved.objective).abs());
            grid_below = grid_below.max(solved.objective - grid);
        }
    });
    verdict(
        endpoint <= 1e-6 && aligned <= 1e-8 && grid_gap <= 1e-5 && grid_below <= 1e-12 && unconverged == 0,
        format!(
            "20 instances, endpoint error = {endpoint:.3e}, aligned objective = {aligned:.3e}, \
             grid gap = {grid_gap:.3e} ({elapsed:.2?}), unconverged = {unconverged}"
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fairchannel"))
        .args(args)
        .output()
        .unwrap()
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn compas_audit(data: &Path, out: &Path) -> Result<(Value, Duration), String> {
    let schema = common::compas_schema();
    let (output, elapsed) = timed(|| {
        run_cli(&[
            "audit",
            "--data",
            data.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--groups",
            "model",
            "--out",
            out.to_str().unwrap(),
        ])
    });
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stdout).into_owned());
    }
    Ok((read_report(out), elapsed))
}

fn within_pct(got: f64, want: f64, pct: f64) -> bool {
    (got - want).abs() <= pct * want
}

fn criterion_9(audit: &Option<Result<(Value, Duration), String>>) -> Verdict {
    let (report, elapsed) = match audit {
        None => return Verdict::Skip("COMPAS data not found".into()),
        Some(Err(e)) => return Verdict::Fail(format!("audit failed: {e}")),
        Some(Ok(r)) => r,
    };
    let d = &report["disparity"];
    let (e0, e1) = (d["e_y_s0"].as_f64().unwrap(), d["e_y_s1"].as_f64().unwrap());
    let counts = &report["dataset"]["group_counts"];
    let (n0, n1) = (counts[0].as_f64().unwrap(), counts[1].as_f64().unwrap());
    let ok = (e0 - 0.543).abs() <= 0.01
        && (e1 - 0.438).abs() <= 0.01
        && within_pct(n0 + n1, 5278.0, 0.02)
        && within_pct(n0, 3175.0, 0.02)
        && within_pct(n1, 2103.0, 0.02)
        && *elapsed < Duration::from_secs(30);
    verdict(
        ok,
        format!(
            "E[Y|S=0] = {e0:.4}, E[Y|S=1] = {e1:.4}, records = {} ({n0}/{n1}), audit {elapsed:.2?}",
            n0 + n1
        ),
    )
}

fn matches(proto: &Value, want: &[(&str, &str)]) -> (usize, String) {
    let got: BTreeMap<String, String> = serde_json::from_value(proto["features"].clone()).unwrap();
    let hits = want
        .iter()
        .filter(|(k, v)| got.get(*k).map(String::as_str) == Some(*v))
        .count();
    (hits, proto["cell"].as_str().unwrap_or("").to_string())
}

fn criterion_10(audit: &Option<Result<(Value, Duration), String>>) -> Verdict {
    let report = match audit {
        None => return Verdict::Skip("COMPAS data not found".into()),
        Some(Err(e)) => return Verdict::Fail(format!("audit failed: {e}")),
        Some(Ok((r, _))) => r,
    };
    let argmax = [
        ("Age", ">45"),
        ("ChargeDegree", "Misdemeanor"),
        ("Sex", "Female"),
        ("PriorCounts", "0"),
        ("LengthOfStay", "<3 Months"),
    ];
    let argmin = [
        ("Age", "<25"),
        ("ChargeDegree", "Felony"),
        ("Sex", "Male"),
        ("PriorCounts", ">3"),
        ("LengthOfStay", "<Week"),
    ];
    let protos = &report["prototypes"];
    if protos.is_null() {
        return Verdict::Fail("no prototypes".into());
    }
    let (hi, hi_cell) = matches(&protos["argmax"], &argmax);
    let (lo, lo_cell) = matches(&protos["argmin"], &argmin);
    verdict(
        hi >= 4 && lo >= 4,
        format!("argmax {hi}/5 ({hi_cell}), argmin {lo}/5 ({lo_cell})"),
    )
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_11() -> Verdict {
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = run_cli(&[
            "audit",
            "--data",
            data.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--groups",
            "model",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        if !out.status.success() {
            return Verdict::Fail(String::from_utf8_lossy(&out.stdout).into_owned());
        }
    }
    let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
    verdict(a == b && !a.is_empty(), format!("{} files compared", a.len()))
}

fn main() {
    let shared = instances(1, 50, 2..=6);
    let small = instances(2, 20, 2..=4);
    let mut all = shared.clone();
    all.extend(small.iter().cloned());

    let compas = common::compas_data().map(|data| {
        let dir = tempfile::tempdir().unwrap();
        compas_audit(&data, dir.path())
    });

    type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;
    let criteria: Vec<(u32, &str, Check)> = vec![
        (
            1,
            "first-order change matches finite differences",
            Box::new(|| criterion_1(&shared)),
        ),
        (
            2,
            "closed form is optimal against brute-force search",
            Box::new(|| criterion_2(&small)),
        ),
        (
            3,
            "first-order change at f* equals the optimum",
            Box::new(|| criterion_3(&all)),
        ),
        (4, "output-only weights give f* = -sign(b1) f_m", Box::new(criterion_4)),
        (
            5,
            "maximal correlation matches the spectral oracle",
            Box::new(criterion_5),
        ),
        (6, "KL of a small perturbation is eps^2/2", Box::new(criterion_6)),
        (7, "logistic membership models reproduce f_l", Box::new(criterion_7)),
        (8, "path solver endpoints and lattice agreement", Box::new(criterion_8)),
        (9, "COMPAS headline statistics", Box::new(|| criterion_9(&compas))),
        (10, "COMPAS prototype cells", Box::new(|| criterion_10(&compas))),
        (11, "audits are byte-identical", Box::new(criterion_11)),
    ];

    let mut failed = 0;
    for (id, name, check) in &criteria {
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:>2} {tag}: {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
