//! Acceptance criteria, run in sequence with wall-clock budgets. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plap::graphon::{boundary_dimension, quotient_average, DEFAULT_SAMPLES_PER_AXIS};
use plap::harness::{
    contraction_test, fit_rate, invariant_suite, sweep_n, sweep_tau, Discretization, InitialDatum,
    OracleConfig, RateReport,
};
use plap::integrate::{backward_euler, forward_euler, StepSchedule, DEFAULT_INNER_TOL};
use plap::operator::{apply_plaplacian, grid_norm};
use plap::plimit::p_sweep;
use plap::{GraphonSpec, GridFunction, KernelMatrix, PExponent, Scheme};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn p(x: f64) -> PExponent {
    PExponent::new(x).unwrap()
}

fn gf(v: Vec<f64>) -> GridFunction {
    GridFunction::new(v).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_rate(r: &RateReport) -> String {
    let errs: Vec<String> = r.errs.iter().map(|e| format!("{e:.3e}")).collect();
    format!(
        "slope {:.3}, r2 {:.4}, errs [{}]",
        r.slope,
        r.r_squared,
        errs.join(", ")
    )
}

/// Sup over knots of the deviation from an exact solution.
fn sup_error(times: &[f64], states: &[GridFunction], exact: impl Fn(f64) -> Vec<f64>) -> f64 {
    times
        .iter()
        .zip(states)
        .flat_map(|(&t, s)| {
            let e = exact(t);
            s.values()
                .iter()
                .zip(e)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

fn invariants() -> Outcome {
    let report = invariant_suite(0).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = report
        .entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| e.name)
        .collect();
    check(
        report.all_pass(),
        format!("{} invariants, failed: {:?}", report.entries.len(), failed),
    )
}

fn analytic_solutions() -> Outcome {
    let tau = 1e-4;
    // Two nodes, K = 1, p = 3: the gap w = u_2 - u_1 solves w' = -w^2, so
    // w(t) = 1 / (1 + t) from w(0) = 1.
    let k2 = KernelMatrix::constant(2, 1.0).unwrap();
    let g2 = gf(vec![0.0, 1.0]);
    let fw = forward_euler(&k2, &g2, p(3.0), &StepSchedule::fixed(tau, 1.0))
        .map_err(|e| e.to_string())?;
    let bw =
        backward_euler(&k2, &g2, p(3.0), tau, 1.0, DEFAULT_INNER_TOL).map_err(|e| e.to_string())?;
    let gap = |s: &GridFunction| s.values()[1] - s.values()[0];
    let (ef, eb) = (
        (gap(fw.final_state()) - 0.5).abs(),
        (gap(bw.final_state()) - 0.5).abs(),
    );

    // Complete graph, p = 2: Delta_2 u = u - mean(u), so each deviation from
    // the mean decays like e^{-t}.
    let n = 8;
    let k = KernelMatrix::constant(n, 1.0).unwrap();
    let g = gf((0..n).map(|i| ((i * 37 % 11) as f64) / 10.0).collect());
    let m = g.mean();
    let exact = |t: f64| {
        g.values()
            .iter()
            .map(|x| m + (x - m) * (-t).exp())
            .collect::<Vec<_>>()
    };
    let fe =
        forward_euler(&k, &g, p(2.0), &StepSchedule::fixed(tau, 1.0)).map_err(|e| e.to_string())?;
    let be =
        backward_euler(&k, &g, p(2.0), tau, 1.0, DEFAULT_INNER_TOL).map_err(|e| e.to_string())?;
    let (xf, xb) = (
        sup_error(&fe.times, &fe.states, exact),
        sup_error(&be.times, &be.states, exact),
    );
    let worst = ef.max(eb).max(xf).max(xb);
    check(
        worst <= 5e-3,
        format!("two-node |w(1) - 1/2|: fwd {ef:.2e}, bwd {eb:.2e}; exponential sup error: fwd {xf:.2e}, bwd {xb:.2e}"),
    )
}

fn contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..100 {
        let pv = [1.5, 3.0][trial % 2];
        let q = [1.0, 2.0, pv, f64::INFINITY][(trial / 2) % 4];
        let n = [4, 8, 16][trial % 3];
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.gen();
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        let k = KernelMatrix::new(n, w).unwrap();
        let g1 = gf((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let g2 = gf((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let out = contraction_test(&k, p(pv), q, &g1, &g2, 0.5, 0.05).map_err(|e| e.to_string())?;
        worst = worst.max(out.lhs - out.rhs);
        if !out.pass {
            violations += 1;
        }
    }
    check(
        violations == 0,
        format!("100 trials, {violations} violations, max(lhs - rhs) = {worst:.2e}"),
    )
}

fn tau_consistency() -> Outcome {
    let taus = [0.1, 0.05, 0.025, 0.0125];
    let two = (
        KernelMatrix::constant(2, 1.0).unwrap(),
        gf(vec![0.0, 1.0]),
        p(3.0),
        "two-node p=3",
    );
    let n = 8;
    let complete = (
        KernelMatrix::constant(n, 1.0).unwrap(),
        InitialDatum::Smooth.cell_averages(n).unwrap(),
        p(2.0),
        "complete p=2",
    );
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, g, pe, name) in [two, complete] {
        for scheme in [Scheme::Forward, Scheme::Backward] {
            let r =
                sweep_tau(&k, &g, pe, 2.0, &taus, 1e-4, 1.0, scheme).map_err(|e| e.to_string())?;
            ok &= (r.slope - 1.0).abs() <= 0.25 && r.r_squared >= 0.98;
            lines.push(format!(
                "{name} {scheme:?}: slope {:.3}, r2 {:.4}",
                r.slope, r.r_squared
            ));
        }
    }
    check(ok, lines.join("; "))
}

const NS: [usize; 4] = [8, 16, 32, 64];

fn mean_sweep(
    g: &InitialDatum,
    disc: Discretization,
    kind: &str,
    n_ref: usize,
) -> Result<RateReport, String> {
    let spec = GraphonSpec::new(kind, &[]).unwrap();
    sweep_n(
        &spec,
        disc,
        g,
        p(2.0),
        2.0,
        &NS,
        &OracleConfig::new(n_ref, 0.01),
        0.5,
    )
    .map_err(|e| e.to_string())
}

fn lipschitz_rate() -> Outcome {
    let r = mean_sweep(&InitialDatum::Smooth, Discretization::Average, "mean", 512)?;
    check(
        (r.slope + 1.0).abs() <= 0.25 && r.r_squared >= 0.95,
        fmt_rate(&r),
    )
}

fn bv_rate() -> Outcome {
    let r = mean_sweep(&InitialDatum::Step, Discretization::Average, "mean", 512)?;
    check(r.slope <= -0.5 + 0.15, fmt_rate(&r))
}

fn simple_graph_rate() -> Outcome {
    // The step datum is exact on every swept grid, so the error measured is
    // the kernel's.
    let r = mean_sweep(
        &InitialDatum::Step,
        Discretization::Simple,
        "halfplane",
        512,
    )?;
    // rho = 1 for the halfplane boundary.
    check(r.slope <= -(2.0 - 1.0) / 2.0 + 0.2, fmt_rate(&r))
}

fn box_counting() -> Outcome {
    let levels = [16, 32, 64, 128, 256];
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, params) in [("halfplane", vec![1.0]), ("disk", vec![0.5, 0.4])] {
        let spec = GraphonSpec::new(kind, &params).unwrap();
        let est = boundary_dimension(&spec, &levels, DEFAULT_SAMPLES_PER_AXIS)
            .map_err(|e| e.to_string())?;
        ok &= (est.rho - 1.0).abs() <= 0.1;
        parts.push(format!("{kind} rho = {:.4}", est.rho));
    }
    check(ok, parts.join(", "))
}

fn residual_rate() -> Outcome {
    let n = 16;
    let k = quotient_average(&GraphonSpec::new("mean", &[]).unwrap(), n, 8).unwrap();
    let g = InitialDatum::Random {
        seed: 11,
        pieces: 16,
    }
    .cell_averages(n)
    .unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    // One step for both exponents; 200 steps reach t = 4, past the initial
    // transient, while the p = 1.5 run stays short of finite extinction.
    let tau = 0.02;
    for pv in [1.5, 3.0] {
        let pe = p(pv);
        let traj = backward_euler(&k, &g, pe, tau, 200.0 * tau, DEFAULT_INNER_TOL)
            .map_err(|e| e.to_string())?;
        let (hs, rs): (Vec<f64>, Vec<f64>) = (10..=200)
            .map(|h| {
                let lap = apply_plaplacian(&k, &traj.states[h], pe).unwrap();
                (h as f64, grid_norm(&lap, pv).unwrap())
            })
            .filter(|&(_, r)| r > 0.0)
            .unzip();
        let fit = fit_rate(&hs, &rs).map_err(|e| e.to_string())?;
        let bound = -1.0 / pv.max(2.0) + 0.15;
        ok &= fit.slope <= bound && fit.used == 191;
        parts.push(format!(
            "p = {pv}: slope {:.3} (bound {bound:.3}, {} points)",
            fit.slope, fit.used
        ));
    }
    check(ok, parts.join("; "))
}

fn p_limit() -> Outcome {
    let n = 32;
    let k = quotient_average(&GraphonSpec::new("mean", &[]).unwrap(), n, 8).unwrap();
    // Values in [0, 0.8): every pairwise gap is at most 1 - 0.2.
    let g = gf((0..n).map(|i| 0.8 * (i as f64 + 0.5) / n as f64).collect());
    let rows = p_sweep(&k, &g, &[4.0, 8.0, 16.0, 32.0], 1.0, 1e-3).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = rows.iter().map(|r| r.sup_deviation).collect();
    let monotone = devs.windows(2).all(|w| w[1] <= w[0]);
    let last = *devs.last().unwrap();
    check(
        monotone && last <= 0.05,
        format!(
            "deviations {:?}, monotone {monotone}",
            devs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn oracle_adequacy() -> Outcome {
    let coarse = mean_sweep(&InitialDatum::Smooth, Discretization::Average, "mean", 512)?;
    let fine = mean_sweep(&InitialDatum::Smooth, Discretization::Average, "mean", 1024)?;
    let changes: Vec<f64> = coarse
        .errs
        .iter()
        .zip(&fine.errs)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .collect();
    let worst = changes.iter().cloned().fold(0.0, f64::max);
    check(
        worst < 0.2,
        format!(
            "relative changes {:?}",
            changes
                .iter()
                .map(|c| format!("{c:.3}"))
                .collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 invariant suite", Duration::from_secs(30), invariants),
        (
            "2 analytic solutions",
            Duration::from_secs(10),
            analytic_solutions,
        ),
        ("3 contraction", Duration::from_secs(60), contraction),
        (
            "4 O(tau) consistency",
            Duration::from_secs(60),
            tau_consistency,
        ),
        (
            "5 Lipschitz-kernel rate",
            Duration::from_secs(300),
            lipschitz_rate,
        ),
        ("6 BV initial-data rate", Duration::from_secs(300), bv_rate),
        (
            "7 simple-graph rate",
            Duration::from_secs(300),
            simple_graph_rate,
        ),
        (
            "8 box-counting dimension",
            Duration::from_secs(30),
            box_counting,
        ),
        (
            "9 implicit residual rate",
            Duration::from_secs(60),
            residual_rate,
        ),
        ("10 p -> inf limit", Duration::from_secs(60), p_limit),
        (
            "11 oracle adequacy",
            Duration::from_secs(600),
            oracle_adequacy,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({:.1}s of {}s{}) {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
        );
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
