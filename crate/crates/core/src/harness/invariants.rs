//! Seeded randomized checks of every module's invariants, aggregated into a
//! deterministic report.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::graphon::{
    boundary_dimension, collocation_sample, kernel_distance, quotient_average, simple_graph,
    GraphonSpec, KernelMatrix, Regularity, CATALOG, DEFAULT_SAMPLES_PER_AXIS,
};
use crate::harness::rates::fit_rate;
use crate::harness::sweeps::{consistency_error, contraction_test, probe_times};
use crate::integrate::{
    backward_euler, forward_euler, resolvent_step, ProxSettings, StepSchedule, DEFAULT_INNER_TOL,
};
use crate::operator::{
    apply_plaplacian, energy, pairing, refine, GridFunction, NormOrder, PExponent,
};
use crate::plimit::{limit_trajectory, project_sinf, sinf_violation, ConstraintSet};

pub const SUITE_NS: [usize; 3] = [4, 8, 16];
pub const SUITE_PS: [f64; 4] = [1.5, 2.0, 3.0, 4.0];
const TRIALS: usize = 3;

/// Test-only corruptions used as negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuiteHooks {
    /// Perturb one off-diagonal entry of every discretized kernel before the
    /// symmetry check sees it.
    pub asymmetrize_kernel: bool,
}

/// One named invariant: `measured` must not exceed `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantEntry {
    pub module: &'static str,
    pub name: &'static str,
    pub cases: usize,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantEntry {
    pub fn margin(&self) -> f64 {
        self.tolerance - self.measured
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub seed: u64,
    pub entries: Vec<InvariantEntry>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Plain-text table, one row per invariant.
    pub fn to_table(&self) -> String {
        let mut s = format!("invariant suite, seed = {}\n", self.seed);
        let _ = writeln!(
            s,
            "{:<10} {:<36} {:>6} {:>12} {:>12} {:>12}  result",
            "module", "invariant", "cases", "measured", "tolerance", "margin"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:<10} {:<36} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
                e.module,
                e.name,
                e.cases,
                e.measured,
                e.tolerance,
                e.margin(),
                if e.pass { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.entries.iter().filter(|e| !e.pass).count();
        let _ = writeln!(s, "{} invariants, {} failed", self.entries.len(), failed);
        s
    }
}

/// Tracks the worst measurement of one invariant across cases.
struct Check {
    module: &'static str,
    name: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
}

impl Check {
    fn new(module: &'static str, name: &'static str, tolerance: f64) -> Self {
        Self {
            module,
            name,
            tolerance,
            cases: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, measured: f64) {
        self.cases += 1;
        // NaN is a failure.
        if measured.is_nan() || measured > self.worst {
            self.worst = if measured.is_nan() {
                f64::INFINITY
            } else {
                measured
            };
        }
    }

    fn finish(self) -> InvariantEntry {
        InvariantEntry {
            module: self.module,
            name: self.name,
            cases: self.cases,
            measured: self.worst,
            tolerance: self.tolerance,
            pass: self.cases > 0 && self.worst <= self.tolerance,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> KernelMatrix {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.gen();
            w[i * n + j] = x;
            w[j * n + i] = x;
        }
    }
    KernelMatrix::new(n, w).expect("symmetric nonnegative by construction")
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> GridFunction {
    GridFunction::new(
        (0..n)
            .map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0))
            .collect(),
    )
    .expect("finite")
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

fn max_rel_vec(a: &GridFunction, b: &GridFunction) -> f64 {
    let scale = a.norm(NormOrder::INF).max(b.norm(NormOrder::INF));
    if scale == 0.0 {
        return 0.0;
    }
    a.sub(b).expect("same n").norm(NormOrder::INF) / scale
}

fn pe(p: f64) -> PExponent {
    PExponent::new(p).expect("suite exponents are valid")
}

/// Run every invariant on seeded random instances.
pub fn invariant_suite(seed: u64) -> Result<InvariantReport> {
    invariant_suite_with(seed, SuiteHooks::default())
}

pub fn invariant_suite_with(seed: u64, hooks: SuiteHooks) -> Result<InvariantReport> {
    let mut entries = Vec::new();
    entries.extend(operator_checks(seed)?);
    entries.extend(graphon_checks(seed, hooks)?);
    entries.extend(integrate_checks(seed)?);
    entries.extend(plimit_checks(seed)?);
    entries.extend(harness_checks(seed)?);
    Ok(InvariantReport { seed, entries })
}

fn operator_checks(seed: u64) -> Result<Vec<InvariantEntry>> {
    let mut mass = Check::new("operator", "mass_conservation", 1e-10);
    let mut sbp = Check::new("operator", "summation_by_parts", 1e-10);
    let mut grad = Check::new("operator", "gradient_identity", 1e-5);
    let mut mono = Check::new("operator", "monotonicity", 1e-12);
    let mut homog = Check::new("operator", "homogeneity", 1e-10);
    let mut refn = Check::new("operator", "refine_preserves_norms", 1e-12);
    let mut rng = rng_for(seed, 1);

    for &n in &SUITE_NS {
        for &pv in &SUITE_PS {
            let p = pe(pv);
            for _ in 0..TRIALS {
                let k = random_kernel(&mut rng, n);
                let u = random_state(&mut rng, n, 1.0);
                let v = random_state(&mut rng, n, 1.0);
                let lap_u = apply_plaplacian(&k, &u, p)?;

                let total: f64 = lap_u.values().iter().sum();
                let abs_total: f64 = lap_u.values().iter().map(|x| x.abs()).sum();
                mass.record(if abs_total == 0.0 {
                    0.0
                } else {
                    total.abs() / abs_total
                });

                let lhs = pairing(&lap_u, &v)?;
                let (uv, vv) = (u.values(), v.values());
                let mut rhs = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        rhs += k.get(i, j) * p.phi(uv[j] - uv[i]) * (vv[j] - vv[i]);
                    }
                }
                rhs /= 2.0 * (n * n) as f64;
                sbp.record(rel(lhs, rhs));

                // n * grad E = Delta_p u, by central differences.
                let h = 1e-6;
                let fd: Vec<f64> = (0..n)
                    .map(|i| {
                        let bump = |s: f64| {
                            let mut w = uv.to_vec();
                            w[i] += s;
                            energy(&k, &GridFunction::new(w).expect("finite"), p)
                        };
                        Ok(n as f64 * (bump(h)? - bump(-h)?) / (2.0 * h))
                    })
                    .collect::<Result<_>>()?;
                grad.record(max_rel_vec(&GridFunction::new(fd)?, &lap_u));

                let lap_v = apply_plaplacian(&k, &v, p)?;
                let dlap = lap_u.sub(&lap_v)?;
                let du = u.sub(&v)?;
                for t in [du.clone(), du.map(|x| x.clamp(-1.0, 1.0))] {
                    mono.record(-pairing(&dlap, &t)?);
                }

                for c in [0.5, 3.0] {
                    let scaled = apply_plaplacian(&k, &u.scale(c), p)?;
                    homog.record(max_rel_vec(&scaled, &lap_u.scale(c.powf(pv - 1.0))));
                }

                let r = refine(&u, 3)?;
                for q in [
                    NormOrder::ONE,
                    NormOrder::TWO,
                    NormOrder::new(pv)?,
                    NormOrder::INF,
                ] {
                    refn.record(rel(u.norm(q), r.norm(q)));
                }
            }
        }
    }
    Ok([mass, sbp, grad, mono, homog, refn]
        .into_iter()
        .map(Check::finish)
        .collect())
}

fn graphon_checks(seed: u64, hooks: SuiteHooks) -> Result<Vec<InvariantEntry>> {
    let mut sym = Check::new("graphon", "discretization_symmetric_in_range", 0.0);
    let mut quad = Check::new("graphon", "quadrature_refinement", 1.0);
    let mut mono = Check::new("graphon", "simple_graph_refinement_monotone", 0.0);
    let mut metric = Check::new("graphon", "kernel_distance_metric", 1e-12);
    let mut boxdim = Check::new("graphon", "box_dimension_halfplane", 0.1);

    for entry in CATALOG {
        let spec = GraphonSpec::new(entry.kind, entry.defaults)?;
        let (lo, hi) = spec.range_hint();
        for &n in &SUITE_NS {
            for k in [
                quotient_average(&spec, n, 4)?,
                collocation_sample(&spec, n)?,
            ] {
                let k = if hooks.asymmetrize_kernel {
                    let mut w = k.weights().to_vec();
                    w[1] += 0.25;
                    KernelMatrix::from_raw_unchecked(n, w)
                } else {
                    k
                };
                let bad = (0..n * n)
                    .filter(|&c| {
                        let (i, j) = (c / n, c % n);
                        let x = k.get(i, j);
                        x != k.get(j, i) || x < lo || x > hi
                    })
                    .count();
                sym.record(bad as f64);
            }
            if entry.regularity != Regularity::Indicator {
                // Midpoint-rule refinement error is O((hi - lo) / q^2).
                let (q1, q2) = (4, 8);
                let a = quotient_average(&spec, n, q1)?;
                let b = quotient_average(&spec, n, q2)?;
                let tol = 10.0 * (hi - lo) / (q1 * q1) as f64;
                let d = kernel_distance(&a, &b, f64::INFINITY)?;
                quad.record(if tol == 0.0 {
                    if d == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    d / tol
                });
            } else {
                let coarse = simple_graph(&spec, n, DEFAULT_SAMPLES_PER_AXIS)?;
                let fine = simple_graph(&spec, 2 * n, DEFAULT_SAMPLES_PER_AXIS)?.coarsen2()?;
                let missing = (0..n * n)
                    .filter(|&c| coarse.get(c / n, c % n) && !fine.get(c / n, c % n))
                    .count();
                mono.record(missing as f64);
            }
        }
    }

    let mut rng = rng_for(seed, 2);
    for &n in &SUITE_NS {
        for _ in 0..TRIALS {
            let a = random_kernel(&mut rng, n);
            let b = random_kernel(&mut rng, 2 * n);
            let c = random_kernel(&mut rng, 4 * n);
            for q in [1.0, 2.0, 3.0, f64::INFINITY] {
                metric.record(kernel_distance(&a, &a, q)?);
                let (ab, bc, ac) = (
                    kernel_distance(&a, &b, q)?,
                    kernel_distance(&b, &c, q)?,
                    kernel_distance(&a, &c, q)?,
                );
                metric.record(ac - ab - bc);
                metric.record((ab - kernel_distance(&b, &a, q)?).abs());
            }
        }
    }

    let halfplane = GraphonSpec::new("halfplane", &[])?;
    let est = boundary_dimension(
        &halfplane,
        &[16, 32, 64, 128, 256],
        DEFAULT_SAMPLES_PER_AXIS,
    )?;
    boxdim.record((est.rho - 1.0).abs());

    Ok([sym, quad, mono, metric, boxdim]
        .into_iter()
        .map(Check::finish)
        .collect())
}

fn integrate_checks(seed: u64) -> Result<Vec<InvariantEntry>> {
    let mut mass = Check::new("integrate", "forward_mass_conservation", 1e-10);
    let mut contr = Check::new("integrate", "contraction", 1e-8);
    let mut nonexp = Check::new("integrate", "resolvent_nonexpansive", 10.0 * 1e-12);
    let mut decr = Check::new("integrate", "backward_energy_decrease", 1e-12);
    let mut agree = Check::new("integrate", "forward_backward_agreement_p2", 1.0);
    let mut opt = Check::new("integrate", "forward_energy_optimality", 0.05);
    let mut rng = rng_for(seed, 3);

    for &n in &SUITE_NS {
        for &pv in &SUITE_PS {
            let p = pe(pv);
            let k = random_kernel(&mut rng, n);
            let g1 = random_state(&mut rng, n, 1.0);
            let g2 = random_state(&mut rng, n, 1.0);

            let fwd = forward_euler(&k, &g1, p, &StepSchedule::fixed(1e-2, 0.5))?;
            let m0 = g1.mean();
            let scale = g1.norm(NormOrder::INF).max(m0.abs());
            for s in &fwd.states {
                mass.record((s.mean() - m0).abs() / scale);
            }

            let qs = [
                NormOrder::ONE,
                NormOrder::TWO,
                NormOrder::from(p),
                NormOrder::INF,
            ];
            let b1 = backward_euler(&k, &g1, p, 0.05, 0.5, DEFAULT_INNER_TOL)?;
            let b2 = backward_euler(&k, &g2, p, 0.05, 0.5, DEFAULT_INNER_TOL)?;
            for q in qs {
                let rhs = g1.sub(&g2)?.norm(q);
                contr.record(b1.final_state().sub(b2.final_state())?.norm(q) - rhs);
            }
            // The explicit step is only locally Lipschitz for p < 2; check it
            // where the step map is a contraction.
            if pv >= 2.0 {
                let f2 = forward_euler(&k, &g2, p, &StepSchedule::fixed(1e-2, 0.5))?;
                for q in qs {
                    let rhs = g1.sub(&g2)?.norm(q);
                    contr.record(fwd.final_state().sub(f2.final_state())?.norm(q) - rhs);
                }
            }

            let tight = ProxSettings {
                tol: 1e-12,
                ..ProxSettings::default()
            };
            let (v1, _) = resolvent_step(&k, &g1, p, 0.5, &tight)?;
            let (v2, _) = resolvent_step(&k, &g2, p, 0.5, &tight)?;
            for q in qs {
                nonexp.record(v1.sub(&v2)?.norm(q) - g1.sub(&g2)?.norm(q));
            }

            for w in b1.states.windows(2) {
                decr.record(energy(&k, &w[1], p)? - energy(&k, &w[0], p)?);
            }
        }

        // Both schemes are first order; at tau = 1e-3 they agree to O(tau).
        let k = random_kernel(&mut rng, n);
        let g = random_state(&mut rng, n, 1.0);
        let tau = 1e-3;
        let f = forward_euler(&k, &g, pe(2.0), &StepSchedule::fixed(tau, 1.0))?;
        let b = backward_euler(&k, &g, pe(2.0), tau, 1.0, DEFAULT_INNER_TOL)?;
        agree.record(f.final_state().sub(b.final_state())?.norm(NormOrder::TWO) / (10.0 * tau));

        for pv in [2.0, 3.0] {
            let p = pe(pv);
            let horizon = 2.0;
            let sched = StepSchedule::adaptive(1.0, 0.1, horizon, 100_000);
            let f = forward_euler(&k, &g, p, &sched)?;
            let e0 = energy(&k, &g, p)?;
            let running = f
                .states
                .iter()
                .try_fold(f64::INFINITY, |m, s| energy(&k, s, p).map(|e| m.min(e)))?;
            let fine = backward_euler(&k, &g, p, 1e-3, horizon, DEFAULT_INNER_TOL)?;
            let limit = energy(&k, fine.final_state(), p)?;
            opt.record((running - limit).abs() / e0);
        }
    }
    Ok([mass, contr, nonexp, decr, agree, opt]
        .into_iter()
        .map(Check::finish)
        .collect())
}

fn plimit_checks(seed: u64) -> Result<Vec<InvariantEntry>> {
    let tol = 1e-10;
    let mut feas = Check::new("plimit", "projection_feasible_and_close", tol);
    let mut idem = Check::new("plimit", "projection_idempotent", tol);
    let mut exact = Check::new("plimit", "limit_trajectory_exact", 0.0);
    let mut rng = rng_for(seed, 4);

    for &n in &SUITE_NS {
        for _ in 0..TRIALS {
            let mut k = random_kernel(&mut rng, n);
            // Sparsify so that not every pair is constrained.
            let w: Vec<f64> = k
                .weights()
                .iter()
                .map(|&x| if x < 0.4 { 0.0 } else { x })
                .collect();
            k = KernelMatrix::new(n, w)?;
            let Ok(cs) = ConstraintSet::from_kernel(&k, 0.0) else {
                continue;
            };
            let v = random_state(&mut rng, n, 3.0);
            let w = project_sinf(&cs, &v, tol)?;
            let to_mean = v.map(|x| x - v.mean()).norm(NormOrder::TWO);
            let moved = w.sub(&v)?.norm(NormOrder::TWO);
            feas.record(sinf_violation(&cs, &w)?.max(moved - to_mean));
            let again = project_sinf(&cs, &w, tol)?;
            idem.record(again.sub(&w)?.norm(NormOrder::INF));

            for horizon in [0.5, 2.0] {
                let t = limit_trajectory(&cs, &w, horizon)?;
                let dev = t
                    .states
                    .iter()
                    .map(|s| s.sub(&w).map(|d| d.norm(NormOrder::INF)))
                    .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))?;
                exact.record(dev);
            }
        }
    }
    Ok([feas, idem, exact].into_iter().map(Check::finish).collect())
}

fn harness_checks(seed: u64) -> Result<Vec<InvariantEntry>> {
    let mut pseudo = Check::new("harness", "consistency_error_pseudometric", 1e-12);
    let mut contraction = Check::new("harness", "contraction_test", 0.0);
    let mut planted = Check::new("harness", "fit_rate_planted_power_law", 0.05);
    let mut rng = rng_for(seed, 5);
    let probes = probe_times(1.0);

    for &n in &SUITE_NS {
        let k = random_kernel(&mut rng, n);
        let p = pe(3.0);
        let run = |g: &GridFunction| backward_euler(&k, g, p, 0.1, 1.0, DEFAULT_INNER_TOL);
        let a = run(&random_state(&mut rng, n, 1.0))?;
        let b = run(&random_state(&mut rng, n, 1.0))?;
        let c = run(&random_state(&mut rng, n, 1.0))?;
        for q in [1.0, 2.0, f64::INFINITY] {
            let ab = consistency_error(&a, &b, q, &probes)?;
            let ba = consistency_error(&b, &a, q, &probes)?;
            let bc = consistency_error(&b, &c, q, &probes)?;
            let ac = consistency_error(&a, &c, q, &probes)?;
            pseudo.record(consistency_error(&a, &a, q, &probes)?);
            pseudo.record((ab - ba).abs());
            pseudo.record(ac - ab - bc);
        }

        for pv in [1.5, 3.0] {
            let g1 = random_state(&mut rng, n, 1.0);
            let g2 = random_state(&mut rng, n, 1.0);
            let out = contraction_test(&k, pe(pv), 2.0, &g1, &g2, 0.5, 0.05)?;
            contraction.record(if out.pass { 0.0 } else { out.lhs - out.rhs });
        }
    }

    for slope in [-2.0, -1.0, -0.5, 1.0] {
        let xs: Vec<f64> = (0..6).map(|i| 8.0 * 2f64.powi(i)).collect();
        let errs: Vec<f64> = xs
            .iter()
            .map(|x| 0.7 * x.powf(slope) * (1.0 + 0.01 * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        planted.record((fit_rate(&xs, &errs)?.slope - slope).abs());
    }
    Ok([pseudo, contraction, planted]
        .into_iter()
        .map(Check::finish)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = invariant_suite(0).unwrap();
        assert!(a.all_pass(), "{}", a.to_table());
        let b = invariant_suite(0).unwrap();
        assert_eq!(a.to_table(), b.to_table());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn asymmetric_kernel_hook_only_breaks_symmetry() {
        let r = invariant_suite_with(
            1,
            SuiteHooks {
                asymmetrize_kernel: true,
            },
        )
        .unwrap();
        for e in &r.entries {
            assert_eq!(
                e.pass,
                e.name != "discretization_symmetric_in_range",
                "{}",
                r.to_table()
            );
        }
    }
}
