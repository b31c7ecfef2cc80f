use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{
    collocation_sample, quotient_average, simple_graph, GraphonSpec, KernelMatrix,
    DEFAULT_QUAD_POINTS, DEFAULT_SAMPLES_PER_AXIS,
};
use crate::harness::rates::{RateReport, ERROR_FLOOR};
use crate::integrate::{
    backward_euler, forward_euler, interpolate_linear, Scheme, StepSchedule, Trajectory,
    DEFAULT_INNER_TOL,
};
use crate::operator::{refine, GridFunction, NormOrder, PExponent};

/// Number of uniformly spaced probe times on `[0, T]`, endpoints included.
pub const PROBE_COUNT: usize = 33;

pub fn probe_times(horizon: f64) -> Vec<f64> {
    (0..PROBE_COUNT)
        .map(|i| horizon * i as f64 / (PROBE_COUNT - 1) as f64)
        .collect()
}

/// How a graphon is turned into an `n`-vertex graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Cell averages.
    Average,
    /// Point samples at `(i/n, j/n)`.
    Collocation,
    /// Simple graph of cells meeting the support closure (indicator kernels).
    Simple,
}

pub fn discretize(spec: &GraphonSpec, disc: Discretization, n: usize) -> Result<KernelMatrix> {
    match disc {
        Discretization::Average => quotient_average(spec, n, DEFAULT_QUAD_POINTS),
        Discretization::Collocation => collocation_sample(spec, n),
        Discretization::Simple => Ok(simple_graph(spec, n, DEFAULT_SAMPLES_PER_AXIS)?.to_kernel()),
    }
}

/// Analytic initial data, discretized by exact cell averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialDatum {
    /// `g(x) = x (1 - x)`.
    Smooth,
    /// `g(x) = 1{x > 1/2}`.
    Step,
    /// Piecewise constant on `pieces` equal intervals, values uniform in
    /// `[0, 1)` drawn from `seed`.
    Random {
        seed: u64,
        pieces: usize,
    },
    Constant {
        value: f64,
    },
}

impl InitialDatum {
    /// Average of `g` over each of the `n` cells.
    pub fn cell_averages(&self, n: usize) -> Result<GridFunction> {
        if n == 0 {
            return Err(Error::Domain("n must be >= 1".into()));
        }
        let cell = |i: usize| (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        let nf = n as f64;
        let values: Vec<f64> = match self {
            InitialDatum::Smooth => {
                let anti = |x: f64| x * x / 2.0 - x * x * x / 3.0;
                (0..n)
                    .map(|i| {
                        let (a, b) = cell(i);
                        nf * (anti(b) - anti(a))
                    })
                    .collect()
            }
            InitialDatum::Step => (0..n)
                .map(|i| {
                    let (a, b) = cell(i);
                    nf * (b - a.max(0.5)).max(0.0)
                })
                .collect(),
            InitialDatum::Random { seed, pieces } => {
                if *pieces == 0 {
                    return Err(Error::validation("pieces", "must be >= 1"));
                }
                let vals = random_levels(*seed, *pieces);
                let m = *pieces as f64;
                (0..n)
                    .map(|i| {
                        let (a, b) = cell(i);
                        let first = ((a * m).floor() as usize).min(pieces - 1);
                        let last = ((b * m).ceil() as usize).min(*pieces);
                        let s: f64 = (first..last)
                            .map(|k| {
                                let (lo, hi) = (k as f64 / m, (k + 1) as f64 / m);
                                vals[k] * (b.min(hi) - a.max(lo)).max(0.0)
                            })
                            .sum();
                        nf * s
                    })
                    .collect()
            }
            InitialDatum::Constant { value } => vec![*value; n],
        };
        GridFunction::new(values)
    }
}

fn random_levels(seed: u64, pieces: usize) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..pieces).map(|_| rng.gen::<f64>()).collect()
}

/// Fine-grid implicit run standing in for the continuum solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_ref: usize,
    pub tau_ref: f64,
    #[serde(default = "default_quad")]
    pub quad_points: usize,
}

fn default_quad() -> usize {
    DEFAULT_QUAD_POINTS
}

impl OracleConfig {
    pub fn new(n_ref: usize, tau_ref: f64) -> Self {
        Self {
            n_ref,
            tau_ref,
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }

    /// Every swept `n` must divide `n_ref`, and `n_ref >= 4 max n`.
    pub fn validate_for(&self, ns: &[usize]) -> Result<()> {
        if !(self.tau_ref > 0.0) {
            return Err(Error::validation("tau_ref", "must be > 0"));
        }
        if self.quad_points == 0 {
            return Err(Error::validation("quad_points", "must be >= 1"));
        }
        if ns.len() < 3 {
            return Err(Error::validation("ns", "need at least 3 resolutions"));
        }
        if let Some(&n) = ns
            .iter()
            .find(|&&n| n == 0 || !self.n_ref.is_multiple_of(n))
        {
            return Err(Error::validation(
                "n_ref",
                format!("{} is not a multiple of swept n = {n}", self.n_ref),
            ));
        }
        let max_n = *ns.iter().max().unwrap();
        if self.n_ref < 4 * max_n {
            return Err(Error::validation(
                "n_ref",
                format!("must be >= 4 * max n = {}", 4 * max_n),
            ));
        }
        Ok(())
    }
}

/// `max_t || refine(u_n(t)) - u_ref(t) ||_q` over the probe times, with both
/// trajectories evaluated through their linear interpolants.
pub fn consistency_error(
    traj_n: &Trajectory,
    traj_ref: &Trajectory,
    q: f64,
    probe_times: &[f64],
) -> Result<f64> {
    let q = NormOrder::new(q)?;
    let (n, m) = (traj_n.n(), traj_ref.n());
    if m % n != 0 {
        return Err(Error::Dimension(format!(
            "reference resolution {m} is not a multiple of {n}"
        )));
    }
    probe_times.iter().try_fold(0.0_f64, |acc, &t| {
        let coarse = refine(&interpolate_linear(traj_n, t)?, m / n)?;
        let fine = interpolate_linear(traj_ref, t)?;
        Ok(acc.max(coarse.sub(&fine)?.norm(q)))
    })
}

/// Error against the fine-grid oracle for each `n`, fitted against `n`.
///
/// Every run, the oracle included, uses the implicit scheme with
/// `oracle.tau_ref`, so the time-discretization error is common to all of
/// them and the fit isolates the dependence on `n`. The oracle kernel is the
/// cell average at `n_ref`, whichever discretization is swept.
#[allow(clippy::too_many_arguments)]
pub fn sweep_n(
    spec: &GraphonSpec,
    discretization: Discretization,
    g: &InitialDatum,
    p: PExponent,
    q: f64,
    ns: &[usize],
    oracle: &OracleConfig,
    horizon: f64,
) -> Result<RateReport> {
    oracle.validate_for(ns)?;
    NormOrder::new(q)?;
    let k_ref = quotient_average(spec, oracle.n_ref, oracle.quad_points)?;
    let g_ref = g.cell_averages(oracle.n_ref)?;
    let reference = backward_euler(
        &k_ref,
        &g_ref,
        p,
        oracle.tau_ref,
        horizon,
        DEFAULT_INNER_TOL,
    )?;
    let probes = probe_times(horizon);
    let errs = ns
        .par_iter()
        .map(|&n| {
            let k = discretize(spec, discretization, n)?;
            let traj = backward_euler(
                &k,
                &g.cell_averages(n)?,
                p,
                oracle.tau_ref,
                horizon,
                DEFAULT_INNER_TOL,
            )?;
            consistency_error(&traj, &reference, q, &probes)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RateReport::from_errors(
        ns.iter().map(|&n| n as f64).collect(),
        errs,
        ERROR_FLOOR,
    ))
}

/// Error against a fine-step implicit oracle at the same `n`, fitted against
/// `tau`. Explicit-scheme instabilities are recorded as notes and the point
/// is left out of the fit.
#[allow(clippy::too_many_arguments)]
pub fn sweep_tau(
    k: &KernelMatrix,
    g: &GridFunction,
    p: PExponent,
    q: f64,
    taus: &[f64],
    oracle_tau: f64,
    horizon: f64,
    scheme: Scheme,
) -> Result<RateReport> {
    NormOrder::new(q)?;
    if taus.len() < 3 {
        return Err(Error::validation("taus", "need at least 3 step sizes"));
    }
    let min_tau = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_tau > 0.0) {
        return Err(Error::validation("taus", "must be > 0"));
    }
    if !(oracle_tau > 0.0 && oracle_tau <= min_tau / 4.0) {
        return Err(Error::validation(
            "oracle_tau",
            format!("must lie in ]0, min tau / 4 = {}]", min_tau / 4.0),
        ));
    }
    let reference = backward_euler(k, g, p, oracle_tau, horizon, DEFAULT_INNER_TOL)?;
    let probes = probe_times(horizon);
    let runs: Vec<Result<f64>> = taus
        .par_iter()
        .map(|&tau| {
            let traj = match scheme {
                Scheme::Forward => forward_euler(k, g, p, &StepSchedule::fixed(tau, horizon))?,
                Scheme::Backward => backward_euler(k, g, p, tau, horizon, DEFAULT_INNER_TOL)?,
            };
            consistency_error(&traj, &reference, q, &probes)
        })
        .collect();
    let mut notes = Vec::new();
    let mut errs = Vec::with_capacity(runs.len());
    for (tau, run) in taus.iter().zip(runs) {
        match run {
            Ok(e) => errs.push(e),
            Err(e @ Error::Stability { .. }) => {
                notes.push(format!("tau = {tau}: {e}"));
                errs.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    let mut report = RateReport::from_errors(taus.to_vec(), errs, ERROR_FLOOR);
    report.notes = notes;
    Ok(report)
}

/// Outcome of one contraction check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Absolute slack of the contraction comparison.
pub const CONTRACTION_SLACK: f64 = 1e-8;

/// `||u1(T) - u2(T)||_q <= ||g1 - g2||_q` for two implicit runs.
#[allow(clippy::too_many_arguments)]
pub fn contraction_test(
    k: &KernelMatrix,
    p: PExponent,
    q: f64,
    g1: &GridFunction,
    g2: &GridFunction,
    horizon: f64,
    tau: f64,
) -> Result<ContractionOutcome> {
    let q = NormOrder::new(q)?;
    let rhs = g1.sub(g2)?.norm(q);
    let u1 = backward_euler(k, g1, p, tau, horizon, DEFAULT_INNER_TOL)?;
    let u2 = backward_euler(k, g2, p, tau, horizon, DEFAULT_INNER_TOL)?;
    let lhs = u1.final_state().sub(u2.final_state())?.norm(q);
    Ok(ContractionOutcome {
        lhs,
        rhs,
        pass: lhs <= rhs + CONTRACTION_SLACK,
    })
}
