//! Time discretization of `u' = -Delta_p u`: the explicit scheme with fixed or
//! diminishing steps, the implicit scheme through proximal inner solves, and
//! the linear and piecewise-constant time interpolants.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::KernelMatrix;
use crate::operator::{dot, laplacian_and_energy, GridFunction, NormOrder, PExponent};

/// Relative stopping tolerance of the implicit inner solver; scaled by
/// `max(1, ||u^{h-1}||_2)`.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_INNER_ITERATIONS: usize = 10_000;

/// An explicit step whose energy grows by more than this factor is unstable.
const ENERGY_BLOWUP_FACTOR: f64 = 10.0;
/// Energies below this fraction of the initial energy are not checked.
const ENERGY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepMode {
    FixedTau {
        tau: f64,
    },
    /// `tau_h = alpha / max(||Delta_p u^{h-1}||_2, 1)` with
    /// `alpha = alpha_eps / (N+1)^{1/2 + alpha_nu}`.
    AdaptiveAlpha {
        alpha_eps: f64,
        alpha_nu: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    #[serde(flatten)]
    pub mode: StepMode,
    pub horizon: f64,
    pub max_steps: usize,
}

impl StepSchedule {
    pub fn fixed(tau: f64, horizon: f64) -> Self {
        Self {
            mode: StepMode::FixedTau { tau },
            horizon,
            max_steps: usize::MAX,
        }
    }

    pub fn adaptive(alpha_eps: f64, alpha_nu: f64, horizon: f64, max_steps: usize) -> Self {
        Self {
            mode: StepMode::AdaptiveAlpha {
                alpha_eps,
                alpha_nu,
            },
            horizon,
            max_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation("horizon", "must be a finite number > 0"));
        }
        if self.max_steps == 0 {
            return Err(Error::validation("max_steps", "must be >= 1"));
        }
        match self.mode {
            StepMode::FixedTau { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::validation("tau", "must be a finite number > 0"))
            }
            StepMode::AdaptiveAlpha { alpha_eps, .. }
                if !(alpha_eps > 0.0 && alpha_eps.is_finite()) =>
            {
                Err(Error::validation(
                    "alpha_eps",
                    "must be a finite number > 0",
                ))
            }
            StepMode::AdaptiveAlpha { alpha_nu, .. } if !(alpha_nu > 0.0 && alpha_nu < 0.5) => {
                Err(Error::validation("alpha_nu", "must lie in ]0, 1/2["))
            }
            _ => Ok(()),
        }
    }
}

/// Smallest `N` with `N * alpha_N >= horizon`, i.e. the step count the
/// diminishing rule needs when every step has length close to `alpha_N`.
pub fn adaptive_step_count(alpha_eps: f64, alpha_nu: f64, horizon: f64) -> usize {
    let reach = |n: u64| n as f64 * alpha_eps / ((n + 1) as f64).powf(0.5 + alpha_nu);
    let cap = 1u64 << 40;
    let mut hi = 1u64;
    while reach(hi) < horizon && hi < cap {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reach(mid) >= horizon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if reach(lo.max(1)) >= horizon {
        lo.max(1) as usize
    } else {
        hi as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Forward,
    Backward,
}

/// Inner-solver record for one implicit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    pub p: PExponent,
    pub scheme: Scheme,
    /// One entry per implicit step; empty for the explicit scheme.
    pub solver_stats: Vec<InnerStats>,
    /// The step budget ran out before the horizon.
    pub truncated: bool,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one knot")
    }

    pub fn final_state(&self) -> &GridFunction {
        self.states
            .last()
            .expect("trajectory has at least one knot")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Knot `h` such that `t` lies in `]t_{h-1}, t_h]`, after range checks.
    fn knot_after(&self, t: f64) -> Result<usize> {
        let end = self.final_time();
        if !(t >= 0.0 && t <= end + 1e-12 * end.max(1.0)) {
            return Err(Error::Domain(format!("t = {t} outside [0, {end}]")));
        }
        Ok(self.times.partition_point(|&x| x < t).min(self.steps()))
    }
}

/// Knot times of `ceil(horizon / tau)` fixed steps, the last one shortened to
/// land on the horizon.
fn fixed_knots(tau: f64, horizon: f64) -> Vec<f64> {
    let steps = ((horizon / tau) - 1e-9).ceil().max(1.0) as usize;
    let mut t: Vec<f64> = (0..steps).map(|h| h as f64 * tau).collect();
    t.push(horizon);
    t
}

/// Explicit scheme `u^h = u^{h-1} - tau_h Delta_p u^{h-1}`.
pub fn forward_euler(
    k: &KernelMatrix,
    g: &GridFunction,
    p: PExponent,
    sched: &StepSchedule,
) -> Result<Trajectory> {
    if k.n() != g.n() {
        return Err(Error::Dimension(format!(
            "kernel n = {} but g has n = {}",
            k.n(),
            g.n()
        )));
    }
    sched.validate()?;
    let horizon = sched.horizon;
    let (fixed_times, alpha) = match sched.mode {
        StepMode::FixedTau { tau } => (Some(fixed_knots(tau, horizon)), 0.0),
        StepMode::AdaptiveAlpha {
            alpha_eps,
            alpha_nu,
        } => {
            let n_steps = adaptive_step_count(alpha_eps, alpha_nu, horizon);
            (
                None,
                alpha_eps / ((n_steps + 1) as f64).powf(0.5 + alpha_nu),
            )
        }
    };

    let mut times = vec![0.0];
    let mut states = vec![g.clone()];
    let mut u = g.clone();
    let (mut lap, mut en) = laplacian_and_energy(k, &u, p);
    let initial_en = en;
    let mut truncated = false;
    let mut h = 0usize;
    loop {
        let t = *times.last().unwrap();
        let done = match &fixed_times {
            Some(knots) => h + 1 >= knots.len(),
            None => t >= horizon,
        };
        if done {
            break;
        }
        if h >= sched.max_steps {
            truncated = true;
            break;
        }
        let (t_next, tau_h) = match &fixed_times {
            Some(knots) => (knots[h + 1], knots[h + 1] - knots[h]),
            None => {
                let tau = alpha / lap.norm(NormOrder::TWO).max(1.0);
                if t + tau >= horizon * (1.0 - 1e-12) {
                    (horizon, horizon - t)
                } else {
                    (t + tau, tau)
                }
            }
        };
        h += 1;
        let next = u
            .add_scaled(-tau_h, &lap)
            .expect("state and increment share n");
        if !next.is_finite() {
            return Err(Error::Stability {
                step: h,
                time: t_next,
                reason: "state is no longer finite".into(),
            });
        }
        let (next_lap, next_en) = laplacian_and_energy(k, &next, p);
        // Growth from round-off-sized energies near consensus is not a blow-up.
        let jumped = next_en > ENERGY_BLOWUP_FACTOR * en && next_en > ENERGY_FLOOR * initial_en;
        if !next_en.is_finite() || jumped {
            return Err(Error::Stability {
                step: h,
                time: t_next,
                reason: format!("energy jumped from {en:e} to {next_en:e}; reduce tau"),
            });
        }
        u = next;
        lap = next_lap;
        en = next_en;
        times.push(t_next);
        states.push(u.clone());
    }
    Ok(Trajectory {
        times,
        states,
        p,
        scheme: Scheme::Forward,
        solver_stats: Vec::new(),
        truncated,
    })
}

/// Settings of the proximal inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxSettings {
    /// Relative residual tolerance (see [`DEFAULT_INNER_TOL`]).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProxSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_INNER_TOL,
            max_iter: DEFAULT_MAX_INNER_ITERATIONS,
        }
    }
}

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;
/// Gradient iterations before the solver switches to Newton steps.
const BB_BUDGET: usize = 100;

/// One implicit step: the minimiser of
/// `Phi(v) = 1/2 ||v - u||^2 + tau E_p(v)`, i.e. `v = (I + tau Delta_p)^{-1} u`.
///
/// Barzilai-Borwein gradient descent with a nonmonotone Armijo safeguard,
/// warm-started at `u`. When two values nearly coincide and `p < 2`, the
/// curvature `|d|^{p-2}` makes gradient steps stall; after `BB_BUDGET`
/// iterations the solver continues with damped Newton steps on a dense
/// Cholesky factorization. The `L^2(0,1)` gradient of `Phi` is the residual
/// `v - u + tau Delta_p v`; the solve stops once its norm is at most
/// `tol * max(1, ||u||_2)`.
pub fn resolvent_step(
    k: &KernelMatrix,
    u: &GridFunction,
    p: PExponent,
    tau: f64,
    settings: &ProxSettings,
) -> Result<(GridFunction, InnerStats)> {
    if k.n() != u.n() {
        return Err(Error::Dimension(format!(
            "kernel n = {} but u has n = {}",
            k.n(),
            u.n()
        )));
    }
    let prox = Prox {
        k,
        u: u.values(),
        p,
        tau,
        tol: settings.tol * u.norm(NormOrder::TWO).max(1.0),
    };
    let mut it = Iterate::at(&prox, u.values().to_vec());
    if it.r_norm <= prox.tol {
        return Ok((
            u.clone(),
            InnerStats {
                iterations: 0,
                residual: it.r_norm,
            },
        ));
    }
    let mut history: VecDeque<f64> = VecDeque::from([it.phi]);
    // Phi is 1-strongly convex, so BB steps never exceed 1.
    let mut step = 1.0 / (1.0 + tau * k.max_weight());

    for iteration in 1..=settings.max_iter {
        let reference = history.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let next = if iteration <= BB_BUDGET {
            let dir: Vec<f64> = it.r.iter().map(|x| -x).collect();
            let rr = it.r_norm * it.r_norm;
            let next = prox.search(&it, &dir, step, reference, -rr);
            let s: Vec<f64> = next.v.iter().zip(&it.v).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.r.iter().zip(&it.r).map(|(a, b)| a - b).collect();
            let (ss, sy) = (dot(&s, &s), dot(&s, &y));
            step = if sy > 0.0 {
                (ss / sy).clamp(1e-12, 1.0)
            } else {
                1.0
            };
            next
        } else {
            let dir = prox.newton_direction(&it);
            match prox.residual_search(&it, &dir) {
                Some(next) => next,
                None => break,
            }
        };
        it = next;
        history.push_back(it.phi);
        if history.len() > HISTORY {
            history.pop_front();
        }
        if !it.r_norm.is_finite() {
            break;
        }
        if it.r_norm <= prox.tol {
            return Ok((
                GridFunction::from_vec_unchecked(it.v),
                InnerStats {
                    iterations: iteration,
                    residual: it.r_norm,
                },
            ));
        }
    }
    Err(Error::Convergence {
        what: "implicit-step inner solver".into(),
        iterations: settings.max_iter,
        residual: it.r_norm,
    })
}

struct Prox<'a> {
    k: &'a KernelMatrix,
    u: &'a [f64],
    p: PExponent,
    tau: f64,
    tol: f64,
}

struct Iterate {
    v: Vec<f64>,
    /// `v - u + tau Delta_p v`.
    r: Vec<f64>,
    r_norm: f64,
    phi: f64,
}

impl Iterate {
    fn at(prox: &Prox, v: Vec<f64>) -> Self {
        let n = v.len() as f64;
        let gf = GridFunction::from_vec_unchecked(v);
        let (lap, en) = laplacian_and_energy(prox.k, &gf, prox.p);
        let v = gf.into_values();
        let r: Vec<f64> = v
            .iter()
            .zip(prox.u)
            .zip(lap.values())
            .map(|((a, b), l)| a - b + prox.tau * l)
            .collect();
        let d2: f64 = v.iter().zip(prox.u).map(|(a, b)| (a - b) * (a - b)).sum();
        Self {
            r_norm: (dot(&r, &r) / n).sqrt(),
            phi: 0.5 * d2 / n + prox.tau * en,
            v,
            r,
        }
    }
}

impl Prox<'_> {
    /// Backtracking from `alpha` along `dir` until
    /// `Phi <= reference + c alpha slope`, with `slope` the directional
    /// derivative in the grid pairing. A rounding slack lets the search
    /// accept steps whose objective change is below resolution.
    fn search(
        &self,
        it: &Iterate,
        dir: &[f64],
        mut alpha: f64,
        reference: f64,
        slope: f64,
    ) -> Iterate {
        let slack = 4.0 * f64::EPSILON * reference.abs().max(f64::MIN_POSITIVE);
        loop {
            let trial: Vec<f64> = it.v.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
            let next = Iterate::at(self, trial);
            if next.phi <= reference + ARMIJO * alpha * slope + slack || alpha < 1e-12 {
                return next;
            }
            alpha *= 0.5;
        }
    }

    /// Backtracking on the residual norm, which near the solution is
    /// resolved far more finely than the objective. `None` when no step
    /// along `dir` reduces it.
    fn residual_search(&self, it: &Iterate, dir: &[f64]) -> Option<Iterate> {
        let mut alpha = 1.0;
        while alpha >= 1e-10 {
            let trial: Vec<f64> = it.v.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
            let next = Iterate::at(self, trial);
            if next.r_norm <= (1.0 - ARMIJO * alpha) * it.r_norm {
                return Some(next);
            }
            alpha *= 0.5;
        }
        None
    }

    /// Solves `(I + tau L(v)) d = -r`, where `L(v)` is the graph Laplacian
    /// with weights `c k_ij |v_j - v_i|^{p-2} / n`. For `p >= 2`, `c = p - 1`
    /// and `L` is the Jacobian of `Delta_p` (Newton). For `p < 2` the Newton
    /// step on a `|d|^{p-1}` term overshoots to `-d`; `c = 1` gives the
    /// lagged-diffusivity step instead, which majorizes `Phi` and collapses
    /// nearly equal pairs. Differences are floored at round-off so the
    /// weights stay finite.
    fn newton_direction(&self, it: &Iterate) -> Vec<f64> {
        let n = it.v.len();
        let pe = self.p.get();
        let scale = it.v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        let floor = 16.0 * f64::EPSILON * scale;
        let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            let row = self.k.row(i);
            let mut diag = 0.0;
            for j in 0..n {
                if j == i || row[j] == 0.0 {
                    continue;
                }
                let d = (it.v[j] - it.v[i]).abs().max(floor);
                let w = if pe == 2.0 {
                    row[j]
                } else {
                    (pe - 1.0).max(1.0) * row[j] * d.powf(pe - 2.0)
                };
                let w = self.tau * w / n as f64;
                h[(i, j)] = -w;
                diag += w;
            }
            h[(i, i)] += diag;
        }
        let rhs = nalgebra::DVector::from_iterator(n, it.r.iter().map(|x| -x));
        match h.cholesky() {
            Some(ch) => ch.solve(&rhs).iter().copied().collect(),
            None => rhs.iter().copied().collect(),
        }
    }
}

/// Implicit scheme `u^h = (I + tau Delta_p)^{-1} u^{h-1}` with fixed `tau`
/// on `[0, horizon]` (the last step is shortened to land on the horizon).
/// `inner_tol` is relative, see [`resolvent_step`].
pub fn backward_euler(
    k: &KernelMatrix,
    g: &GridFunction,
    p: PExponent,
    tau: f64,
    horizon: f64,
    inner_tol: f64,
) -> Result<Trajectory> {
    backward_euler_with(
        k,
        g,
        p,
        tau,
        horizon,
        &ProxSettings {
            tol: inner_tol,
            ..ProxSettings::default()
        },
    )
}

pub fn backward_euler_with(
    k: &KernelMatrix,
    g: &GridFunction,
    p: PExponent,
    tau: f64,
    horizon: f64,
    settings: &ProxSettings,
) -> Result<Trajectory> {
    if k.n() != g.n() {
        return Err(Error::Dimension(format!(
            "kernel n = {} but g has n = {}",
            k.n(),
            g.n()
        )));
    }
    StepSchedule::fixed(tau, horizon).validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::validation("inner_tol", "must be > 0"));
    }
    let times = fixed_knots(tau, horizon);
    let mut states = Vec::with_capacity(times.len());
    let mut stats = Vec::with_capacity(times.len() - 1);
    states.push(g.clone());
    for w in times.windows(2) {
        let prev = states.last().unwrap();
        let (next, st) = resolvent_step(k, prev, p, w[1] - w[0], settings)?;
        states.push(next);
        stats.push(st);
    }
    Ok(Trajectory {
        times,
        states,
        p,
        scheme: Scheme::Backward,
        solver_stats: stats,
        truncated: false,
    })
}

/// Time-linear interpolant through the knots.
pub fn interpolate_linear(traj: &Trajectory, t: f64) -> Result<GridFunction> {
    let h = traj.knot_after(t)?;
    if h == 0 {
        return Ok(traj.states[0].clone());
    }
    let (t0, t1) = (traj.times[h - 1], traj.times[h]);
    let theta = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let (a, b) = (&traj.states[h - 1], &traj.states[h]);
    Ok(GridFunction::from_vec_unchecked(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (1.0 - theta) * x + theta * y)
            .collect(),
    ))
}

/// Piecewise-constant interpolant on `]t_{h-1}, t_h]`: the left knot value for
/// the explicit scheme, the right knot value for the implicit one.
pub fn interpolate_constant(traj: &Trajectory, t: f64) -> Result<GridFunction> {
    if t <= 0.0 {
        return Err(Error::Domain(format!(
            "piecewise-constant interpolant is defined on ]0, T], got t = {t}"
        )));
    }
    let h = traj.knot_after(t)?;
    Ok(match traj.scheme {
        Scheme::Forward => traj.states[h - 1].clone(),
        Scheme::Backward => traj.states[h].clone(),
    })
}

/// Largest `L^q` distance between the two interpolants over the probe times.
pub fn interpolant_gap(traj: &Trajectory, q: f64, probe_times: &[f64]) -> Result<f64> {
    let q = NormOrder::new(q)?;
    probe_times.iter().try_fold(0.0_f64, |m, &t| {
        let d = interpolate_constant(traj, t)?.sub(&interpolate_linear(traj, t)?)?;
        Ok(m.max(d.norm(q)))
    })
}
