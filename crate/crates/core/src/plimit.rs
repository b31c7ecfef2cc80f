//! The `p -> inf` limit: the constraint set
//! `S = { v : |v_j - v_i| <= 1 on every support edge }`, projection onto it,
//! the limiting flow, and the sweep comparing finite-`p` runs to it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphon::{KernelMatrix, SupportMask};
use crate::integrate::{backward_euler, Scheme, Trajectory, DEFAULT_INNER_TOL};
use crate::operator::{GridFunction, NormOrder, PExponent};

/// States violating the constraints by at most this much count as feasible,
/// so the output of [`project_sinf`] at any tolerance up to it is accepted.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_DYKSTRA_SWEEPS: usize = 100_000;

/// Pairwise constraints `|v_j - v_i| <= 1` over the off-diagonal edges of a
/// support mask.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    mask: SupportMask,
    pairs: Vec<(usize, usize)>,
}

impl ConstraintSet {
    pub fn new(mask: SupportMask) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::Precondition("kernel support is empty".into()));
        }
        let n = mask.n();
        let pairs = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| mask.get(i, j))
            .collect();
        Ok(Self { mask, pairs })
    }

    /// Support of `k` taken as the entries with weight `> threshold`.
    pub fn from_kernel(k: &KernelMatrix, threshold: f64) -> Result<Self> {
        Self::new(SupportMask::from_kernel(k, threshold))
    }

    pub fn n(&self) -> usize {
        self.mask.n()
    }

    pub fn mask(&self) -> &SupportMask {
        &self.mask
    }

    fn check(&self, v: &GridFunction) -> Result<()> {
        if v.n() == self.n() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "constraint set has n = {} but state has n = {}",
                self.n(),
                v.n()
            )))
        }
    }
}

/// Largest excess `|v_j - v_i| - 1` over the support edges (zero when feasible).
pub fn sinf_violation(cs: &ConstraintSet, v: &GridFunction) -> Result<f64> {
    cs.check(v)?;
    let x = v.values();
    Ok(cs
        .pairs
        .iter()
        .map(|&(i, j)| ((x[j] - x[i]).abs() - 1.0).max(0.0))
        .fold(0.0, f64::max))
}

/// Nearest feasible point in `L^2(0,1)`, by cyclic Dykstra projections onto
/// the pairwise slabs.
pub fn project_sinf(cs: &ConstraintSet, v: &GridFunction, tol: f64) -> Result<GridFunction> {
    cs.check(v)?;
    if !(tol > 0.0) {
        return Err(Error::validation("tol", "must be > 0"));
    }
    let mut x = v.values().to_vec();
    // Dykstra correction for slab e is c_e (e_j - e_i).
    let mut corr = vec![0.0; cs.pairs.len()];
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_DYKSTRA_SWEEPS {
        let before = x.clone();
        for (c, &(i, j)) in corr.iter_mut().zip(&cs.pairs) {
            let (xi, xj) = (x[i] - *c, x[j] + *c);
            let d = xj - xi;
            let shift = if d > 1.0 {
                (d - 1.0) / 2.0
            } else if d < -1.0 {
                (d + 1.0) / 2.0
            } else {
                0.0
            };
            x[i] = xi + shift;
            x[j] = xj - shift;
            *c = shift;
        }
        last_change = x
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let w = GridFunction::from_vec_unchecked(x.clone());
        if last_change <= tol && sinf_violation(cs, &w)? <= tol {
            return Ok(w);
        }
    }
    Err(Error::Convergence {
        what: "Dykstra projection".into(),
        iterations: MAX_DYKSTRA_SWEEPS,
        residual: last_change,
    })
}

/// Solution of the limiting flow from a feasible start: zero lies in the
/// normal cone at every feasible point, so the unique solution is constant.
pub fn limit_trajectory(cs: &ConstraintSet, g: &GridFunction, horizon: f64) -> Result<Trajectory> {
    let viol = sinf_violation(cs, g)?;
    if viol > FEASIBILITY_TOL {
        return Err(Error::Precondition(format!(
            "initial state violates the constraint set by {viol}; project it first"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::validation("horizon", "must be > 0"));
    }
    Ok(Trajectory {
        times: vec![0.0, horizon],
        states: vec![g.clone(), g.clone()],
        // Nominal: the limit has no finite exponent.
        p: PExponent::new(2.0).expect("2 is a valid exponent"),
        scheme: Scheme::Backward,
        solver_stats: Vec::new(),
        truncated: false,
    })
}

/// One row of the p-sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PSweepRow {
    pub p: f64,
    pub tau_used: f64,
    pub sup_deviation: f64,
}

/// Step used at exponent `p`: `min(tau_cap, 1/p^2)`, so the time step shrinks
/// before `p` grows.
pub fn sweep_tau_for(p: f64, tau_cap: f64) -> f64 {
    tau_cap.min(1.0 / (p * p))
}

/// Implicit runs at each `p` compared to the limiting (constant) trajectory
/// in the sup-over-knots `L^inf` distance.
pub fn p_sweep(
    k: &KernelMatrix,
    g: &GridFunction,
    p_list: &[f64],
    horizon: f64,
    tau_cap: f64,
) -> Result<Vec<PSweepRow>> {
    if p_list.is_empty() {
        return Err(Error::validation("p_list", "must be non-empty"));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("p_list", "must be strictly increasing"));
    }
    let ps = p_list
        .iter()
        .map(|&p| PExponent::new(p))
        .collect::<Result<Vec<_>>>()?;
    if !(tau_cap > 0.0) {
        return Err(Error::validation("tau", "must be > 0"));
    }
    let cs = ConstraintSet::from_kernel(k, 0.0)?;
    let limit = limit_trajectory(&cs, g, horizon)?;
    let target = &limit.states[0];
    ps.par_iter()
        .map(|&p| {
            let tau = sweep_tau_for(p.get(), tau_cap);
            let traj = backward_euler(k, g, p, tau, horizon, DEFAULT_INNER_TOL)?;
            let dev = traj
                .states
                .iter()
                .map(|s| s.sub(target).map(|d| d.norm(NormOrder::INF)))
                .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))?;
            Ok(PSweepRow {
                p: p.get(),
                tau_used: tau,
                sup_deviation: dev,
            })
        })
        .collect()
}
