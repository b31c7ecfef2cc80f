//! Experiment configuration, read from TOML.
//!
//! ```toml
//! experiment = "sweep_n"          # simulate | sweep_n | sweep_tau | p_sweep | verify | dimension
//! output_dir = "out/mean-smooth"
//! seed = 0
//! p = 2.0
//! q = 2.0
//! discretization = "average"      # average | collocation | simple
//!
//! [graphon]
//! kind = "mean"
//! params = []
//!
//! [initial]
//! family = "smooth"               # smooth | step | random | constant
//!
//! [sweep]
//! ns = [8, 16, 32, 64]
//! n_ref = 512
//! tau_ref = 0.01
//! horizon = 0.5
//! ```
//!
//! See the README for every section and key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{GraphonSpec, DEFAULT_SAMPLES_PER_AXIS};
use crate::harness::{Discretization, InitialDatum, OracleConfig};
use crate::integrate::{Scheme, StepSchedule, DEFAULT_INNER_TOL};
use crate::operator::{NormOrder, PExponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    SweepN,
    SweepTau,
    PSweep,
    Verify,
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_workers: Option<usize>,
    #[serde(default = "default_exponent")]
    pub p: f64,
    #[serde(default = "default_exponent")]
    pub q: f64,
    #[serde(default = "default_discretization")]
    pub discretization: Discretization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphon: Option<GraphonSpec>,
    #[serde(default = "default_initial")]
    pub initial: InitialDatum,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_sweep: Option<PSweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_exponent() -> f64 {
    2.0
}

fn default_discretization() -> Discretization {
    Discretization::Average
}

fn default_initial() -> InitialDatum {
    InitialDatum::Smooth
}

fn default_scheme() -> Scheme {
    Scheme::Backward
}

fn default_inner_tol() -> f64 {
    DEFAULT_INNER_TOL
}

/// `[schedule]`: a single run for `simulate`.
///
/// The implicit scheme needs `tau`. The explicit scheme takes either `tau` or
/// the pair `alpha_eps`, `alpha_nu` (diminishing adaptive steps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
}

/// `[sweep]`: `ns`, `n_ref`, `tau_ref` for `sweep_n`; `n`, `taus`,
/// `oracle_tau`, `scheme` for `sweep_tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tau: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

/// `[p_sweep]`: the step at each `p` is `min(tau, 1/p^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PSweepSection {
    pub p_list: Vec<f64>,
    pub tau: f64,
    pub n: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSection {
    pub levels: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples_per_axis: usize,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES_PER_AXIS
}

/// `[gate]`: assertions on the result; a violated gate makes the run fail.
///
/// `slope_*` and `r_squared_min` apply to the fitted slope of a sweep (the
/// estimate itself for `dimension`). `final_deviation_max` and `monotone`
/// apply to `p_sweep`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_deviation_max: Option<f64>,
    #[serde(default)]
    pub monotone: bool,
}

/// Rewrites a validation error from an inner operation so that it names the
/// config key it came from.
fn under<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation { field, message } => Error::Validation {
            field: format!("{section}.{field}"),
            message,
        },
        other => Error::Validation {
            field: section.to_string(),
            message: other.to_string(),
        },
    })
}

fn required<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::validation(field, "required for this experiment"))
}

fn positive(x: f64, field: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::validation(
            field,
            format!("must be a finite number > 0, got {x}"),
        ))
    }
}

fn at_least(n: usize, min: usize, field: &str) -> Result<usize> {
    if n >= min {
        Ok(n)
    } else {
        Err(Error::validation(
            field,
            format!("must be >= {min}, got {n}"),
        ))
    }
}

impl ExperimentConfig {
    /// Parse and validate. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Built-in configuration of the `verify` subcommand.
    pub fn verify(seed: u64) -> Self {
        Self {
            experiment: Experiment::Verify,
            output_dir: default_output_dir(),
            seed,
            max_workers: None,
            p: default_exponent(),
            q: default_exponent(),
            discretization: default_discretization(),
            graphon: None,
            initial: default_initial(),
            schedule: None,
            sweep: None,
            p_sweep: None,
            dimension: None,
            gate: None,
        }
    }

    pub fn exponent(&self) -> Result<PExponent> {
        PExponent::new(self.p)
            .map_err(|_| Error::validation("p", format!("must be > 1 and finite, got {}", self.p)))
    }

    pub fn graphon(&self) -> Result<&GraphonSpec> {
        required(&self.graphon, "graphon")
    }

    /// Fixed or adaptive schedule of a `simulate` run.
    pub fn step_schedule(&self) -> Result<StepSchedule> {
        let s = required(&self.schedule, "schedule")?;
        let max_steps = s.max_steps.unwrap_or(usize::MAX);
        let sched = match (s.scheme, s.tau, s.alpha_eps, s.alpha_nu) {
            (_, Some(tau), None, None) => StepSchedule {
                max_steps,
                ..StepSchedule::fixed(tau, s.horizon)
            },
            (Scheme::Forward, None, Some(eps), Some(nu)) => {
                StepSchedule::adaptive(eps, nu, s.horizon, max_steps)
            }
            (Scheme::Backward, None, _, _) => {
                return Err(Error::validation(
                    "schedule.tau",
                    "required by the implicit scheme",
                ))
            }
            _ => {
                return Err(Error::validation(
                    "schedule.tau",
                    "give either `tau` or both `alpha_eps` and `alpha_nu`",
                ))
            }
        };
        under("schedule", sched.validate())?;
        Ok(sched)
    }

    pub fn oracle(&self) -> Result<OracleConfig> {
        let s = required(&self.sweep, "sweep")?;
        Ok(OracleConfig::new(
            *required(&s.n_ref, "sweep.n_ref")?,
            *required(&s.tau_ref, "sweep.tau_ref")?,
        ))
    }

    /// Checks every numeric field the chosen experiment will use, before any
    /// computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.max_workers == Some(0) {
            return Err(Error::validation("max_workers", "must be >= 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::validation("output_dir", "must not be empty"));
        }
        self.exponent()?;
        NormOrder::new(self.q)
            .map_err(|_| Error::validation("q", format!("must be >= 1, got {}", self.q)))?;
        match &self.initial {
            InitialDatum::Random { pieces, .. } => {
                at_least(*pieces, 1, "initial.pieces")?;
            }
            InitialDatum::Constant { value } if !value.is_finite() => {
                return Err(Error::validation("initial.value", "must be finite"));
            }
            _ => {}
        }
        if let Some(g) = &self.gate {
            if let (Some(lo), Some(hi)) = (g.slope_min, g.slope_max) {
                if lo > hi {
                    return Err(Error::validation(
                        "gate.slope_min",
                        "must not exceed gate.slope_max",
                    ));
                }
            }
        }
        match self.experiment {
            Experiment::Verify => Ok(()),
            Experiment::Simulate => {
                self.graphon()?;
                let s = required(&self.schedule, "schedule")?;
                at_least(s.n, 1, "schedule.n")?;
                positive(s.inner_tol, "schedule.inner_tol")?;
                self.step_schedule().map(|_| ())
            }
            Experiment::SweepN => {
                self.graphon()?;
                let s = required(&self.sweep, "sweep")?;
                positive(s.horizon, "sweep.horizon")?;
                let ns = required(&s.ns, "sweep.ns")?;
                if ns.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::validation("sweep.ns", "must be strictly increasing"));
                }
                under("sweep", self.oracle()?.validate_for(ns))
            }
            Experiment::SweepTau => {
                self.graphon()?;
                let s = required(&self.sweep, "sweep")?;
                positive(s.horizon, "sweep.horizon")?;
                at_least(*required(&s.n, "sweep.n")?, 1, "sweep.n")?;
                let taus = required(&s.taus, "sweep.taus")?;
                if taus.len() < 3 {
                    return Err(Error::validation(
                        "sweep.taus",
                        "need at least 3 step sizes",
                    ));
                }
                for &t in taus {
                    positive(t, "sweep.taus")?;
                }
                let oracle_tau = positive(
                    *required(&s.oracle_tau, "sweep.oracle_tau")?,
                    "sweep.oracle_tau",
                )?;
                let min_tau = taus.iter().cloned().fold(f64::INFINITY, f64::min);
                if oracle_tau > min_tau / 4.0 {
                    return Err(Error::validation(
                        "sweep.oracle_tau",
                        format!("must be <= min(taus) / 4 = {}", min_tau / 4.0),
                    ));
                }
                Ok(())
            }
            Experiment::PSweep => {
                self.graphon()?;
                let s = required(&self.p_sweep, "p_sweep")?;
                at_least(s.n, 1, "p_sweep.n")?;
                positive(s.tau, "p_sweep.tau")?;
                positive(s.horizon, "p_sweep.horizon")?;
                if s.p_list.is_empty() {
                    return Err(Error::validation("p_sweep.p_list", "must be non-empty"));
                }
                if s.p_list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::validation(
                        "p_sweep.p_list",
                        "must be strictly increasing",
                    ));
                }
                for &p in &s.p_list {
                    PExponent::new(p).map_err(|_| {
                        Error::validation("p_sweep.p_list", format!("{p} is not > 1"))
                    })?;
                }
                Ok(())
            }
            Experiment::Dimension => {
                let spec = self.graphon()?;
                if !spec.is_indicator() {
                    return Err(Error::validation(
                        "graphon.kind",
                        format!("`{}` is not an indicator kernel", spec.kind()),
                    ));
                }
                let d = required(&self.dimension, "dimension")?;
                at_least(d.samples_per_axis, 2, "dimension.samples_per_axis")?;
                if d.levels.len() < 3 {
                    return Err(Error::validation(
                        "dimension.levels",
                        "need at least 3 levels",
                    ));
                }
                if d.levels.windows(2).any(|w| w[1] <= w[0]) || d.levels[0] < 4 {
                    return Err(Error::validation(
                        "dimension.levels",
                        "must be strictly increasing and each >= 4",
                    ));
                }
                Ok(())
            }
        }
    }
}
