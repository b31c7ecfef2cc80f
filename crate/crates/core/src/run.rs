//! Experiment runner behind the `plap` binary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, GateSection};
use crate::error::{Error, Result};
use crate::graphon::{boundary_dimension, CATALOG};
use crate::harness::{
    discretize, invariant_suite_with, sweep_n, sweep_tau, RateReport, SuiteHooks,
};
use crate::integrate::{backward_euler, forward_euler, Scheme, StepSchedule};
use crate::io;
use crate::plimit::{p_sweep, PSweepRow};

/// Overrides `output_dir` from the config when set.
pub const OUTPUT_DIR_ENV: &str = "PLAP_OUTPUT_DIR";

/// Files written by a run and the gates it failed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub gate_failures: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.gate_failures.is_empty()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    library_version: &'a str,
    experiment: Experiment,
    output_dir: String,
    wall_time_seconds: f64,
    passed: bool,
    gate_failures: &'a [String],
    artifacts: Vec<String>,
    config: String,
}

/// Confines every artifact to one directory.
struct Sink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        debug_assert!(!name.contains('/') && !name.contains('\\'));
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output_dir.clone(),
    }
}

/// Parse, validate and run the experiment in `config_path`.
pub fn run(config_path: &Path) -> Result<RunOutcome> {
    let cfg = ExperimentConfig::from_file(config_path)?;
    run_config(&cfg, SuiteHooks::default())
}

/// Run the built-in invariant-suite configuration.
pub fn verify(seed: u64) -> Result<RunOutcome> {
    verify_with(seed, SuiteHooks::default())
}

pub fn verify_with(seed: u64, hooks: SuiteHooks) -> Result<RunOutcome> {
    run_config(&ExperimentConfig::verify(seed), hooks)
}

pub fn run_config(cfg: &ExperimentConfig, hooks: SuiteHooks) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let mut sink = Sink::new(resolve_output_dir(cfg))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.max_workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let gate_failures = pool.install(|| dispatch(cfg, hooks, &mut sink))?;

    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment,
        output_dir: sink.dir.display().to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        passed: gate_failures.is_empty(),
        gate_failures: &gate_failures,
        artifacts: sink
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
            .collect(),
        config: cfg.to_toml_string(),
    };
    sink.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(RunOutcome {
        output_dir: sink.dir,
        artifacts: sink.written,
        gate_failures,
    })
}

fn dispatch(cfg: &ExperimentConfig, hooks: SuiteHooks, sink: &mut Sink) -> Result<Vec<String>> {
    let gate = cfg.gate.clone().unwrap_or_default();
    match cfg.experiment {
        Experiment::Verify => {
            let report = invariant_suite_with(cfg.seed, hooks)?;
            sink.write("invariants.txt", |w| {
                Ok(w.write_all(report.to_table().as_bytes())?)
            })?;
            sink.write("invariants.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &report).map_err(|e| Error::Io(e.into()))?;
                writeln!(w)?;
                Ok(())
            })?;
            Ok(report
                .entries
                .iter()
                .filter(|e| !e.pass)
                .map(|e| {
                    format!(
                        "invariant {}::{} measured {:e} > {:e}",
                        e.module, e.name, e.measured, e.tolerance
                    )
                })
                .collect())
        }
        Experiment::Simulate => {
            let s = cfg.schedule.as_ref().expect("validated");
            let spec = cfg.graphon()?;
            let k = discretize(spec, cfg.discretization, s.n)?;
            let g = cfg.initial.cell_averages(s.n)?;
            let p = cfg.exponent()?;
            let sched = cfg.step_schedule()?;
            let traj = match s.scheme {
                Scheme::Forward => forward_euler(&k, &g, p, &sched)?,
                Scheme::Backward => {
                    backward_euler(&k, &g, p, fixed_tau(&sched), s.horizon, s.inner_tol)?
                }
            };
            sink.write("kernel.csv", |w| io::write_kernel_csv(&k, w))?;
            sink.write("initial.csv", |w| io::write_grid_csv(&g, w))?;
            sink.write("trajectory.csv", |w| io::write_trajectory_csv(&traj, w))?;
            let meta = io::TrajectoryMeta::of(&traj, Some(sched));
            sink.write("trajectory.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &meta).map_err(|e| Error::Io(e.into()))?;
                writeln!(w)?;
                Ok(())
            })?;
            Ok(Vec::new())
        }
        Experiment::SweepN => {
            let s = cfg.sweep.as_ref().expect("validated");
            let report = sweep_n(
                cfg.graphon()?,
                cfg.discretization,
                &cfg.initial,
                cfg.exponent()?,
                cfg.q,
                s.ns.as_deref().expect("validated"),
                &cfg.oracle()?,
                s.horizon,
            )?;
            write_rate(sink, &report)?;
            Ok(rate_gate(&gate, &report))
        }
        Experiment::SweepTau => {
            let s = cfg.sweep.as_ref().expect("validated");
            let n = s.n.expect("validated");
            let k = discretize(cfg.graphon()?, cfg.discretization, n)?;
            let g = cfg.initial.cell_averages(n)?;
            let report = sweep_tau(
                &k,
                &g,
                cfg.exponent()?,
                cfg.q,
                s.taus.as_deref().expect("validated"),
                s.oracle_tau.expect("validated"),
                s.horizon,
                s.scheme,
            )?;
            write_rate(sink, &report)?;
            Ok(rate_gate(&gate, &report))
        }
        Experiment::PSweep => {
            let s = cfg.p_sweep.as_ref().expect("validated");
            let k = discretize(cfg.graphon()?, cfg.discretization, s.n)?;
            let g = cfg.initial.cell_averages(s.n)?;
            let rows = p_sweep(&k, &g, &s.p_list, s.horizon, s.tau)?;
            sink.write("p_sweep.csv", |w| io::write_psweep_csv(&rows, w))?;
            Ok(psweep_gate(&gate, &rows))
        }
        Experiment::Dimension => {
            let d = cfg.dimension.as_ref().expect("validated");
            let est = boundary_dimension(cfg.graphon()?, &d.levels, d.samples_per_axis)?;
            sink.write("dimension.csv", |w| {
                writeln!(w, "n,boundary_cells")?;
                for (n, c) in &est.counts {
                    writeln!(w, "{n},{c}")?;
                }
                Ok(())
            })?;
            sink.write("rate_summary.csv", |w| io::write_rate_summary(&est.fit, w))?;
            Ok(rate_gate(&gate, &est.fit))
        }
    }
}

fn fixed_tau(sched: &StepSchedule) -> f64 {
    match sched.mode {
        crate::integrate::StepMode::FixedTau { tau } => tau,
        crate::integrate::StepMode::AdaptiveAlpha { .. } => {
            unreachable!("validated: implicit runs use a fixed tau")
        }
    }
}

fn write_rate(sink: &mut Sink, report: &RateReport) -> Result<()> {
    sink.write("rate.csv", |w| io::write_rate_csv(report, w))?;
    sink.write("rate_summary.csv", |w| io::write_rate_summary(report, w))?;
    if !report.notes.is_empty() {
        sink.write("notes.txt", |w| {
            for note in &report.notes {
                writeln!(w, "{note}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn rate_gate(gate: &GateSection, r: &RateReport) -> Vec<String> {
    let mut out = Vec::new();
    // NaN (degenerate) slopes fail every bound.
    if let Some(lo) = gate.slope_min {
        if !(r.slope >= lo) {
            out.push(format!("slope {} < slope_min {lo}", r.slope));
        }
    }
    if let Some(hi) = gate.slope_max {
        if !(r.slope <= hi) {
            out.push(format!("slope {} > slope_max {hi}", r.slope));
        }
    }
    if let Some(min) = gate.r_squared_min {
        if !(r.r_squared >= min) {
            out.push(format!("r_squared {} < r_squared_min {min}", r.r_squared));
        }
    }
    out
}

fn psweep_gate(gate: &GateSection, rows: &[PSweepRow]) -> Vec<String> {
    let mut out = Vec::new();
    if gate.monotone
        && rows
            .windows(2)
            .any(|w| w[1].sup_deviation > w[0].sup_deviation)
    {
        out.push("sup_deviation is not non-increasing in p".into());
    }
    if let (Some(max), Some(last)) = (gate.final_deviation_max, rows.last()) {
        if !(last.sup_deviation <= max) {
            out.push(format!(
                "sup_deviation {} at p = {} > final_deviation_max {max}",
                last.sup_deviation, last.p
            ));
        }
    }
    out
}

/// Kernel catalog as text, one block per kind in catalog order.
pub fn list_kernels() -> String {
    let mut s = String::new();
    for e in CATALOG {
        let _ = writeln!(s, "{}", e.kind);
        let _ = writeln!(s, "  params:     {}", e.params);
        let _ = writeln!(s, "  regularity: {}", e.tag);
        let _ = writeln!(s, "  exercises:  {}", e.exercises);
    }
    s
}
