//! CSV artifacts: comma-separated, `.` decimal separator, one header row,
//! LF line endings. Floats are written in shortest round-trip form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::KernelMatrix;
use crate::harness::RateReport;
use crate::integrate::{InnerStats, Scheme, StepSchedule, Trajectory};
use crate::operator::{GridFunction, PExponent};
use crate::plimit::PSweepRow;

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: `{}`: {e}", s.trim())))
}

fn parse_size_header(line: Option<std::io::Result<String>>) -> Result<usize> {
    let line = line.ok_or_else(|| Error::Parse("empty file".into()))??;
    line.trim()
        .strip_prefix("n=")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::Parse(format!("line 1: expected header `n=<n>`, got `{line}`")))
}

fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    r.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Dense kernel matrix: header `n=<n>`, then `n` rows of `n` weights.
pub fn write_kernel_csv<W: Write>(k: &KernelMatrix, mut w: W) -> Result<()> {
    writeln!(w, "n={}", k.n())?;
    for i in 0..k.n() {
        writeln!(w, "{}", join(k.row(i).iter().copied()))?;
    }
    Ok(())
}

pub fn read_kernel_csv<R: BufRead>(r: R) -> Result<KernelMatrix> {
    let mut lines = data_lines(r);
    let n = parse_size_header(lines.next().map(|(_, l)| l))?;
    let mut w = Vec::with_capacity(n * n);
    for (no, line) in lines {
        let line = line?;
        let row = line
            .split(',')
            .map(|s| parse_f64(s, no))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!(
                "line {no}: expected {n} columns, got {}",
                row.len()
            )));
        }
        w.extend(row);
    }
    KernelMatrix::new(n, w)
}

/// Single-column grid function with header `n=<n>`.
pub fn write_grid_csv<W: Write>(u: &GridFunction, mut w: W) -> Result<()> {
    writeln!(w, "n={}", u.n())?;
    for x in u.values() {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn read_grid_csv<R: BufRead>(r: R) -> Result<GridFunction> {
    let mut lines = data_lines(r);
    let n = parse_size_header(lines.next().map(|(_, l)| l))?;
    let values = lines
        .map(|(no, l)| parse_f64(&l?, no))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        return Err(Error::Parse(format!(
            "header says n={n} but {} values follow",
            values.len()
        )));
    }
    GridFunction::new(values)
}

/// Columns `t,u_1,...,u_n`, one row per knot.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=traj.n()).map(|i| format!("u_{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        writeln!(
            w,
            "{}",
            join(std::iter::once(*t).chain(s.values().iter().copied()))
        )?;
    }
    Ok(())
}

/// Knot times and states of a trajectory CSV.
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<GridFunction>)> {
    let mut lines = data_lines(r);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))?;
    let header = header?;
    let cols = header.split(',').count();
    if !header.starts_with("t,") || cols < 2 {
        return Err(Error::Parse(format!(
            "line 1: expected `t,u_1,...`, got `{header}`"
        )));
    }
    let (mut times, mut states) = (Vec::new(), Vec::new());
    for (no, line) in lines {
        let row = line?
            .split(',')
            .map(|s| parse_f64(s, no))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "line {no}: expected {cols} columns, got {}",
                row.len()
            )));
        }
        times.push(row[0]);
        states.push(GridFunction::new(row[1..].to_vec())?);
    }
    Ok((times, states))
}

/// Sidecar metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: Scheme,
    pub p: PExponent,
    pub n: usize,
    pub steps: usize,
    pub final_time: f64,
    pub truncated: bool,
    pub schedule: Option<StepSchedule>,
    pub solver_stats: Vec<InnerStats>,
}

impl TrajectoryMeta {
    pub fn of(traj: &Trajectory, schedule: Option<StepSchedule>) -> Self {
        Self {
            scheme: traj.scheme,
            p: traj.p,
            n: traj.n(),
            steps: traj.steps(),
            final_time: traj.final_time(),
            truncated: traj.truncated,
            schedule,
            solver_stats: traj.solver_stats.clone(),
        }
    }
}

/// Columns `x,err`.
pub fn write_rate_csv<W: Write>(report: &RateReport, mut w: W) -> Result<()> {
    writeln!(w, "x,err")?;
    for (x, e) in report.xs.iter().zip(&report.errs) {
        writeln!(w, "{x},{e}")?;
    }
    Ok(())
}

/// Header plus the single summary line of a fit.
pub fn write_rate_summary<W: Write>(report: &RateReport, mut w: W) -> Result<()> {
    writeln!(w, "slope,intercept,r_squared,points_used,degenerate")?;
    writeln!(
        w,
        "{},{},{},{},{}",
        report.slope, report.intercept, report.r_squared, report.used, report.degenerate
    )?;
    Ok(())
}

/// Columns `p,tau_used,sup_deviation`.
pub fn write_psweep_csv<W: Write>(rows: &[PSweepRow], mut w: W) -> Result<()> {
    writeln!(w, "p,tau_used,sup_deviation")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.p, r.tau_used, r.sup_deviation)?;
    }
    Ok(())
}
