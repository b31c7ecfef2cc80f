//! The discrete nonlocal p-Laplacian and the algebra around it.
//!
//! A [`GridFunction`] of length `n` is the piecewise-constant function on
//! `[0,1]` taking value `v[i]` on the cell `[i/n, (i+1)/n[`. Every norm and
//! inner product here carries the `1/n` cell weight, so they are literally the
//! `L^q(0,1)` quantities of the embedding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::KernelMatrix;

/// Rows are split across threads only above this size.
const PAR_THRESHOLD: usize = 128;

/// Piecewise-constant function on `[0,1]` stored as per-cell values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("grid function must have n >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "grid function entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    /// Constant function `c` on `n` cells.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Integral over `[0,1]`, i.e. the arithmetic mean of the cell values.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn norm(&self, q: NormOrder) -> f64 {
        q.norm(&self.values, self.n())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_n(self.n(), other.n())?;
        Ok(Self::from_vec_unchecked(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Result<Self> {
        check_same_n(self.n(), other.n())?;
        Ok(Self::from_vec_unchecked(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_vec_unchecked(self.values.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Exponent `p` of the p-Laplacian, restricted to `]1, +inf[`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PExponent(f64);

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Domain(format!("p must lie in ]1, +inf[, got {p}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `phi(t) = |t|^{p-2} t`, continuously extended by `phi(0) = 0`.
    #[inline]
    pub fn phi(self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else if self.0 == 2.0 {
            t
        } else {
            t.abs().powf(self.0 - 2.0) * t
        }
    }

    /// `|t|^p`.
    #[inline]
    pub fn abs_pow(self, t: f64) -> f64 {
        if self.0 == 2.0 {
            t * t
        } else {
            t.abs().powf(self.0)
        }
    }
}

impl TryFrom<f64> for PExponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PExponent> for f64 {
    fn from(p: PExponent) -> f64 {
        p.0
    }
}

/// Order `q` of an `L^q` norm: a real `q >= 1` or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormOrder(f64);

impl NormOrder {
    pub const ONE: NormOrder = NormOrder(1.0);
    pub const TWO: NormOrder = NormOrder(2.0);
    pub const INF: NormOrder = NormOrder(f64::INFINITY);

    pub fn new(q: f64) -> Result<Self> {
        if q >= 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::Domain(format!(
                "norm order must be >= 1 or inf, got {q}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// `((1/cells) sum |x|^q)^{1/q}`, or `max |x|` for `q = inf`.
    pub(crate) fn norm(self, xs: &[f64], cells: usize) -> f64 {
        if self.is_inf() {
            xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        } else if self.0 == 1.0 {
            xs.iter().map(|x| x.abs()).sum::<f64>() / cells as f64
        } else if self.0 == 2.0 {
            (xs.iter().map(|x| x * x).sum::<f64>() / cells as f64).sqrt()
        } else {
            let s: f64 = xs.iter().map(|x| x.abs().powf(self.0)).sum();
            (s / cells as f64).powf(1.0 / self.0)
        }
    }
}

impl TryFrom<f64> for NormOrder {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<NormOrder> for f64 {
    fn from(q: NormOrder) -> f64 {
        q.0
    }
}

impl From<PExponent> for NormOrder {
    fn from(p: PExponent) -> Self {
        NormOrder(p.0)
    }
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension(format!("sizes {a} and {b} differ")))
    }
}

/// `(Delta_p u)_i = -(1/n) sum_j k_ij phi(u_j - u_i)`.
pub fn apply_plaplacian(k: &KernelMatrix, u: &GridFunction, p: PExponent) -> Result<GridFunction> {
    check_same_n(k.n(), u.n())?;
    let n = u.n();
    let mut out = vec![0.0; n];
    let row = |(i, o): (usize, &mut f64)| {
        let ui = u.values[i];
        let acc: f64 = k
            .row(i)
            .iter()
            .zip(&u.values)
            .map(|(w, uj)| w * p.phi(uj - ui))
            .sum();
        *o = -acc / n as f64;
    };
    if n >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(row);
    } else {
        out.iter_mut().enumerate().for_each(row);
    }
    Ok(GridFunction::from_vec_unchecked(out))
}

/// Discrete energy `(1/(2 p n^2)) sum_{i,j} k_ij |u_j - u_i|^p`.
pub fn energy(k: &KernelMatrix, u: &GridFunction, p: PExponent) -> Result<f64> {
    check_same_n(k.n(), u.n())?;
    Ok(laplacian_and_energy(k, u, p).1)
}

/// Both the p-Laplacian and the energy in one pass over the kernel.
pub(crate) fn laplacian_and_energy(
    k: &KernelMatrix,
    u: &GridFunction,
    p: PExponent,
) -> (GridFunction, f64) {
    let n = u.n();
    let row = |i: usize| {
        let ui = u.values[i];
        let mut lap = 0.0;
        let mut en = 0.0;
        for (w, uj) in k.row(i).iter().zip(&u.values) {
            let d = uj - ui;
            if d != 0.0 && *w != 0.0 {
                let ph = p.phi(d);
                lap += w * ph;
                en += w * ph * d;
            }
        }
        (-lap / n as f64, en)
    };
    let rows: Vec<(f64, f64)> = if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let energy = rows.iter().map(|r| r.1).sum::<f64>() / (2.0 * p.get() * (n * n) as f64);
    let lap = rows.into_iter().map(|r| r.0).collect();
    (GridFunction::from_vec_unchecked(lap), energy)
}

/// `L^q(0,1)` norm of the piecewise-constant embedding of `u`.
pub fn grid_norm(u: &GridFunction, q: f64) -> Result<f64> {
    Ok(u.norm(NormOrder::new(q)?))
}

/// Repeat every cell value `factor` times: the same function on a finer grid.
pub fn refine(u: &GridFunction, factor: usize) -> Result<GridFunction> {
    if factor == 0 {
        return Err(Error::Domain("refinement factor must be >= 1".into()));
    }
    Ok(GridFunction::from_vec_unchecked(
        u.values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, factor))
            .collect(),
    ))
}

/// `L^2(0,1)` inner product `(1/n) sum u_i v_i`.
pub fn pairing(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    check_same_n(u.n(), v.n())?;
    Ok(dot(&u.values, &v.values) / u.n() as f64)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
