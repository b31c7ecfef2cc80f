//! Analytic graphons, their discretizations into weighted and simple graphs,
//! and the geometric diagnostics used by the rate experiments.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::rates::{fit_rate, RateReport};
use crate::operator::{GridFunction, NormOrder};

/// Default number of sample points per axis on a closed cell when testing
/// intersection with the support closure.
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 9;

/// Default midpoint-rule points per axis for cell averages.
pub const DEFAULT_QUAD_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    Constant { c: f64 },
    Product,
    Mean,
    Halfplane { level: f64 },
    Disk { center: f64, radius: f64 },
    Checkerboard { blocks: usize },
    Weierstrass(WeierstrassCurve),
}

/// Truncated Weierstrass function used as a fractal support boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WeierstrassCurve {
    offset: f64,
    amplitude: f64,
    base: f64,
    dim: f64,
    terms: usize,
}

impl WeierstrassCurve {
    fn eval(&self, x: f64) -> f64 {
        let decay = self.base.powf(-(2.0 - self.dim));
        let (mut s, mut norm, mut w, mut f) = (0.0, 0.0, 1.0, 1.0);
        for _ in 0..=self.terms {
            s += w * (2.0 * PI * f * x).cos();
            norm += w;
            w *= decay;
            f *= self.base;
        }
        self.offset + self.amplitude * s / norm
    }
}

/// Regularity class of a catalog kernel, used to pick the applicable rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regularity {
    Constant,
    Lipschitz,
    Indicator,
}

/// Entry of the static kernel catalog.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub params: &'static str,
    pub defaults: &'static [f64],
    pub regularity: Regularity,
    pub tag: &'static str,
    pub exercises: &'static str,
}

/// The kernel catalog, in a fixed order.
pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        kind: "constant",
        params: "[c >= 0]",
        defaults: &[1.0],
        regularity: Regularity::Constant,
        tag: "constant (indicator when c is 0 or 1)",
        exercises: "exactness control: every discretization is exact",
    },
    CatalogEntry {
        kind: "product",
        params: "[] (K = x*y)",
        defaults: &[],
        regularity: Regularity::Lipschitz,
        tag: "Lip(1)",
        exercises: "weighted-graph rate n^-s with s = 1",
    },
    CatalogEntry {
        kind: "mean",
        params: "[] (K = (x+y)/2)",
        defaults: &[],
        regularity: Regularity::Lipschitz,
        tag: "Lip(1)",
        exercises: "weighted-graph rate n^-s with s = 1; BV initial-data rate n^-1/p",
    },
    CatalogEntry {
        kind: "halfplane",
        params: "[level = 1] (K = 1{x+y <= level})",
        defaults: &[1.0],
        regularity: Regularity::Indicator,
        tag: "indicator/rho=1",
        exercises: "simple-graph rate n^-(2-rho)/p with a straight boundary",
    },
    CatalogEntry {
        kind: "disk",
        params: "[center = 0.5, radius = 0.4] (K = 1{(x-c)^2+(y-c)^2 <= r^2})",
        defaults: &[0.5, 0.4],
        regularity: Regularity::Indicator,
        tag: "indicator/rho=1",
        exercises: "simple-graph rate with a smooth curved boundary",
    },
    CatalogEntry {
        kind: "checkerboard",
        params: "[m = 2] (m x m blocks, diagonal blocks on)",
        defaults: &[2.0],
        regularity: Regularity::Indicator,
        tag: "indicator/BV",
        exercises: "BV kernel; block-structured support",
    },
    CatalogEntry {
        kind: "weierstrass",
        params: "[offset = 0.5, amplitude = 0.15, base = 3, D = 1.5, terms = 8]",
        defaults: &[0.5, 0.15, 3.0, 1.5, 8.0],
        regularity: Regularity::Indicator,
        tag: "indicator/rho=D (fractal)",
        exercises: "simple-graph rate with a fractal boundary (reported, not gated)",
    },
];

/// Analytic description of a symmetric, bounded, nonnegative kernel on `[0,1]^2`.
///
/// Serializes as `{ kind = "...", params = [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraphonSpec", into = "RawGraphonSpec")]
pub struct GraphonSpec {
    kind: String,
    params: Vec<f64>,
    kernel: Kernel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGraphonSpec {
    kind: String,
    #[serde(default)]
    params: Vec<f64>,
}

impl TryFrom<RawGraphonSpec> for GraphonSpec {
    type Error = Error;
    fn try_from(raw: RawGraphonSpec) -> Result<Self> {
        GraphonSpec::new(&raw.kind, &raw.params)
    }
}

impl From<GraphonSpec> for RawGraphonSpec {
    fn from(s: GraphonSpec) -> Self {
        RawGraphonSpec {
            kind: s.kind,
            params: s.params,
        }
    }
}

fn param(params: &[f64], idx: usize, default: f64) -> f64 {
    params.get(idx).copied().unwrap_or(default)
}

fn as_count(name: &str, x: f64, min: usize) -> Result<usize> {
    if x.fract() != 0.0 || x < min as f64 || !x.is_finite() {
        return Err(Error::Config(format!(
            "parameter `{name}` must be an integer >= {min}, got {x}"
        )));
    }
    Ok(x as usize)
}

impl GraphonSpec {
    /// Build a catalog kernel. Missing trailing parameters take the catalog
    /// defaults.
    pub fn new(kind: &str, params: &[f64]) -> Result<Self> {
        let entry = CATALOG
            .iter()
            .find(|e| e.kind == kind)
            .ok_or_else(|| Error::Config(format!("unknown kernel kind `{kind}`")))?;
        if params.len() > entry.defaults.len() {
            return Err(Error::Config(format!(
                "kernel `{kind}` takes at most {} parameters, got {}",
                entry.defaults.len(),
                params.len()
            )));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!(
                "kernel `{kind}` has non-finite parameters"
            )));
        }
        let d = entry.defaults;
        let kernel = match kind {
            "constant" => {
                let c = param(params, 0, d[0]);
                if c < 0.0 {
                    return Err(Error::Config(format!(
                        "constant kernel must be >= 0, got {c}"
                    )));
                }
                Kernel::Constant { c }
            }
            "product" => Kernel::Product,
            "mean" => Kernel::Mean,
            "halfplane" => Kernel::Halfplane {
                level: param(params, 0, d[0]),
            },
            "disk" => {
                let center = param(params, 0, d[0]);
                let radius = param(params, 1, d[1]);
                if radius <= 0.0 {
                    return Err(Error::Config(format!(
                        "disk radius must be > 0, got {radius}"
                    )));
                }
                Kernel::Disk { center, radius }
            }
            "checkerboard" => Kernel::Checkerboard {
                blocks: as_count("m", param(params, 0, d[0]), 1)?,
            },
            "weierstrass" => {
                let w = WeierstrassCurve {
                    offset: param(params, 0, d[0]),
                    amplitude: param(params, 1, d[1]),
                    base: as_count("base", param(params, 2, d[2]), 2)? as f64,
                    dim: param(params, 3, d[3]),
                    terms: as_count("terms", param(params, 4, d[4]), 0)?,
                };
                if !(w.dim > 1.0 && w.dim < 2.0) {
                    return Err(Error::Config(format!(
                        "weierstrass dimension must lie in ]1,2[, got {}",
                        w.dim
                    )));
                }
                if w.amplitude < 0.0 {
                    return Err(Error::Config("weierstrass amplitude must be >= 0".into()));
                }
                Kernel::Weierstrass(w)
            }
            _ => unreachable!("catalog kinds are matched above"),
        };
        Ok(Self {
            kind: kind.to_string(),
            params: params.to_vec(),
            kernel,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new("constant", &[c])
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn catalog_entry(&self) -> &'static CatalogEntry {
        CATALOG
            .iter()
            .find(|e| e.kind == self.kind)
            .expect("kind validated on construction")
    }

    /// Declared bounds `[lo, hi]` of the kernel values.
    pub fn range_hint(&self) -> (f64, f64) {
        match self.kernel {
            Kernel::Constant { c } => (c, c),
            _ => (0.0, 1.0),
        }
    }

    /// Whether the kernel only takes the values 0 and 1.
    pub fn is_indicator(&self) -> bool {
        match self.kernel {
            Kernel::Constant { c } => c == 0.0 || c == 1.0,
            Kernel::Product | Kernel::Mean => false,
            _ => true,
        }
    }

    /// Kernel value at `(x, y)` without range checks.
    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match self.kernel {
            Kernel::Constant { c } => c,
            Kernel::Product => x * y,
            Kernel::Mean => 0.5 * (x + y),
            Kernel::Halfplane { level } => ind(x + y <= level),
            Kernel::Disk { center, radius } => {
                let (dx, dy) = (x - center, y - center);
                ind(dx * dx + dy * dy <= radius * radius)
            }
            Kernel::Checkerboard { blocks } => {
                let m = blocks as f64;
                let bx = ((x * m).floor() as usize).min(blocks - 1);
                let by = ((y * m).floor() as usize).min(blocks - 1);
                ind((bx + by).is_multiple_of(2))
            }
            Kernel::Weierstrass(w) => ind(y <= w.eval(x) && x <= w.eval(y)),
        }
    }

    /// Kernel value at `(x, y)`, both required to lie in `[0,1]`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("({x}, {y}) is outside [0,1]^2")));
        }
        Ok(self.value(x, y))
    }
}

impl fmt::Display for GraphonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.kind, self.params)
    }
}

/// Dense symmetric nonnegative `n x n` weight matrix; row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    w: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        if n == 0 || w.len() != n * n {
            return Err(Error::Dimension(format!(
                "kernel matrix needs n >= 1 and n*n entries, got n = {n} with {} entries",
                w.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let x = w[i * n + j];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Domain(format!(
                        "weight ({i},{j}) = {x} is not a finite nonnegative number"
                    )));
                }
                if j > i && x != w[j * n + i] {
                    return Err(Error::Domain(format!(
                        "weights ({i},{j}) = {x} and ({j},{i}) = {} differ",
                        w[j * n + i]
                    )));
                }
            }
        }
        Ok(Self { n, w })
    }

    /// Skips the symmetry and sign checks. Only used to build negative controls.
    pub(crate) fn from_raw_unchecked(n: usize, w: Vec<f64>) -> Self {
        Self { n, w }
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(n, vec![c; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().fold(0.0_f64, |m, &x| m.max(x))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Fill the upper triangle (in parallel over rows) and mirror it.
    fn from_upper(n: usize, entry: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| entry(i, j)).collect())
            .collect();
        let mut w = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (off, &x) in row.iter().enumerate() {
                let j = i + off;
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        Self { n, w }
    }
}

/// Adjacency of a simple graph on `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    n: usize,
    edges: Vec<bool>,
}

impl SupportMask {
    pub fn new(n: usize, edges: Vec<bool>) -> Result<Self> {
        if n == 0 || edges.len() != n * n {
            return Err(Error::Dimension(format!(
                "support mask needs n >= 1 and n*n entries, got n = {n} with {} entries",
                edges.len()
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                if edges[i * n + j] != edges[j * n + i] {
                    return Err(Error::Domain(format!("mask is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, edges })
    }

    /// Mask from an undirected edge list (0-based vertices).
    pub fn from_edges(n: usize, list: &[(usize, usize)]) -> Result<Self> {
        let mut edges = vec![false; n * n];
        for &(i, j) in list {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!(
                    "edge ({i},{j}) out of range for n = {n}"
                )));
            }
            edges[i * n + j] = true;
            edges[j * n + i] = true;
        }
        Self::new(n, edges)
    }

    /// Edges `(i,j)` with `k_ij > threshold`.
    pub fn from_kernel(k: &KernelMatrix, threshold: f64) -> Self {
        Self {
            n: k.n(),
            edges: k.weights().iter().map(|&x| x > threshold).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    /// Block-OR coarsening by 2. Requires an even `n`.
    pub fn coarsen2(&self) -> Result<Self> {
        if !self.n.is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "cannot halve odd resolution {}",
                self.n
            )));
        }
        let m = self.n / 2;
        let mut edges = vec![false; m * m];
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    edges[(i / 2) * m + j / 2] = true;
                }
            }
        }
        Ok(Self { n: m, edges })
    }

    /// The `{0,1}` weighted graph with these edges.
    pub fn to_kernel(&self) -> KernelMatrix {
        KernelMatrix::from_raw_unchecked(
            self.n,
            self.edges
                .iter()
                .map(|&e| if e { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

/// Cell averages `n^2 * integral of K over cell (i,j)`, midpoint rule with
/// `quad_points` nodes per axis.
pub fn quotient_average(spec: &GraphonSpec, n: usize, quad_points: usize) -> Result<KernelMatrix> {
    if n == 0 || quad_points == 0 {
        return Err(Error::Domain("n and quad_points must be >= 1".into()));
    }
    let nodes: Vec<f64> = (0..quad_points)
        .map(|a| (a as f64 + 0.5) / quad_points as f64)
        .collect();
    let weight = 1.0 / (quad_points * quad_points) as f64;
    Ok(KernelMatrix::from_upper(n, |i, j| {
        let mut s = 0.0;
        for &a in &nodes {
            let x = (i as f64 + a) / n as f64;
            for &b in &nodes {
                s += spec.value(x, (j as f64 + b) / n as f64);
            }
        }
        s * weight
    }))
}

/// Pointwise samples `K(i/n, j/n)` for `i, j = 1..n`.
pub fn collocation_sample(spec: &GraphonSpec, n: usize) -> Result<KernelMatrix> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    Ok(KernelMatrix::from_upper(n, |i, j| {
        spec.value((i + 1) as f64 / n as f64, (j + 1) as f64 / n as f64)
    }))
}

/// Sample coordinates of cell `i` at resolution `n`: a uniform grid on the
/// closed cell including both endpoints. Coordinates are formed as an integer
/// numerator over `n (s-1)` so that refined grids reproduce them bit for bit.
fn closed_cell_samples(i: usize, n: usize, s: usize) -> Vec<f64> {
    if s == 1 {
        return vec![(i as f64 + 0.5) / n as f64];
    }
    let den = (n * (s - 1)) as f64;
    (0..s)
        .map(|a| ((i * (s - 1) + a) as f64 / den).min(1.0))
        .collect()
}

/// For every cell, whether any sample is 1 and whether any sample is 0.
fn cell_hits(spec: &GraphonSpec, n: usize, s: usize) -> Vec<(bool, bool)> {
    let coords: Vec<Vec<f64>> = (0..n).map(|i| closed_cell_samples(i, n, s)).collect();
    (0..n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / n, c % n);
            let (mut one, mut zero) = (false, false);
            for &x in &coords[i] {
                for &y in &coords[j] {
                    if spec.value(x, y) > 0.5 {
                        one = true;
                    } else {
                        zero = true;
                    }
                    if one && zero {
                        return (true, true);
                    }
                }
            }
            (one, zero)
        })
        .collect()
}

fn require_indicator(spec: &GraphonSpec) -> Result<()> {
    if spec.is_indicator() {
        Ok(())
    } else {
        Err(Error::NotIndicator {
            kind: spec.kind().to_string(),
        })
    }
}

/// Simple graph whose edges are the cells meeting the support closure,
/// detected on a `samples_per_axis^2` grid over each closed cell.
pub fn simple_graph(spec: &GraphonSpec, n: usize, samples_per_axis: usize) -> Result<SupportMask> {
    require_indicator(spec)?;
    if n == 0 || samples_per_axis == 0 {
        return Err(Error::Domain("n and samples_per_axis must be >= 1".into()));
    }
    let edges = cell_hits(spec, n, samples_per_axis)
        .into_iter()
        .map(|(one, _)| one)
        .collect();
    Ok(SupportMask { n, edges })
}

/// Box-counting estimate of the dimension of the support boundary.
#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub rho: f64,
    /// `(n, N_{1/n})` per level.
    pub counts: Vec<(usize, usize)>,
    pub fit: RateReport,
}

/// Count boundary cells (samples containing both 0 and 1) at each level and
/// fit the slope of `log N` against `log n`.
pub fn boundary_dimension(
    spec: &GraphonSpec,
    levels: &[usize],
    samples_per_axis: usize,
) -> Result<DimensionEstimate> {
    require_indicator(spec)?;
    if levels.len() < 3 {
        return Err(Error::Domain("box counting needs at least 3 levels".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] < 4 {
        return Err(Error::Domain(
            "levels must be strictly increasing and each >= 4".into(),
        ));
    }
    let counts: Vec<(usize, usize)> = levels
        .iter()
        .map(|&n| {
            let c = cell_hits(spec, n, samples_per_axis)
                .into_iter()
                .filter(|&(one, zero)| one && zero)
                .count();
            (n, c)
        })
        .collect();
    if let Some(&(n, _)) = counts.iter().find(|&&(_, c)| c == 0) {
        return Err(Error::UndefinedDimension(format!(
            "no boundary cells at resolution {n} (support is empty or full)"
        )));
    }
    let xs: Vec<f64> = counts.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, c)| c as f64).collect();
    let fit = fit_rate(&xs, &ys)?;
    Ok(DimensionEstimate {
        rho: fit.slope,
        counts,
        fit,
    })
}

/// `L^q([0,1]^2)` distance between the piecewise-constant embeddings of two
/// kernel matrices whose sizes divide one another.
pub fn kernel_distance(a: &KernelMatrix, b: &KernelMatrix, q: f64) -> Result<f64> {
    let q = NormOrder::new(q)?;
    let m = a.n().max(b.n());
    if !m.is_multiple_of(a.n()) || !m.is_multiple_of(b.n()) {
        return Err(Error::Dimension(format!(
            "resolutions {} and {} are not commensurate",
            a.n(),
            b.n()
        )));
    }
    let (fa, fb) = (m / a.n(), m / b.n());
    let diffs: Vec<f64> = (0..m * m)
        .map(|c| {
            let (i, j) = (c / m, c % m);
            a.get(i / fa, j / fa) - b.get(i / fb, j / fb)
        })
        .collect();
    Ok(q.norm(&diffs, m * m))
}

/// First-order `L^q` modulus of smoothness of piecewise-constant data,
/// maximised over grid shifts `z` with `|z| < h`.
pub trait ModulusOfSmoothness {
    fn resolution(&self) -> usize;
    /// Largest overlap norm over nonzero grid shifts with `|k| < limit`.
    fn max_shift_norm(&self, limit: f64, q: NormOrder) -> f64;
}

impl ModulusOfSmoothness for GridFunction {
    fn resolution(&self) -> usize {
        self.n()
    }

    fn max_shift_norm(&self, limit: f64, q: NormOrder) -> f64 {
        let (n, v) = (self.n(), self.values());
        let mut best = 0.0_f64;
        for k in (1..n).take_while(|&k| (k as f64) < limit) {
            let diffs: Vec<f64> = (0..n - k).map(|i| v[i + k] - v[i]).collect();
            best = best.max(q.norm(&diffs, n));
        }
        best
    }
}

impl ModulusOfSmoothness for KernelMatrix {
    fn resolution(&self) -> usize {
        self.n()
    }

    fn max_shift_norm(&self, limit: f64, q: NormOrder) -> f64 {
        let n = self.n() as isize;
        let mut best = 0.0_f64;
        // z and -z give the same value; keep k1 > 0, or k1 = 0 with k2 > 0.
        for k1 in 0..n {
            for k2 in -(n - 1)..n {
                if (k1 == 0 && k2 <= 0) || (((k1 * k1 + k2 * k2) as f64).sqrt() >= limit) {
                    continue;
                }
                let mut diffs = Vec::new();
                for i in 0..n - k1 {
                    for j in 0.max(-k2)..n.min(n - k2) {
                        let a = self.get((i + k1) as usize, (j + k2) as usize);
                        diffs.push(a - self.get(i as usize, j as usize));
                    }
                }
                best = best.max(q.norm(&diffs, (n * n) as usize));
            }
        }
        best
    }
}

/// Modulus of smoothness `omega(F, h)_q` restricted to shifts by whole cells.
pub fn modulus_smoothness<F: ModulusOfSmoothness>(f: &F, h: f64, q: f64) -> Result<f64> {
    let q = NormOrder::new(q)?;
    let n = f.resolution() as f64;
    // Tolerate rounding in h = k/n.
    if !(h > 0.0) || h * n < 1.0 - 1e-12 {
        return Err(Error::Domain(format!(
            "h = {h} is below the cell size 1/{n}; sub-cell shifts are meaningless"
        )));
    }
    Ok(f.max_shift_norm(h * n, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(kind: &str, params: &[f64]) -> GraphonSpec {
        GraphonSpec::new(kind, params).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(spec("constant", &[1.0]).eval(0.3, 0.7).unwrap(), 1.0);
        assert_eq!(spec("product", &[]).eval(0.5, 0.5).unwrap(), 0.25);
        assert_eq!(spec("halfplane", &[]).eval(0.6, 0.6).unwrap(), 0.0);
        assert!(matches!(
            GraphonSpec::new("spiral", &[]),
            Err(Error::Config(_))
        ));
        assert!(spec("mean", &[]).eval(1.2, 0.0).is_err());
    }

    #[test]
    fn catalog_kernels_are_symmetric_and_in_range() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        for e in CATALOG {
            let s = spec(e.kind, e.defaults);
            let (lo, hi) = s.range_hint();
            for &x in &grid {
                for &y in &grid {
                    let v = s.value(x, y);
                    assert_eq!(v, s.value(y, x), "{} asymmetric at ({x},{y})", e.kind);
                    assert!(v >= lo && v <= hi);
                    if s.is_indicator() {
                        assert!(v == 0.0 || v == 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn quotient_average_examples() {
        let c = quotient_average(&spec("constant", &[0.3]), 5, 4).unwrap();
        assert!(c.weights().iter().all(|&x| (x - 0.3).abs() < 1e-15));
        let k = quotient_average(&spec("product", &[]), 2, DEFAULT_QUAD_POINTS).unwrap();
        assert_relative_eq!(k.get(0, 0), 1.0 / 16.0, max_relative = 1e-14);
        assert_relative_eq!(k.get(1, 1), 9.0 / 16.0, max_relative = 1e-14);
        assert_relative_eq!(k.get(0, 1), 3.0 / 16.0, max_relative = 1e-14);
    }

    #[test]
    fn collocation_examples() {
        let c = collocation_sample(&spec("constant", &[2.0]), 4).unwrap();
        assert!(c.weights().iter().all(|&x| x == 2.0));
        let k = collocation_sample(&spec("product", &[]), 2).unwrap();
        assert_eq!(k.weights(), &[0.25, 0.5, 0.5, 1.0]);
        let m = collocation_sample(&spec("mean", &[]), 2).unwrap();
        assert_eq!(m.get(0, 1), 0.75);
    }

    #[test]
    fn simple_graph_examples() {
        let full = simple_graph(&spec("constant", &[1.0]), 3, 9).unwrap();
        assert_eq!(full.edge_count(), 9);
        let empty = simple_graph(&spec("constant", &[0.0]), 2, 9).unwrap();
        assert!(empty.is_empty());
        // The closed cell [1/2,1]^2 touches the line x + y = 1 at its corner.
        let hp = simple_graph(&spec("halfplane", &[]), 2, 9).unwrap();
        assert!(hp.get(0, 0) && hp.get(0, 1) && hp.get(1, 0) && hp.get(1, 1));
        let hp4 = simple_graph(&spec("halfplane", &[]), 4, 9).unwrap();
        assert!(!hp4.get(3, 3) && !hp4.get(2, 3) && hp4.get(1, 3));
        assert!(matches!(
            simple_graph(&spec("mean", &[]), 2, 9),
            Err(Error::NotIndicator { .. })
        ));
    }

    #[test]
    fn simple_graph_is_monotone_under_refinement() {
        for e in CATALOG
            .iter()
            .filter(|e| e.regularity == Regularity::Indicator)
        {
            let s = spec(e.kind, e.defaults);
            for n in [4, 8, 16, 32] {
                let coarse = simple_graph(&s, n, DEFAULT_SAMPLES_PER_AXIS).unwrap();
                let fine = simple_graph(&s, 2 * n, DEFAULT_SAMPLES_PER_AXIS)
                    .unwrap()
                    .coarsen2()
                    .unwrap();
                for i in 0..n {
                    for j in 0..n {
                        assert!(
                            !coarse.get(i, j) || fine.get(i, j),
                            "{} n={n} ({i},{j})",
                            e.kind
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_dimension_of_smooth_curves() {
        for s in [spec("halfplane", &[]), spec("disk", &[0.5, 0.4])] {
            let est = boundary_dimension(&s, &[16, 32, 64, 128], DEFAULT_SAMPLES_PER_AXIS).unwrap();
            assert!((0.9..=1.1).contains(&est.rho), "{s}: rho = {}", est.rho);
        }
        assert!(matches!(
            boundary_dimension(&spec("constant", &[1.0]), &[8, 16, 32], 9),
            Err(Error::UndefinedDimension(_))
        ));
        assert!(boundary_dimension(&spec("halfplane", &[]), &[8, 16], 9).is_err());
        assert!(boundary_dimension(&spec("halfplane", &[]), &[16, 8, 32], 9).is_err());
    }

    #[test]
    fn kernel_distance_examples() {
        let a = quotient_average(&spec("mean", &[]), 4, 4).unwrap();
        assert_eq!(kernel_distance(&a, &a, 2.0).unwrap(), 0.0);
        let ones = KernelMatrix::constant(2, 1.0).unwrap();
        let zeros = KernelMatrix::constant(2, 0.0).unwrap();
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_relative_eq!(
                kernel_distance(&ones, &zeros, q).unwrap(),
                1.0,
                max_relative = 1e-14
            );
        }
        let b = KernelMatrix::constant(3, 1.0).unwrap();
        assert!(matches!(
            kernel_distance(&a, &b, 1.0),
            Err(Error::Dimension(_))
        ));
        // Embedding is resolution independent.
        let fine = KernelMatrix::constant(8, 1.0).unwrap();
        assert_eq!(kernel_distance(&ones, &fine, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn modulus_examples() {
        let c = KernelMatrix::constant(8, 0.4).unwrap();
        assert_eq!(modulus_smoothness(&c, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(modulus_smoothness(&c, 0.5, f64::INFINITY).unwrap(), 0.0);

        let n = 128;
        let g = GridFunction::new((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()).unwrap();
        let w = modulus_smoothness(&g, 1.0 / 8.0, 1.0).unwrap();
        assert!(
            (w - (1.0 / 8.0) * (1.0 - 1.0 / 16.0)).abs() <= 2.0 / n as f64,
            "w = {w}"
        );

        assert!(matches!(
            modulus_smoothness(&g, 1.0 / 256.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    /// Direct summation over every grid shift, written independently of the
    /// trait implementation.
    fn brute_modulus_2d(k: &KernelMatrix, h: f64, q: f64) -> f64 {
        let n = k.n() as i64;
        let mut best = 0.0_f64;
        for k1 in -(n - 1)..n {
            for k2 in -(n - 1)..n {
                let z = ((k1 * k1 + k2 * k2) as f64).sqrt() / n as f64;
                if (k1, k2) == (0, 0) || z >= h {
                    continue;
                }
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (i + k1, j + k2);
                        if (0..n).contains(&a) && (0..n).contains(&b) {
                            let d = k.get(a as usize, b as usize) - k.get(i as usize, j as usize);
                            s += d.abs().powf(q) / (n * n) as f64;
                        }
                    }
                }
                best = best.max(s.powf(1.0 / q));
            }
        }
        best
    }

    #[test]
    fn modulus_of_checkerboard_matches_brute_force() {
        let k = quotient_average(&spec("checkerboard", &[2.0]), 8, 2).unwrap();
        let fast = modulus_smoothness(&k, 0.5, 1.0).unwrap();
        let brute = brute_modulus_2d(&k, 0.5, 1.0);
        assert!(fast > 0.0);
        assert_relative_eq!(fast, brute, max_relative = 1e-12);
        assert_relative_eq!(
            modulus_smoothness(&k, 0.3, 2.0).unwrap(),
            brute_modulus_2d(&k, 0.3, 2.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn spec_serde_roundtrip() {
        let s = spec("disk", &[0.5, 0.3]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"kind":"disk","params":[0.5,0.3]}"#);
        let back: GraphonSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GraphonSpec>(r#"{"kind":"nope"}"#).is_err());
    }
}
