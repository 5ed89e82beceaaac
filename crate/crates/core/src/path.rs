//! Dyadic grids on `[0, 1]`, sampled paths and the discrete norms used throughout.
//!
//! Every norm here is a grid version: suprema run over grid pairs and integrals
//! are grid quadratures.

use crate::error::{domain, Error, Result};

/// Largest supported grid level.
pub const MAX_GRID_LEVEL: u32 = 20;

/// The partition `{k / 2^m : 0 ≤ k ≤ 2^m}` of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicGrid {
    level: u32,
}

impl DyadicGrid {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_GRID_LEVEL {
            return domain(format!("grid level {level} exceeds {MAX_GRID_LEVEL}"));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of intervals, `2^m`.
    pub fn intervals(&self) -> usize {
        1 << self.level
    }

    /// Number of points, `2^m + 1`.
    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.intervals() as f64
    }

    /// Exact dyadic time of point `i`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.intervals() as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// A path in `R^dim` observed at the points of a dyadic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    grid: DyadicGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    /// `values` holds `grid.len()` consecutive vectors of length `dim`.
    pub fn new(grid: DyadicGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("path dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::Shape(format!(
                "{} values for {} points of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite path value at flat index {bad}"));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: DyadicGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![0.0; grid.len() * dim] }
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(grid: DyadicGrid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for i in 0..grid.len() {
            let v = f(grid.time(i));
            if v.len() != dim {
                return Err(Error::Shape(format!("closure returned {} values, expected {dim}", v.len())));
            }
            values.extend(v);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `x_t - x_s` for grid indices `s`, `t`.
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        self.at(t).iter().zip(self.at(s)).map(|(b, a)| b - a).collect()
    }

    /// Per-interval increments, `2^m` vectors laid out contiguously.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim;
        (0..self.grid.intervals())
            .flat_map(|i| (0..d).map(move |c| (i, c)))
            .map(|(i, c)| self.values[(i + 1) * d + c] - self.values[i * d + c])
            .collect()
    }

    /// The path minus its starting point.
    pub fn shifted_to_origin(&self) -> Self {
        let x0 = self.at(0).to_vec();
        let values = self
            .values
            .chunks(self.dim)
            .flat_map(|v| v.iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>())
            .collect();
        Self { grid: self.grid, dim: self.dim, values }
    }

    /// Discrete θ-Hölder norm under the Euclidean norm of increments.
    pub fn holder_norm(&self, theta: f64) -> Result<f64> {
        holder_norm(self.grid, theta, |s, t| euclid_dist(self.at(s), self.at(t)))
    }
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Piecewise-linear interpolation through the level-`m` dyadic points of `w`,
/// resampled on `w`'s own grid.
pub fn dyadic_approx(w: &SampledPath, m: u32) -> Result<SampledPath> {
    let n = w.grid.level();
    if m > n {
        return domain(format!("approximation level {m} exceeds path level {n}"));
    }
    let stride = 1usize << (n - m);
    let d = w.dim;
    let mut values = Vec::with_capacity(w.values.len());
    for i in 0..w.len() {
        let left = (i / stride) * stride;
        if left == i {
            values.extend_from_slice(w.at(i));
            continue;
        }
        let right = left + stride;
        let lambda = (i - left) as f64 / stride as f64;
        let (a, b) = (w.at(left), w.at(right));
        values.extend((0..d).map(|c| a[c] + lambda * (b[c] - a[c])));
    }
    Ok(SampledPath { grid: w.grid, dim: d, values })
}

/// Discrete Hölder norm: the supremum over grid pairs `s < t` of `increment(s, t) / (t - s)^θ`.
pub fn holder_norm(grid: DyadicGrid, theta: f64, increment: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return domain(format!("Hölder exponent must lie in (0, 1], got {theta}"));
    }
    let n = grid.len();
    if n < 2 {
        return domain("Hölder norm needs at least two grid points");
    }
    let weights = lag_weights(grid, theta);
    let mut best = 0.0f64;
    for s in 0..n {
        for t in s + 1..n {
            best = best.max(increment(s, t) * weights[t - s]);
        }
    }
    Ok(best)
}

/// `(lag · h)^{-θ}` for every lag in grid steps; index 0 is unused.
pub(crate) fn lag_weights(grid: DyadicGrid, theta: f64) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.len())
        .map(|lag| if lag == 0 { 0.0 } else { (lag as f64 * h).powf(-theta) })
        .collect()
}

/// Discrete p-variation: `(max over increasing grid subsequences of sum |x_{t_{i+1}} - x_{t_i}|^p)^{1/p}`,
/// exact on the grid via an `O(N^2)` dynamic program.
pub fn p_variation_norm(path: &SampledPath, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return domain(format!("p-variation needs p ≥ 1, got {p}"));
    }
    let n = path.len();
    // best[j]: largest sum over subsequences ending at point j
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        let mut b = 0.0f64;
        for i in 0..j {
            b = b.max(best[i] + euclid_dist(path.at(i), path.at(j)).powf(p));
        }
        best[j] = b;
    }
    Ok(best[n - 1].powf(1.0 / p))
}

/// Result of [`besov_norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovNorm {
    pub value: f64,
    /// Set when `mθ ≥ m − 1`: the continuum integral diverges even for smooth paths.
    pub non_integrable: bool,
}

/// Discrete `‖ψ‖_{m,θ} = (∬_{0<s<t<1} |ψ_t − ψ_s|^m / (t − s)^{2 + mθ} ds dt)^{1/m}`.
///
/// Trapezoidal weights over grid pairs `s < t`; pairs closer than one grid step are
/// never visited, which keeps the singular diagonal out of the sum.
pub fn besov_norm(path: &SampledPath, m_exp: f64, theta: f64) -> Result<BesovNorm> {
    if !(m_exp >= 1.0) || !m_exp.is_finite() {
        return domain(format!("Besov exponent m must be ≥ 1, got {m_exp}"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return domain(format!("Besov θ must lie in (0, 1], got {theta}"));
    }
    let grid = path.grid();
    if grid.level() < 3 {
        return domain("Besov quadrature needs grid level ≥ 3");
    }
    let psi = path.shifted_to_origin();
    let n = grid.len();
    let h = grid.spacing();
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let lag_pow: Vec<f64> = (0..n)
        .map(|lag| if lag == 0 { 0.0 } else { (lag as f64 * h).powf(-(2.0 + m_exp * theta)) })
        .collect();
    let mut total = 0.0;
    for s in 0..n {
        let mut row = 0.0;
        for t in s + 1..n {
            row += w(t) * euclid_dist(psi.at(s), psi.at(t)).powf(m_exp) * lag_pow[t - s];
        }
        total += w(s) * row;
    }
    Ok(BesovNorm {
        value: (total * h * h).powf(1.0 / m_exp),
        non_integrable: m_exp * theta >= m_exp - 1.0,
    })
}

/// Hölder-to-Besov ratios `‖ψ‖_{1/p-Hld} / ‖ψ‖_{m,1/p}` over a batch of paths.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFit {
    pub ratios: Vec<f64>,
    /// Fitted constant: the largest ratio.
    pub constant: f64,
    /// Largest over smallest ratio.
    pub spread: f64,
}

/// Largest accepted [`EmbeddingFit::spread`] for a batch to count as having bounded ratios.
pub const EMBEDDING_SPREAD_MAX: f64 = 4.0;

/// Fits the constant in `‖ψ‖_{1/p-Hld} ≤ C ‖ψ‖_{m,1/p}` over `paths`.
pub fn embedding_fit(paths: &[SampledPath], m_exp: f64, p: f64) -> Result<EmbeddingFit> {
    if paths.is_empty() {
        return domain("no paths");
    }
    let ratios = paths
        .iter()
        .map(|x| {
            let b = besov_norm(x, m_exp, 1.0 / p)?.value;
            if !(b > 0.0) {
                return domain("Besov norm vanishes; ratio undefined");
            }
            Ok(x.holder_norm(1.0 / p)? / b)
        })
        .collect::<Result<Vec<f64>>>()?;
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    let spread = constant / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EmbeddingFit { ratios, constant, spread })
}

/// A control of the form `ω(s, t) = c (t − s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlFunction {
    pub coefficient: f64,
}

impl ControlFunction {
    pub fn new(coefficient: f64) -> Result<Self> {
        if !(coefficient >= 0.0) || !coefficient.is_finite() {
            return domain(format!("control coefficient must be finite and ≥ 0, got {coefficient}"));
        }
        Ok(Self { coefficient })
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.coefficient * (t - s).max(0.0)
    }
}

/// Writes the path as CSV with header `t,x_1,...,x_d` at 17 significant digits.
pub fn write_path_csv<W: std::io::Write>(path: &SampledPath, mut out: W) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=path.dim()).map(|c| format!("x_{c}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..path.len() {
        let row: Vec<String> = std::iter::once(path.grid().time(i))
            .chain(path.at(i).iter().copied())
            .map(crate::io::fmt_f64)
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a path written by [`write_path_csv`]; the row count fixes the dyadic level.
pub fn read_path_csv<R: std::io::BufRead>(input: R) -> Result<SampledPath> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty path CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Config(format!("bad path CSV header '{header}'")));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{f}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if fields.len() != dim + 1 {
            return Err(Error::Config(format!("row has {} fields, expected {}", fields.len(), dim + 1)));
        }
        times.push(fields[0]);
        values.extend_from_slice(&fields[1..]);
    }
    let intervals = times.len().saturating_sub(1);
    if intervals == 0 || !intervals.is_power_of_two() {
        return Err(Error::Config(format!("{} rows do not form a dyadic grid", times.len())));
    }
    let grid = DyadicGrid::new(intervals.trailing_zeros())?;
    for (i, t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-12 {
            return Err(Error::Config(format!("row {i} has time {t}, expected {}", grid.time(i))));
        }
    }
    SampledPath::new(grid, dim, values)
}
