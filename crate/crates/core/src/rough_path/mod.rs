//! Level-2 rough paths on dyadic grids, their extension to higher levels, and the
//! Monte Carlo diagnostic for convergence of dyadic lifts.
//!
//! A [`Level2RoughPath`] stores one atom per finest grid interval: the increment
//! `X¹` and the second level `X²` over that interval. Values over longer grid
//! intervals are produced by Chen-composing consecutive atoms along a balanced
//! binary split of the interval.

mod brownian;
mod diagnostics;
mod tower;

pub use brownian::{psd_cholesky, sample_rng, BrownianSampler};
pub use diagnostics::{a1_diagnostic, holder_distance, A1Distances};
pub use tower::{lift_piecewise_linear, lyons_extend, partition_functional, removal_increment, Atom, RoughPathTower};

use crate::error::{domain, Error, Result};
use crate::path::{lag_weights, ControlFunction, DyadicGrid, SampledPath};
use crate::tensor::{slice_norm, NormKind};

/// A level-2 rough path over `R^d` (or over `L(R^e)` when `matrix_dim` is set, with `d = e^2`).
#[derive(Clone, Debug, PartialEq)]
pub struct Level2RoughPath {
    grid: DyadicGrid,
    dim: usize,
    matrix_dim: Option<usize>,
    atoms1: Vec<f64>,
    atoms2: Vec<f64>,
}

impl Level2RoughPath {
    /// Rough path from explicit per-interval levels.
    pub fn from_atoms(grid: DyadicGrid, dim: usize, atoms1: Vec<f64>, atoms2: Vec<f64>) -> Result<Self> {
        let n = grid.intervals();
        if dim == 0 || atoms1.len() != n * dim || atoms2.len() != n * dim * dim {
            return Err(Error::Shape(format!(
                "need {n} atoms of sizes {dim} and {}, got {} and {} values",
                dim * dim,
                atoms1.len(),
                atoms2.len()
            )));
        }
        Ok(Self { grid, dim, matrix_dim: None, atoms1, atoms2 })
    }

    /// Exact lift of the piecewise-linear interpolation of `x`: each atom is
    /// `(Δ, Δ⊗Δ / 2)`.
    pub fn lift(x: &SampledPath) -> Self {
        let d = x.dim();
        let atoms1 = x.increments();
        let mut atoms2 = vec![0.0; atoms1.len() * d];
        for (delta, out) in atoms1.chunks(d).zip(atoms2.chunks_mut(d * d)) {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = 0.5 * delta[i] * delta[j];
                }
            }
        }
        Self { grid: x.grid(), dim: d, matrix_dim: None, atoms1, atoms2 }
    }

    /// Marks the path as matrix-valued over `L(R^e)`.
    pub fn with_matrix_dim(mut self, e: usize) -> Result<Self> {
        if e * e != self.dim {
            return Err(Error::Shape(format!("dimension {} is not {e}^2", self.dim)));
        }
        self.matrix_dim = Some(e);
        Ok(self)
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix_dim(&self) -> Option<usize> {
        self.matrix_dim
    }

    pub fn atom1(&self, i: usize) -> &[f64] {
        &self.atoms1[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atom2(&self, i: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.atoms2[i * d2..(i + 1) * d2]
    }

    /// `(X¹_{s,t}, X²_{s,t})` for grid indices `s < t`.
    pub fn increment(&self, s: usize, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if s >= t || t > self.grid.intervals() {
            return domain(format!("need grid indices s < t ≤ {}, got ({s}, {t})", self.grid.intervals()));
        }
        Ok(self.compose(s, t))
    }

    fn compose(&self, lo: usize, hi: usize) -> (Vec<f64>, Vec<f64>) {
        if hi - lo == 1 {
            return (self.atom1(lo).to_vec(), self.atom2(lo).to_vec());
        }
        let mid = lo + (hi - lo) / 2;
        let (a1, a2) = self.compose(lo, mid);
        let (b1, b2) = self.compose(mid, hi);
        chen2(&a1, &a2, &b1, &b2)
    }

    /// Calls `visit(s, t, X¹_{s,t}, X²_{s,t})` for every grid pair `s < t`, accumulating
    /// each row by appending one atom at a time.
    pub fn for_each_pair(&self, mut visit: impl FnMut(usize, usize, &[f64], &[f64])) {
        let d = self.dim;
        let n = self.grid.intervals();
        let mut x1 = vec![0.0; d];
        let mut x2 = vec![0.0; d * d];
        for s in 0..n {
            x1.iter_mut().for_each(|v| *v = 0.0);
            x2.iter_mut().for_each(|v| *v = 0.0);
            for t in s + 1..=n {
                append_atom(&mut x1, &mut x2, self.atom1(t - 1), self.atom2(t - 1));
                visit(s, t, &x1, &x2);
            }
        }
    }

    /// Discrete `(‖X¹‖_{1/p-Hld}, ‖X²‖_{2/p-Hld})` under the given coefficient norm.
    pub fn holder_norms(&self, p: f64, norm: NormKind) -> Result<(f64, f64)> {
        if !(p >= 1.0) {
            return domain(format!("p must be ≥ 1, got {p}"));
        }
        let w1 = lag_weights(self.grid, 1.0 / p);
        let w2 = lag_weights(self.grid, (2.0 / p).min(1.0));
        let (mut h1, mut h2) = (0.0f64, 0.0f64);
        self.for_each_pair(|s, t, x1, x2| {
            h1 = h1.max(slice_norm(x1, norm) * w1[t - s]);
            h2 = h2.max(slice_norm(x2, norm) * w2[t - s]);
        });
        Ok((h1, h2))
    }

    /// The first-level path started at 0.
    pub fn level1_path(&self) -> SampledPath {
        let d = self.dim;
        let mut values = vec![0.0; self.grid.len() * d];
        for i in 0..self.grid.intervals() {
            for c in 0..d {
                values[(i + 1) * d + c] = values[i * d + c] + self.atoms1[i * d + c];
            }
        }
        SampledPath::new(self.grid, d, values).expect("finite atoms")
    }
}

/// The control `ω(s, t) = c (t − s)` with `c = ‖X¹‖^p_{1/p-Hld} + ‖X²‖^{p/2}_{2/p-Hld}`
/// (coefficient l1 norms), so that `|X^i_{s,t}| ≤ ω(s, t)^{i/p}` on every grid pair.
pub fn control_from_rough_path(x: &Level2RoughPath, p: f64) -> Result<ControlFunction> {
    let (h1, h2) = x.holder_norms(p, NormKind::CoeffL1)?;
    ControlFunction::new(h1.powf(p) + h2.powf(p / 2.0))
}

/// Adds one atom on the right: `X² += A² + X¹ ⊗ A¹`, `X¹ += A¹`.
pub(crate) fn append_atom(x1: &mut [f64], x2: &mut [f64], a1: &[f64], a2: &[f64]) {
    let d = x1.len();
    for i in 0..d {
        for j in 0..d {
            x2[i * d + j] += a2[i * d + j] + x1[i] * a1[j];
        }
    }
    for (x, a) in x1.iter_mut().zip(a1) {
        *x += a;
    }
}

/// Chen composition truncated at level 2, summed in the same order as the full
/// tensor product so that towers reproduce these values bit for bit.
pub(crate) fn chen2(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = a1.len();
    let mut x1 = b1.to_vec();
    for (x, a) in x1.iter_mut().zip(a1) {
        *x += a;
    }
    let mut x2 = b2.to_vec();
    for i in 0..d {
        if a1[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            x2[i * d + j] += a1[i] * b1[j];
        }
    }
    for (x, a) in x2.iter_mut().zip(a2) {
        *x += a;
    }
    (x1, x2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: usize, level: u32, idx: u64) -> SampledPath {
        BrownianSampler::standard(d, level, 12, 0).unwrap().sample(idx)
    }

    #[test]
    fn chen_consistency_on_triples() {
        let x = Level2RoughPath::lift(&sample(3, 6, 0));
        for &(s, u, t) in &[(0, 1, 2), (0, 17, 64), (5, 33, 40), (10, 11, 63)] {
            let (su1, su2) = x.increment(s, u).unwrap();
            let (ut1, ut2) = x.increment(u, t).unwrap();
            let (st1, st2) = x.increment(s, t).unwrap();
            let d = 3;
            for i in 0..d {
                assert!((st1[i] - su1[i] - ut1[i]).abs() < 1e-12);
                for j in 0..d {
                    let want = su2[i * d + j] + ut2[i * d + j] + su1[i] * ut1[j];
                    assert!((st2[i * d + j] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn piecewise_linear_lift_is_geometric() {
        let x = Level2RoughPath::lift(&sample(2, 6, 4));
        let d = 2;
        x.for_each_pair(|_, _, x1, x2| {
            for i in 0..d {
                for j in 0..d {
                    let sym = 0.5 * (x2[i * d + j] + x2[j * d + i]);
                    assert!((sym - 0.5 * x1[i] * x1[j]).abs() < 1e-10);
                }
            }
        });
    }

    #[test]
    fn pair_scan_matches_increment() {
        let x = Level2RoughPath::lift(&sample(2, 4, 1));
        x.for_each_pair(|s, t, x1, x2| {
            let (y1, y2) = x.increment(s, t).unwrap();
            assert!(x1.iter().zip(&y1).all(|(a, b)| (a - b).abs() < 1e-13));
            assert!(x2.iter().zip(&y2).all(|(a, b)| (a - b).abs() < 1e-13));
        });
        assert!(x.increment(3, 3).is_err());
        assert!(x.increment(0, 17).is_err());
    }

    #[test]
    fn scalar_level2_is_half_square() {
        // d = 1: ‖W²‖_{2/p} = ½ ‖W¹‖²_{1/p}
        let x = Level2RoughPath::lift(&sample(1, 7, 2));
        let (h1, h2) = x.holder_norms(2.5, NormKind::CoeffL1).unwrap();
        assert!((h2 - 0.5 * h1 * h1).abs() < 1e-12 * h2);
    }

    #[test]
    fn control_dominates_increments() {
        let p = 2.5;
        let grid = DyadicGrid::new(5).unwrap();
        let zero = Level2RoughPath::lift(&SampledPath::zeros(grid, 2));
        assert_eq!(control_from_rough_path(&zero, p).unwrap().coefficient, 0.0);

        let v = [0.3, -0.4];
        let line = Level2RoughPath::lift(&SampledPath::from_fn(grid, 2, |t| vec![v[0] * t, v[1] * t]).unwrap());
        let c = control_from_rough_path(&line, p).unwrap().coefficient;
        // sup of |v|(t-s)^{1-1/p} and |v⊗v|/2 (t-s)^{2-2/p} is reached at t-s = 1
        let l1 = 0.7;
        let want = f64::powf(l1, p) + f64::powf(0.5 * l1 * l1, p / 2.0);
        assert!((c - want).abs() < 1e-12 * want, "{c} vs {want}");

        let x = Level2RoughPath::lift(&sample(2, 6, 9));
        let w = control_from_rough_path(&x, p).unwrap();
        let g = x.grid();
        x.for_each_pair(|s, t, x1, x2| {
            let om = w.eval(g.time(s), g.time(t));
            assert!(slice_norm(x1, NormKind::CoeffL1) <= om.powf(1.0 / p) * (1.0 + 1e-12));
            assert!(slice_norm(x2, NormKind::CoeffL1) <= om.powf(2.0 / p) * (1.0 + 1e-12));
        });
    }

    #[test]
    fn level1_path_round_trips() {
        let w = sample(2, 5, 3);
        let x = Level2RoughPath::lift(&w);
        let back = x.level1_path();
        assert!(back.values().iter().zip(w.values()).all(|(a, b)| (a - b).abs() < 1e-14));
    }
}
