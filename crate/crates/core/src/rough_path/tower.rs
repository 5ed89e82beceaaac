use nalgebra::DMatrix;

use super::{Level2RoughPath, SampledPath};
use crate::error::{domain, Error, Result};
use crate::path::DyadicGrid;
use crate::tensor::{check_budget, chen_mul_to_depth, lie_exp, reverse_contract, DEFAULT_ELEMENT_BUDGET, segment_exp, tensor_product, MatrixTensor, TruncatedTensor};

/// Data attached to one finest grid interval of a tower.
#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// Explicit low levels; every level above the tensor's depth is zero.
    Levels(TruncatedTensor),
    /// A piecewise-linear sub-path given by consecutive increments; its tower entry
    /// is the exact signature at any level.
    Polyline(Vec<f64>),
    /// Consecutive pieces given by their log-signatures truncated at level 2: each chunk of
    /// `d + d²` numbers holds a level-1 increment followed by a level-2 area, and the piece's
    /// tower entry is the tensor exponential of that Lie element.
    LogPieces(Vec<f64>),
}

/// A rough path extended to levels `1..=depth`.
///
/// Only per-interval atoms are stored. Values over `(s, t)` are materialised on demand
/// by Chen products along a balanced binary split of `[s, t)`.
#[derive(Clone, Debug)]
pub struct RoughPathTower {
    grid: DyadicGrid,
    dim: usize,
    matrix_dim: Option<usize>,
    depth: usize,
    atoms: Vec<Atom>,
}

impl RoughPathTower {
    pub fn new(grid: DyadicGrid, dim: usize, depth: usize, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.len() != grid.intervals() {
            return Err(Error::Shape(format!("{} atoms for {} intervals", atoms.len(), grid.intervals())));
        }
        for atom in &atoms {
            match atom {
                Atom::Levels(t) if t.dim() != dim => {
                    return Err(Error::Shape(format!("atom dimension {} differs from {dim}", t.dim())))
                }
                Atom::Polyline(incs) if incs.is_empty() || incs.len() % dim != 0 => {
                    return Err(Error::Shape("polyline atom must hold whole increments".into()))
                }
                Atom::LogPieces(v) if v.is_empty() || v.len() % (dim + dim * dim) != 0 => {
                    return Err(Error::Shape("log-signature atom must hold whole pieces".into()))
                }
                _ => {}
            }
        }
        Ok(Self { grid, dim, matrix_dim: None, depth, atoms })
    }

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

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn matrix_dim(&self) -> Option<usize> {
        self.matrix_dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        if s >= t || t > self.grid.intervals() {
            return domain(format!("need grid indices s < t ≤ {}, got ({s}, {t})", self.grid.intervals()));
        }
        Ok(())
    }

    fn atom_tensor(&self, i: usize) -> Result<TruncatedTensor> {
        match &self.atoms[i] {
            Atom::Levels(t) => Ok(t.clone()),
            Atom::Polyline(incs) => {
                let mut chunks = incs.chunks(self.dim);
                let mut acc = segment_exp(chunks.next().expect("nonempty"), self.depth)?;
                for inc in chunks {
                    acc = chen_mul_to_depth(&acc, &segment_exp(inc, self.depth)?, self.depth);
                }
                Ok(acc)
            }
            Atom::LogPieces(v) => {
                let d = self.dim;
                let mut acc = TruncatedTensor::identity(d, self.depth)?;
                for piece in v.chunks(d + d * d) {
                    acc = chen_mul_to_depth(&acc, &lie_exp(&piece[..d], &piece[d..], self.depth)?, self.depth);
                }
                Ok(acc)
            }
        }
    }

    fn product(&self, lo: usize, hi: usize) -> Result<TruncatedTensor> {
        if hi - lo == 1 {
            return self.atom_tensor(lo);
        }
        let mid = lo + (hi - lo) / 2;
        Ok(chen_mul_to_depth(&self.product(lo, mid)?, &self.product(mid, hi)?, self.depth))
    }

    /// Full truncated tensor over the grid interval `(s, t)`.
    pub fn value(&self, s: usize, t: usize) -> Result<TruncatedTensor> {
        self.check_pair(s, t)?;
        check_budget(self.dim, self.depth, DEFAULT_ELEMENT_BUDGET)?;
        let v = self.product(s, t)?;
        if v.depth() == self.depth {
            Ok(v)
        } else {
            v.truncate_to(self.depth)
        }
    }

    /// Level `k` over `(s, t)`; `(s, s)` gives zero for `k ≥ 1`.
    pub fn level(&self, s: usize, t: usize, k: usize) -> Result<Vec<f64>> {
        if k > self.depth {
            return domain(format!("level {k} exceeds level cap {}", self.depth));
        }
        if s == t {
            let mut z = vec![0.0; self.dim.pow(k as u32)];
            if k == 0 {
                z[0] = 1.0;
            }
            return Ok(z);
        }
        Ok(self.value(s, t)?.level(k).to_vec())
    }

    /// Matrix-valued value over `(s, t)`.
    pub fn matrix_value(&self, s: usize, t: usize) -> Result<MatrixTensor> {
        let e = self.matrix_dim.ok_or_else(|| Error::Domain("tower is not matrix-valued".into()))?;
        MatrixTensor::from_tensor(e, self.value(s, t)?)
    }

    fn atom_contracted(&self, i: usize, e: usize, depth: usize) -> Vec<DMatrix<f64>> {
        let mut out = vec![DMatrix::zeros(e, e); depth + 1];
        out[0] = DMatrix::identity(e, e);
        match &self.atoms[i] {
            Atom::Levels(t) => {
                for (k, slot) in out.iter_mut().enumerate().take(t.depth().min(depth) + 1).skip(1) {
                    *slot = reverse_contract(t.level(k), e, k);
                }
                out
            }
            Atom::Polyline(incs) => {
                let mut acc = out;
                for inc in incs.chunks(self.dim) {
                    let delta = DMatrix::from_row_slice(e, e, inc);
                    let mut seg = vec![DMatrix::identity(e, e); depth + 1];
                    for k in 1..=depth {
                        seg[k] = &delta * &seg[k - 1] / k as f64;
                    }
                    acc = contracted_mul(&acc, &seg);
                }
                acc
            }
            Atom::LogPieces(v) => {
                let mut acc = out;
                for piece in v.chunks(self.dim + self.dim * self.dim) {
                    let l1 = DMatrix::from_row_slice(e, e, &piece[..self.dim]);
                    let l2 = reverse_contract(&piece[self.dim..], e, 2);
                    acc = contracted_mul(&acc, &contracted_lie_exp(&l1, &l2, depth));
                }
                acc
            }
        }
    }

    fn contracted_product(&self, lo: usize, hi: usize, e: usize, depth: usize) -> Vec<DMatrix<f64>> {
        if hi - lo == 1 {
            return self.atom_contracted(lo, e, depth);
        }
        let mid = lo + (hi - lo) / 2;
        contracted_mul(
            &self.contracted_product(lo, mid, e, depth),
            &self.contracted_product(mid, hi, e, depth),
        )
    }

    /// `reversal(level k over (s, t))` for `k = 0..=depth`, computed without
    /// materialising any tensor: the reversal is an anti-homomorphism, so the
    /// contraction of a Chen product is `sum_j T(Y_{k-j}) T(X_j)`.
    pub fn reversed_levels(&self, s: usize, t: usize, depth: usize) -> Result<Vec<DMatrix<f64>>> {
        let e = self.matrix_dim.ok_or_else(|| Error::Domain("tower is not matrix-valued".into()))?;
        self.check_pair(s, t)?;
        if depth > self.depth {
            return domain(format!("level {depth} exceeds level cap {}", self.depth));
        }
        Ok(self.contracted_product(s, t, e, depth))
    }
}

/// Contracted Chen product: `x` over the earlier interval, `y` over the later one.
fn contracted_mul(x: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let depth = x.len() - 1;
    (0..=depth)
        .map(|k| {
            let mut acc = &y[k] * &x[0];
            for j in 1..=k {
                acc += &y[k - j] * &x[j];
            }
            acc
        })
        .collect()
}

/// Reversal contraction of `exp(ℓ₁ + ℓ₂)` level by level, from the contracted parts
/// `T(ℓ₁)`, `T(ℓ₂)`.
fn contracted_lie_exp(l1: &DMatrix<f64>, l2: &DMatrix<f64>, depth: usize) -> Vec<DMatrix<f64>> {
    let e = l1.nrows();
    let unit = |_| DMatrix::zeros(e, e);
    let mut acc: Vec<DMatrix<f64>> = (0..=depth).map(unit).collect();
    acc[0] = DMatrix::identity(e, e);
    for n in (1..=depth).rev() {
        let inv = 1.0 / n as f64;
        let mut next: Vec<DMatrix<f64>> = (0..=depth).map(unit).collect();
        next[0] = DMatrix::identity(e, e);
        for k in 1..=depth {
            let mut v = &acc[k - 1] * l1;
            if k >= 2 {
                v += &acc[k - 2] * l2;
            }
            next[k] = v * inv;
        }
        acc = next;
    }
    acc
}

/// Exact signature tower of the piecewise-linear interpolation of `x`.
pub fn lift_piecewise_linear(x: &SampledPath, depth: usize) -> Result<RoughPathTower> {
    let d = x.dim();
    // surface budget problems at construction
    TruncatedTensor::zeros(d, depth)?;
    let atoms = x.increments().chunks(d).map(|c| Atom::Polyline(c.to_vec())).collect();
    RoughPathTower::new(x.grid(), d, depth, atoms)
}

/// Extends a level-2 rough path to `depth ≥ 3`: each atom keeps its levels 1–2 and
/// has zero higher levels, and longer intervals are Chen products of atoms.
pub fn lyons_extend(x: &Level2RoughPath, depth: usize) -> Result<RoughPathTower> {
    if depth < 3 {
        return domain(format!("extension needs depth ≥ 3, got {depth}"));
    }
    let d = x.dim();
    let atoms = (0..x.grid().intervals())
        .map(|i| {
            TruncatedTensor::from_levels(d, vec![vec![1.0], x.atom1(i).to_vec(), x.atom2(i).to_vec()]).map(Atom::Levels)
        })
        .collect::<Result<Vec<_>>>()?;
    let tower = RoughPathTower::new(x.grid(), d, depth, atoms)?;
    match x.matrix_dim() {
        Some(e) => tower.with_matrix_dim(e),
        None => Ok(tower),
    }
}

fn check_partition(tower: &RoughPathTower, partition: &[usize], k: usize) -> Result<()> {
    if partition.len() < 2 {
        return domain("partition needs at least its two endpoints");
    }
    if partition.windows(2).any(|w| w[0] >= w[1]) {
        return domain("partition points must be strictly increasing");
    }
    if *partition.last().unwrap() > tower.grid().intervals() {
        return domain("partition point beyond the grid");
    }
    if k < 3 || k > tower.depth() {
        return domain(format!("partition functional needs 3 ≤ k ≤ {}, got {k}", tower.depth()));
    }
    Ok(())
}

/// `M^k(P) = sum_{j=1}^{k-1} sum_{i=1}^{L} M^j_{s,t_{i-1}} ⊗ M^{k-j}_{t_{i-1},t_i}` for the
/// partition `P = {s = t_0 < ... < t_L = t}` of grid indices.
pub fn partition_functional(tower: &RoughPathTower, partition: &[usize], k: usize) -> Result<Vec<f64>> {
    check_partition(tower, partition, k)?;
    let s = partition[0];
    let mut out = vec![0.0; tower.dim().pow(k as u32)];
    for w in partition.windows(2).skip(1) {
        let (prev, next) = (w[0], w[1]);
        let head = tower.value(s, prev)?;
        let piece = tower.value(prev, next)?;
        for j in 1..k {
            let prod = tensor_product(head.level(j), piece.level(k - j));
            out.iter_mut().zip(prod).for_each(|(o, v)| *o += v);
        }
    }
    Ok(out)
}

/// `sum_{j=1}^{k-1} M^j_{a,b} ⊗ M^{k-j}_{b,c}`: the change of the partition functional
/// when the point `b` between neighbours `a` and `c` is removed.
pub fn removal_increment(tower: &RoughPathTower, a: usize, b: usize, c: usize, k: usize) -> Result<Vec<f64>> {
    check_partition(tower, &[a, b, c], k)?;
    let left = tower.value(a, b)?;
    let right = tower.value(b, c)?;
    let mut out = vec![0.0; tower.dim().pow(k as u32)];
    for j in 1..k {
        let prod = tensor_product(left.level(j), right.level(k - j));
        out.iter_mut().zip(prod).for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough_path::BrownianSampler;
    use crate::tensor::{reversal, slice_norm, NormKind};

    fn brownian(d: usize, level: u32, idx: u64) -> SampledPath {
        BrownianSampler::standard(d, level, 77, 0).unwrap().sample(idx)
    }

    #[test]
    fn single_segment_tower_is_segment_exp() {
        let g = DyadicGrid::new(0).unwrap();
        let x = SampledPath::new(g, 2, vec![0.0, 0.0, 0.7, -0.2]).unwrap();
        let tower = lift_piecewise_linear(&x, 5).unwrap();
        assert_eq!(tower.value(0, 1).unwrap(), segment_exp(&[0.7, -0.2], 5).unwrap());
    }

    #[test]
    fn scalar_tower_closed_form() {
        let x = brownian(1, 6, 0);
        let tower = lift_piecewise_linear(&x, 10).unwrap();
        for &(s, t) in &[(0, 64), (3, 9), (20, 21)] {
            let v = tower.value(s, t).unwrap();
            let inc = x.at(t)[0] - x.at(s)[0];
            let mut fact = 1.0;
            for k in 0..=10 {
                if k > 0 {
                    fact *= k as f64;
                }
                assert!((v.level(k)[0] - inc.powi(k as i32) / fact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_segment_level_two() {
        let g = DyadicGrid::new(1).unwrap();
        let x = SampledPath::new(g, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let v = lift_piecewise_linear(&x, 2).unwrap().value(0, 2).unwrap();
        // ½ e1⊗e1 + e1⊗e2 + ½ e2⊗e2
        assert_eq!(v.level(2), &[0.5, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn extension_agrees_with_level2_path() {
        let x = Level2RoughPath::lift(&brownian(2, 5, 1));
        let tower = lyons_extend(&x, 4).unwrap();
        for &(s, t) in &[(0, 32), (7, 19), (4, 5)] {
            let v = tower.value(s, t).unwrap();
            let (x1, x2) = x.increment(s, t).unwrap();
            assert_eq!(v.level(1), &x1[..]);
            assert_eq!(v.level(2), &x2[..]);
        }
        assert!(lyons_extend(&x, 2).is_err());
    }

    #[test]
    fn zero_path_extends_to_zero() {
        let g = DyadicGrid::new(4).unwrap();
        let x = Level2RoughPath::from_atoms(g, 2, vec![0.0; 32], vec![0.0; 64]).unwrap();
        let v = lyons_extend(&x, 5).unwrap().value(0, 16).unwrap();
        for k in 1..=5 {
            assert!(v.level(k).iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn extension_converges_to_signature_under_refinement() {
        // a fixed 4-segment path, resampled on finer dyadic grids
        let coarse = SampledPath::new(
            DyadicGrid::new(2).unwrap(),
            2,
            vec![0.0, 0.0, 0.8, 0.3, 0.5, 1.1, -0.2, 0.9, 0.4, 0.2],
        )
        .unwrap();
        let exact = lift_piecewise_linear(&coarse, 3).unwrap().value(0, 4).unwrap();
        let errs: Vec<f64> = (3..=8)
            .map(|level| {
                let fine = refine(&coarse, level);
                let v = lyons_extend(&Level2RoughPath::lift(&fine), 3).unwrap().value(0, fine.grid().intervals()).unwrap();
                // the missing mass is exactly sum over atoms of Δ^{⊗3}/6
                let mut missing = vec![0.0; 8];
                for inc in fine.increments().chunks(2) {
                    let t3 = segment_exp(inc, 3).unwrap();
                    missing.iter_mut().zip(t3.level(3)).for_each(|(m, v)| *m += v);
                }
                for ((got, want), miss) in v.level(3).iter().zip(exact.level(3)).zip(&missing) {
                    assert!((want - got - miss).abs() < 1e-13);
                }
                slice_norm(&missing, NormKind::CoeffL1)
            })
            .collect();
        // halving the mesh divides the error by four on a piecewise-smooth path
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    fn refine(coarse: &SampledPath, level: u32) -> SampledPath {
        let padded = SampledPath::from_fn(DyadicGrid::new(level).unwrap(), coarse.dim(), |t| {
            let n = coarse.grid().intervals();
            let pos = t * n as f64;
            let i = (pos.floor() as usize).min(n - 1);
            let lam = pos - i as f64;
            coarse.at(i).iter().zip(coarse.at(i + 1)).map(|(a, b)| a + lam * (b - a)).collect()
        })
        .unwrap();
        padded
    }

    #[test]
    fn multiplicativity() {
        let tower = lift_piecewise_linear(&brownian(2, 5, 2), 5).unwrap();
        for &(s, u, t) in &[(0, 16, 32), (3, 4, 30), (1, 20, 21)] {
            let left = chen_mul_to_depth(&tower.value(s, u).unwrap(), &tower.value(u, t).unwrap(), 5);
            assert!(left.max_rel_diff(&tower.value(s, t).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn reversed_levels_match_materialised_reversal() {
        // e = 2 matrix-valued path
        let m = brownian(4, 4, 3);
        for tower in [
            lift_piecewise_linear(&m, 4).unwrap().with_matrix_dim(2).unwrap(),
            lyons_extend(&Level2RoughPath::lift(&m).with_matrix_dim(2).unwrap(), 4).unwrap(),
        ] {
            for &(s, t) in &[(0, 16), (5, 11)] {
                let fast = tower.reversed_levels(s, t, 4).unwrap();
                let full = tower.matrix_value(s, t).unwrap();
                for (k, fk) in fast.iter().enumerate() {
                    let slow = reversal(&full, k).unwrap();
                    assert!((fk - slow).abs().max() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn log_piece_atoms_contract_consistently() {
        let grid = DyadicGrid::new(2).unwrap();
        let e = 2;
        let d = e * e;
        let raw = brownian(d + d * d, 3, 6);
        let atoms = (0..4)
            .map(|i| {
                let v: Vec<f64> = (2 * i..2 * i + 2)
                    .flat_map(|f| {
                        let inc = raw.increment(f, f + 1);
                        // keep the level-2 part antisymmetric
                        let mut piece = inc[..d].to_vec();
                        let area: Vec<f64> =
                            (0..d * d).map(|q| 0.5 * (inc[d + q] - inc[d + (q % d) * d + q / d])).collect();
                        piece.extend(area);
                        piece
                    })
                    .collect();
                Atom::LogPieces(v)
            })
            .collect();
        let tower = RoughPathTower::new(grid, d, 5, atoms).unwrap().with_matrix_dim(e).unwrap();
        for &(s, t) in &[(0, 4), (1, 3), (2, 3)] {
            let fast = tower.reversed_levels(s, t, 5).unwrap();
            let full = tower.matrix_value(s, t).unwrap();
            for (k, fk) in fast.iter().enumerate() {
                assert!((fk - reversal(&full, k).unwrap()).abs().max() < 1e-13);
            }
        }
        assert!(RoughPathTower::new(grid, d, 3, vec![Atom::LogPieces(vec![0.0; 7]); 4]).is_err());
    }

    #[test]
    fn partition_functional_examples() {
        let tower = lift_piecewise_linear(&brownian(2, 5, 4), 5).unwrap();
        let zero = partition_functional(&tower, &[3, 29], 4).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(partition_functional(&tower, &[3, 2, 29], 4).is_err());
        assert!(partition_functional(&tower, &[3, 29], 2).is_err());

        let p = [0, 5, 9, 16, 23, 32];
        for k in 3..=5 {
            for l in 1..p.len() - 1 {
                let full = partition_functional(&tower, &p, k).unwrap();
                let reduced: Vec<usize> = p.iter().enumerate().filter(|&(i, _)| i != l).map(|(_, &v)| v).collect();
                let less = partition_functional(&tower, &reduced, k).unwrap();
                let inc = removal_increment(&tower, p[l - 1], p[l], p[l + 1], k).unwrap();
                for ((a, b), c) in full.iter().zip(&less).zip(&inc) {
                    assert!((a - b - c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_partition_recovers_extension() {
        let x = Level2RoughPath::lift(&brownian(2, 4, 5));
        let tower = lyons_extend(&x, 4).unwrap();
        let all: Vec<usize> = (0..=16).collect();
        for k in 3..=4 {
            let pf = partition_functional(&tower, &all, k).unwrap();
            let want = tower.level(0, 16, k).unwrap();
            assert!(pf.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-13));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn chen_holds_on_random_triples(idx in 0u64..1000, d in 1usize..=3, s in 0usize..10, gap1 in 1usize..12, gap2 in 1usize..11) {
            let x = BrownianSampler::standard(d, 5, 78, 0).unwrap().sample(idx);
            let tower = lift_piecewise_linear(&x, 5).unwrap();
            let (u, t) = (s + gap1, s + gap1 + gap2);
            let joined = crate::tensor::chen_mul(&tower.value(s, u).unwrap(), &tower.value(u, t).unwrap()).unwrap();
            proptest::prop_assert!(joined.max_rel_diff(&tower.value(s, t).unwrap()) < 1e-10);
        }

        #[test]
        fn removing_a_point_changes_the_functional_by_the_increment(idx in 0u64..1000, cut in proptest::collection::btree_set(1usize..32, 1..10), k in 3usize..=5) {
            let tower = lift_piecewise_linear(&brownian(2, 5, idx), 5).unwrap();
            let mut pts = vec![0];
            pts.extend(cut.iter().copied());
            pts.push(32);
            let l = 1 + idx as usize % (pts.len() - 2);
            let mut fewer = pts.clone();
            fewer.remove(l);
            let with = partition_functional(&tower, &pts, k).unwrap();
            let without = partition_functional(&tower, &fewer, k).unwrap();
            let inc = removal_increment(&tower, pts[l - 1], pts[l], pts[l + 1], k).unwrap();
            for ((a, b), c) in with.iter().zip(&without).zip(&inc) {
                proptest::prop_assert!((a - b - c).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
