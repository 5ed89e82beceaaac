//! Truncated tensor algebra over `R^d`.
//!
//! # Layout
//!
//! Level `k` of a tensor over `R^d` is a dense array of `d^k` coefficients. The
//! multi-index `(i_1, ..., i_k)` lives at flat offset `i_1 d^{k-1} + ... + i_k`, so
//! the first index is the most significant one. With this layout the tensor
//! product of a level-`j` slice `a` and a level-`m` slice `b` is simply the outer
//! product `out[ia * d^m + ib] = a[ia] * b[ib]`.
//!
//! Matrix-valued tensors (elements of `L(W)^{⊗k}` with `W = R^e`) reuse the same
//! layout over the base dimension `e^2`, where basis element `b = i * e + j` is the
//! elementary matrix `E_ij` (row-major). The reversal contraction and every dump
//! format in this crate follow this convention.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of coefficients in the top level of a tensor.
pub const DEFAULT_ELEMENT_BUDGET: usize = 100_000_000;

pub(crate) fn check_budget(dim: usize, depth: usize, budget: usize) -> Result<()> {
    let requested = (dim as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if requested > budget as u128 {
        return Err(Error::Budget { requested, budget });
    }
    Ok(())
}

/// Element of the tensor algebra over `R^dim`, truncated above `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, depth: usize) -> Result<Self> {
        Self::zeros_with_budget(dim, depth, DEFAULT_ELEMENT_BUDGET)
    }

    pub fn zeros_with_budget(dim: usize, depth: usize, budget: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("base dimension must be positive".into()));
        }
        check_budget(dim, depth, budget)?;
        let levels = (0..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        Ok(Self { dim, depth, levels })
    }

    /// The unit `(1, 0, ..., 0)`.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        let mut t = Self::zeros(dim, depth)?;
        t.levels[0][0] = 1.0;
        Ok(t)
    }

    /// Builds a tensor from explicit level arrays; `levels[k]` must hold `dim^k` entries.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || levels.is_empty() {
            return Err(Error::Shape("need a positive dimension and at least level 0".into()));
        }
        for (k, level) in levels.iter().enumerate() {
            let want = dim.pow(k as u32);
            if level.len() != want {
                return Err(Error::Shape(format!(
                    "level {k} has {} coefficients, expected {want}",
                    level.len()
                )));
            }
        }
        Ok(Self { dim, depth: levels.len() - 1, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    /// Same coefficients with levels above `depth` dropped (or zero-padded).
    pub fn truncate_to(&self, depth: usize) -> Result<Self> {
        let mut out = Self::zeros(self.dim, depth)?;
        for k in 0..=depth.min(self.depth) {
            out.levels[k].copy_from_slice(&self.levels[k]);
        }
        Ok(out)
    }

    /// Largest absolute coefficient difference per level, scaled by the level size of `self`.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| {
                let scale = a.iter().map(|v| v.abs()).fold(1.0, f64::max);
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Outer product of two flat coefficient arrays.
pub fn tensor_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() * b.len()];
    add_outer(&mut out, a, b);
    out
}

#[inline]
fn add_outer(out: &mut [f64], a: &[f64], b: &[f64]) {
    let n = b.len();
    for (ia, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[ia * n..(ia + 1) * n].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

/// Chen product where operands may carry fewer levels than `depth`; missing levels are zero.
pub(crate) fn chen_mul_to_depth(a: &TruncatedTensor, b: &TruncatedTensor, depth: usize) -> TruncatedTensor {
    debug_assert_eq!(a.dim, b.dim);
    let dim = a.dim;
    let mut levels: Vec<Vec<f64>> = (0..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
    for (k, out) in levels.iter_mut().enumerate() {
        for j in 0..=k {
            if j > a.depth || k - j > b.depth {
                continue;
            }
            add_outer(out, &a.levels[j], &b.levels[k - j]);
        }
    }
    TruncatedTensor { dim, depth, levels }
}

/// Truncated tensor product: level `k` of the result is `sum_j a_j ⊗ b_{k-j}`.
pub fn chen_mul(a: &TruncatedTensor, b: &TruncatedTensor) -> Result<TruncatedTensor> {
    if a.dim != b.dim || a.depth != b.depth {
        return Err(Error::Shape(format!(
            "chen_mul operands differ: (d={}, K={}) vs (d={}, K={})",
            a.dim, a.depth, b.dim, b.depth
        )));
    }
    Ok(chen_mul_to_depth(a, b, a.depth))
}

/// Signature of a linear segment: level `k` is `increment^{⊗k} / k!`.
pub fn segment_exp(increment: &[f64], depth: usize) -> Result<TruncatedTensor> {
    let mut t = TruncatedTensor::identity(increment.len(), depth)?;
    for k in 1..=depth {
        let mut next = tensor_product(&t.levels[k - 1], increment);
        let inv = 1.0 / k as f64;
        next.iter_mut().for_each(|v| *v *= inv);
        t.levels[k] = next;
    }
    Ok(t)
}

/// `exp(ℓ₁ + ℓ₂)` truncated at `depth`, for a level-1 part `ℓ₁` and a level-2 part `ℓ₂`
/// (for a geometric piece `ℓ₂` is its antisymmetric area).
pub fn lie_exp(l1: &[f64], l2: &[f64], depth: usize) -> Result<TruncatedTensor> {
    let d = l1.len();
    if l2.len() != d * d {
        return Err(Error::Shape(format!("level-2 part has {} entries, expected {}", l2.len(), d * d)));
    }
    // Horner: E ← 1 + (ℓ ⊗ E) / n for n = depth, ..., 1
    let mut e = TruncatedTensor::identity(d, depth)?;
    for n in (1..=depth).rev() {
        let inv = 1.0 / n as f64;
        let mut next = TruncatedTensor::identity(d, depth)?;
        for k in 1..=depth {
            let out = &mut next.levels[k];
            add_outer(out, l1, &e.levels[k - 1]);
            if k >= 2 {
                add_outer(out, l2, &e.levels[k - 2]);
            }
            out.iter_mut().for_each(|v| *v *= inv);
        }
        e = next;
    }
    Ok(e)
}

/// Tensor over the matrix algebra `L(R^e)`, stored in the elementary-matrix basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTensor {
    matrix_dim: usize,
    inner: TruncatedTensor,
}

impl MatrixTensor {
    pub fn zeros(matrix_dim: usize, depth: usize) -> Result<Self> {
        Self::zeros_with_budget(matrix_dim, depth, DEFAULT_ELEMENT_BUDGET)
    }

    pub fn zeros_with_budget(matrix_dim: usize, depth: usize, budget: usize) -> Result<Self> {
        let inner = TruncatedTensor::zeros_with_budget(matrix_dim * matrix_dim, depth, budget)?;
        Ok(Self { matrix_dim, inner })
    }

    /// Wraps a tensor over `R^{e^2}`.
    pub fn from_tensor(matrix_dim: usize, inner: TruncatedTensor) -> Result<Self> {
        if inner.dim != matrix_dim * matrix_dim {
            return Err(Error::Shape(format!(
                "tensor base dimension {} is not {}^2",
                inner.dim, matrix_dim
            )));
        }
        check_budget(inner.dim, inner.depth, DEFAULT_ELEMENT_BUDGET)?;
        Ok(Self { matrix_dim, inner })
    }

    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    pub fn depth(&self) -> usize {
        self.inner.depth
    }

    pub fn tensor(&self) -> &TruncatedTensor {
        &self.inner
    }

    pub fn tensor_mut(&mut self) -> &mut TruncatedTensor {
        &mut self.inner
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.inner.level(k)
    }

    /// Level-1 slice as an `e × e` matrix.
    pub fn level1_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.matrix_dim, self.matrix_dim, self.inner.level(1))
    }
}

/// Contraction `T(a_1 ⊗ ... ⊗ a_k) = a_k ⋯ a_1` of a flat level-`k` coefficient array
/// over the elementary-matrix basis of `L(R^e)`.
///
/// A product of elementary matrices `E_{b_k} ⋯ E_{b_1}` is nonzero only when each
/// factor's column matches the row of the factor to its right, so only `e^{k+1}`
/// multi-indices are visited.
pub fn reverse_contract(coeffs: &[f64], matrix_dim: usize, k: usize) -> DMatrix<f64> {
    let e = matrix_dim;
    let n = e * e;
    let mut out = DMatrix::zeros(e, e);
    if k == 0 {
        // level 0 is the scalar unit; it contracts to a multiple of the identity
        return DMatrix::identity(e, e) * coeffs[0];
    }
    debug_assert_eq!(coeffs.len(), n.pow(k as u32));
    // Walk b_1, ..., b_k keeping the current product E_{row, col}.
    fn walk(
        coeffs: &[f64],
        e: usize,
        remaining: usize,
        offset: usize,
        row: usize,
        col: usize,
        out: &mut DMatrix<f64>,
    ) {
        if remaining == 0 {
            out[(row, col)] += coeffs[offset];
            return;
        }
        let n = e * e;
        // next factor E_{i, row} multiplies on the left
        for i in 0..e {
            walk(coeffs, e, remaining - 1, offset * n + i * e + row, i, col, out);
        }
    }
    for i1 in 0..e {
        for j1 in 0..e {
            walk(coeffs, e, k - 1, i1 * e + j1, i1, j1, &mut out);
        }
    }
    out
}

/// The reversal map applied to level `k` of a matrix tensor.
pub fn reversal(m: &MatrixTensor, k: usize) -> Result<DMatrix<f64>> {
    if k > m.depth() {
        return Err(Error::Domain(format!(
            "level {k} exceeds level cap {}",
            m.depth()
        )));
    }
    Ok(reverse_contract(m.level(k), m.matrix_dim, k))
}

/// Norms available for tensor levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Euclidean norm of the coefficient array.
    Frobenius,
    /// Sum of absolute coefficients; bounds the projective norm in the elementary basis.
    CoeffL1,
    /// Largest singular value; only for level-1 matrix slices.
    Operator,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Self::Frobenius),
            "coeff_l1" | "l1" => Ok(Self::CoeffL1),
            "operator" => Ok(Self::Operator),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

/// Norm of a flat coefficient slice (frobenius or coeff_l1).
pub fn slice_norm(coeffs: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => coeffs.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::CoeffL1 | NormKind::Operator => coeffs.iter().map(|v| v.abs()).sum(),
    }
}

pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Anything that exposes tensor levels to [`tensor_norm`].
pub trait TensorLevels {
    fn coeffs(&self, k: usize) -> Option<&[f64]>;
    fn matrix_dim(&self) -> Option<usize>;
}

impl TensorLevels for TruncatedTensor {
    fn coeffs(&self, k: usize) -> Option<&[f64]> {
        self.levels.get(k).map(Vec::as_slice)
    }
    fn matrix_dim(&self) -> Option<usize> {
        None
    }
}

impl TensorLevels for MatrixTensor {
    fn coeffs(&self, k: usize) -> Option<&[f64]> {
        self.inner.coeffs(k)
    }
    fn matrix_dim(&self) -> Option<usize> {
        Some(self.matrix_dim)
    }
}

/// Norm of level `k`; the operator norm is only defined for level-1 matrix slices.
pub fn tensor_norm<T: TensorLevels + ?Sized>(x: &T, k: usize, kind: NormKind) -> Result<f64> {
    let coeffs = x
        .coeffs(k)
        .ok_or_else(|| Error::Domain(format!("level {k} out of range")))?;
    match kind {
        NormKind::Operator => match x.matrix_dim() {
            Some(e) if k == 1 => Ok(operator_norm(&DMatrix::from_row_slice(e, e, coeffs))),
            _ => Err(Error::Domain(
                "operator norm needs a level-1 matrix slice".into(),
            )),
        },
        other => Ok(slice_norm(coeffs, other)),
    }
}
