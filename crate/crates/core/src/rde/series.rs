//! The matrix-valued rough path of `M` and the series representation of the Jacobian,
//! `Id + J_{s,t} = Id + sum_k T(M^k_{s,t})` with `T` the reversal contraction.

use nalgebra::DMatrix;

use super::RdeSolution;
use crate::error::{domain, Error, Result};
use crate::rough_path::{append_atom, Atom, Level2RoughPath, RoughPathTower};
use crate::special::{conv_a_tail, ln_frac_factorial};

/// Exponent used to fit the tail model `|A_k| ≤ x^k / (k/p)!`; towers built from
/// piecewise-linear data decay like `1/k!`.
pub const SERIES_FIT_P: f64 = 1.0;

/// Log-signature pieces of `M`, one per substep: the increment `δ` followed by the area of
/// the cubic Hermite interpolant through the substep's end values and slopes `v₀`, `v₁`,
/// `A = (δ ∧ (v₁ − v₀)) / 10 − (v₀ ∧ v₁) / 60` with `a ∧ b = a⊗b − b⊗a`.
fn m_pieces(sol: &RdeSolution, interval: usize) -> Vec<f64> {
    let e2 = sol.state_dim() * sol.state_dim();
    let s = sol.substeps();
    let (fine, slopes) = (sol.m_fine(), sol.m_slopes());
    let mut out = Vec::with_capacity(s * (e2 + e2 * e2));
    for f in interval * s..(interval + 1) * s {
        let delta: Vec<f64> = (0..e2).map(|q| fine[(f + 1) * e2 + q] - fine[f * e2 + q]).collect();
        let v0 = &slopes[2 * f * e2..(2 * f + 1) * e2];
        let v1 = &slopes[(2 * f + 1) * e2..(2 * f + 2) * e2];
        out.extend_from_slice(&delta);
        for a in 0..e2 {
            for b in 0..e2 {
                let wedge_dv = delta[a] * (v1[b] - v0[b]) - (v1[a] - v0[a]) * delta[b];
                let wedge_v = v0[a] * v1[b] - v1[a] * v0[b];
                out.push(wedge_dv / 10.0 - wedge_v / 60.0);
            }
        }
    }
    out
}

/// Level-2 rough path of `M` over `L(R^e)`: level-1 atoms are the grid increments of `M`,
/// level-2 atoms the iterated integral `∫ dM ⊗ dM` by substep quadrature.
pub fn m_level2(sol: &RdeSolution) -> Result<Level2RoughPath> {
    let e = sol.state_dim();
    let e2 = e * e;
    let n = sol.grid().intervals();
    let mut atoms1 = vec![0.0; n * e2];
    let mut atoms2 = vec![0.0; n * e2 * e2];
    let mut level2 = vec![0.0; e2 * e2];
    for i in 0..n {
        let (x1, x2) = (&mut atoms1[i * e2..(i + 1) * e2], &mut atoms2[i * e2 * e2..(i + 1) * e2 * e2]);
        for piece in m_pieces(sol, i).chunks(e2 + e2 * e2) {
            let (delta, area) = piece.split_at(e2);
            for a in 0..e2 {
                for b in 0..e2 {
                    level2[a * e2 + b] = area[a * e2 + b] + 0.5 * delta[a] * delta[b];
                }
            }
            append_atom(x1, x2, delta, &level2);
        }
    }
    Level2RoughPath::from_atoms(sol.grid(), e2, atoms1, atoms2)?.with_matrix_dim(e)
}

/// Tower of `M` up to `depth`. Levels 1–2 agree with [`m_level2`]; higher levels come from
/// exponentiating each substep's level-2 log-signature, which is the geometric extension
/// at substep resolution.
pub fn m_rough_path(sol: &RdeSolution, depth: usize) -> Result<RoughPathTower> {
    let atoms = (0..sol.grid().intervals()).map(|i| Atom::LogPieces(m_pieces(sol, i))).collect();
    let e = sol.state_dim();
    RoughPathTower::new(sol.grid(), e * e, depth, atoms)?.with_matrix_dim(e)
}

/// Tower of the substep polyline through the solver's `M` values (chords only, no area
/// correction); kept for comparison with [`m_rough_path`].
pub fn m_chord_tower(sol: &RdeSolution, depth: usize) -> Result<RoughPathTower> {
    let e = sol.state_dim();
    let e2 = e * e;
    let s = sol.substeps();
    let fine = sol.m_fine();
    let atoms = (0..sol.grid().intervals())
        .map(|i| {
            let incs: Vec<f64> = (i * s..(i + 1) * s)
                .flat_map(|f| (0..e2).map(move |q| fine[(f + 1) * e2 + q] - fine[f * e2 + q]))
                .collect();
            Atom::Polyline(incs)
        })
        .collect();
    RoughPathTower::new(sol.grid(), e2, depth, atoms)?.with_matrix_dim(e)
}

/// Truncated series value with its stopping data.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesJacobian {
    /// `Id + sum_{k ≤ levels} T(M^k_{s,t})`.
    pub matrix: DMatrix<f64>,
    pub levels: usize,
    /// Estimated size of the omitted terms.
    pub tail: f64,
}

fn coeff_l1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Sums the series over the grid interval `(s, t)`. Stops at the first level whose term
/// has coefficient l1 norm below `tol` and whose fitted tail `sum_{k > K} x^k / (k/p)!`
/// (with `x = max_{j ≤ K} (|A_j| (j/p)!)^{1/j}`, `p =` [`SERIES_FIT_P`]) is below `tol`.
pub fn series_jacobian(tower: &RoughPathTower, s: usize, t: usize, tol: f64) -> Result<SeriesJacobian> {
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let terms = tower.reversed_levels(s, t, tower.depth())?;
    let e = terms[0].nrows();
    let mut sum = DMatrix::identity(e, e);
    let mut x_hat = 0.0f64;
    let mut last = f64::INFINITY;
    for (k, term) in terms.iter().enumerate().skip(1) {
        sum += term;
        last = coeff_l1(term);
        if last > 0.0 {
            let kf = k as f64;
            x_hat = x_hat.max(((last.ln() + ln_frac_factorial(kf / SERIES_FIT_P)?) / kf).exp());
        }
        if last < tol {
            let tail = conv_a_tail(SERIES_FIT_P, 1.0, x_hat, k)?;
            if tail < tol {
                return Ok(SeriesJacobian { matrix: sum, levels: k, tail });
            }
        }
    }
    Err(Error::Truncation {
        levels: tower.depth(),
        last_term: last,
        partial: sum.transpose().iter().copied().collect(),
    })
}
