use rayon::prelude::*;

use super::{append_atom, BrownianSampler, Level2RoughPath};
use crate::error::{domain, Error, Result};
use crate::moments::pairwise_sum;
use crate::path::{dyadic_approx, lag_weights};
use crate::tensor::{slice_norm, NormKind};

/// Mean discrete Hölder distances between two dyadic lifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A1Distances {
    /// `E ‖W(m)¹ − W(n)¹‖_{1/p-Hld}`
    pub level1: f64,
    /// `E ‖W(m)² − W(n)²‖_{2/p-Hld}`
    pub level2: f64,
}

/// `(‖X¹ − Y¹‖_{1/p-Hld}, ‖X² − Y²‖_{2/p-Hld})` over all grid pairs.
pub fn holder_distance(x: &Level2RoughPath, y: &Level2RoughPath, p: f64, norm: NormKind) -> Result<(f64, f64)> {
    if x.grid() != y.grid() || x.dim() != y.dim() {
        return Err(Error::Shape("rough paths live on different grids or spaces".into()));
    }
    if !(p >= 1.0) {
        return domain(format!("p must be ≥ 1, got {p}"));
    }
    let d = x.dim();
    let n = x.grid().intervals();
    let w1 = lag_weights(x.grid(), 1.0 / p);
    let w2 = lag_weights(x.grid(), (2.0 / p).min(1.0));
    let (mut h1, mut h2) = (0.0f64, 0.0f64);
    let mut diff1 = vec![0.0; d];
    let mut diff2 = vec![0.0; d * d];
    for s in 0..n {
        let (mut a1, mut a2) = (vec![0.0; d], vec![0.0; d * d]);
        let (mut b1, mut b2) = (vec![0.0; d], vec![0.0; d * d]);
        for t in s + 1..=n {
            append_atom(&mut a1, &mut a2, x.atom1(t - 1), x.atom2(t - 1));
            append_atom(&mut b1, &mut b2, y.atom1(t - 1), y.atom2(t - 1));
            for i in 0..d {
                diff1[i] = a1[i] - b1[i];
            }
            for i in 0..d * d {
                diff2[i] = a2[i] - b2[i];
            }
            h1 = h1.max(slice_norm(&diff1, norm) * w1[t - s]);
            h2 = h2.max(slice_norm(&diff2, norm) * w2[t - s]);
        }
    }
    Ok((h1, h2))
}

/// Monte Carlo means of the Hölder distances between the lifts of the dyadic
/// approximations `w(m)` and `w(n)`, with `w` sampled on the level-`n` grid.
pub fn a1_diagnostic(d: usize, m: u32, n: u32, p: f64, sample_count: usize, seed: u64) -> Result<A1Distances> {
    if m > n {
        return domain(format!("need m ≤ n, got m={m}, n={n}"));
    }
    if sample_count == 0 {
        return domain("need at least one sample");
    }
    let sampler = BrownianSampler::standard(d, n, seed, 0)?;
    let per_sample = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let w = sampler.sample(i);
            if m == n {
                return Ok((0.0, 0.0));
            }
            let coarse = Level2RoughPath::lift(&dyadic_approx(&w, m)?);
            holder_distance(&coarse, &Level2RoughPath::lift(&w), p, NormKind::CoeffL1)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_f = sample_count as f64;
    Ok(A1Distances {
        level1: pairwise_sum(&per_sample.iter().map(|v| v.0).collect::<Vec<_>>()) / n_f,
        level2: pairwise_sum(&per_sample.iter().map(|v| v.1).collect::<Vec<_>>()) / n_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_levels_give_zero() {
        let r = a1_diagnostic(2, 5, 5, 2.5, 3, 1).unwrap();
        assert_eq!((r.level1, r.level2), (0.0, 0.0));
        assert!(a1_diagnostic(2, 6, 5, 2.5, 3, 1).is_err());
    }

    #[test]
    fn distances_shrink_with_m() {
        let coarse = a1_diagnostic(2, 4, 8, 2.5, 200, 3).unwrap();
        let fine = a1_diagnostic(2, 6, 8, 2.5, 200, 3).unwrap();
        assert!(fine.level1 < coarse.level1);
        assert!(fine.level2 < coarse.level2);
    }
}
