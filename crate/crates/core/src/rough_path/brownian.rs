//! Brownian motion on `R^d` with counter-addressed random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::path::{DyadicGrid, SampledPath};

/// Words reserved per sample inside one ChaCha stream.
const WORDS_PER_SAMPLE: u128 = 1 << 32;

/// Generator positioned at `(seed, stream, sample)`; the same triple always yields the
/// same draws regardless of which worker asks for it.
pub fn sample_rng(seed: u64, stream: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(sample as u128 * WORDS_PER_SAMPLE);
    rng
}

/// Lower-triangular factor `L` with `L Lᵀ = cov`; zero pivots are allowed (semidefinite).
pub fn psd_cholesky(cov: &[f64], dim: usize) -> Result<Vec<f64>> {
    if cov.len() != dim * dim {
        return Err(Error::Shape(format!("covariance has {} entries, expected {}", cov.len(), dim * dim)));
    }
    let scale = cov.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    for i in 0..dim {
        for j in 0..i {
            if (cov[i * dim + j] - cov[j * dim + i]).abs() > tol {
                return domain("covariance is not symmetric");
            }
        }
    }
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut diag = cov[j * dim + j];
        for k in 0..j {
            diag -= l[j * dim + k] * l[j * dim + k];
        }
        if diag < -tol {
            return domain("covariance is not positive semidefinite");
        }
        let pivot = if diag <= tol { 0.0 } else { diag.sqrt() };
        l[j * dim + j] = pivot;
        for i in j + 1..dim {
            let mut v = cov[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k];
            }
            if pivot == 0.0 {
                if v.abs() > tol {
                    return domain("covariance is not positive semidefinite");
                }
                l[i * dim + j] = 0.0;
            } else {
                l[i * dim + j] = v / pivot;
            }
        }
    }
    Ok(l)
}

/// Samples Brownian paths with covariance `cov` on a dyadic grid.
#[derive(Clone, Debug)]
pub struct BrownianSampler {
    dim: usize,
    grid: DyadicGrid,
    factor: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl BrownianSampler {
    pub fn new(dim: usize, level: u32, covariance: &[f64], seed: u64, stream: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("Brownian dimension must be positive".into()));
        }
        let factor = psd_cholesky(covariance, dim)?;
        Ok(Self { dim, grid: DyadicGrid::new(level)?, factor, seed, stream })
    }

    /// Standard Brownian motion.
    pub fn standard(dim: usize, level: u32, seed: u64, stream: u64) -> Result<Self> {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = 1.0;
        }
        Self::new(dim, level, &cov, seed, stream)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Path number `index` of this sampler's stream, started at 0.
    pub fn sample(&self, index: u64) -> SampledPath {
        let mut rng = sample_rng(self.seed, self.stream, index);
        let d = self.dim;
        let sd = self.grid.spacing().sqrt();
        let mut values = vec![0.0; self.grid.len() * d];
        let mut z = vec![0.0; d];
        for i in 1..self.grid.len() {
            for zc in z.iter_mut() {
                *zc = rng.sample(StandardNormal);
            }
            for r in 0..d {
                let mut inc = 0.0;
                for c in 0..=r {
                    inc += self.factor[r * d + c] * z[c];
                }
                values[i * d + r] = values[(i - 1) * d + r] + sd * inc;
            }
        }
        SampledPath::new(self.grid, d, values).expect("finite Gaussian draws")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_gives_zero_path() {
        let s = BrownianSampler::new(2, 5, &[0.0; 4], 1, 0).unwrap();
        assert!(s.sample(3).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        assert!(BrownianSampler::new(2, 3, &[1.0, 2.0, 2.0, 1.0], 1, 0).is_err());
        assert!(BrownianSampler::new(2, 3, &[1.0, 0.5, 0.0, 1.0], 1, 0).is_err());
        assert!(psd_cholesky(&[1.0, 1.0, 1.0, 1.0], 2).is_ok());
    }

    #[test]
    fn deterministic_addressing() {
        let s = BrownianSampler::standard(2, 6, 42, 7).unwrap();
        assert_eq!(s.sample(5), s.sample(5));
        assert_ne!(s.sample(5), s.sample(6));
        let other_stream = BrownianSampler::standard(2, 6, 42, 8).unwrap();
        assert_ne!(s.sample(5), other_stream.sample(5));
    }

    #[test]
    fn endpoint_law() {
        let s = BrownianSampler::standard(1, 4, 2024, 0).unwrap();
        let n = 10_000;
        let ends: Vec<f64> = (0..n).map(|i| s.sample(i).at(16)[0]).collect();
        let mean = ends.iter().sum::<f64>() / n as f64;
        let var = ends.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn quadratic_variation_near_one() {
        let s = BrownianSampler::standard(1, 12, 99, 0).unwrap();
        for i in 0..20 {
            let w = s.sample(i);
            let qv: f64 = w.increments().iter().map(|d| d * d).sum();
            assert!((qv - 1.0).abs() < 0.1, "qv {qv}");
        }
    }

    #[test]
    fn correlated_increments() {
        let cov = [1.0, 0.8, 0.8, 2.0];
        let s = BrownianSampler::new(2, 2, &cov, 5, 0).unwrap();
        let n = 20_000;
        let mut acc = [0.0; 4];
        for i in 0..n {
            let w = s.sample(i);
            let x = w.at(4);
            acc[0] += x[0] * x[0];
            acc[1] += x[0] * x[1];
            acc[3] += x[1] * x[1];
        }
        assert!((acc[0] / n as f64 - 1.0).abs() < 0.05);
        assert!((acc[1] / n as f64 - 0.8).abs() < 0.05);
        assert!((acc[3] / n as f64 - 2.0).abs() < 0.1);
    }
}
