//! Monte Carlo `L^r` estimates, growth exponents, tail fits and the moment scans for
//! Brownian rough paths, the iterated integrals of `M` and the Jacobian.
//!
//! Samples are generated in parallel with per-sample random streams and collected in
//! index order; all sums go through [`pairwise_sum`], so results do not depend on the
//! number of worker threads.

mod scans;

pub use scans::{
    deterministic_decay_check, factorial_decay_scan, jacobian_moment_scan, random_grid_pairs, w_moment_scan, DecayScanConfig,
    DecayScanReport, DeterministicDecayReport, JacobianMomentConfig, JacobianMomentReport, WMomentReport, INCREMENT_SLOPE_MIN, W_SLOPE_BANDS,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::io::ResultRow;
use crate::rough_path::sample_rng;

/// Bootstrap resamples per confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_STREAM: u64 = u64::MAX - 1;

/// Sum in a fixed binary-tree order, independent of how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Least-squares line `y ≈ slope x + intercept` with its root-mean-square residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxy == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// `(E[Z^r])^{1/r}` with a percentile bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// [`lr_norm_with`] with [`BOOTSTRAP_RESAMPLES`] resamples and bootstrap seed 0.
pub fn lr_norm(samples: &[f64], r: f64) -> Result<LrEstimate> {
    lr_norm_with(samples, r, BOOTSTRAP_RESAMPLES, 0)
}

/// `(mean samples^r)^{1/r}` and a 95% percentile bootstrap interval from `resamples`
/// resamples drawn with the given seed.
pub fn lr_norm_with(samples: &[f64], r: f64, resamples: usize, seed: u64) -> Result<LrEstimate> {
    if samples.is_empty() {
        return domain("no samples");
    }
    if !(r >= 1.0) || !r.is_finite() {
        return domain(format!("r must be ≥ 1, got {r}"));
    }
    if samples.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return domain("samples must be finite and nonnegative");
    }
    let top = samples.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(LrEstimate { estimate: 0.0, ci_low: 0.0, ci_high: 0.0 });
    }
    // scale by the maximum so that large r cannot overflow
    let powered: Vec<f64> = samples.iter().map(|v| (v / top).powf(r)).collect();
    let n = powered.len();
    let norm_of = |mean: f64| top * mean.powf(1.0 / r);
    let estimate = norm_of(pairwise_sum(&powered) / n as f64);
    if resamples == 0 {
        return Ok(LrEstimate { estimate, ci_low: estimate, ci_high: estimate });
    }
    let mut boot: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = sample_rng(seed, BOOTSTRAP_STREAM, b);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += powered[rng.random_range(0..n)];
            }
            norm_of(acc / n as f64)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let lo = ((0.025 * resamples as f64).floor() as usize).min(resamples - 1);
    let hi = ((0.975 * resamples as f64).ceil() as usize).saturating_sub(1).min(resamples - 1);
    Ok(LrEstimate { estimate, ci_low: boot[lo], ci_high: boot[hi] })
}

/// `L^r` norms of one functional over an increasing grid of `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentScan {
    pub functional_id: String,
    pub r_grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

impl MomentScan {
    pub fn from_samples(functional_id: &str, samples: &[f64], r_grid: &[f64], seed: u64) -> Result<Self> {
        if r_grid.is_empty() || r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return domain("r grid must be nonempty and strictly increasing");
        }
        let mut scan = Self {
            functional_id: functional_id.to_string(),
            r_grid: r_grid.to_vec(),
            estimates: Vec::new(),
            ci_low: Vec::new(),
            ci_high: Vec::new(),
            sample_count: samples.len(),
            seed,
        };
        for &r in r_grid {
            let est = lr_norm_with(samples, r, BOOTSTRAP_RESAMPLES, seed)?;
            scan.estimates.push(est.estimate);
            scan.ci_low.push(est.ci_low);
            scan.ci_high.push(est.ci_high);
        }
        Ok(scan)
    }

    /// Least-squares `(slope, intercept, residual)` of `log estimate` against `log r`.
    pub fn log_log_fit(&self) -> (f64, f64, f64) {
        if self.estimates.iter().any(|&v| v <= 0.0) {
            return (0.0, 0.0, 0.0);
        }
        let xs: Vec<f64> = self.r_grid.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = self.estimates.iter().map(|v| v.ln()).collect();
        linear_fit(&xs, &ys)
    }

    /// Estimates are nondecreasing in `r` up to overlap of the intervals.
    pub fn monotone_up_to_ci(&self) -> bool {
        (1..self.estimates.len()).all(|i| self.ci_high[i] >= self.ci_low[i - 1])
    }

    pub fn rows(&self, experiment_id: &str) -> Vec<ResultRow> {
        (0..self.r_grid.len())
            .map(|i| ResultRow {
                experiment_id: experiment_id.to_string(),
                functional: self.functional_id.clone(),
                r: self.r_grid[i],
                n_samples: self.sample_count,
                estimate: self.estimates[i],
                ci_low: self.ci_low[i],
                ci_high: self.ci_high[i],
                seed: self.seed,
            })
            .collect()
    }
}

/// Evaluates `functional` on `n_samples` independent random streams, in index order.
pub fn sample_functional<F>(functional: F, n_samples: usize, seed: u64) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| functional(&mut sample_rng(seed, 0, i)))
        .collect()
}

/// Growth exponent of `r ↦ ‖Z‖_{L^r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub scan: MomentScan,
}

/// Fits `log ‖Z‖_{L^r} ≈ slope · log r + intercept` over `r_grid`.
pub fn growth_slope<F>(functional: F, r_grid: &[f64], n_samples: usize, seed: u64) -> Result<GrowthFit>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    check_growth_grid(r_grid)?;
    if n_samples == 0 {
        return domain("need at least one sample");
    }
    let samples = sample_functional(functional, n_samples, seed);
    growth_slope_from_samples("functional", &samples, r_grid, seed)
}

fn check_growth_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.len() < 4 {
        return domain("growth fit needs at least 4 values of r");
    }
    let (lo, hi) = (r_grid.iter().copied().fold(f64::INFINITY, f64::min), r_grid.iter().copied().fold(0.0, f64::max));
    if hi < 8.0 * lo {
        return domain(format!("r grid must span a factor of at least 8, got [{lo}, {hi}]"));
    }
    Ok(())
}

/// [`growth_slope`] on samples that are already drawn.
pub fn growth_slope_from_samples(id: &str, samples: &[f64], r_grid: &[f64], seed: u64) -> Result<GrowthFit> {
    check_growth_grid(r_grid)?;
    let scan = MomentScan::from_samples(id, samples, r_grid, seed)?;
    let (slope, intercept, residual) = scan.log_log_fit();
    Ok(GrowthFit { slope, intercept, residual, scan })
}

/// Least-squares fit of `log P(Z ≥ η)` against `η²`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailFit {
    /// `−slope`; `NaN` when the fit is degenerate.
    pub beta_hat: f64,
    pub residual: f64,
    /// Thresholds that entered the fit.
    pub used: Vec<f64>,
    /// Thresholds dropped for having too few exceedances.
    pub dropped: Vec<f64>,
    pub degenerate: bool,
}

/// Exceedance count below which a threshold is left out of the tail fit.
pub const MIN_EXCEEDANCES: usize = 10;

pub fn fernique_tail_fit(samples: &[f64], eta_grid: &[f64]) -> Result<TailFit> {
    if samples.is_empty() {
        return domain("no samples");
    }
    if eta_grid.is_empty() || eta_grid.iter().any(|v| !v.is_finite()) {
        return domain("η grid must be nonempty and finite");
    }
    let n = samples.len() as f64;
    let (mut xs, mut ys, mut used, mut dropped) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &eta in eta_grid {
        let count = samples.iter().filter(|&&z| z >= eta).count();
        if count < MIN_EXCEEDANCES {
            log::warn!("dropping η = {eta}: only {count} exceedances");
            dropped.push(eta);
            continue;
        }
        xs.push(eta * eta);
        ys.push((count as f64 / n).ln());
        used.push(eta);
    }
    if used.len() < 2 {
        return Ok(TailFit { beta_hat: f64::NAN, residual: f64::NAN, used, dropped, degenerate: true });
    }
    let (slope, _, residual) = linear_fit(&xs, &ys);
    Ok(TailFit { beta_hat: -slope, residual, used, dropped, degenerate: false })
}

pub(crate) fn check_samples_finite(xs: &[f64], what: &str) -> Result<()> {
    if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("{what}: sample {i} is not finite")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn abs_normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample::<f64, _>(StandardNormal).abs()
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn constant_samples() {
        let xs = vec![2.5; 50];
        for r in [1.0, 3.0, 17.0] {
            let e = lr_norm(&xs, r).unwrap();
            assert!((e.estimate - 2.5).abs() < 1e-14);
            assert!((e.ci_low - 2.5).abs() < 1e-14 && (e.ci_high - 2.5).abs() < 1e-14);
        }
        let zero = lr_norm(&[0.0; 4], 2.0).unwrap();
        assert_eq!(zero.estimate, 0.0);
    }

    #[test]
    fn r_one_is_the_mean() {
        let xs = [1.0, 2.0, 4.5, 0.5];
        assert!((lr_norm(&xs, 1.0).unwrap().estimate - 2.0).abs() < 1e-15);
        assert!(lr_norm(&[], 1.0).is_err());
        assert!(lr_norm(&xs, 0.5).is_err());
        assert!(lr_norm(&[-1.0], 1.0).is_err());
    }

    #[test]
    fn gaussian_fourth_moment() {
        let xs = sample_functional(abs_normal, 100_000, 9);
        let e = lr_norm(&xs, 4.0).unwrap();
        let want = 3f64.powf(0.25);
        assert!((e.estimate - want).abs() < 0.03 * want, "{}", e.estimate);
        assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
    }

    #[test]
    fn constant_functional_has_zero_slope() {
        let fit = growth_slope(|_| 3.0, &[1.0, 2.0, 4.0, 8.0], 10, 1).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit.residual < 1e-15);
        assert!(growth_slope(|_| 3.0, &[1.0, 2.0, 4.0], 10, 1).is_err());
        assert!(growth_slope(|_| 3.0, &[1.0, 2.0, 3.0, 4.0], 10, 1).is_err());
    }

    #[test]
    fn chi_square_slope_matches_exact_moments() {
        let fit = growth_slope(
            |rng| rng.sample::<f64, _>(StandardNormal).powi(2),
            &[1.0, 2.0, 4.0, 8.0],
            100_000,
            5,
        )
        .unwrap();
        // exact: ‖Z²‖_r = (2^r Γ(r + ½) / √π)^{1/r}
        let rs = [1.0f64, 2.0, 4.0, 8.0];
        let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> =
            rs.iter().map(|&r| (r * 2f64.ln() + statrs::function::gamma::ln_gamma(r + 0.5) - 0.5 * std::f64::consts::PI.ln()) / r).collect();
        let want = linear_fit(&xs, &ys).0;
        assert!((fit.slope - want).abs() < 0.05, "{} vs {want}", fit.slope);
    }

    #[test]
    fn tail_fit_of_gaussian() {
        let xs = sample_functional(abs_normal, 100_000, 8);
        let eta: Vec<f64> = (0..=6).map(|i| 2.0 + 0.25 * i as f64).collect();
        let fit = fernique_tail_fit(&xs, &eta).unwrap();
        assert!((fit.beta_hat - 0.5).abs() < 0.1, "{}", fit.beta_hat);
        // far thresholds have no exceedances and are dropped
        let far = fernique_tail_fit(&xs, &[2.0, 2.5, 9.0]).unwrap();
        assert_eq!(far.dropped, vec![9.0]);
        let flat = fernique_tail_fit(&[1.0; 100], &[2.0, 3.0]).unwrap();
        assert!(flat.degenerate);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                let xs = sample_functional(abs_normal, 5000, 3);
                lr_norm(&xs, 3.0).unwrap()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn scan_rows_and_monotonicity() {
        let xs = sample_functional(abs_normal, 4000, 4);
        let scan = MomentScan::from_samples("abs_normal", &xs, &[1.0, 2.0, 4.0], 4).unwrap();
        assert!(scan.monotone_up_to_ci());
        assert!(scan.estimates.windows(2).all(|w| w[1] >= w[0]));
        let rows = scan.rows("t1");
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].r, 4.0);
        assert!(MomentScan::from_samples("x", &xs, &[2.0, 1.0], 4).is_err());
    }
}
