use rand::Rng;
use rayon::prelude::*;

use super::{check_samples_finite, linear_fit, lr_norm_with, MomentScan, BOOTSTRAP_RESAMPLES};
use crate::error::{domain, Error, Result};
use crate::path::{euclid_dist, SampledPath};
use crate::rde::{m_rough_path, solve_along_pl, VectorField};
use crate::rough_path::{lift_piecewise_linear, sample_rng, BrownianSampler, Level2RoughPath};
use crate::special::{beta_p, frac_factorial};
use crate::tensor::{slice_norm, NormKind};

/// Accepted slope bands for `‖W¹‖` and `‖W²‖`.
pub const W_SLOPE_BANDS: [(f64, f64); 2] = [(0.4, 0.6), (0.85, 1.15)];

/// Moment scans of the discrete Hölder norms of a Brownian rough path.
#[derive(Clone, Debug, PartialEq)]
pub struct WMomentReport {
    pub level1: MomentScan,
    pub level2: MomentScan,
    pub slope1: f64,
    pub slope2: f64,
    pub residual1: f64,
    pub residual2: f64,
    /// Both slopes inside [`W_SLOPE_BANDS`].
    pub passed: bool,
}

/// Samples Brownian rough paths on the level-`grid_level` grid and scans the `L^r`
/// norms of `‖W¹‖_{1/p-Hld}` and `‖W²‖_{2/p-Hld}` (Euclidean / Hilbert–Schmidt norms).
pub fn w_moment_scan(
    d: usize,
    p: f64,
    grid_level: u32,
    r_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<WMomentReport> {
    if !(p > 2.0 && p < 3.0) {
        return domain(format!("need 2 < p < 3, got {p}"));
    }
    if n_samples == 0 {
        return domain("need at least one sample");
    }
    let sampler = BrownianSampler::standard(d, grid_level, seed, 0)?;
    let norms = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| Level2RoughPath::lift(&sampler.sample(i)).holder_norms(p, NormKind::Frobenius))
        .collect::<Result<Vec<_>>>()?;
    let h1: Vec<f64> = norms.iter().map(|v| v.0).collect();
    let h2: Vec<f64> = norms.iter().map(|v| v.1).collect();
    let level1 = MomentScan::from_samples("w1_holder", &h1, r_grid, seed)?;
    let level2 = MomentScan::from_samples("w2_holder", &h2, r_grid, seed)?;
    let (slope1, _, residual1) = level1.log_log_fit();
    let (slope2, _, residual2) = level2.log_log_fit();
    let inside = |v: f64, band: (f64, f64)| v >= band.0 && v <= band.1;
    let passed = inside(slope1, W_SLOPE_BANDS[0]) && inside(slope2, W_SLOPE_BANDS[1]);
    Ok(WMomentReport { level1, level2, slope1, slope2, residual1, residual2, passed })
}

/// Settings shared by [`factorial_decay_scan`].
#[derive(Clone, Debug, PartialEq)]
pub struct DecayScanConfig {
    pub p: f64,
    /// Highest level `K`.
    pub depth: usize,
    pub r: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub grid_level: u32,
    pub substeps: usize,
}

/// Normalised `L^r` norms of `|M^k_{0,1}|` against the form `r^{kα} c^{k/p} / (β_p (k/p)!)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayScanReport {
    pub p: f64,
    pub k_range: (usize, usize),
    pub r: f64,
    pub c: f64,
    pub alpha: f64,
    /// `‖ |M^k_{0,1}| ‖_{L^r}` for `k = 1..=K`.
    pub estimates: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// `estimate · β_p (k/p)! / (r^{kα} c^{k/p})`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `max_ratio ≤ 1 + 3 ·` (relative CI width at the maximising level).
    pub passed: bool,
}

/// Monte Carlo check of factorial decay for the iterated integrals of `M` over `(0, 1)`.
///
/// `(c, α)` are calibrated on `k ∈ {1, 2}`: with `x(r) = r^α c^{1/p}` the smallest value
/// for which both levels satisfy the bound at `r`, `α` comes from `x(2r) / x(r)`.
pub fn factorial_decay_scan(vf: &dyn VectorField, a: &[f64], cfg: &DecayScanConfig) -> Result<DecayScanReport> {
    if !vf.bounded() {
        return domain(format!("field '{}' is not declared bounded", vf.name()));
    }
    if cfg.depth < 2 {
        return domain("need K ≥ 2");
    }
    if cfg.n_samples == 0 {
        return domain("need at least one sample");
    }
    let beta = beta_p(cfg.p)?.value;
    let sampler = BrownianSampler::standard(vf.driver_dim(), cfg.grid_level, cfg.seed, 0)?;
    let n = sampler.grid().intervals();
    let levels = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let sol = solve_along_pl(vf, a, &sampler.sample(i), cfg.substeps)?;
            let v = m_rough_path(&sol, cfg.depth)?.value(0, n)?;
            Ok((1..=cfg.depth).map(|k| slice_norm(v.level(k), NormKind::CoeffL1)).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_k = |k: usize| levels.iter().map(|v| v[k - 1]).collect::<Vec<f64>>();
    let mut est_r = Vec::with_capacity(cfg.depth);
    let mut est_2r = Vec::with_capacity(2);
    for k in 1..=cfg.depth {
        let xs = per_k(k);
        check_samples_finite(&xs, "iterated integral norm")?;
        est_r.push(lr_norm_with(&xs, cfg.r, BOOTSTRAP_RESAMPLES, cfg.seed)?);
        if k <= 2 {
            est_2r.push(lr_norm_with(&xs, 2.0 * cfg.r, BOOTSTRAP_RESAMPLES, cfg.seed)?);
        }
    }
    let fact = |k: usize| frac_factorial(k as f64 / cfg.p);
    let calib = |e1: f64, e2: f64| -> Result<f64> { Ok((e1 * beta * fact(1)?).max((e2 * beta * fact(2)?).sqrt())) };
    let x_r = calib(est_r[0].estimate, est_r[1].estimate)?;
    let x_2r = calib(est_2r[0].estimate, est_2r[1].estimate)?;
    let (alpha, c) = if x_r > 0.0 && x_2r > 0.0 {
        let alpha = (x_2r / x_r).log2();
        (alpha, (x_r / cfg.r.powf(alpha)).powf(cfg.p))
    } else {
        (0.0, 0.0)
    };
    let mut ratios = Vec::with_capacity(cfg.depth);
    for (i, e) in est_r.iter().enumerate() {
        let k = i + 1;
        ratios.push(if x_r > 0.0 { e.estimate * beta * fact(k)? / x_r.powi(k as i32) } else { 0.0 });
    }
    let (arg, max_ratio) = ratios.iter().copied().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let width = if est_r[arg].estimate > 0.0 {
        (est_r[arg].ci_high - est_r[arg].ci_low) / est_r[arg].estimate
    } else {
        0.0
    };
    if !(c.is_finite() && alpha.is_finite()) {
        return Err(Error::Divergence("fitted (c, α) is not finite".into()));
    }
    Ok(DecayScanReport {
        p: cfg.p,
        k_range: (1, cfg.depth),
        r: cfg.r,
        c,
        alpha,
        estimates: est_r.iter().map(|e| e.estimate).collect(),
        ci_low: est_r.iter().map(|e| e.ci_low).collect(),
        ci_high: est_r.iter().map(|e| e.ci_high).collect(),
        ratios,
        max_ratio,
        passed: max_ratio <= 1.0 + 3.0 * width,
    })
}

/// Pathwise factorial-decay check on one piecewise-linear path.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicDecayReport {
    /// Smallest `c` with `|X^i_{s,t}| ≤ (c (t − s))^{i/p} / (β_p (i/p)!)` for `i = 1, 2`
    /// on every grid pair.
    pub c: f64,
    pub checked: usize,
    pub violations: usize,
    /// Largest `|X^k_{s,t}| β_p (k/p)! / (c (t − s))^{k/p}` over the checked pairs, `k ≥ 3`.
    pub worst_ratio: f64,
}

/// Calibrates the control `ω(s, t) = c (t − s)` on levels 1–2 of the lift of `x`, then
/// checks levels `3..=k_max` of its signature on the given grid pairs (coefficient l1 norm,
/// relative slack `1e-12`).
pub fn deterministic_decay_check(
    x: &SampledPath,
    p: f64,
    k_max: usize,
    pairs: &[(usize, usize)],
) -> Result<DeterministicDecayReport> {
    if k_max < 3 {
        return domain("need k_max ≥ 3");
    }
    let beta = beta_p(p)?.value;
    let grid = x.grid();
    let f1 = beta * frac_factorial(1.0 / p)?;
    let f2 = beta * frac_factorial(2.0 / p)?;
    let mut c = 0.0f64;
    Level2RoughPath::lift(x).for_each_pair(|s, t, x1, x2| {
        let dt = grid.time(t) - grid.time(s);
        c = c.max((f1 * slice_norm(x1, NormKind::CoeffL1)).powf(p) / dt);
        c = c.max((f2 * slice_norm(x2, NormKind::CoeffL1)).powf(p / 2.0) / dt);
    });
    let tower = lift_piecewise_linear(x, k_max)?;
    let (mut violations, mut worst, mut checked) = (0, 0.0f64, 0);
    for &(s, t) in pairs {
        if s >= t || t > grid.intervals() {
            return domain(format!("bad grid pair ({s}, {t})"));
        }
        let v = tower.value(s, t)?;
        let omega = c * (grid.time(t) - grid.time(s));
        for k in 3..=k_max {
            let kp = k as f64 / p;
            let bound = omega.powf(kp) / (beta * frac_factorial(kp)?);
            let norm = slice_norm(v.level(k), NormKind::CoeffL1);
            checked += 1;
            if bound > 0.0 {
                worst = worst.max(norm / bound);
            }
            if norm > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Ok(DeterministicDecayReport { c, checked, violations, worst_ratio: worst })
}

/// Settings for [`jacobian_moment_scan`].
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMomentConfig {
    pub p: f64,
    pub r_grid: Vec<f64>,
    /// Nested sample sizes; the first `n` samples of the largest run are reused.
    pub n_samples_list: Vec<usize>,
    pub seed: u64,
    pub grid_level: u32,
    pub substeps: usize,
    /// Moment used in the increment-scaling regression.
    pub regression_r: f64,
}

/// Minimum slope of `log ‖J¹_{0,t}‖_{L^r}` against `log t`.
pub const INCREMENT_SLOPE_MIN: f64 = 0.45;

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMomentReport {
    /// One scan of `E[‖J¹‖^r_{1/p-Hld}]^{1/r}` per sample size.
    pub scans: Vec<MomentScan>,
    pub finite: bool,
    /// For every `r`, the intervals across sample sizes share a common point.
    pub stable: bool,
    /// Dyadic grid pairs `(s, t)` used in the increment regression.
    pub pairs: Vec<(usize, usize)>,
    /// `‖ |J¹_{s,t}| ‖_{L^r}` at `regression_r`, one per pair.
    pub pair_estimates: Vec<f64>,
    pub increment_slope: f64,
    pub passed: bool,
}

/// `L^r` norms of the discrete `1/p`-Hölder norm of the Jacobian path `J¹` (Frobenius) for
/// several sample sizes, plus the scaling of `‖J¹_{s,t}‖_{L^r}` in `t − s` over all dyadic intervals.
pub fn jacobian_moment_scan(vf: &dyn VectorField, a: &[f64], cfg: &JacobianMomentConfig) -> Result<JacobianMomentReport> {
    if !vf.bounded() {
        return domain(format!("field '{}' is not declared bounded", vf.name()));
    }
    if !(cfg.p > 2.0 && cfg.p < 3.0) {
        return domain(format!("need 2 < p < 3, got {}", cfg.p));
    }
    let n_max = cfg.n_samples_list.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return domain("need at least one positive sample size");
    }
    let sampler = BrownianSampler::standard(vf.driver_dim(), cfg.grid_level, cfg.seed, 0)?;
    let n = sampler.grid().intervals();
    let pairs: Vec<(usize, usize)> = (0..=cfg.grid_level)
        .flat_map(|j| {
            let l = 1usize << j;
            (0..n / l).map(move |k| (k * l, (k + 1) * l))
        })
        .collect();
    let per_sample = (0..n_max as u64)
        .into_par_iter()
        .map(|i| {
            let j1 = solve_along_pl(vf, a, &sampler.sample(i), cfg.substeps)?.j1();
            let holder = j1.holder_norm(1.0 / cfg.p)?;
            let incs: Vec<f64> = pairs.iter().map(|&(s, t)| euclid_dist(j1.at(t), j1.at(s))).collect();
            Ok((holder, incs))
        })
        .collect::<Result<Vec<_>>>()?;
    let holder: Vec<f64> = per_sample.iter().map(|v| v.0).collect();
    let finite = holder.iter().all(|v| v.is_finite());
    check_samples_finite(&holder, "Jacobian Hölder norm")?;
    let scans = cfg
        .n_samples_list
        .iter()
        .map(|&m| MomentScan::from_samples("j1_holder", &holder[..m], &cfg.r_grid, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let stable = (0..cfg.r_grid.len()).all(|i| {
        let lo = scans.iter().map(|s| s.ci_low[i]).fold(f64::NEG_INFINITY, f64::max);
        let hi = scans.iter().map(|s| s.ci_high[i]).fold(f64::INFINITY, f64::min);
        lo <= hi
    });
    let pair_estimates = (0..pairs.len())
        .map(|j| {
            let xs: Vec<f64> = per_sample.iter().map(|v| v.1[j]).collect();
            Ok(lr_norm_with(&xs, cfg.regression_r, 0, cfg.seed)?.estimate)
        })
        .collect::<Result<Vec<_>>>()?;
    let increment_slope = if pair_estimates.iter().all(|&v| v > 0.0) {
        let grid = sampler.grid();
        let xs: Vec<f64> = pairs.iter().map(|&(s, t)| (grid.time(t) - grid.time(s)).ln()).collect();
        let ys: Vec<f64> = pair_estimates.iter().map(|v| v.ln()).collect();
        linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    let passed = finite && stable && increment_slope >= INCREMENT_SLOPE_MIN;
    Ok(JacobianMomentReport { scans, finite, stable, pairs, pair_estimates, increment_slope, passed })
}

/// `count` distinct-endpoint grid pairs `s < t` drawn uniformly with the given seed.
pub fn random_grid_pairs(intervals: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = sample_rng(seed, 1, 0);
    (0..count)
        .map(|_| loop {
            let s = rng.random_range(0..=intervals);
            let t = rng.random_range(0..=intervals);
            if s != t {
                break (s.min(t), s.max(t));
            }
        })
        .collect()
}
