use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Kind, KeySpec, Settings};
use super::svg::{line_plot, Scale, Series};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_level2_atoms, write_level2_atoms, write_results, write_table, write_tower_atoms, ResultRow};
use crate::moments::{
    deterministic_decay_check, factorial_decay_scan, fernique_tail_fit, growth_slope_from_samples, jacobian_moment_scan,
    random_grid_pairs, sample_functional, w_moment_scan, DecayScanConfig, JacobianMomentConfig, MomentScan,
    W_SLOPE_BANDS,
};
use crate::path::{besov_norm, embedding_fit, read_path_csv, write_path_csv, DyadicGrid, SampledPath, EMBEDDING_SPREAD_MAX};
use crate::rde::{
    flow_derivative_probe, m_rough_path, series_jacobian, solve_along_pl, vector_field_check, FieldKind, VectorField,
};
use crate::rough_path::{a1_diagnostic, lift_piecewise_linear, lyons_extend, sample_rng, BrownianSampler, Level2RoughPath};
use crate::special::{beta_p, neoclassical_check};
use crate::tensor::chen_mul;

/// Tolerance of `check-chen` and `extend`.
pub const CHEN_TOL: f64 = 1e-10;
/// Relative tolerance of the series against the ODE Jacobian.
pub const SERIES_ODE_TOL: f64 = 1e-6;
/// Accepted growth-slope band for `|N|`.
pub const GROWTH_BAND: (f64, f64) = (0.45, 0.55);
/// Accepted tail-fit band for `|N|`.
pub const TAIL_BAND: (f64, f64) = (0.4, 0.6);
/// Relative tolerance of the Besov norm of `ψ_t = t` at `(m, θ) = (4, 1/2)`.
pub const BESOV_LINE_TOL: f64 = 0.02;

/// One-line outcome of a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub summary: String,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self { pass, summary: summary.into() }
    }
}

/// Output directory plus the files written so far.
pub struct Output {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, written: Vec::new() }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn write_with(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn write_str(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

pub type Handler = fn(&Settings, &mut Output) -> Result<Verdict>;

/// A subcommand: its name, accepted keys with defaults, and its handler.
pub struct CommandSpec {
    pub name: &'static str,
    pub keys: &'static [KeySpec],
    pub run: Handler,
}

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "check-chen",
        keys: &[
            ("d", Kind::Positive, "2"),
            ("k", Kind::Positive, "6"),
            ("grid_level", Kind::GridLevel, "6"),
            ("n", Kind::Positive, "100"),
            ("seed", Kind::Seed, "42"),
        ],
        run: check_chen,
    },
    CommandSpec {
        name: "check-neoclassical",
        keys: &[("p", Kind::Real, "2.5"), ("k", Kind::Positive, "5"), ("a", Kind::Real, "1"), ("b", Kind::Real, "1")],
        run: check_neoclassical,
    },
    CommandSpec { name: "beta-p", keys: &[("p", Kind::Real, "2.5")], run: beta_p_cmd },
    CommandSpec {
        name: "lift",
        keys: &[
            ("d", Kind::Positive, "2"),
            ("grid_level", Kind::GridLevel, "8"),
            ("seed", Kind::Seed, "42"),
            ("sample", Kind::Seed, "0"),
            ("input", Kind::File, ""),
        ],
        run: lift,
    },
    CommandSpec {
        name: "extend",
        keys: &[
            ("d", Kind::Positive, "2"),
            ("k", Kind::Positive, "4"),
            ("grid_level", Kind::GridLevel, "6"),
            ("seed", Kind::Seed, "42"),
            ("sample", Kind::Seed, "0"),
            ("input", Kind::File, ""),
        ],
        run: extend,
    },
    CommandSpec {
        name: "a1-diagnostic",
        keys: &[
            ("d", Kind::Positive, "2"),
            ("p", Kind::RoughP, "2.5"),
            ("grid_level", Kind::GridLevel, "8"),
            ("m_min", Kind::Count, "3"),
            ("m_max", Kind::Count, "7"),
            ("n", Kind::Positive, "200"),
            ("seed", Kind::Seed, "42"),
        ],
        run: a1,
    },
    CommandSpec { name: "solve-rde", keys: RDE_KEYS, run: solve_rde },
    CommandSpec {
        name: "series-jacobian",
        keys: &[
            ("field", Kind::Field, "tanh"),
            ("d", Kind::Positive, "2"),
            ("e", Kind::Positive, "2"),
            ("a", Kind::Reals, "0,0"),
            ("grid_level", Kind::GridLevel, "8"),
            ("substeps", Kind::Positive, "8"),
            ("seed", Kind::Seed, "42"),
            ("sample", Kind::Seed, "0"),
            ("k", Kind::Positive, "40"),
            ("tol", Kind::Real, "1e-14"),
        ],
        run: series,
    },
    CommandSpec {
        name: "w-moment-scan",
        keys: &[
            ("d", Kind::Positive, "2"),
            ("p", Kind::RoughP, "2.5"),
            ("grid_level", Kind::GridLevel, "8"),
            ("n", Kind::Positive, "2000"),
            ("seed", Kind::Seed, "42"),
            ("r_grid", Kind::Reals, "2,4,8,16,32"),
        ],
        run: w_scan,
    },
    CommandSpec {
        name: "decay-scan",
        keys: &[
            ("field", Kind::Field, "tanh"),
            ("d", Kind::Positive, "1"),
            ("e", Kind::Positive, "1"),
            ("a", Kind::Reals, "0"),
            ("p", Kind::RoughP, "2.5"),
            ("k", Kind::Positive, "8"),
            ("r", Kind::Real, "2"),
            ("n", Kind::Positive, "400"),
            ("seed", Kind::Seed, "42"),
            ("grid_level", Kind::GridLevel, "6"),
            ("substeps", Kind::Positive, "2"),
            ("pathwise_d", Kind::Positive, "2"),
            ("pathwise_n", Kind::Count, "50"),
            ("pairs", Kind::Positive, "200"),
        ],
        run: decay,
    },
    CommandSpec {
        name: "jacobian-moment-scan",
        keys: &[
            ("field", Kind::Field, "tanh"),
            ("d", Kind::Positive, "2"),
            ("e", Kind::Positive, "2"),
            ("a", Kind::Reals, "0,0"),
            ("p", Kind::RoughP, "2.5"),
            ("r_grid", Kind::Reals, "1,2,4,8"),
            ("n_list", Kind::Counts, "500,2000,8000"),
            ("seed", Kind::Seed, "42"),
            ("grid_level", Kind::GridLevel, "8"),
            ("substeps", Kind::Positive, "4"),
        ],
        run: jacobian_scan,
    },
    CommandSpec {
        name: "fernique-fit",
        keys: &[
            ("n", Kind::Positive, "100000"),
            ("seed", Kind::Seed, "42"),
            ("r_grid", Kind::Reals, "2,4,8,16,32,64"),
            ("eta_grid", Kind::Reals, "2,2.25,2.5,2.75,3,3.25,3.5"),
        ],
        run: fernique,
    },
    CommandSpec {
        name: "besov-check",
        keys: &[
            ("d", Kind::Positive, "1"),
            ("p", Kind::RoughP, "2.5"),
            ("m", Kind::Real, "4"),
            ("grid_level", Kind::GridLevel, "8"),
            ("n", Kind::Positive, "100"),
            ("seed", Kind::Seed, "42"),
        ],
        run: besov,
    },
];

const RDE_KEYS: &[KeySpec] = &[
    ("field", Kind::Field, "tanh"),
    ("d", Kind::Positive, "2"),
    ("e", Kind::Positive, "2"),
    ("a", Kind::Reals, "0,0"),
    ("grid_level", Kind::GridLevel, "8"),
    ("substeps", Kind::Positive, "8"),
    ("seed", Kind::Seed, "42"),
    ("sample", Kind::Seed, "0"),
];

pub fn find(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

fn field(s: &Settings) -> Result<(Box<dyn VectorField>, Vec<f64>)> {
    let (e, d): (usize, usize) = (s.get("e")?, s.get("d")?);
    let vf = s.get::<FieldKind>("field")?.build(e, d)?;
    let a: Vec<f64> = s.list("a")?;
    if a.len() != e {
        return Err(Error::Config(format!("initial value has {} entries, e = {e}", a.len())));
    }
    Ok((vf, a))
}

fn brownian(s: &Settings) -> Result<SampledPath> {
    Ok(BrownianSampler::standard(s.get("d")?, s.get("grid_level")?, s.get("seed")?, 0)?.sample(s.get("sample")?))
}

fn open(path: &str) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(Path::new(path))?))
}

fn scan_series(scan: &MomentScan, label: &str) -> Series {
    Series { label: label.into(), points: scan.r_grid.iter().copied().zip(scan.estimates.iter().copied()).collect() }
}

fn check_chen(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (d, k, n): (usize, usize, u64) = (s.get("d")?, s.get("k")?, s.get("n")?);
    let seed: u64 = s.get("seed")?;
    let sampler = BrownianSampler::standard(d, s.get("grid_level")?, seed, 0)?;
    let intervals = sampler.grid().intervals();
    if intervals < 2 {
        return Err(Error::Config("check-chen needs grid level ≥ 1".into()));
    }
    let mut rows = Vec::with_capacity(n as usize);
    let mut worst = 0.0f64;
    for i in 0..n {
        let tower = lift_piecewise_linear(&sampler.sample(i), k)?;
        let mut rng = sample_rng(seed, 2, i);
        let u = rng.random_range(1..intervals);
        let a = rng.random_range(0..u);
        let b = rng.random_range(u + 1..=intervals);
        let err = chen_mul(&tower.value(a, u)?, &tower.value(u, b)?)?.max_rel_diff(&tower.value(a, b)?);
        worst = worst.max(err);
        rows.push(vec![i as f64, a as f64, u as f64, b as f64, err]);
    }
    out.write_with("chen.csv", |w| write_table(&["sample", "s", "u", "t", "max_rel_error"], &rows, w))?;
    Ok(Verdict::new(worst <= CHEN_TOL, format!("max relative Chen error {worst:.3e} over {n} lifts (tol {CHEN_TOL:e})")))
}

fn check_neoclassical(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let r = neoclassical_check(s.get("p")?, s.get("k")?, s.get("a")?, s.get("b")?)?;
    let row = vec![r.p, r.k as f64, r.a, r.b, r.lhs, r.rhs_p_squared, r.rhs_p_sharp];
    out.write_with("neoclassical.csv", |w| {
        write_table(&["p", "k", "a", "b", "lhs", "rhs_p_squared", "rhs_p_sharp"], &[row], w)
    })?;
    let gap = (r.rhs_p_sharp - r.lhs) / r.rhs_p_sharp.max(f64::MIN_POSITIVE);
    Ok(Verdict::new(
        r.holds_p_squared && r.holds_p_sharp,
        format!("lhs {} vs p·rhs {} (relative gap {gap:.3e}), p²·rhs {}", fmt_f64(r.lhs), fmt_f64(r.rhs_p_sharp), fmt_f64(r.rhs_p_squared)),
    ))
}

fn beta_p_cmd(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let b = beta_p(s.get("p")?)?;
    out.write_with("beta_p.csv", |w| {
        write_table(&["p", "beta_p", "truncation_terms", "tail_bound"], &[vec![b.p, b.value, b.truncation_terms as f64, b.tail_bound]], w)
    })?;
    println!("beta_p({}) = {:.10}", b.p, b.value);
    Ok(Verdict::new(true, format!("beta_p = {:.6} ({} direct terms, tail bound {:.1e})", b.value, b.truncation_terms, b.tail_bound)))
}

/// Largest deviation of `Sym(X²)` from `½ X¹⊗X¹` over `(0, 1)`, relative to `max(|X¹|², 1)`.
fn geometric_defect(x: &Level2RoughPath) -> Result<f64> {
    let (x1, x2) = x.increment(0, x.grid().intervals())?;
    let d = x.dim();
    let scale = x1.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let sym = 0.5 * (x2[i * d + j] + x2[j * d + i]);
            worst = worst.max((sym - 0.5 * x1[i] * x1[j]).abs() / scale);
        }
    }
    Ok(worst)
}

fn lift(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let x = match s.raw("input") {
        "" => brownian(s)?,
        path => read_path_csv(open(path)?)?,
    };
    let lifted = Level2RoughPath::lift(&x);
    out.write_with("path.csv", |w| write_path_csv(&x, w))?;
    out.write_with("lift.csv", |w| write_level2_atoms(&lifted, w))?;
    let defect = geometric_defect(&lifted)?;
    Ok(Verdict::new(defect <= 1e-12, format!("lifted {} intervals, d = {}; geometric defect {defect:.3e}", x.grid().intervals(), x.dim())))
}

fn extend(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let d: usize = s.get("d")?;
    let x = match s.raw("input") {
        "" => Level2RoughPath::lift(&brownian(s)?),
        path => read_level2_atoms(open(path)?, d)?,
    };
    let tower = lyons_extend(&x, s.get("k")?)?;
    out.write_with("extend.csv", |w| write_tower_atoms(&tower, w))?;
    let n = tower.grid().intervals();
    let whole = tower.value(0, n)?;
    let mid = n / 2;
    let chen = if mid > 0 { chen_mul(&tower.value(0, mid)?, &tower.value(mid, n)?)?.max_rel_diff(&whole) } else { 0.0 };
    let (x1, x2) = x.increment(0, n)?;
    let low: f64 = whole.level(1).iter().zip(&x1).chain(whole.level(2).iter().zip(&x2)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Verdict::new(
        chen <= CHEN_TOL && low <= CHEN_TOL,
        format!("depth {} over {n} intervals: Chen error {chen:.3e}, levels 1-2 deviation {low:.3e}", tower.depth()),
    ))
}

fn a1(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (m_min, m_max): (u32, u32) = (s.get("m_min")?, s.get("m_max")?);
    let fine: u32 = s.get("grid_level")?;
    if !(m_min < m_max && m_max <= fine) {
        return Err(Error::Config(format!("need m_min < m_max ≤ grid_level, got {m_min}, {m_max}, {fine}")));
    }
    let mut rows = Vec::new();
    for m in m_min..=m_max {
        let r = a1_diagnostic(s.get("d")?, m, fine, s.get("p")?, s.get("n")?, s.get("seed")?)?;
        rows.push(vec![m as f64, r.level1, r.level2]);
    }
    out.write_with("a1.csv", |w| write_table(&["m", "level1", "level2"], &rows, w))?;
    let series = [1usize, 2].map(|c| Series { label: format!("level {c}"), points: rows.iter().map(|r| (r[0], r[c])).collect() });
    out.write_str("a1.svg", &line_plot("Hölder distance to the fine lift", "m", "mean distance", &series, Scale::Linear, Scale::Log))?;
    let decreasing = rows.windows(2).all(|w| w[1][1] < w[0][1] && w[1][2] < w[0][2]);
    Ok(Verdict::new(decreasing, format!("distances over m = {m_min}..{m_max} strictly decreasing: {decreasing}")))
}

fn solve_rde(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (vf, a) = field(s)?;
    let x = brownian(s)?;
    let substeps = s.get("substeps")?;
    let sol = solve_along_pl(vf.as_ref(), &a, &x, substeps)?;
    out.write_with("rde.csv", |w| sol.write_csv(w))?;
    let probes: Vec<Vec<f64>> = (0..4).map(|i| (0..a.len()).map(|l| 0.5 * (i as f64 - 1.5) + 0.3 * l as f64).collect()).collect();
    let check = vector_field_check(vf.as_ref(), &probes, 1e-6)?;
    let mut h = vec![0.0; a.len()];
    h[0] = 1.0;
    let probe = flow_derivative_probe(vf.as_ref(), &a, &h, &[1e-2, 1e-3, 1e-4], &x, substeps)?;
    let rows: Vec<Vec<f64>> = probe.eps.iter().zip(&probe.errors).map(|(e, r)| vec![*e, *r]).collect();
    out.write_with("probe.csv", |w| write_table(&["eps", "error"], &rows, w))?;
    let max_err = probe.errors.iter().copied().fold(0.0, f64::max);
    let order_ok = max_err <= 1e-8 || probe.order.is_some_and(|o| (0.8..=1.2).contains(&o));
    let order = probe.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
    Ok(Verdict::new(
        check.passed && order_ok,
        format!("field '{}': gradient check {:.2e}, flow probe order {order} (max error {max_err:.2e})", vf.name(), check.max_rel_error),
    ))
}

fn series(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (vf, a) = field(s)?;
    let sol = solve_along_pl(vf.as_ref(), &a, &brownian(s)?, s.get("substeps")?)?;
    let tower = m_rough_path(&sol, s.get("k")?)?;
    let n = sol.grid().intervals();
    let sj = series_jacobian(&tower, 0, n, s.get("tol")?)?;
    let ode = sol.flow_derivative(n);
    let e = ode.nrows();
    let mut rows = Vec::new();
    for i in 0..e {
        for j in 0..e {
            rows.push(vec![(i + 1) as f64, (j + 1) as f64, sj.matrix[(i, j)], ode[(i, j)]]);
        }
    }
    out.write_with("series.csv", |w| write_table(&["row", "col", "series", "ode"], &rows, w))?;
    let rel = (&sj.matrix - &ode).abs().max() / ode.abs().max().max(1.0);
    Ok(Verdict::new(
        rel <= SERIES_ODE_TOL,
        format!("series with K* = {} (tail {:.1e}) vs ODE: relative difference {rel:.3e} (tol {SERIES_ODE_TOL:e})", sj.levels, sj.tail),
    ))
}

fn w_scan(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let r_grid: Vec<f64> = s.list("r_grid")?;
    let rep = w_moment_scan(s.get("d")?, s.get("p")?, s.get("grid_level")?, &r_grid, s.get("n")?, s.get("seed")?)?;
    let mut rows = rep.level1.rows("w_moment_scan");
    rows.extend(rep.level2.rows("w_moment_scan"));
    out.write_with("results.csv", |w| write_results(&rows, w))?;
    let slopes = vec![
        vec![1.0, rep.slope1, rep.residual1, W_SLOPE_BANDS[0].0, W_SLOPE_BANDS[0].1],
        vec![2.0, rep.slope2, rep.residual2, W_SLOPE_BANDS[1].0, W_SLOPE_BANDS[1].1],
    ];
    out.write_with("slopes.csv", |w| write_table(&["level", "slope", "residual", "band_low", "band_high"], &slopes, w))?;
    let series = [scan_series(&rep.level1, "‖W¹‖"), scan_series(&rep.level2, "‖W²‖")];
    out.write_str("w_moment_scan.svg", &line_plot("L^r norms of Hölder norms", "r", "estimate", &series, Scale::Log, Scale::Log))?;
    Ok(Verdict::new(rep.passed, format!("slopes {:.3} (band {:?}), {:.3} (band {:?})", rep.slope1, W_SLOPE_BANDS[0], rep.slope2, W_SLOPE_BANDS[1])))
}

fn decay(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (vf, a) = field(s)?;
    let cfg = DecayScanConfig {
        p: s.get("p")?,
        depth: s.get("k")?,
        r: s.get("r")?,
        n_samples: s.get("n")?,
        seed: s.get("seed")?,
        grid_level: s.get("grid_level")?,
        substeps: s.get("substeps")?,
    };
    let rep = factorial_decay_scan(vf.as_ref(), &a, &cfg)?;
    let rows: Vec<Vec<f64>> =
        (0..rep.ratios.len()).map(|i| vec![(i + 1) as f64, rep.estimates[i], rep.ci_low[i], rep.ci_high[i], rep.ratios[i]]).collect();
    out.write_with("decay.csv", |w| write_table(&["k", "estimate", "ci_low", "ci_high", "ratio"], &rows, w))?;
    let series = [Series { label: "normalised ratio".into(), points: rows.iter().map(|r| (r[0], r[4])).collect() }];
    out.write_str("decay.svg", &line_plot("Factorial decay of iterated integrals", "k", "ratio", &series, Scale::Linear, Scale::Log))?;

    let sampler = BrownianSampler::standard(s.get("pathwise_d")?, cfg.grid_level, cfg.seed, 3)?;
    let (n_paths, n_pairs): (u64, usize) = (s.get("pathwise_n")?, s.get("pairs")?);
    let mut pathwise = Vec::new();
    for i in 0..n_paths {
        let pairs = random_grid_pairs(sampler.grid().intervals(), n_pairs, cfg.seed.wrapping_add(i));
        let r = deterministic_decay_check(&sampler.sample(i), cfg.p, cfg.depth.max(3), &pairs)?;
        pathwise.push(vec![i as f64, r.c, r.checked as f64, r.violations as f64, r.worst_ratio]);
    }
    out.write_with("pathwise_decay.csv", |w| write_table(&["sample", "c", "checked", "violations", "worst_ratio"], &pathwise, w))?;
    let violations: f64 = pathwise.iter().map(|r| r[3]).sum();
    let worst = pathwise.iter().map(|r| r[4]).fold(0.0, f64::max);
    Ok(Verdict::new(
        rep.passed && violations == 0.0,
        format!(
            "c = {:.4e}, α = {:.4}, max ratio {:.4} over k = 1..{}; pathwise: {violations} violations on {n_paths} paths (worst ratio {worst:.3e})",
            rep.c, rep.alpha, rep.max_ratio, cfg.depth
        ),
    ))
}

fn jacobian_scan(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (vf, a) = field(s)?;
    let cfg = JacobianMomentConfig {
        p: s.get("p")?,
        r_grid: s.list("r_grid")?,
        n_samples_list: s.list("n_list")?,
        seed: s.get("seed")?,
        grid_level: s.get("grid_level")?,
        substeps: s.get("substeps")?,
        regression_r: 2.0,
    };
    let rep = jacobian_moment_scan(vf.as_ref(), &a, &cfg)?;
    let rows: Vec<ResultRow> = rep.scans.iter().flat_map(|sc| sc.rows(&format!("jacobian_n{}", sc.sample_count))).collect();
    out.write_with("results.csv", |w| write_results(&rows, w))?;
    let grid = DyadicGrid::new(cfg.grid_level)?;
    let inc: Vec<Vec<f64>> = rep
        .pairs
        .iter()
        .zip(&rep.pair_estimates)
        .map(|(&(a, b), &v)| vec![grid.time(a), grid.time(b), grid.time(b) - grid.time(a), v])
        .collect();
    out.write_with("increments.csv", |w| write_table(&["s", "t", "lag", "l2_estimate"], &inc, w))?;
    let series: Vec<Series> = rep.scans.iter().map(|sc| scan_series(sc, &format!("n = {}", sc.sample_count))).collect();
    out.write_str("jacobian_moment_scan.svg", &line_plot("L^r norms of ‖J¹‖", "r", "estimate", &series, Scale::Log, Scale::Log))?;
    Ok(Verdict::new(
        rep.passed,
        format!("finite {}, CI-stable {}, increment slope {:.3} (min {})", rep.finite, rep.stable, rep.increment_slope, crate::moments::INCREMENT_SLOPE_MIN),
    ))
}

fn fernique(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let (n, seed): (usize, u64) = (s.get("n")?, s.get("seed")?);
    let (r_grid, eta_grid): (Vec<f64>, Vec<f64>) = (s.list("r_grid")?, s.list("eta_grid")?);
    let samples = sample_functional(|rng| rng.sample::<f64, _>(StandardNormal).abs(), n, seed);
    let growth = growth_slope_from_samples("abs_normal", &samples, &r_grid, seed)?;
    let tail = fernique_tail_fit(&samples, &eta_grid)?;
    out.write_with("results.csv", |w| write_results(&growth.scan.rows("fernique_fit"), w))?;
    let tail_rows: Vec<Vec<f64>> = eta_grid
        .iter()
        .map(|&eta| {
            let count = samples.iter().filter(|&&v| v >= eta).count();
            vec![eta, count as f64, count as f64 / n as f64, f64::from(u8::from(tail.used.contains(&eta)))]
        })
        .collect();
    out.write_with("tail.csv", |w| write_table(&["eta", "exceedances", "survival", "used"], &tail_rows, w))?;
    out.write_str("fernique_fit.svg", &line_plot("L^r norms of |N|", "r", "estimate", &[scan_series(&growth.scan, "|N|")], Scale::Log, Scale::Log))?;
    let inside = |v: f64, band: (f64, f64)| v >= band.0 && v <= band.1;
    Ok(Verdict::new(
        inside(growth.slope, GROWTH_BAND) && inside(tail.beta_hat, TAIL_BAND),
        format!("growth slope {:.3} (band {GROWTH_BAND:?}), tail β̂ {:.3} (band {TAIL_BAND:?})", growth.slope, tail.beta_hat),
    ))
}

fn besov(s: &Settings, out: &mut Output) -> Result<Verdict> {
    let level: u32 = s.get("grid_level")?;
    let (p, m): (f64, f64) = (s.get("p")?, s.get("m")?);
    let line = SampledPath::from_fn(DyadicGrid::new(level)?, 1, |t| vec![t])?;
    let line_norm = besov_norm(&line, 4.0, 0.5)?.value;
    let line_err = (line_norm / 0.5f64.powf(0.25) - 1.0).abs();
    let sampler = BrownianSampler::standard(s.get("d")?, level, s.get("seed")?, 0)?;
    let paths: Vec<SampledPath> = (0..s.get::<u64>("n")?).map(|i| sampler.sample(i)).collect();
    let fit = embedding_fit(&paths, m, p)?;
    let rows: Vec<Vec<f64>> = fit.ratios.iter().enumerate().map(|(i, &r)| vec![i as f64, r]).collect();
    out.write_with("besov.csv", |w| write_table(&["sample", "holder_over_besov"], &rows, w))?;
    Ok(Verdict::new(
        line_err <= BESOV_LINE_TOL && fit.spread <= EMBEDDING_SPREAD_MAX,
        format!("line norm {line_norm:.5} (error {:.2}%); fitted C = {:.4}, spread {:.3} (max {EMBEDDING_SPREAD_MAX})", 100.0 * line_err, fit.constant, fit.spread),
    ))
}
