//! Batch experiment runner: one subcommand per verification, flat `key = value` config
//! files with flag overrides, CSV and SVG outputs, and a one-line verdict.
//!
//! Exit codes: 0 on PASS, 2 on a threshold failure, 1 on usage or domain errors.

mod commands;
mod config;
mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{find, CommandSpec, Output, Verdict, COMMANDS};
pub use config::{canonical_key, parse_config, Kind, Settings, MAX_CLI_GRID_LEVEL};
pub use svg::{line_plot, Scale, Series};

use crate::error::{Error, Result};

/// Environment variable consulted when neither the flag nor the config names an output directory.
pub const OUTPUT_DIR_ENV: &str = "ROUGHDERIV_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "roughderiv", version, about = "Level-2 rough paths, RDE Jacobians and moment checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Chen identity on random piecewise-linear lifts.
    CheckChen(Params),
    /// Neo-classical inequality at one (p, k, a, b).
    CheckNeoclassical(Params),
    /// The constant β_p.
    BetaP(Params),
    /// Level-2 lift of a path (Brownian sample or CSV input).
    Lift(Params),
    /// Lyons extension of a level-2 rough path.
    Extend(Params),
    /// Hölder distances between dyadic lifts and the fine lift.
    #[command(name = "a1-diagnostic")]
    A1Diagnostic(Params),
    /// Joint (Y, J, M) solve along a Brownian sample, with derivative checks.
    SolveRde(Params),
    /// Series Jacobian against the ODE Jacobian.
    SeriesJacobian(Params),
    /// Moment growth of the Hölder norms of Brownian rough paths.
    WMomentScan(Params),
    /// Factorial decay of the iterated integrals of M.
    DecayScan(Params),
    /// Moments of the Jacobian's Hölder norm and increment scaling.
    JacobianMomentScan(Params),
    /// Moment growth and tail fit for |standard normal|.
    FerniqueFit(Params),
    /// Besov norm of a line and the Hölder/Besov embedding ratio.
    BesovCheck(Params),
}

impl Cmd {
    fn split(self) -> (&'static str, Params) {
        match self {
            Cmd::CheckChen(p) => ("check-chen", p),
            Cmd::CheckNeoclassical(p) => ("check-neoclassical", p),
            Cmd::BetaP(p) => ("beta-p", p),
            Cmd::Lift(p) => ("lift", p),
            Cmd::Extend(p) => ("extend", p),
            Cmd::A1Diagnostic(p) => ("a1-diagnostic", p),
            Cmd::SolveRde(p) => ("solve-rde", p),
            Cmd::SeriesJacobian(p) => ("series-jacobian", p),
            Cmd::WMomentScan(p) => ("w-moment-scan", p),
            Cmd::DecayScan(p) => ("decay-scan", p),
            Cmd::JacobianMomentScan(p) => ("jacobian-moment-scan", p),
            Cmd::FerniqueFit(p) => ("fernique-fit", p),
            Cmd::BesovCheck(p) => ("besov-check", p),
        }
    }
}

/// Flags shared by every subcommand. Keys a subcommand does not take are rejected.
#[derive(Args, Debug, Default, Clone)]
pub struct Params {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Validate the config and print the resolved plan without computing.
    #[arg(long)]
    pub dry_run: bool,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub e: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long, short = 'K')]
    pub k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long, alias = "n-samples")]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub sample: Option<String>,
    #[arg(long)]
    pub substeps: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub grid_level: Option<String>,
    #[arg(long)]
    pub r_grid: Option<String>,
    #[arg(long)]
    pub n_list: Option<String>,
    #[arg(long)]
    pub eta_grid: Option<String>,
    #[arg(long)]
    pub m_min: Option<String>,
    #[arg(long)]
    pub m_max: Option<String>,
    #[arg(long)]
    pub pathwise_d: Option<String>,
    #[arg(long)]
    pub pathwise_n: Option<String>,
    #[arg(long)]
    pub pairs: Option<String>,
}

impl Params {
    fn flags(&self) -> Vec<(String, String)> {
        let named = [
            ("d", &self.d),
            ("e", &self.e),
            ("p", &self.p),
            ("k", &self.k),
            ("a", &self.a),
            ("b", &self.b),
            ("r", &self.r),
            ("m", &self.m),
            ("n", &self.n),
            ("seed", &self.seed),
            ("field", &self.field),
            ("input", &self.input),
            ("sample", &self.sample),
            ("substeps", &self.substeps),
            ("tol", &self.tol),
            ("grid_level", &self.grid_level),
            ("r_grid", &self.r_grid),
            ("n_list", &self.n_list),
            ("eta_grid", &self.eta_grid),
            ("m_min", &self.m_min),
            ("m_max", &self.m_max),
            ("pathwise_d", &self.pathwise_d),
            ("pathwise_n", &self.pathwise_n),
            ("pairs", &self.pairs),
        ];
        named.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }
}

/// Outcome of [`execute`].
#[derive(Debug)]
pub enum Outcome {
    /// `--dry-run`: the resolved `key = value` plan.
    Plan(String),
    Done { verdict: Verdict, written: Vec<PathBuf> },
}

fn output_dir(params: &Params, file: &BTreeMap<String, String>) -> PathBuf {
    params
        .output_dir
        .clone()
        .or_else(|| file.get("output_dir").map(PathBuf::from))
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Resolves and validates the settings of `command`, then runs it (or only plans it).
pub fn execute(command: &str, params: &Params) -> Result<Outcome> {
    let spec = find(command).ok_or_else(|| Error::Config(format!("unknown subcommand '{command}'")))?;
    let file = match &params.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let settings = Settings::resolve(command, spec.keys, &file, &params.flags())?;
    let dir = output_dir(params, &file);
    if params.dry_run {
        let mut plan = format!("subcommand = {command}\noutput_dir = {}\n", dir.display());
        plan.push_str(&settings.plan());
        return Ok(Outcome::Plan(plan));
    }
    let mut out = Output::new(dir);
    let verdict = match params.workers {
        Some(0) => return Err(Error::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| (spec.run)(&settings, &mut out))?,
        None => (spec.run)(&settings, &mut out)?,
    };
    Ok(Outcome::Done { verdict, written: out.written })
}

/// Parses `args` (including the program name), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, params) = cli.command.split();
    match execute(name, &params) {
        Ok(Outcome::Plan(plan)) => {
            print!("{plan}");
            0
        }
        Ok(Outcome::Done { verdict, written }) => {
            for path in &written {
                log::info!("wrote {}", path.display());
            }
            println!("{} {name}: {}", if verdict.pass { "PASS" } else { "FAIL" }, verdict.summary);
            if verdict.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
