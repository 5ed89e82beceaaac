//! CSV writers shared by the library and the command-line runner.
//!
//! Floats are written with 17 significant digits, so every value round-trips exactly.

use std::io::Write;

use crate::error::Result;
use crate::rough_path::{Atom, Level2RoughPath, RoughPathTower};

/// Shortest scientific format that round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Multi-index of flat offset `flat` at level `k` over `R^d`, first index most significant,
/// written 1-based and joined with `.` (level 0 is the empty string).
pub fn multi_index_label(flat: usize, d: usize, k: usize) -> String {
    let mut idx = vec![0; k];
    let mut rest = flat;
    for slot in idx.iter_mut().rev() {
        *slot = rest % d + 1;
        rest /= d;
    }
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

fn write_atom_rows<W: Write>(out: &mut W, interval: usize, level: usize, d: usize, coeffs: &[f64]) -> Result<()> {
    for (flat, v) in coeffs.iter().enumerate() {
        writeln!(out, "{interval},{level},{},{}", multi_index_label(flat, d, level), fmt_f64(*v))?;
    }
    Ok(())
}

/// Atom dump of a level-2 rough path: `interval_index,level,multi_index,value`.
pub fn write_level2_atoms<W: Write>(x: &Level2RoughPath, mut out: W) -> Result<()> {
    writeln!(out, "interval_index,level,multi_index,value")?;
    let d = x.dim();
    for i in 0..x.grid().intervals() {
        write_atom_rows(&mut out, i, 1, d, x.atom1(i))?;
        write_atom_rows(&mut out, i, 2, d, x.atom2(i))?;
    }
    Ok(())
}

/// Atom dump of a tower, levels `1..=depth` per finest interval.
pub fn write_tower_atoms<W: Write>(x: &RoughPathTower, mut out: W) -> Result<()> {
    writeln!(out, "interval_index,level,multi_index,value")?;
    let d = x.dim();
    for (i, atom) in x.atoms().iter().enumerate() {
        let t = match atom {
            Atom::Levels(t) => t.truncate_to(x.depth())?,
            _ => x.value(i, i + 1)?,
        };
        for k in 1..=x.depth() {
            write_atom_rows(&mut out, i, k, d, t.level(k))?;
        }
    }
    Ok(())
}

/// Reads a level-2 atom dump back; the grid is inferred from the interval count.
pub fn read_level2_atoms<R: std::io::BufRead>(input: R, dim: usize) -> Result<Level2RoughPath> {
    use crate::error::Error;
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Config(format!("line {}: expected 4 fields", n + 1)));
        }
        let parse_err = |what: &str| Error::Config(format!("line {}: bad {what}", n + 1));
        let i: usize = f[0].trim().parse().map_err(|_| parse_err("interval_index"))?;
        let k: usize = f[1].trim().parse().map_err(|_| parse_err("level"))?;
        let v: f64 = f[3].trim().parse().map_err(|_| parse_err("value"))?;
        rows.push((i, k, v));
    }
    let intervals = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    if !intervals.is_power_of_two() {
        return Err(Error::Config(format!("{intervals} intervals is not a dyadic grid")));
    }
    let grid = crate::path::DyadicGrid::new(intervals.trailing_zeros())?;
    let mut a1 = Vec::with_capacity(intervals * dim);
    let mut a2 = Vec::with_capacity(intervals * dim * dim);
    for (_, k, v) in rows {
        match k {
            1 => a1.push(v),
            2 => a2.push(v),
            _ => {}
        }
    }
    Level2RoughPath::from_atoms(grid, dim, a1, a2)
}

/// One row of a moment results file.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub functional: String,
    pub r: f64,
    pub n_samples: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

pub const RESULTS_HEADER: &str = "experiment_id,functional,r,n_samples,estimate,ci_low,ci_high,seed";

pub fn write_results<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment_id,
            r.functional,
            fmt_f64(r.r),
            r.n_samples,
            fmt_f64(r.estimate),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            r.seed
        )?;
    }
    Ok(())
}

/// Generic numeric table with a header line.
pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<f64>], mut out: W) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{DyadicGrid, SampledPath};
    use crate::rough_path::lift_piecewise_linear;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn multi_index_order() {
        assert_eq!(multi_index_label(0, 2, 2), "1.1");
        assert_eq!(multi_index_label(1, 2, 2), "1.2");
        assert_eq!(multi_index_label(2, 2, 2), "2.1");
        assert_eq!(multi_index_label(5, 3, 2), "2.3");
    }

    #[test]
    fn level2_dump_round_trips() {
        let grid = DyadicGrid::new(3).unwrap();
        let x = SampledPath::from_fn(grid, 2, |t| vec![t.sin(), t * t]).unwrap();
        let lifted = Level2RoughPath::lift(&x);
        let mut buf = Vec::new();
        write_level2_atoms(&lifted, &mut buf).unwrap();
        let back = read_level2_atoms(&buf[..], 2).unwrap();
        assert_eq!(back, lifted);
    }

    #[test]
    fn tower_dump_has_all_levels() {
        let grid = DyadicGrid::new(2).unwrap();
        let x = SampledPath::from_fn(grid, 2, |t| vec![t, -t]).unwrap();
        let tower = lift_piecewise_linear(&x, 3).unwrap();
        let mut buf = Vec::new();
        write_tower_atoms(&tower, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // 4 intervals × (2 + 4 + 8) coefficients plus header
        assert_eq!(text.lines().count(), 1 + 4 * 14);
    }
}
