//! Rough differential equations along piecewise-linear drivers, together with the
//! derivative (Jacobian) equation and the matrix-valued rough integral `M`.
//!
//! For a driver `x` and vector field `σ` the solver integrates the joint system
//!
//! ```text
//! dy = σ(a + y) dx
//! dj = dM (Id + j)
//! dM = ∇σ(a + y)⟨·, dx⟩
//! ```
//!
//! from `y = j = M = 0`, so the flow derivative at time `t` is `Id + j_t`.

mod fields;
mod series;

pub use fields::{
    vector_field_check, ConstantField, FieldCheckReport, FieldKind, LinearField, TanhField, VectorField,
    FIELD_CHECK_TOL,
};
pub use series::{m_chord_tower, m_level2, m_rough_path, series_jacobian, SeriesJacobian, SERIES_FIT_P};

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::io::fmt_f64;
use crate::path::{DyadicGrid, SampledPath};

/// Solution of the joint system on the driver's grid.
#[derive(Clone, Debug)]
pub struct RdeSolution {
    grid: DyadicGrid,
    e: usize,
    initial: Vec<f64>,
    substeps: usize,
    y: Vec<f64>,
    j: Vec<f64>,
    m: Vec<f64>,
    m_fine: Vec<f64>,
    m_slopes: Vec<f64>,
}

impl RdeSolution {
    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.e
    }

    pub fn initial_value(&self) -> &[f64] {
        &self.initial
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Shifted solution `Y¹`, started at 0.
    pub fn y1(&self) -> SampledPath {
        SampledPath::new(self.grid, self.e, self.y.clone()).expect("finite solution")
    }

    /// `J¹` as a path in `R^{e^2}` (row-major matrices).
    pub fn j1(&self) -> SampledPath {
        SampledPath::new(self.grid, self.e * self.e, self.j.clone()).expect("finite solution")
    }

    /// `M` as a path in `R^{e^2}`.
    pub fn m1(&self) -> SampledPath {
        SampledPath::new(self.grid, self.e * self.e, self.m.clone()).expect("finite solution")
    }

    /// `M` at every substep, `grid.intervals() * substeps + 1` matrices.
    pub fn m_fine(&self) -> &[f64] {
        &self.m_fine
    }

    /// Per substep, the derivatives of `M` along the step at its start and at its end
    /// (two `e × e` matrices each, scaled to the substep's driver increment).
    pub fn m_slopes(&self) -> &[f64] {
        &self.m_slopes
    }

    /// `a + Y¹` at grid index `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        self.initial.iter().zip(&self.y[i * self.e..(i + 1) * self.e]).map(|(a, y)| a + y).collect()
    }

    /// `J¹_{0,t_i}` as a matrix.
    pub fn j_matrix(&self, i: usize) -> DMatrix<f64> {
        let e2 = self.e * self.e;
        DMatrix::from_row_slice(self.e, self.e, &self.j[i * e2..(i + 1) * e2])
    }

    /// The flow derivative `Id + J¹_{0,t_i}`.
    pub fn flow_derivative(&self, i: usize) -> DMatrix<f64> {
        self.j_matrix(i) + DMatrix::identity(self.e, self.e)
    }

    /// `J` over `(s, t)` recovered from the flow: `(Id + J¹_{0,t})(Id + J¹_{0,s})^{-1} − Id`.
    pub fn j_between(&self, s: usize, t: usize) -> Result<DMatrix<f64>> {
        let inv = self
            .flow_derivative(s)
            .try_inverse()
            .ok_or_else(|| Error::Domain(format!("flow derivative at index {s} is singular")))?;
        Ok(self.flow_derivative(t) * inv - DMatrix::identity(self.e, self.e))
    }

    /// CSV `t,y_1..y_e,j_11..j_ee,m_11..m_ee` on the grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let e = self.e;
        let mut header = vec!["t".to_string()];
        header.extend((1..=e).map(|i| format!("y_{i}")));
        for prefix in ["j", "m"] {
            for i in 1..=e {
                header.extend((1..=e).map(|k| format!("{prefix}_{i}{k}")));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        let e2 = e * e;
        for i in 0..self.grid.len() {
            let row: Vec<String> = std::iter::once(self.grid.time(i))
                .chain(self.y[i * e..(i + 1) * e].iter().copied())
                .chain(self.j[i * e2..(i + 1) * e2].iter().copied())
                .chain(self.m[i * e2..(i + 1) * e2].iter().copied())
                .map(fmt_f64)
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Rhs<'a> {
    vf: &'a dyn VectorField,
    a: &'a [f64],
    e: usize,
    d: usize,
    state: Vec<f64>,
    sigma: Vec<f64>,
    grad: Vec<f64>,
    dm: Vec<f64>,
}

impl<'a> Rhs<'a> {
    fn new(vf: &'a dyn VectorField, a: &'a [f64]) -> Self {
        let (e, d) = (vf.state_dim(), vf.driver_dim());
        Self {
            vf,
            a,
            e,
            d,
            state: vec![0.0; e],
            sigma: vec![0.0; e * d],
            grad: vec![0.0; e * e * d],
            dm: vec![0.0; e * e],
        }
    }

    /// Derivative of `z = (y, j, m)` along the driver increment `delta`.
    fn eval(&mut self, z: &[f64], delta: &[f64], out: &mut [f64]) {
        let (e, d) = (self.e, self.d);
        for l in 0..e {
            self.state[l] = self.a[l] + z[l];
        }
        self.vf.sigma(&self.state, &mut self.sigma);
        self.vf.grad_sigma(&self.state, &mut self.grad);
        for i in 0..e {
            out[i] = (0..d).map(|c| self.sigma[i * d + c] * delta[c]).sum();
            for l in 0..e {
                let base = (i * e + l) * d;
                self.dm[i * e + l] = (0..d).map(|c| self.grad[base + c] * delta[c]).sum();
            }
        }
        let j = &z[e..e + e * e];
        let (dj, dm) = out[e..].split_at_mut(e * e);
        for i in 0..e {
            for k in 0..e {
                let mut v = self.dm[i * e + k];
                for l in 0..e {
                    v += self.dm[i * e + l] * j[l * e + k];
                }
                dj[i * e + k] = v;
            }
        }
        dm.copy_from_slice(&self.dm);
    }
}

/// Integrates the joint system along the piecewise-linear interpolation of `x`, with
/// `substeps` classical Runge–Kutta steps per grid interval.
pub fn solve_along_pl(vf: &dyn VectorField, a: &[f64], x: &SampledPath, substeps: usize) -> Result<RdeSolution> {
    let (e, d) = (vf.state_dim(), vf.driver_dim());
    if a.len() != e {
        return Err(Error::Shape(format!("initial value has {} components, expected {e}", a.len())));
    }
    if x.dim() != d {
        return Err(Error::Shape(format!("driver has dimension {}, field expects {d}", x.dim())));
    }
    if substeps == 0 {
        return domain("substeps must be at least 1");
    }
    let grid = x.grid();
    let n = grid.intervals();
    let (e2, nz) = (e * e, e + 2 * e * e);
    let mut rhs = Rhs::new(vf, a);
    let mut z = vec![0.0; nz];
    let mut y = vec![0.0; (n + 1) * e];
    let mut j = vec![0.0; (n + 1) * e2];
    let mut m = vec![0.0; (n + 1) * e2];
    let mut m_fine = vec![0.0; (n * substeps + 1) * e2];
    let mut m_slopes = vec![0.0; n * substeps * 2 * e2];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; nz], vec![0.0; nz], vec![0.0; nz], vec![0.0; nz], vec![0.0; nz]);
    let inv = 1.0 / substeps as f64;
    for i in 0..n {
        let delta: Vec<f64> = x.increment(i, i + 1).iter().map(|v| v * inv).collect();
        rhs.eval(&z, &delta, &mut k1);
        for sub in 0..substeps {
            for q in 0..nz {
                tmp[q] = z[q] + 0.5 * k1[q];
            }
            rhs.eval(&tmp, &delta, &mut k2);
            for q in 0..nz {
                tmp[q] = z[q] + 0.5 * k2[q];
            }
            rhs.eval(&tmp, &delta, &mut k3);
            for q in 0..nz {
                tmp[q] = z[q] + k3[q];
            }
            rhs.eval(&tmp, &delta, &mut k4);
            for q in 0..nz {
                z[q] += (k1[q] + 2.0 * (k2[q] + k3[q]) + k4[q]) / 6.0;
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { time: grid.time(i) + (sub + 1) as f64 * inv * grid.spacing() });
            }
            let f = i * substeps + sub;
            m_fine[(f + 1) * e2..(f + 2) * e2].copy_from_slice(&z[e + e2..]);
            // the slope at the end of this substep is the first stage of the next one
            m_slopes[2 * f * e2..(2 * f + 1) * e2].copy_from_slice(&k1[e + e2..]);
            rhs.eval(&z, &delta, &mut k1);
            m_slopes[(2 * f + 1) * e2..(2 * f + 2) * e2].copy_from_slice(&k1[e + e2..]);
        }
        y[(i + 1) * e..(i + 2) * e].copy_from_slice(&z[..e]);
        j[(i + 1) * e2..(i + 2) * e2].copy_from_slice(&z[e..e + e2]);
        m[(i + 1) * e2..(i + 2) * e2].copy_from_slice(&z[e + e2..]);
    }
    Ok(RdeSolution { grid, e, initial: a.to_vec(), substeps, y, j, m, m_fine, m_slopes })
}

/// Finite-difference check of the flow derivative in direction `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub eps: Vec<f64>,
    /// `max_t ‖(state(a + εh)_t − state(a)_t)/ε − (Id + J¹_{0,t}) h‖` per `ε`.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log ε`; `None` if an error is exactly 0
    /// or fewer than two steps were given.
    pub order: Option<f64>,
}

pub fn flow_derivative_probe(
    vf: &dyn VectorField,
    a: &[f64],
    h: &[f64],
    eps_list: &[f64],
    x: &SampledPath,
    substeps: usize,
) -> Result<ProbeReport> {
    let norm_h = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm_h - 1.0).abs() > 1e-12 || h.len() != a.len() {
        return domain("direction must be a unit vector of the state dimension");
    }
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return domain("ε list must be positive and strictly decreasing");
    }
    let base = solve_along_pl(vf, a, x, substeps)?;
    let hv = nalgebra::DVector::from_column_slice(h);
    let mut errors = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let shifted: Vec<f64> = a.iter().zip(h).map(|(a, h)| a + eps * h).collect();
        let pert = solve_along_pl(vf, &shifted, x, substeps)?;
        let mut worst = 0.0f64;
        for i in 0..x.len() {
            let jh = base.flow_derivative(i) * &hv;
            let (s0, s1) = (base.state(i), pert.state(i));
            let err = (0..a.len()).map(|l| ((s1[l] - s0[l]) / eps - jh[l]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(err);
        }
        errors.push(worst);
    }
    let order = if errors.len() < 2 || errors.iter().any(|&v| v == 0.0) {
        None
    } else {
        let xs: Vec<f64> = eps_list.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
        Some(crate::moments::linear_fit(&xs, &ys).0)
    };
    Ok(ProbeReport { eps: eps_list.to_vec(), errors, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::dyadic_approx;
    use crate::rough_path::BrownianSampler;

    fn brownian(d: usize, level: u32, idx: u64) -> SampledPath {
        BrownianSampler::standard(d, level, 77, 0).unwrap().sample(idx)
    }

    #[test]
    fn constant_field_integrates_exactly() {
        let f = ConstantField::new(2, 2, vec![1.0, 2.0, -0.5, 0.25]).unwrap();
        let x = brownian(2, 6, 0);
        let sol = solve_along_pl(&f, &[0.3, 0.1], &x, 2).unwrap();
        for i in 0..x.len() {
            let dx = x.increment(0, i);
            let want = [dx[0] + 2.0 * dx[1], -0.5 * dx[0] + 0.25 * dx[1]];
            let got = sol.y1();
            assert!((got.at(i)[0] - want[0]).abs() < 1e-13 && (got.at(i)[1] - want[1]).abs() < 1e-13);
        }
        assert!(sol.j1().values().iter().all(|&v| v == 0.0));
        assert!(sol.m1().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_linear_field_is_exponential() {
        let x = brownian(1, 7, 1);
        let a = 0.7;
        let sol = solve_along_pl(&LinearField::scalar(), &[a], &x, 32).unwrap();
        for i in 0..x.len() {
            let dx = x.increment(0, i)[0];
            assert!((sol.state(i)[0] - a * dx.exp()).abs() < 1e-9 * dx.exp().max(1.0));
            assert!((sol.flow_derivative(i)[(0, 0)] - dx.exp()).abs() < 1e-9 * dx.exp().max(1.0));
            assert!((sol.m1().at(i)[0] - dx).abs() < 1e-13);
        }
    }

    #[test]
    fn rotation_flow_matches_matrix_exponential() {
        let rotation_error = |x: &SampledPath| {
            let sol = solve_along_pl(&LinearField::rotation(), &[1.0, 0.0], x, 8).unwrap();
            (0..x.len())
                .map(|i| {
                    let th = x.increment(0, i)[0];
                    let want = DMatrix::from_row_slice(2, 2, &[th.cos() - 1.0, -th.sin(), th.sin(), th.cos() - 1.0]);
                    (sol.j_matrix(i) - want).abs().max()
                })
                .fold(0.0, f64::max)
        };
        let grid = DyadicGrid::new(8).unwrap();
        let smooth = SampledPath::from_fn(grid, 1, |t| vec![(2.0 * std::f64::consts::PI * t).sin() + t]).unwrap();
        assert!(rotation_error(&smooth) < 1e-10);
        // Brownian increments at this mesh are large enough for the RK4 phase error to show
        assert!(rotation_error(&brownian(1, 8, 2)) < 1e-8);
    }

    #[test]
    fn initial_values_are_zero() {
        let f = TanhField::standard(2, 2).unwrap();
        let sol = solve_along_pl(&f, &[0.0, 0.0], &brownian(2, 4, 0), 1).unwrap();
        assert!(sol.y1().at(0).iter().chain(sol.j1().at(0)).chain(sol.m1().at(0)).all(|&v| v == 0.0));
        assert_eq!(sol.m_fine().len(), (16 + 1) * 4);
    }

    #[test]
    fn fourth_order_in_substeps() {
        let f = TanhField::standard(2, 2).unwrap();
        let grid = DyadicGrid::new(3).unwrap();
        let x = SampledPath::from_fn(grid, 2, |t| vec![2.0 * (3.0 * t).sin(), 1.5 * t]).unwrap();
        let run = |s| solve_along_pl(&f, &[0.2, -0.1], &x, s).unwrap();
        let (a, b, c) = (run(2), run(4), run(8));
        let diff = |u: &RdeSolution, v: &RdeSolution| {
            u.y1().values().iter().zip(v.y1().values()).chain(u.j1().values().iter().zip(v.j1().values()))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        };
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = DyadicGrid::new(4).unwrap();
        let x = SampledPath::from_fn(grid, 1, |t| vec![1e8 * t]).unwrap();
        let r = solve_along_pl(&LinearField::scalar(), &[1.0], &x, 1);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn shape_errors() {
        let f = TanhField::standard(2, 2).unwrap();
        assert!(solve_along_pl(&f, &[0.0], &brownian(2, 3, 0), 1).is_err());
        assert!(solve_along_pl(&f, &[0.0, 0.0], &brownian(1, 3, 0), 1).is_err());
        assert!(solve_along_pl(&f, &[0.0, 0.0], &brownian(2, 3, 0), 0).is_err());
    }

    #[test]
    fn probe_linear_and_constant() {
        let x = brownian(1, 6, 3);
        let r = flow_derivative_probe(&LinearField::rotation(), &[0.5, 0.5], &[0.6, 0.8], &[1e-2, 1e-3, 1e-4], &x, 4)
            .unwrap();
        assert!(r.errors.iter().all(|&v| v < 1e-9), "{:?}", r.errors);
        let c = ConstantField::standard(2, 1).unwrap();
        let r = flow_derivative_probe(&c, &[0.5, 0.5], &[1.0, 0.0], &[1e-2, 1e-3], &x, 4).unwrap();
        assert!(r.errors.iter().all(|&v| v < 1e-10), "{:?}", r.errors);
    }

    #[test]
    fn probe_tanh_first_order() {
        let f = TanhField::standard(2, 2).unwrap();
        let r = flow_derivative_probe(&f, &[0.1, 0.2], &[0.6, -0.8], &[1e-2, 1e-3, 1e-4], &brownian(2, 7, 4), 4)
            .unwrap();
        let order = r.order.unwrap();
        assert!((order - 1.0).abs() < 0.15, "order {order}, errors {:?}", r.errors);
        assert!(flow_derivative_probe(&f, &[0.1, 0.2], &[1.0, 1.0], &[1e-2], &brownian(2, 3, 0), 1).is_err());
        assert!(flow_derivative_probe(&f, &[0.1, 0.2], &[1.0, 0.0], &[1e-3, 1e-2], &brownian(2, 3, 0), 1).is_err());
    }

    #[test]
    fn wong_zakai_consistency() {
        let f = TanhField::standard(2, 2).unwrap();
        let w = brownian(2, 10, 5);
        let fine = solve_along_pl(&f, &[0.0, 0.0], &w, 2).unwrap().y1();
        let dists: Vec<f64> = [3, 5, 7]
            .iter()
            .map(|&m| {
                let coarse = solve_along_pl(&f, &[0.0, 0.0], &dyadic_approx(&w, m).unwrap(), 2).unwrap().y1();
                let diff: Vec<f64> = coarse.values().iter().zip(fine.values()).map(|(a, b)| a - b).collect();
                SampledPath::new(w.grid(), 2, diff).unwrap().holder_norm(0.4).unwrap()
            })
            .collect();
        assert!(dists.windows(2).all(|p| p[1] < p[0]), "{dists:?}");
    }

    #[test]
    fn solution_csv_layout() {
        let f = TanhField::standard(2, 1).unwrap();
        let sol = solve_along_pl(&f, &[0.0, 0.0], &brownian(1, 2, 0), 1).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y_1,y_2,j_11,j_12,j_21,j_22,m_11,m_12,m_21,m_22");
        assert_eq!(lines.count(), 5);
    }
}
