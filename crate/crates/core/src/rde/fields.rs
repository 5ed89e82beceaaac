//! Built-in vector fields.

use std::str::FromStr;

use crate::error::{Error, Result};

/// A vector field `σ: R^e → L(R^d, R^e)` with its derivative.
///
/// `sigma` writes the `e × d` matrix row-major. `grad_sigma` writes the `e × e × d`
/// array with `out[(i * e + l) * d + j] = ∂σ_ij / ∂y_l`.
pub trait VectorField: Send + Sync {
    fn driver_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn sigma(&self, y: &[f64], out: &mut [f64]);
    fn grad_sigma(&self, y: &[f64], out: &mut [f64]);
    /// Whether σ and its derivatives are bounded (the setting of the moment results).
    fn bounded(&self) -> bool;
    fn name(&self) -> &str;
}

/// `σ(y) = C` for a fixed `e × d` matrix.
#[derive(Clone, Debug)]
pub struct ConstantField {
    e: usize,
    d: usize,
    c: Vec<f64>,
}

impl ConstantField {
    pub fn new(e: usize, d: usize, c: Vec<f64>) -> Result<Self> {
        if e == 0 || d == 0 || c.len() != e * d {
            return Err(Error::Shape(format!("constant field needs {e}×{d} entries, got {}", c.len())));
        }
        Ok(Self { e, d, c })
    }

    /// `C_ij = 1` when `i ≡ j (mod e)`, else 0.
    pub fn standard(e: usize, d: usize) -> Result<Self> {
        let c = (0..e * d).map(|k| if k / d == (k % d) % e { 1.0 } else { 0.0 }).collect();
        Self::new(e, d, c)
    }
}

impl VectorField for ConstantField {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn sigma(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }
    fn grad_sigma(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    fn bounded(&self) -> bool {
        true
    }
    fn name(&self) -> &str {
        "constant"
    }
}

/// `σ(y)_ij = sum_l A_ilj y_l`; unbounded, meant for closed-form tests.
#[derive(Clone, Debug)]
pub struct LinearField {
    e: usize,
    d: usize,
    a: Vec<f64>,
    name: &'static str,
}

impl LinearField {
    /// `a` uses the `grad_sigma` layout `[i][l][j]`.
    pub fn new(e: usize, d: usize, a: Vec<f64>) -> Result<Self> {
        if e == 0 || d == 0 || a.len() != e * e * d {
            return Err(Error::Shape(format!("linear field needs {e}×{e}×{d} entries, got {}", a.len())));
        }
        Ok(Self { e, d, a, name: "linear" })
    }

    /// `d = e = 1`, `σ(y) = y`.
    pub fn scalar() -> Self {
        Self { e: 1, d: 1, a: vec![1.0], name: "linear" }
    }

    /// `e = 2`, `d = 1`, `σ(y) = R y` with `R = [[0, −1], [1, 0]]`; the flow rotates by
    /// the driver increment.
    pub fn rotation() -> Self {
        Self { e: 2, d: 1, a: vec![0.0, -1.0, 1.0, 0.0], name: "rotation" }
    }
}

impl VectorField for LinearField {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn sigma(&self, y: &[f64], out: &mut [f64]) {
        let (e, d) = (self.e, self.d);
        for i in 0..e {
            for j in 0..d {
                out[i * d + j] = (0..e).map(|l| self.a[(i * e + l) * d + j] * y[l]).sum();
            }
        }
    }
    fn grad_sigma(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }
    fn bounded(&self) -> bool {
        false
    }
    fn name(&self) -> &str {
        self.name
    }
}

/// `σ_ij(y) = b_ij + c_ij tanh(sum_l w_ijl y_l + φ_ij)`: smooth with every derivative bounded.
#[derive(Clone, Debug)]
pub struct TanhField {
    e: usize,
    d: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
    phi: Vec<f64>,
}

impl TanhField {
    /// `w` is indexed `[i][j][l]`, the others `[i][j]`.
    pub fn new(e: usize, d: usize, b: Vec<f64>, c: Vec<f64>, w: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let ed = e * d;
        if e == 0 || d == 0 || b.len() != ed || c.len() != ed || phi.len() != ed || w.len() != ed * e {
            return Err(Error::Shape(format!("tanh field coefficient sizes do not match e={e}, d={d}")));
        }
        Ok(Self { e, d, b, c, w, phi })
    }

    /// Fixed default coefficients:
    /// `b_ij = [i = j mod e]`, `c_ij = 1/2`, `w_ijl = 1` if `l = (i + j) mod e` else `−1/2`,
    /// `φ_ij = (i + 1)(j + 1) / 10`.
    pub fn standard(e: usize, d: usize) -> Result<Self> {
        let mut b = vec![0.0; e * d];
        let c = vec![0.5; e * d];
        let mut w = vec![0.0; e * d * e];
        let mut phi = vec![0.0; e * d];
        for i in 0..e {
            for j in 0..d {
                b[i * d + j] = if i == j % e { 1.0 } else { 0.0 };
                phi[i * d + j] = 0.1 * ((i + 1) * (j + 1)) as f64;
                for l in 0..e {
                    w[(i * d + j) * e + l] = if l == (i + j) % e { 1.0 } else { -0.5 };
                }
            }
        }
        Self::new(e, d, b, c, w, phi)
    }

    fn arg(&self, y: &[f64], i: usize, j: usize) -> f64 {
        let base = (i * self.d + j) * self.e;
        self.phi[i * self.d + j] + (0..self.e).map(|l| self.w[base + l] * y[l]).sum::<f64>()
    }
}

impl VectorField for TanhField {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn sigma(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..self.e {
            for j in 0..self.d {
                let k = i * self.d + j;
                out[k] = self.b[k] + self.c[k] * self.arg(y, i, j).tanh();
            }
        }
    }
    fn grad_sigma(&self, y: &[f64], out: &mut [f64]) {
        let (e, d) = (self.e, self.d);
        for i in 0..e {
            for j in 0..d {
                let th = self.arg(y, i, j).tanh();
                let scale = self.c[i * d + j] * (1.0 - th * th);
                for l in 0..e {
                    out[(i * e + l) * d + j] = scale * self.w[(i * d + j) * e + l];
                }
            }
        }
    }
    fn bounded(&self) -> bool {
        true
    }
    fn name(&self) -> &str {
        "tanh"
    }
}

/// Field names accepted by the experiment runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Constant,
    Linear,
    Rotation,
    Tanh,
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            "rotation" => Ok(Self::Rotation),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::Config(format!("unknown field '{other}'"))),
        }
    }
}

impl FieldKind {
    /// The default field of this kind for state dimension `e` and driver dimension `d`.
    /// `linear` is `σ(y)_ij = y_i` for every `j`; `rotation` requires `e = 2`, `d = 1`.
    pub fn build(self, e: usize, d: usize) -> Result<Box<dyn VectorField>> {
        Ok(match self {
            Self::Constant => Box::new(ConstantField::standard(e, d)?),
            Self::Tanh => Box::new(TanhField::standard(e, d)?),
            Self::Rotation => {
                if (e, d) != (2, 1) {
                    return Err(Error::Config(format!("rotation field needs e=2, d=1, got e={e}, d={d}")));
                }
                Box::new(LinearField::rotation())
            }
            Self::Linear => {
                let mut a = vec![0.0; e * e * d];
                for i in 0..e {
                    for j in 0..d {
                        a[(i * e + i) * d + j] = 1.0;
                    }
                }
                Box::new(LinearField::new(e, d, a)?)
            }
        })
    }
}

/// Result of comparing `grad_sigma` with central differences of `sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCheckReport {
    /// Largest `|fd − ∂σ| / max(|∂σ|, 1)` over probes and components.
    pub max_rel_error: f64,
    pub worst_probe: usize,
    pub passed: bool,
}

pub const FIELD_CHECK_TOL: f64 = 1e-5;

/// Central finite differences of `sigma` with step `eps` against `grad_sigma`.
pub fn vector_field_check(vf: &dyn VectorField, probes: &[Vec<f64>], eps: f64) -> Result<FieldCheckReport> {
    if probes.is_empty() {
        return Err(Error::Domain("no probe states".into()));
    }
    if !(eps > 1e-8 && eps < 1e-3) {
        return Err(Error::Domain(format!("finite-difference step must lie in (1e-8, 1e-3), got {eps}")));
    }
    let (e, d) = (vf.state_dim(), vf.driver_dim());
    let mut grad = vec![0.0; e * e * d];
    let (mut plus, mut minus) = (vec![0.0; e * d], vec![0.0; e * d]);
    let mut worst = (0.0f64, 0usize);
    for (n, y) in probes.iter().enumerate() {
        if y.len() != e {
            return Err(Error::Shape(format!("probe {n} has {} components, expected {e}", y.len())));
        }
        vf.grad_sigma(y, &mut grad);
        let mut yp = y.clone();
        for l in 0..e {
            yp[l] = y[l] + eps;
            vf.sigma(&yp, &mut plus);
            yp[l] = y[l] - eps;
            vf.sigma(&yp, &mut minus);
            yp[l] = y[l];
            for i in 0..e {
                for j in 0..d {
                    let fd = (plus[i * d + j] - minus[i * d + j]) / (2.0 * eps);
                    let g = grad[(i * e + l) * d + j];
                    let err = (fd - g).abs() / g.abs().max(1.0);
                    if err > worst.0 {
                        worst = (err, n);
                    }
                }
            }
        }
    }
    Ok(FieldCheckReport { max_rel_error: worst.0, worst_probe: worst.1, passed: worst.0 <= FIELD_CHECK_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn probes(e: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        (0..n).map(|_| (0..e).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let f = ConstantField::standard(2, 3).unwrap();
        let r = vector_field_check(&f, &probes(2, 5), 1e-6).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn linear_field_is_exact() {
        let f = FieldKind::Linear.build(3, 2).unwrap();
        let r = vector_field_check(f.as_ref(), &probes(3, 5), 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-10, "{}", r.max_rel_error);
        let rot = LinearField::rotation();
        let mut s = [0.0; 2];
        rot.sigma(&[1.0, 2.0], &mut s);
        assert_eq!(s, [-2.0, 1.0]);
    }

    #[test]
    fn tanh_field_passes() {
        for (e, d) in [(1, 1), (2, 2), (3, 2)] {
            let f = TanhField::standard(e, d).unwrap();
            let r = vector_field_check(&f, &probes(e, 20), 1e-6).unwrap();
            assert!(r.passed, "e={e} d={d}: {}", r.max_rel_error);
        }
    }

    #[test]
    fn wrong_gradient_is_caught() {
        struct Broken;
        impl VectorField for Broken {
            fn driver_dim(&self) -> usize {
                1
            }
            fn state_dim(&self) -> usize {
                1
            }
            fn sigma(&self, y: &[f64], out: &mut [f64]) {
                out[0] = y[0].sin();
            }
            fn grad_sigma(&self, y: &[f64], out: &mut [f64]) {
                out[0] = y[0].cos() * 1.01;
            }
            fn bounded(&self) -> bool {
                true
            }
            fn name(&self) -> &str {
                "broken"
            }
        }
        let r = vector_field_check(&Broken, &probes(1, 5), 1e-6).unwrap();
        assert!(!r.passed);
        assert!(vector_field_check(&Broken, &[], 1e-6).is_err());
        assert!(vector_field_check(&Broken, &probes(1, 1), 1e-2).is_err());
    }

    #[test]
    fn field_names_parse() {
        assert_eq!("tanh".parse::<FieldKind>().unwrap(), FieldKind::Tanh);
        assert!("cubic".parse::<FieldKind>().is_err());
        assert!(FieldKind::Rotation.build(2, 2).is_err());
    }
}
