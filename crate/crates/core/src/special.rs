//! Fractional factorials and the series constants used by factorial-decay bounds.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest `λ` for which `Γ(λ + 1)` is finite in double precision.
pub const MAX_FACTORIAL_ARG: f64 = 170.624_376_956_302_7;

fn lanczos_sum(z: f64) -> f64 {
    let mut x = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    x
}

/// `Γ(x)` for `x ≥ 1`.
fn gamma_ge1(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // split the power so that t^(z+1/2) never overflows on its own
    let half = t.powf((z + 0.5) / 2.0);
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(z)
}

/// `ln Γ(x)` for `x ≥ 1`.
fn ln_gamma_ge1(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// `λ! = Γ(λ + 1)` for real `λ ≥ 0`.
pub fn frac_factorial(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return domain(format!("fractional factorial needs λ ≥ 0, got {lambda}"));
    }
    if lambda > MAX_FACTORIAL_ARG {
        return Err(Error::Range(format!("({lambda})! overflows f64")));
    }
    // small integers exactly
    if lambda.fract() == 0.0 && lambda <= 20.0 {
        return Ok((1..=lambda as u64).map(|k| k as f64).product());
    }
    Ok(gamma_ge1(lambda + 1.0))
}

/// `ln(λ!)` for `λ ≥ 0`; never overflows.
pub fn ln_frac_factorial(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return domain(format!("fractional factorial needs λ ≥ 0, got {lambda}"));
    }
    Ok(ln_gamma_ge1(lambda + 1.0))
}

/// Both sides of the neo-classical inequality for one `(p, k, a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeoClassicalReport {
    pub p: f64,
    pub k: u32,
    pub a: f64,
    pub b: f64,
    pub lhs: f64,
    /// `p^2 (a+b)^{k/p} / (k/p)!`
    pub rhs_p_squared: f64,
    /// `p (a+b)^{k/p} / (k/p)!`
    pub rhs_p_sharp: f64,
    pub holds_p_squared: bool,
    pub holds_p_sharp: bool,
}

/// Relative slack granted to the `≤` comparisons; the `p = 1` case is an equality.
pub const NEOCLASSICAL_SLACK: f64 = 1e-12;

/// Evaluates `sum_j a^{j/p} b^{(k-j)/p} / ((j/p)! ((k-j)/p)!)` against
/// `C (a+b)^{k/p} / (k/p)!` with `C = p^2` and `C = p`.
pub fn neoclassical_check(p: f64, k: u32, a: f64, b: f64) -> Result<NeoClassicalReport> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("neo-classical inequality needs p ≥ 1, got {p}"));
    }
    if k == 0 {
        return domain("neo-classical inequality needs k ≥ 1");
    }
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return domain(format!("a, b must be finite and nonnegative, got ({a}, {b})"));
    }
    let kf = k as f64;
    let mut lhs = 0.0;
    for j in 0..=k {
        let jf = j as f64;
        let num = a.powf(jf / p) * b.powf((kf - jf) / p);
        lhs += num / (frac_factorial(jf / p)? * frac_factorial((kf - jf) / p)?);
    }
    let base = (a + b).powf(kf / p) / frac_factorial(kf / p)?;
    let rhs_p_squared = p * p * base;
    let rhs_p_sharp = p * base;
    Ok(NeoClassicalReport {
        p,
        k,
        a,
        b,
        lhs,
        rhs_p_squared,
        rhs_p_sharp,
        holds_p_squared: lhs <= rhs_p_squared * (1.0 + NEOCLASSICAL_SLACK),
        holds_p_sharp: lhs <= rhs_p_sharp * (1.0 + NEOCLASSICAL_SLACK),
    })
}

/// The constant `β_p = p^2 (1 + sum_{j≥3} (2/(j-2))^{3/p})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaP {
    pub p: f64,
    pub value: f64,
    /// Number of series terms summed directly.
    pub truncation_terms: usize,
    /// Bound on the error of the tail correction, in units of `value`'s scale.
    pub tail_bound: f64,
}

/// `sum_{n>N} n^{-s}` by Euler–Maclaurin, returning `(estimate, error bound)`.
fn zeta_tail(s: f64, n: f64) -> (f64, f64) {
    let f = n.powf(-s);
    // Bernoulli terms B_{2j}/(2j)! times the falling derivative factors
    let d1 = s * n.powf(-s - 1.0);
    let d3 = s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0);
    let d5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0);
    let d7 = d5 * (s + 5.0) * (s + 6.0) / (n * n);
    let estimate = n.powf(1.0 - s) / (s - 1.0) - f / 2.0 + d1 / 12.0 - d3 / 720.0 + d5 / 30_240.0;
    (estimate, d7 / 1_209_600.0)
}

/// Minimal admissible `β_p` for `1 < p < 3`.
///
/// The first `N` terms of `sum_n (2/n)^{3/p}` are summed directly and the remainder is
/// taken from the integral comparison with Euler–Maclaurin corrections; `N` doubles until
/// the remainder's error bound drops below `1e-10` of the value.
pub fn beta_p(p: f64) -> Result<BetaP> {
    if !p.is_finite() || p <= 1.0 {
        return domain(format!("β_p needs p > 1, got {p}"));
    }
    if p >= 3.0 {
        return Err(Error::Divergence(format!(
            "sum (2/j)^(3/p) diverges for p = {p} ≥ 3"
        )));
    }
    let s = 3.0 / p;
    let scale = 2f64.powf(s);
    let mut n_terms = 64usize;
    loop {
        // sum small terms first
        let head: f64 = (1..=n_terms).rev().map(|n| (n as f64).powf(-s)).sum();
        let (tail, err) = zeta_tail(s, n_terms as f64);
        let value = p * p * (1.0 + scale * (head + tail));
        let tail_bound = p * p * scale * err;
        if tail_bound < 1e-10 * value || n_terms >= 1 << 24 {
            return Ok(BetaP { p, value, truncation_terms: n_terms, tail_bound });
        }
        n_terms *= 2;
    }
}

/// `sum_{n≥0} (n+1)^r e^{-β n^2}`, the series dominating `E[Z^r]` under a
/// square-exponential tail `P(Z ≥ η) ≤ C e^{-β η^2}`.
pub fn fernique_tail_series(beta: f64, r: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("β must be positive, got {beta}"));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return domain(format!("r must be ≥ 1, got {r}"));
    }
    let ln_term = |n: f64| r * (n + 1.0).ln() - beta * n * n;
    let mut sum = 0.0;
    let mut n = 0.0;
    loop {
        let term = ln_term(n).exp();
        if !term.is_finite() {
            return Err(Error::Range(format!("term n={n} overflows for r={r}")));
        }
        sum += term;
        let next = ln_term(n + 1.0).exp();
        if next < term {
            // successive ratios only shrink past the peak, so the tail is geometric-dominated
            let q = (ln_term(n + 2.0) - ln_term(n + 1.0)).exp();
            if q < 1.0 && next / (1.0 - q) < 1e-12 * sum {
                return Ok(sum + next);
            }
        }
        n += 1.0;
    }
}

fn conv_a_ln_term(p: f64, ln_beta: f64, ln_x: f64, k: usize) -> f64 {
    let kf = k as f64;
    kf * ln_x - ln_beta - ln_gamma_ge1(kf / p + 1.0)
}

fn check_conv_a(p: f64, beta: f64, x: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("p must be ≥ 1, got {p}"));
    }
    if !(beta > 0.0) {
        return domain(format!("β must be positive, got {beta}"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("x must be finite and ≥ 0, got {x}"));
    }
    Ok(())
}

/// Sum of the first `n_terms` terms of `sum_{k≥1} x^k / (β (k/p)!)`.
pub fn conv_a_partial(p: f64, beta: f64, x: f64, n_terms: usize) -> Result<f64> {
    check_conv_a(p, beta, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let (lb, lx) = (beta.ln(), x.ln());
    Ok((1..=n_terms).map(|k| conv_a_ln_term(p, lb, lx, k).exp()).sum())
}

/// `sum_{k > from_k} x^k / (β (k/p)!)`.
pub fn conv_a_tail(p: f64, beta: f64, x: f64, from_k: usize) -> Result<f64> {
    check_conv_a(p, beta, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let (lb, lx) = (beta.ln(), x.ln());
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = from_k + 1;
    loop {
        let term = conv_a_ln_term(p, lb, lx, k).exp();
        if !term.is_finite() {
            return Err(Error::Range(format!("term k={k} overflows for x={x}")));
        }
        sum += term;
        if term < prev && (term <= 1e-14 * sum || term == 0.0) {
            return Ok(sum);
        }
        prev = term;
        k += 1;
    }
}

/// `C(x) = sum_{k≥1} x^k / (β (k/p)!)`, finite for every `x` since the factorial
/// eventually beats the geometric factor.
pub fn conv_a_constant(p: f64, beta: f64, x: f64) -> Result<f64> {
    conv_a_tail(p, beta, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn factorial_examples() {
        assert_eq!(frac_factorial(1.0).unwrap(), 1.0);
        assert!(rel(frac_factorial(0.5).unwrap(), PI.sqrt() / 2.0) < 1e-14);
        // Γ(3.5) = 2.5 · 1.5 · 0.5 · √π
        assert!(rel(frac_factorial(2.5).unwrap(), 1.875 * PI.sqrt()) < 1e-14);
        assert!(matches!(frac_factorial(-0.1), Err(Error::Domain(_))));
        assert!(matches!(frac_factorial(171.0), Err(Error::Range(_))));
        assert!(frac_factorial(170.5).unwrap().is_finite());
    }

    #[test]
    fn factorial_against_statrs() {
        for i in 0..=1700 {
            let lambda = i as f64 * 0.1;
            let want = statrs::function::gamma::gamma(lambda + 1.0);
            let got = frac_factorial(lambda).unwrap();
            if want.is_finite() {
                assert!(rel(got, want) < 1e-12, "λ={lambda}");
            } else {
                // the oracle overflows early near the top of the range
                let ln_want = statrs::function::gamma::ln_gamma(lambda + 1.0);
                assert!((got.ln() - ln_want).abs() < 1e-12 * ln_want, "λ={lambda}");
            }
            let ln_want = statrs::function::gamma::ln_gamma(lambda + 1.0);
            assert!((ln_frac_factorial(lambda).unwrap() - ln_want).abs() < 1e-12 * (1.0 + ln_want.abs()));
        }
    }

    #[test]
    fn gamma_recurrence() {
        for i in 0..=300 {
            let lambda = i as f64 * 0.1;
            let lhs = frac_factorial(lambda + 1.0).unwrap();
            let rhs = (lambda + 1.0) * frac_factorial(lambda).unwrap();
            assert!(rel(lhs, rhs) < 1e-11, "λ={lambda}");
        }
    }

    #[test]
    fn neoclassical_p_one_is_binomial() {
        for (a, b) in [(1.0, 1.0), (0.3, 4.2), (0.0, 2.0)] {
            for k in 1..=12 {
                let r = neoclassical_check(1.0, k, a, b).unwrap();
                let want = (a + b as f64).powi(k as i32) / frac_factorial(k as f64).unwrap();
                assert!(rel(r.lhs, want) < 1e-12);
                assert!(r.holds_p_squared && r.holds_p_sharp);
            }
        }
    }

    #[test]
    fn neoclassical_p_two() {
        let r = neoclassical_check(2.0, 2, 1.0, 1.0).unwrap();
        // 1/1! + 1/(0.5!)^2 + 1/1! = 2 + 4/π
        assert!(rel(r.lhs, 2.0 + 4.0 / PI) < 1e-14);
        assert!(rel(r.rhs_p_squared, 8.0) < 1e-14);
        assert!(rel(r.rhs_p_sharp, 4.0) < 1e-14);
        assert!(r.holds_p_squared && r.holds_p_sharp);
    }

    #[test]
    fn neoclassical_high_k() {
        let r = neoclassical_check(2.5, 8, 0.3, 1.7).unwrap();
        // oracle: same sum via statrs gamma
        let g = |x: f64| statrs::function::gamma::gamma(x + 1.0);
        let want: f64 = (0..=8)
            .map(|j| {
                let j = j as f64;
                0.3f64.powf(j / 2.5) * 1.7f64.powf((8.0 - j) / 2.5) / (g(j / 2.5) * g((8.0 - j) / 2.5))
            })
            .sum();
        assert!(rel(r.lhs, want) < 1e-12);
        assert!(r.holds_p_squared);
    }

    #[test]
    fn neoclassical_domain() {
        assert!(neoclassical_check(0.5, 2, 1.0, 1.0).is_err());
        assert!(neoclassical_check(2.0, 0, 1.0, 1.0).is_err());
        assert!(neoclassical_check(2.0, 2, -1.0, 1.0).is_err());
    }

    #[test]
    fn beta_p_values_and_errors() {
        let b = beta_p(2.0).unwrap();
        assert!((b.value - 33.56).abs() < 0.01, "{}", b.value);
        assert!(b.value >= 4.0 && b.tail_bound < 1e-10 * b.value);
        let b = beta_p(2.5).unwrap();
        assert!((b.value - 86.5).abs() < 0.1, "{}", b.value);
        assert!(matches!(beta_p(3.0), Err(Error::Divergence(_))));
        assert!(matches!(beta_p(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fernique_series_examples() {
        let s = fernique_tail_series(1.0, 1.0).unwrap();
        let direct: f64 = (0..30).map(|n| (n + 1) as f64 * (-(n * n) as f64).exp()).sum();
        assert!(rel(s, direct) < 1e-12);
        assert!((s - 1.7912).abs() < 1e-4);
        assert!((fernique_tail_series(50.0, 1.0).unwrap() - 1.0).abs() < 1e-20 + 3.0 * (-50f64).exp());
        assert!(fernique_tail_series(1.0, 2.0).unwrap() >= s);
        assert!(fernique_tail_series(0.0, 1.0).is_err());
        assert!(fernique_tail_series(1.0, 0.5).is_err());
    }

    #[test]
    fn fernique_ratio_bounded() {
        for beta in [0.6, 1.0, 2.0] {
            let ratios: Vec<f64> = (1..=64)
                .map(|r| {
                    let r = r as f64;
                    fernique_tail_series(beta, r).unwrap() / r.powf(r / 2.0)
                })
                .collect();
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(max.is_finite());
            // past the early regime the ratio decays, so the supremum sits well inside the range
            assert!(ratios[63] < max && ratios[63] < ratios[31]);
        }
    }

    #[test]
    fn conv_a_examples() {
        assert_eq!(conv_a_constant(2.5, 86.5, 0.0).unwrap(), 0.0);
        assert!(rel(conv_a_constant(1.0, 1.0, 1.0).unwrap(), std::f64::consts::E - 1.0) < 1e-13);
        let c = conv_a_constant(2.5, 86.5, 3.0).unwrap();
        // 200 terms computed through statrs' log-gamma
        let oracle: f64 = (1..=200)
            .map(|k| {
                let k = k as f64;
                (k * 3f64.ln() - 86.5f64.ln() - statrs::function::gamma::ln_gamma(k / 2.5 + 1.0)).exp()
            })
            .sum();
        assert!(rel(c, oracle) < 1e-12, "{c} vs {oracle}");
    }

    #[test]
    fn conv_a_partial_sums_are_cauchy() {
        for x in [0.5, 2.0, 5.0] {
            let full = conv_a_constant(2.5, 86.5, x).unwrap();
            let mut n = 1usize;
            while conv_a_partial(2.5, 86.5, x, n).unwrap() < full * (1.0 - 1e-13) {
                n += 1;
            }
            let a = conv_a_partial(2.5, 86.5, x, n).unwrap();
            let b = conv_a_partial(2.5, 86.5, x, 2 * n).unwrap();
            assert!(rel(a, b) < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn neoclassical_holds_with_p_squared(p in 1.0f64..2.99, k in 1u32..25, la in -4.0f64..3.0, lb in -4.0f64..3.0) {
            let r = neoclassical_check(p, k, 10f64.powf(la), 10f64.powf(lb)).unwrap();
            proptest::prop_assert!(r.holds_p_squared && r.holds_p_sharp, "{r:?}");
        }

        #[test]
        fn neoclassical_is_homogeneous(k in 1u32..12, a in 0.01f64..5.0, b in 0.01f64..5.0, lam in 0.1f64..10.0) {
            let p = 2.5;
            let r1 = neoclassical_check(p, k, a, b).unwrap();
            let r2 = neoclassical_check(p, k, lam * a, lam * b).unwrap();
            let scale = lam.powf(k as f64 / p);
            proptest::prop_assert!(rel(r2.lhs, scale * r1.lhs) < 1e-11);
        }
    }
}
