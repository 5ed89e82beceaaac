//! Fractional factorials, the neo-classical inequality, β_p and the Fernique tail series.
//!
//! ```text
//! cargo run --example special_functions
//! ```

use roughderiv::special::{beta_p, fernique_tail_series, frac_factorial, neoclassical_check};

pub fn run_example() -> roughderiv::Result<()> {
    println!("(1/2)! = {:.12} (√π/2 = {:.12})", frac_factorial(0.5)?, std::f64::consts::PI.sqrt() / 2.0);

    for p in [1.0, 2.5] {
        let r = neoclassical_check(p, 5, 1.0, 1.0)?;
        println!("p = {p}: lhs {:.6}, p·rhs {:.6}, p²·rhs {:.6}", r.lhs, r.rhs_p_sharp, r.rhs_p_squared);
        assert!(r.holds_p_sharp);
    }

    let b = beta_p(2.5)?;
    println!("β_2.5 = {:.4} ({} direct terms)", b.value, b.truncation_terms);
    match beta_p(3.0) {
        Err(e) => println!("β_3: {e}"),
        Ok(v) => unreachable!("β_3 should diverge, got {}", v.value),
    }

    for r in [1.0, 8.0, 32.0] {
        let s = fernique_tail_series(1.0, r)?;
        println!("Σ (k+1)^r e^(-k²) at r = {r}: {s:.4e}, / r^(r/2) = {:.4e}", s / r.powf(r / 2.0));
    }
    Ok(())
}

fn main() {
    run_example().expect("special_functions failed");
}
