//! Factorial decay of iterated integrals: pathwise on signatures, and in L^r for M.
//!
//! ```text
//! cargo run --release --example factorial_decay
//! ```

use roughderiv::moments::{deterministic_decay_check, factorial_decay_scan, random_grid_pairs, DecayScanConfig};
use roughderiv::rde::TanhField;
use roughderiv::rough_path::BrownianSampler;

pub fn run_example() -> roughderiv::Result<()> {
    let w = BrownianSampler::standard(2, 6, 42, 0)?.sample(3);
    let pairs = random_grid_pairs(64, 100, 1);
    let det = deterministic_decay_check(&w, 2.5, 8, &pairs)?;
    println!("ω = {:.3}·(t − s): {} checks, {} violations, worst ratio {:.2e}", det.c, det.checked, det.violations, det.worst_ratio);

    let field = TanhField::standard(1, 1)?;
    let cfg = DecayScanConfig { p: 2.5, depth: 6, r: 2.0, n_samples: 200, seed: 42, grid_level: 5, substeps: 2 };
    let rep = factorial_decay_scan(&field, &[0.0], &cfg)?;
    println!("fitted c = {:.3e}, α = {:.3}", rep.c, rep.alpha);
    for (k, ratio) in rep.ratios.iter().enumerate() {
        println!("  k = {}: ‖M^k‖_L² = {:.3e}, normalised {ratio:.3e}", k + 1, rep.estimates[k]);
    }
    Ok(())
}

fn main() {
    run_example().expect("factorial_decay failed");
}
