//! Monte Carlo L^r norms with bootstrap intervals, growth slopes and Gaussian tail fits.
//!
//! ```text
//! cargo run --release --example moment_scan
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use roughderiv::io::write_results;
use roughderiv::moments::{fernique_tail_fit, growth_slope, sample_functional, w_moment_scan};

pub fn run_example() -> roughderiv::Result<()> {
    let abs_normal = |rng: &mut rand_chacha::ChaCha8Rng| rng.sample::<f64, _>(StandardNormal).abs();
    let fit = growth_slope(abs_normal, &[2.0, 4.0, 8.0, 16.0], 20_000, 42)?;
    println!("|N|: growth slope {:.3} (√r asymptotics give 1/2)", fit.slope);
    for (r, (lo, hi)) in fit.scan.r_grid.iter().zip(fit.scan.ci_low.iter().zip(&fit.scan.ci_high)) {
        println!("  r = {r:>4}: [{lo:.3}, {hi:.3}]");
    }

    let samples = sample_functional(abs_normal, 20_000, 7);
    let tail = fernique_tail_fit(&samples, &[1.5, 2.0, 2.5, 3.0])?;
    println!("tail fit β̂ = {:.3} (exact 1/2), {} thresholds used", tail.beta_hat, tail.used.len());

    let w = w_moment_scan(2, 2.5, 6, &[1.0, 2.0, 4.0, 8.0], 300, 42)?;
    println!("Brownian Hölder norms: slopes {:.3} and {:.3}", w.slope1, w.slope2);
    let mut csv = Vec::new();
    write_results(&w.level1.rows("example"), &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

fn main() {
    run_example().expect("moment_scan failed");
}
