//! Sample a Brownian path, lift it to a level-2 rough path and measure it.
//!
//! ```text
//! cargo run --example brownian_rough_path
//! ```

use roughderiv::path::{p_variation_norm, write_path_csv};
use roughderiv::rough_path::{control_from_rough_path, BrownianSampler, Level2RoughPath};
use roughderiv::tensor::NormKind;

pub fn run_example() -> roughderiv::Result<()> {
    let p = 2.5;
    // d = 2, grid level 8 (256 steps), seed 42; sample 7 is reproducible on its own
    let sampler = BrownianSampler::standard(2, 8, 42, 0)?;
    let w = sampler.sample(7);
    let lift = Level2RoughPath::lift(&w);

    let (h1, h2) = lift.holder_norms(p, NormKind::Frobenius)?;
    println!("‖W¹‖_(1/p-Hld) = {h1:.4}, ‖W²‖_(2/p-Hld) = {h2:.4}");
    println!("p-variation of W¹ at p = {p}: {:.4}", p_variation_norm(&w, p)?);

    let (x1, x2) = lift.increment(0, 256)?;
    let levy_area = 0.5 * (x2[1] - x2[2]);
    println!("W¹_(0,1) = ({:.4}, {:.4}), Lévy area {levy_area:+.4}", x1[0], x1[1]);

    let omega = control_from_rough_path(&lift, p)?;
    println!("control ω(s,t) = {:.4}·(t − s)", omega.coefficient);
    assert!(omega.eval(0.0, 1.0) >= h1.powf(p));

    let mut csv = Vec::new();
    write_path_csv(&w, &mut csv)?;
    println!("path CSV: {} lines", String::from_utf8_lossy(&csv).lines().count());
    Ok(())
}

fn main() {
    run_example().expect("brownian_rough_path failed");
}
