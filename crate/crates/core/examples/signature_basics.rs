//! Truncated tensor algebra: segment signatures, Chen products and the scalar closed form.
//!
//! ```text
//! cargo run --example signature_basics
//! ```

use roughderiv::tensor::{chen_mul, segment_exp, tensor_norm, NormKind};

pub fn run_example() -> roughderiv::Result<()> {
    // two segments in the plane, signature truncated at level 4
    let a = segment_exp(&[1.0, 0.0], 4)?;
    let b = segment_exp(&[0.0, 1.0], 4)?;
    let ab = chen_mul(&a, &b)?;
    let ba = chen_mul(&b, &a)?;

    // level-2 antisymmetric part is the signed area: ±1/2 depending on the order
    let area = |x: &roughderiv::tensor::TruncatedTensor| 0.5 * (x.level(2)[1] - x.level(2)[2]);
    println!("area(ab) = {:+.3}, area(ba) = {:+.3}", area(&ab), area(&ba));
    assert!((area(&ab) - 0.5).abs() < 1e-15 && (area(&ba) + 0.5).abs() < 1e-15);

    for k in 1..=4 {
        println!("level {k}: |ab|_l1 = {:.6}", tensor_norm(&ab, k, NormKind::CoeffL1)?);
    }

    // d = 1: concatenating increments 0.3 and 0.9 gives 1.2^k / k! at every level
    let x = chen_mul(&segment_exp(&[0.3], 10)?, &segment_exp(&[0.9], 10)?)?;
    let mut fact = 1.0;
    for k in 1..=10 {
        fact *= k as f64;
        let want = 1.2f64.powi(k as i32) / fact;
        assert!((x.level(k)[0] - want).abs() < 1e-12);
    }
    println!("scalar closed form holds up to level 10");
    Ok(())
}

fn main() {
    run_example().expect("signature_basics failed");
}
