//! Solve an RDE along a Brownian sample and compare the series Jacobian with the ODE one.
//!
//! ```text
//! cargo run --example rde_jacobian
//! ```

use roughderiv::rde::{flow_derivative_probe, m_rough_path, series_jacobian, solve_along_pl, vector_field_check, TanhField};
use roughderiv::rough_path::BrownianSampler;

pub fn run_example() -> roughderiv::Result<()> {
    let field = TanhField::standard(2, 2)?;
    let check = vector_field_check(&field, &[vec![0.1, -0.4], vec![1.5, 0.7]], 1e-6)?;
    println!("∇σ vs finite differences: {:.2e}", check.max_rel_error);

    let x = BrownianSampler::standard(2, 6, 5, 0)?.sample(0);
    let a = [0.0, 0.0];
    let sol = solve_along_pl(&field, &a, &x, 8)?;
    let n = sol.grid().intervals();
    println!("Y_1 = {:?}", sol.state(n));

    // J as the derivative of the flow in the initial value
    let probe = flow_derivative_probe(&field, &a, &[1.0, 0.0], &[1e-2, 1e-3, 1e-4], &x, 8)?;
    println!("finite-difference errors {:?}, order {:?}", probe.errors, probe.order);

    // Id + Σ_k T(M^k_{0,1}) against the ODE value Id + J¹_{0,1}
    let tower = m_rough_path(&sol, 40)?;
    let series = series_jacobian(&tower, 0, n, 1e-14)?;
    let ode = sol.flow_derivative(n);
    let rel = (&series.matrix - &ode).abs().max() / ode.abs().max();
    println!("series stopped at K* = {}, relative gap to ODE {rel:.2e}", series.levels);
    assert!(rel < 1e-6);

    // cocycle over (0, 20) and (20, 64)
    let head = series_jacobian(&tower, 0, 20, 1e-14)?.matrix;
    let tail = series_jacobian(&tower, 20, n, 1e-14)?.matrix;
    println!("cocycle defect {:.2e}", (tail * head - &series.matrix).abs().max());
    Ok(())
}

fn main() {
    run_example().expect("rde_jacobian failed");
}
