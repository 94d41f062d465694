//! Cross-checks the production optimizers against the small-instance
//! semismooth Newton oracle.
//!
//! ```text
//! cargo run --release --example newton_oracle -- 16 1e-3 1e3 2.0
//! ```

use std::sync::Arc;

use frac_ocp::analysis::semismooth_newton_oracle;
use frac_ocp::ocp::{solve_fixed_gamma, ControlBounds, Method, ProblemConfig};
use frac_ocp::{FracOperator, Mesh, P0Function};

fn main() -> frac_ocp::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(8, |v| v.parse().expect("n"));
    let alpha: f64 = args.next().map_or(0.1, |v| v.parse().expect("alpha"));
    let gamma: f64 = args.next().map_or(100.0, |v| v.parse().expect("gamma"));
    let hi: f64 = args.next().map_or(10.0, |v| v.parse().expect("z_hi"));

    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n)?);
    let op = FracOperator::assemble(mesh.clone(), 0.5)?;
    let cfg = ProblemConfig {
        s: 0.5,
        alpha,
        control_bounds: Some(ControlBounds::new(0.0, hi)?),
        opt_tol: 1e-11,
        max_iter: 100_000,
        ..Default::default()
    };
    let z0 = P0Function::zeros(mesh.clone());
    let oracle = semismooth_newton_oracle(&cfg, &op, gamma, &z0)?;
    println!(
        "oracle: converged {} after {} iterations, kkt {:.2e}",
        oracle.converged, oracle.iterations, oracle.kkt_residual
    );
    for method in [Method::SemismoothNewton, Method::ProjectedGradient] {
        let sol = solve_fixed_gamma(&ProblemConfig { method, ..cfg.clone() }, &op, gamma, &z0)?;
        let d = sol
            .z
            .values()
            .iter()
            .zip(oracle.z.values())
            .zip(mesh.widths())
            .map(|((a, b), h)| h * (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!(
            "{method:>6}: converged {} after {:6} iterations, kkt {:.2e}, |z - z_oracle| {d:.2e}",
            sol.converged, sol.iterations, sol.kkt_residual
        );
    }
    println!("z_oracle = {:.6?}", oracle.z.values());
    Ok(())
}
