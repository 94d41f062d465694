//! One regularized solve at fixed γ with semismooth Newton, and with
//! projected gradient on meshes of at most 32 cells, plus the recovered
//! multiplier.
//!
//! ```text
//! cargo run --release --example fixed_gamma_solve -- 0.4 256 1e3
//! ```

use std::sync::Arc;
use std::time::Instant;

use frac_ocp::ocp::{recover_multiplier, solve_fixed_gamma, ControlBounds, Method};
use frac_ocp::{FracOperator, Mesh, P0Function, ProblemConfig};

fn main() -> frac_ocp::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let s: f64 = args.next().map_or(0.4, |v| v.parse().expect("s"));
    let n: usize = args.next().map_or(256, |v| v.parse().expect("n"));
    let gamma: f64 = args.next().map_or(1e3, |v| v.parse().expect("gamma"));

    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n)?);
    let op = FracOperator::assemble(mesh.clone(), s)?;
    let z0 = P0Function::zeros(mesh.clone());
    let methods = if n <= 32 {
        vec![Method::SemismoothNewton, Method::ProjectedGradient]
    } else {
        vec![Method::SemismoothNewton]
    };
    for method in methods {
        let cfg = ProblemConfig {
            s,
            control_bounds: Some(ControlBounds::new(0.0, 10.0)?),
            opt_tol: 1e-9,
            max_iter: 200_000,
            method,
            ..Default::default()
        };
        let t = Instant::now();
        let sol = solve_fixed_gamma(&cfg, &op, gamma, &z0)?;
        let secs = t.elapsed().as_secs_f64();
        let mult = recover_multiplier(&cfg, &sol.u, gamma)?;
        let umax = sol.u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{method:>6}: J^γ = {:.12e}  J = {:.12e}  kkt = {:.2e}  iterations = {}  {:.2} s",
            sol.objective, sol.objective_plain, sol.kkt_residual, sol.iterations, secs
        );
        println!(
            "        max u = {umax:.6}  multiplier L1 = {:.6e}  active cells = {}",
            mult.l1,
            mult.active_cells.len()
        );
    }
    Ok(())
}
