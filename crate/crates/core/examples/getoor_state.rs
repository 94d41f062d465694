//! State solve with a unit control against the closed-form Getoor profile,
//! with the fitted L² order next to the predicted `min(2s, 0.95)`.
//!
//! ```text
//! cargo run --release --example getoor_state -- 0.3 0.5 0.7
//! ```

use std::sync::Arc;

use frac_ocp::analysis::{beta, fit_rate, getoor_profile, l2_error_exact, FitWindow};
use frac_ocp::pde::solve_state;
use frac_ocp::{FracOperator, Mesh, P0Function};

fn main() -> frac_ocp::Result<()> {
    let orders: Vec<f64> = std::env::args().skip(1).map(|v| v.parse().expect("s")).collect();
    let orders = if orders.is_empty() { vec![0.3, 0.5, 0.7] } else { orders };
    for s in orders {
        let (mut hs, mut errs) = (Vec::new(), Vec::new());
        for n in [64, 128, 256, 512, 1024] {
            let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n)?);
            let op = FracOperator::assemble(mesh.clone(), s)?;
            let u = solve_state(&op, &P0Function::constant(mesh.clone(), 1.0))?;
            let err = l2_error_exact(&u, |x| getoor_profile(s, x, 0.5));
            println!("s = {s}  n = {n:5}  u(0) = {:.10}  L2 error = {err:.4e}", u.evaluate(0.0)?);
            hs.push(mesh.h());
            errs.push(err);
        }
        let fit = fit_rate(&hs, &errs, FitWindow::All)?;
        println!("s = {s}  fitted order {:.3}  predicted {:.3}\n", fit.slope, beta(s));
    }
    Ok(())
}
