//! γ-continuation for the Getoor target: violation, multiplier and objective
//! chain along `γ_k = 0.1 · 4^k`, plus the fitted violation rate.
//!
//! ```text
//! cargo run --release --example gamma_continuation -- 0.4 512
//! ```

use std::sync::Arc;
use std::time::Instant;

use frac_ocp::analysis::{fit_rate, FitWindow};
use frac_ocp::ocp::{gamma_continuation, ControlBounds};
use frac_ocp::{FracOperator, Mesh, ProblemConfig};

fn main() -> frac_ocp::Result<()> {
    let mut args = std::env::args().skip(1);
    let s: f64 = args.next().map_or(0.4, |v| v.parse().expect("s"));
    let n: usize = args.next().map_or(512, |v| v.parse().expect("n"));
    let count: usize = args.next().map_or(13, |v| v.parse().expect("count"));

    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n)?);
    let op = FracOperator::assemble(mesh, s)?;
    let cfg =
        ProblemConfig { s, control_bounds: Some(ControlBounds::new(0.0, 10.0)?), opt_tol: 1e-10, ..Default::default() };
    let t = Instant::now();
    let rep = gamma_continuation(&cfg, &op, 0.1, 4.0, count)?;
    println!("path of {} solves in {:.2} s", rep.records.len(), t.elapsed().as_secs_f64());
    println!(
        "{:>11} {:>13} {:>11} {:>11} {:>11} {:>9} {:>9} {:>5}",
        "gamma", "J^gamma", "viol_l2", "viol_sup", "mult_l1", "kkt", "fixpt", "it"
    );
    for r in &rep.records {
        println!(
            "{:11.4e} {:13.6e} {:11.4e} {:11.4e} {:11.4e} {:9.2e} {:9.2e} {:5}",
            r.gamma, r.j_gamma, r.viol_l2, r.viol_sup, r.mult_l1, r.kkt, r.fixed_point, r.iters
        );
    }
    if let Some(f) = &rep.failure {
        println!("failure: {f}");
    }
    let chain = rep.chain_violations(|r| 1e-10 * (1.0 + r.j_gamma_ref.abs()));
    println!("chain violations: {chain:?}");
    let gammas = rep.gammas();
    let viol = rep.column(|r| r.viol_l2);
    if viol.iter().all(|v| *v > 0.0) {
        let fit = fit_rate(&gammas, &viol, FitWindow::Asymptotic)?;
        println!("viol_l2 ~ gamma^{:.3} over {:?}", fit.slope, fit.window);
    }
    Ok(())
}
