//! Mesh self-convergence at fixed γ: levels `n, 2n, …` against a fine
//! reference, with fitted orders for state and control.
//!
//! ```text
//! cargo run --release --example h_refinement -- 0.5 1e4 32 5 4096
//! ```

use frac_ocp::cli::{h_sweep, parse_config};

fn main() -> frac_ocp::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let s = args.next().unwrap_or_else(|| "0.5".into());
    let gamma = args.next().unwrap_or_else(|| "1e4".into());
    let n = args.next().unwrap_or_else(|| "32".into());
    let levels = args.next().unwrap_or_else(|| "5".into());
    let ref_n = args.next().unwrap_or_else(|| "4096".into());
    let text = format!("command = h-sweep\ns = {s}\ngamma = {gamma}\nn = {n}\nlevels = {levels}\nref_n = {ref_n}\n");
    let cfg = parse_config(&text, &[])?;
    let (rows, (ou, oz), _) = h_sweep(&cfg)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "n", "h", "err_u", "err_z");
    for r in &rows {
        println!("{:6} {:12.4e} {:12.4e} {:12.4e}", r.n, r.h, r.err_u, r.err_z);
    }
    println!("fitted orders: state {ou:.3}, control {oz:.3} (s = {s})");
    Ok(())
}
