//! Exact positive-part integrals of a piecewise-linear function with kinks
//! inside cells, against a fine midpoint sum.
//!
//! ```text
//! cargo run --release --example positive_part
//! ```

use std::sync::Arc;

use frac_ocp::pde::positive_part;
use frac_ocp::{Mesh, NodalFunction};

fn main() -> frac_ocp::Result<()> {
    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 8)?);
    let w = NodalFunction::interpolate(mesh.clone(), |x| (6.0 * x).sin() - 0.2);
    let pp = positive_part(&w);
    println!("nodal values: {:.4?}", w.values());
    println!("active cells: {:?}", pp.active_cells);

    let m = 1_000_000;
    let h = mesh.length() / m as f64;
    let (mut l1, mut l2) = (0.0, 0.0);
    for k in 0..m {
        let v = w.evaluate(mesh.a() + (k as f64 + 0.5) * h)?.max(0.0);
        l1 += h * v;
        l2 += h * v * v;
    }
    println!("L1: exact {:.12}  midpoint {:.12}", pp.l1, l1);
    println!("L2: exact {:.12}  midpoint {:.12}", pp.l2, l2.sqrt());
    println!("load: {:.6?}", pp.load);
    Ok(())
}
