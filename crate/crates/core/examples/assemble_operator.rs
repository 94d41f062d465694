//! Assembles the fractional stiffness matrix on uniform meshes, compares a few
//! entries with the brute-force quadrature oracle and reports timings.
//!
//! ```text
//! cargo run --release --example assemble_operator -- 0.4 16 256 1024
//! ```

use std::sync::Arc;
use std::time::Instant;

use frac_ocp::analysis::quadrature_oracle_entry;
use frac_ocp::assembly::{normalization_constant, ASSEMBLY_METHOD};
use frac_ocp::{FracOperator, Mesh};

fn main() -> frac_ocp::Result<()> {
    let mut args = std::env::args().skip(1);
    let s: f64 = args.next().map_or(0.4, |v| v.parse().expect("s"));
    let sizes: Vec<usize> = args.map(|v| v.parse().expect("n")).collect();
    let sizes = if sizes.is_empty() { vec![16, 256, 1024] } else { sizes };

    println!("s = {s}, C(s) = {:.15}", normalization_constant(s)?);
    println!("method: {ASSEMBLY_METHOD}");
    for n in sizes {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n)?);
        let t = Instant::now();
        let op = FracOperator::assemble(mesh.clone(), s)?;
        let a = op.stiffness();
        println!(
            "n = {n:5}: assembled and factored in {:.3} s, A[0,0] = {:.12e}",
            t.elapsed().as_secs_f64(),
            a[(0, 0)]
        );
        if n <= 64 {
            for (i, j) in [(0, 0), (0, 1), (0, 2), (n / 2, n / 2 - 1), (0, n - 2)] {
                let o = quadrature_oracle_entry(&mesh, s, i, j)?;
                println!(
                    "    A[{i},{j}] = {:+.15e}  oracle {:+.15e}  rel {:.1e}",
                    a[(i, j)],
                    o.value,
                    ((a[(i, j)] - o.value) / o.value).abs()
                );
            }
        }
    }
    Ok(())
}
