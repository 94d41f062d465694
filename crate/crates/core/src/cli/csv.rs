use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::run::HSweepRow;
use crate::error::Result;
use crate::ocp::{OcpSolution, PathRecord};

pub fn gamma_sweep_header() -> &'static str {
    "gamma,J,Jgamma,viol_l2,viol_sup,mult_l1,dz_l2,kkt,iters"
}

pub fn h_sweep_header() -> &'static str {
    "h,err_u_l2,err_z_l2"
}

/// Digits after the decimal point used by [`format_number`].
pub const DEFAULT_PRECISION: usize = 16;

/// 17 significant digits, `.` decimal separator.
pub fn format_number(v: f64) -> String {
    format_with(v, DEFAULT_PRECISION)
}

/// Scientific notation with `digits` after the decimal point; NaN as `nan`.
pub fn format_with(v: f64, digits: usize) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.digits$e}")
    }
}

pub(crate) fn gamma_row(r: &PathRecord, p: usize) -> String {
    let f = |v: f64| format_with(v, p);
    let dz = r.dz_l2.map_or_else(|| "nan".to_string(), f);
    format!(
        "{},{},{},{},{},{},{},{},{}",
        f(r.gamma),
        f(r.j),
        f(r.j_gamma),
        f(r.viol_l2),
        f(r.viol_sup),
        f(r.mult_l1),
        dz,
        f(r.kkt),
        r.iters
    )
}

/// Final row after an inner failure: the γ that failed, `nan` fields and
/// `failed` in the iteration column.
pub(crate) fn gamma_failure_row(gamma: f64, p: usize) -> String {
    format!("{},nan,nan,nan,nan,nan,nan,nan,failed", format_with(gamma, p))
}

pub(crate) fn gamma_sweep_csv(records: &[PathRecord], failed_gamma: Option<f64>, p: usize) -> String {
    let mut out = String::new();
    writeln!(out, "{}", gamma_sweep_header()).unwrap();
    for r in records {
        writeln!(out, "{}", gamma_row(r, p)).unwrap();
    }
    if let Some(g) = failed_gamma {
        writeln!(out, "{}", gamma_failure_row(g, p)).unwrap();
    }
    out
}

pub(crate) fn h_sweep_csv(rows: &[HSweepRow], orders: Option<(f64, f64)>, p: usize) -> String {
    let f = |v: f64| format_with(v, p);
    let mut out = String::new();
    writeln!(out, "{}", h_sweep_header()).unwrap();
    for r in rows {
        writeln!(out, "{},{},{}", f(r.h), f(r.err_u), f(r.err_z)).unwrap();
    }
    if let Some((ou, oz)) = orders {
        writeln!(out, "order,{},{}", f(ou), f(oz)).unwrap();
    }
    out
}

pub(crate) fn solution_csv(sol: &OcpSolution, u_d: &[f64], mult: &[f64], p: usize) -> String {
    let f = |v: f64| format_with(v, p);
    let mut out = String::new();
    writeln!(out, "x,u_d,u,xi,mult").unwrap();
    let mesh = sol.u.mesh();
    for (i, &x) in mesh.nodes().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            f(x),
            f(u_d[i]),
            f(sol.u.node_value(i)),
            f(sol.xi.node_value(i)),
            f(mult[i])
        )
        .unwrap();
    }
    out
}

pub(crate) fn control_csv(sol: &OcpSolution, p: usize) -> String {
    let f = |v: f64| format_with(v, p);
    let mut out = String::new();
    writeln!(out, "x_left,x_right,z").unwrap();
    let mesh = sol.z.mesh();
    for (k, z) in sol.z.values().iter().enumerate() {
        writeln!(out, "{},{},{}", f(mesh.node(k)), f(mesh.node(k + 1)), f(*z))
            .unwrap();
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_format() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_number(f64::NAN), "nan");
        assert_eq!(gamma_failure_row(4.0, 16), "4.0000000000000000e0,nan,nan,nan,nan,nan,nan,nan,failed");
        assert_eq!(format_with(1234.5, 3), "1.234e3");
    }
}
