//! Closed-form building blocks for the kernel `|x - y|^{-1-2s}` on intervals.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Half-width of the band around `s = 1/2` where power antiderivatives switch
/// to their logarithmic form.
pub const LOG_BRANCH_TOL: f64 = 1e-13;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("fractional order must lie in (0, 1), got s = {s}")))
    }
}

/// `C_{1,s} = s 2^{2s} Γ((1+2s)/2) / (π^{1/2} Γ(1-s))`.
pub fn normalization_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    let num = s * 4f64.powf(s) * gamma(0.5 + s);
    let den = std::f64::consts::PI.sqrt() * gamma(1.0 - s);
    Ok(num / den)
}

/// Exterior weight `κ(x) = C_{1,s}/(2s) [(x-a)^{-2s} + (b-x)^{-2s}]`, i.e.
/// `C_{1,s}` times the kernel mass of `ℝ \ (a, b)` seen from `x`.
pub fn kappa(mesh: &Mesh, s: f64, x: f64) -> Result<f64> {
    check_order(s)?;
    let (a, b) = (mesh.a(), mesh.b());
    if !(x > a && x < b) {
        return Err(Error::Domain(format!("kappa is defined for a < x < b only, got x = {x} on ({a}, {b})")));
    }
    let c = normalization_constant(s)?;
    Ok(c / (2.0 * s) * ((x - a).powf(-2.0 * s) + (b - x).powf(-2.0 * s)))
}

/// `∫_lo^hi w^{e-1} dw` for `0 <= lo <= hi`.
///
/// Uses `ln(hi/lo)` when `|e|` is inside the log band and an `expm1` form
/// otherwise, so the result is accurate for exponents close to zero.
pub(crate) fn power_integral(lo: f64, hi: f64, e: f64) -> f64 {
    debug_assert!(lo >= 0.0 && hi >= lo);
    if hi == lo {
        return 0.0;
    }
    if lo == 0.0 {
        return if e > 0.0 { hi.powf(e) / e } else { f64::INFINITY };
    }
    if e.abs() <= 2.0 * LOG_BRANCH_TOL {
        return (hi / lo).ln();
    }
    let r = (hi / lo).ln();
    lo.powf(e) * (e * r).exp_m1() / e
}

/// `I_m = ∬_{X×Y} (x - y)^m |x - y|^{-1-2s} dx dy` in closed form.
///
/// The integrand depends on `t = x - y` only, so the double integral reduces to
/// `∫ w(t) t^m |t|^{-1-2s} dt` with the trapezoidal overlap length `w(t)`.
/// Requests that diverge (e.g. `m = 0` on touching or overlapping ranges with
/// `s >= 1/2`) return [`Error::NonFinite`].
pub fn kernel_moment(x_range: (f64, f64), y_range: (f64, f64), m: u32, s: f64) -> Result<f64> {
    check_order(s)?;
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Domain("kernel_moment needs non-degenerate ranges".into()));
    }
    let t1 = x0 - y1;
    let t4 = x1 - y0;
    let (t2, t3) = {
        let p = x0 - y0;
        let q = x1 - y1;
        if p <= q {
            (p, q)
        } else {
            (q, p)
        }
    };
    let plateau = (x1 - x0).min(y1 - y0);
    // w(t) = p + q t on each piece
    let pieces = [(t1, t2, -t1, 1.0), (t2, t3, plateau, 0.0), (t3, t4, t4, -1.0)];
    let mut total = 0.0;
    for &(lo, hi, p, q) in &pieces {
        if hi <= lo {
            continue;
        }
        if lo < 0.0 && hi > 0.0 {
            total += signed_piece(lo, 0.0, p, q, m, s);
            total += signed_piece(0.0, hi, p, q, m, s);
        } else {
            total += signed_piece(lo, hi, p, q, m, s);
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite(format!("kernel moment m = {m}, s = {s} over {x_range:?} x {y_range:?} diverges")))
    }
}

/// `∫_lo^hi (p + q t) t^m |t|^{-1-2s} dt` on a sign-definite interval.
fn signed_piece(lo: f64, hi: f64, p: f64, q: f64, m: u32, s: f64) -> f64 {
    let e0 = m as f64 - 2.0 * s;
    let e1 = e0 + 1.0;
    if lo >= 0.0 {
        let mut v = 0.0;
        if p != 0.0 {
            v += p * power_integral(lo, hi, e0);
        }
        if q != 0.0 {
            v += q * power_integral(lo, hi, e1);
        }
        v
    } else {
        // t = -τ, τ ∈ [-hi, -lo]
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let (a, b) = (-hi, -lo);
        let mut v = 0.0;
        if p != 0.0 {
            v += p * power_integral(a, b, e0);
        }
        if q != 0.0 {
            v -= q * power_integral(a, b, e1);
        }
        sign * v
    }
}

/// `∫_0^{h1}∫_0^{h2} ξ^2 (ξ+η)^{-1-2s} dη dξ`: the ξ² moment of two cells
/// sharing the node at ξ = η = 0.
pub(crate) fn touching_moment_20(h1: f64, h2: f64, s: f64) -> f64 {
    let e = 3.0 - 2.0 * s;
    // ∫_{h2}^{h1+h2} (w - h2)^2 w^{-2s} dw
    let top = h1 + h2;
    let q = power_integral(h2, top, e) - 2.0 * h2 * power_integral(h2, top, e - 1.0)
        + h2 * h2 * power_integral(h2, top, e - 2.0);
    (h1.powf(e) / e - q) / (2.0 * s)
}

/// `∫_0^{h1}∫_0^{h2} (ξ+η)^{1-2s} dη dξ`.
pub(crate) fn touching_moment_full(h1: f64, h2: f64, s: f64) -> f64 {
    let e = 3.0 - 2.0 * s;
    ((h1 + h2).powf(e) - h1.powf(e) - h2.powf(e)) / ((2.0 - 2.0 * s) * e)
}

/// Second moments `(J20, J11, J02)` for two cells of widths `h1`, `h2`
/// meeting at a node, in coordinates measured away from that node.
pub(crate) fn touching_moments(h1: f64, h2: f64, s: f64) -> (f64, f64, f64) {
    let j20 = touching_moment_20(h1, h2, s);
    let j02 = touching_moment_20(h2, h1, s);
    let full = touching_moment_full(h1, h2, s);
    (j20, 0.5 * (full - j20 - j02), j02)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss;

    #[test]
    fn normalization_at_one_half() {
        let c = normalization_constant(0.5).unwrap();
        assert!((c - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn normalization_rejects_out_of_range() {
        for s in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(normalization_constant(s), Err(Error::Parameter(_))));
        }
        assert!(normalization_constant(0.1).unwrap() > 0.0);
        assert!(normalization_constant(0.9).unwrap() > 0.0);
    }

    #[test]
    fn kappa_values() {
        let mesh = Mesh::uniform(-0.5, 0.5, 4).unwrap();
        let k = kappa(&mesh, 0.5, 0.0).unwrap();
        assert!((k - 4.0 / std::f64::consts::PI).abs() < 1e-14);
        for s in [0.3, 0.7] {
            for x in [0.1, 0.37, 0.49] {
                let l = kappa(&mesh, s, x).unwrap();
                let r = kappa(&mesh, s, -x).unwrap();
                assert!((l - r).abs() <= 1e-14 * l);
                assert!(l > kappa(&mesh, s, 0.0).unwrap());
            }
        }
        assert!(matches!(kappa(&mesh, 0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(kappa(&mesh, 0.5, -0.7), Err(Error::Domain(_))));
    }

    #[test]
    fn power_integral_log_band() {
        let v = power_integral(1.0, 2.0, 0.0);
        assert!((v - 2f64.ln()).abs() < 1e-16);
        // continuity across the band edge
        let v = power_integral(1.0, 2.0, 1e-12);
        assert!((v - 2f64.ln()).abs() < 1e-11);
        let v = power_integral(0.5, 3.0, 1.5);
        assert!((v - (3f64.powf(1.5) - 0.5f64.powf(1.5)) / 1.5).abs() < 1e-14);
    }

    #[test]
    fn kernel_moment_examples() {
        let v = kernel_moment((0.0, 1.0), (0.0, 1.0), 2, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let v = kernel_moment((0.0, 1.0), (2.0, 3.0), 0, 0.5).unwrap();
        assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        let v = kernel_moment((-0.3, 0.3), (-0.3, 0.3), 1, 0.3).unwrap();
        assert!(v.abs() < 1e-15);
        let h: f64 = 0.37;
        for s in [0.2, 0.5, 0.8] {
            let v = kernel_moment((0.0, h), (0.0, h), 2, s).unwrap();
            let exact = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
            assert!((v - exact).abs() < 1e-14 * exact);
        }
    }

    #[test]
    fn kernel_moment_divergent_requests() {
        assert!(matches!(kernel_moment((0.0, 1.0), (0.0, 1.0), 0, 0.6), Err(Error::NonFinite(_))));
        assert!(matches!(kernel_moment((0.0, 1.0), (1.0, 2.0), 0, 0.5), Err(Error::NonFinite(_))));
    }

    #[test]
    fn kernel_moment_disjoint_against_gauss() {
        let rule = gauss(24);
        for &(m, s) in &[(0u32, 0.3), (1, 0.55), (2, 0.8)] {
            let (x, y) = ((0.0, 0.4), (0.7, 1.5));
            let q = rule.integrate(x.0, x.1, |a| {
                rule.integrate(y.0, y.1, |b| {
                    let t: f64 = a - b;
                    t.powi(m as i32) * t.abs().powf(-1.0 - 2.0 * s)
                })
            });
            let v = kernel_moment(x, y, m, s).unwrap();
            assert!((v - q).abs() < 1e-12 * q.abs(), "m={m} s={s}: {v} vs {q}");
        }
    }

    #[test]
    fn touching_moments_against_graded_gauss() {
        // geometric grading toward the shared corner
        let graded = |h: f64| -> Vec<(f64, f64)> {
            let mut panels = Vec::new();
            let mut hi = h;
            for _ in 0..40 {
                let lo = 0.2 * hi;
                panels.push((lo, hi));
                hi = lo;
            }
            panels.push((0.0, hi));
            panels
        };
        let rule = gauss(12);
        for &(h1, h2, s) in &[(0.1, 0.1, 0.3), (0.1, 0.25, 0.5), (0.3, 0.05, 0.8)] {
            let mut q = [0.0; 3];
            for &(a0, a1) in &graded(h1) {
                for &(b0, b1) in &graded(h2) {
                    for (xi, wx) in rule.mapped(a0, a1) {
                        for (eta, wy) in rule.mapped(b0, b1) {
                            let k = wx * wy * (xi + eta).powf(-1.0 - 2.0 * s);
                            q[0] += k * xi * xi;
                            q[1] += k * xi * eta;
                            q[2] += k * eta * eta;
                        }
                    }
                }
            }
            let (j20, j11, j02) = touching_moments(h1, h2, s);
            for (v, r) in [j20, j11, j02].iter().zip(q) {
                assert!((v - r).abs() < 1e-10 * r, "h1={h1} h2={h2} s={s}: {v} vs {r}");
            }
        }
    }
}
