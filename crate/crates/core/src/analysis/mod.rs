//! Closed-form solutions, independent oracles, norms and rate fitting.

mod newton;
mod oracle;

use statrs::function::gamma::gamma;

pub use newton::{semismooth_newton_oracle, ORACLE_MAX_CELLS};
pub use oracle::{fractional_laplacian_at, quadrature_oracle_entry, OracleEntry, ORACLE_METHOD};

use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, P1Function};
use crate::pde::same_mesh;
use crate::quadrature::gauss;

/// `ε` in the rate exponents `β = min{2s, 1 - ε}` and `λ`.
pub const RATE_EPS: f64 = 0.05;

/// State rate `β = min{2s, 1 - ε}`.
pub fn beta(s: f64) -> f64 {
    (2.0 * s).min(1.0 - RATE_EPS)
}

/// Control rate `λ = min{3s, s + 1/2 - ε, 1 - ε}`.
pub fn lambda(s: f64) -> f64 {
    (3.0 * s).min(s + 0.5 - RATE_EPS).min(1.0 - RATE_EPS)
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// `c(s) = Γ(1/2) / (2^{2s} Γ(1+s) Γ(s+1/2))`, so that `c(s)(r² - x²)₊^s`
/// solves `(-Δ)^s u = 1` on `(-r, r)`.
pub fn getoor_constant(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(gamma(0.5) / (4f64.powf(s) * gamma(1.0 + s) * gamma(s + 0.5)))
}

/// Two-dimensional coefficient `2^{-2s} / Γ(1+s)²` of the disk profile.
pub fn getoor_constant_2d(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(4f64.powf(-s) / gamma(1.0 + s).powi(2))
}

/// `c(s) (r² - x²)₊^s`. Panics for `s` outside `(0, 1)`.
pub fn getoor_profile(s: f64, x: f64, radius: f64) -> f64 {
    let c = getoor_constant(s).expect("getoor_profile needs 0 < s < 1");
    let q = radius * radius - x * x;
    if q <= 0.0 {
        0.0
    } else {
        c * q.powf(s)
    }
}

/// `‖f‖_{L²}` of a P1 function (exact).
pub fn l2_norm(f: &P1Function) -> f64 {
    cell_pairs(f.mesh(), f, f).sqrt()
}

fn cell_pairs(mesh: &Mesh, f: &P1Function, g: &P1Function) -> f64 {
    (0..mesh.n_cells())
        .map(|k| {
            let (a0, a1) = (f.node_value(k), f.node_value(k + 1));
            let (b0, b1) = (g.node_value(k), g.node_value(k + 1));
            mesh.width(k) / 6.0 * (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1)
        })
        .sum()
}

/// `‖f - g‖_{L²}` for P1 functions on the same mesh.
pub fn l2_error(f: &P1Function, g: &P1Function) -> Result<f64> {
    same_mesh(f.mesh(), g.mesh())?;
    let d: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a - b).collect();
    let d = P1Function::new(f.mesh().clone(), d)?;
    Ok(l2_norm(&d))
}

/// `‖f - g‖_{L²}` against a function given pointwise, which may have
/// boundary singularities like `(r² - x²)^s`: the two cells next to each end
/// are graded geometrically toward the boundary.
pub fn l2_error_exact(f: &P1Function, g: impl Fn(f64) -> f64) -> f64 {
    let mesh = f.mesh();
    let n = mesh.n_cells();
    let rule = gauss(16);
    let mut total = 0.0;
    for k in 0..n {
        let (xl, xr) = (mesh.node(k), mesh.node(k + 1));
        let (f0, f1) = (f.node_value(k), f.node_value(k + 1));
        let sq = |x: f64| {
            let fx = f0 + (f1 - f0) * (x - xl) / (xr - xl);
            (fx - g(x)).powi(2)
        };
        if k < 2 {
            total += graded(rule, mesh.a(), xl, xr, &sq);
        } else if k + 2 >= n {
            total += graded(rule, mesh.b(), xl, xr, &sq);
        } else {
            total += rule.integrate(xl, xr, sq);
        }
    }
    total.sqrt()
}

/// `∫_lo^hi f` with geometric refinement (ratio 1/2) toward `toward`, which is
/// either endpoint or lies outside `[lo, hi]`.
fn graded(rule: &crate::quadrature::GaussRule, toward: f64, lo: f64, hi: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let near = if (toward - lo).abs() <= (toward - hi).abs() { lo } else { hi };
    let far = if near == lo { hi } else { lo };
    if (toward - near).abs() > 0.5 * (hi - lo) {
        return rule.integrate(lo, hi, f);
    }
    let mut sum = 0.0;
    let mut outer = far;
    let mut frac = 0.5;
    for _ in 0..60 {
        let inner = near + (far - near) * frac;
        let (a, b) = if inner < outer { (inner, outer) } else { (outer, inner) };
        sum += rule.integrate(a, b, f);
        outer = inner;
        frac *= 0.5;
    }
    let (a, b) = if near < outer { (near, outer) } else { (outer, near) };
    sum + rule.integrate(a, b, f)
}

/// `(uᵀ A u)^{1/2}`.
pub fn energy_norm(op: &FracOperator, u: &P1Function) -> Result<f64> {
    same_mesh(op.mesh(), u.mesh())?;
    Ok(op.energy(u.values()).max(0.0).sqrt())
}

/// `(‖(u - u_b)₊‖_{L²}, max (u - u_b)₊)`; the maximum of a P1 function is
/// attained at a node, so both values are exact.
pub fn violation_norms(u: &P1Function, u_b: f64) -> (f64, f64) {
    crate::ocp::violation(u, u_b)
}

/// Selection of the points entering [`fit_rate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitWindow {
    All,
    /// Index range into the data.
    Range(std::ops::Range<usize>),
    /// Drops flat stretches at either end: points are removed while the local
    /// log-log slope magnitude is below half the median over all points.
    Asymptotic,
}

/// Least-squares slope of `ln err` against `ln x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub errs: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln err`.
    pub residual: f64,
    pub window: std::ops::Range<usize>,
}

fn local_slopes(lx: &[f64], le: &[f64]) -> Vec<f64> {
    lx.windows(2).zip(le.windows(2)).map(|(x, e)| (e[1] - e[0]) / (x[1] - x[0])).collect()
}

pub fn fit_rate(xs: &[f64], errs: &[f64], window: FitWindow) -> Result<RateFit> {
    if xs.len() != errs.len() {
        return Err(Error::Dimension { expected: xs.len(), got: errs.len() });
    }
    if xs.iter().chain(errs).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter("rate fits need positive finite data".into()));
    }
    let increasing = xs.windows(2).all(|w| w[1] > w[0]);
    let decreasing = xs.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::Parameter("abscissae must be strictly monotone".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let range = match window {
        FitWindow::All => 0..xs.len(),
        FitWindow::Range(r) => {
            if r.end > xs.len() || r.start > r.end {
                return Err(Error::Parameter(format!("window {r:?} outside data of length {}", xs.len())));
            }
            r
        }
        FitWindow::Asymptotic => {
            let slopes = local_slopes(&lx, &le);
            if slopes.is_empty() {
                0..xs.len()
            } else {
                let mut mags: Vec<f64> = slopes.iter().map(|v| v.abs()).collect();
                mags.sort_by(f64::total_cmp);
                let m = mags.len();
                let median = if m % 2 == 1 { mags[m / 2] } else { 0.5 * (mags[m / 2 - 1] + mags[m / 2]) };
                let flat = |i: usize| slopes[i].abs() < 0.5 * median;
                let mut lo = 0;
                while lo < slopes.len() && flat(lo) {
                    lo += 1;
                }
                // first flat step after the steep stretch marks the floor
                let mut hi = lo;
                while hi < slopes.len() && !flat(hi) {
                    hi += 1;
                }
                lo..hi + 1
            }
        }
    };
    if range.len() < 3 {
        return Err(Error::Parameter(format!(
            "rate fit needs at least 3 points, window {range:?} has {}",
            range.len()
        )));
    }
    let x = &lx[range.clone()];
    let y = &le[range.clone()];
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / m).sqrt();
    Ok(RateFit {
        xs: xs[range.clone()].to_vec(),
        errs: errs[range.clone()].to_vec(),
        slope,
        intercept,
        residual,
        window: range,
    })
}
