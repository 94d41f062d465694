//! Brute-force quadrature oracles for the fractional energy and operator.
//!
//! Nothing here uses kernel moments: every integral is evaluated from the raw
//! integrand with composite Gauss rules, graded geometrically toward the
//! singular points.

use crate::assembly::normalization_constant;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{gauss, GaussRule};

/// Integration strategy of [`quadrature_oracle_entry`].
pub const ORACLE_METHOD: &str = "composite Gauss on the raw double integral, geometric grading toward the diagonal, \
     shared corners and the boundary; adaptive bisection for separated cells";

const LEVELS: usize = 48;
// the one-dimensional diagonal singularity t^{1-2s} decays slowly for s near 1
const DIAGONAL_LEVELS: usize = 160;
const ADAPT_TOL: f64 = 1e-15;
const ADAPT_DEPTH: usize = 24;

/// An oracle value with its method tag and the number of integrand evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub value: f64,
    pub method: &'static str,
    pub evaluations: usize,
}

/// Hat function of node `node` (all nodes, including the boundary ones).
fn hat(mesh: &Mesh, node: usize, x: f64) -> f64 {
    let xs = mesh.nodes();
    if node > 0 && x >= xs[node - 1] && x <= xs[node] {
        return (x - xs[node - 1]) / (xs[node] - xs[node - 1]);
    }
    if node + 1 < xs.len() && x >= xs[node] && x <= xs[node + 1] {
        return (xs[node + 1] - x) / (xs[node + 1] - xs[node]);
    }
    0.0
}

/// Geometric breakpoints `0 < d_L < … < d_1 < d_0 = len`, ratio 1/2.
fn graded_points(len: f64) -> Vec<f64> {
    graded_points_n(len, LEVELS)
}

fn graded_points_n(len: f64, levels: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=levels).map(|k| len * 0.5f64.powi(k as i32)).collect();
    pts.push(0.0);
    pts.reverse();
    pts
}

/// Slope of the hat of `node` on cell `k`.
fn slope(mesh: &Mesh, node: usize, k: usize) -> f64 {
    let h = mesh.width(k);
    if k + 1 == node {
        1.0 / h
    } else if k == node {
        -1.0 / h
    } else {
        0.0
    }
}

struct Counter(usize);

/// `E(φ_i, φ_j)` for interior dofs `i`, `j` (node indices `i + 1`, `j + 1`).
pub fn quadrature_oracle_entry(mesh: &Mesh, s: f64, i: usize, j: usize) -> Result<OracleEntry> {
    let dofs = mesh.n_dofs();
    if i >= dofs || j >= dofs {
        return Err(Error::Parameter(format!("oracle indices ({i}, {j}) outside 0..{dofs}")));
    }
    let c = normalization_constant(s)?;
    let (p, q) = (i + 1, j + 1);
    let n = mesh.n_cells();
    let xs = mesh.nodes();
    let touches = |node: usize, k: usize| k + 1 == node || k == node;
    let rule = gauss(8);
    let mut count = Counter(0);

    let diff = |x: f64, y: f64| (hat(mesh, p, x) - hat(mesh, p, y)) * (hat(mesh, q, x) - hat(mesh, q, y));
    let mut double = 0.0;
    for k in 0..n {
        for l in k..n {
            let relevant = (touches(p, k) || touches(p, l)) && (touches(q, k) || touches(q, l));
            if !relevant {
                continue;
            }
            let (ka, kb) = (xs[k], xs[k + 1]);
            let (la, lb) = (xs[l], xs[l + 1]);
            // near the singular set the differences are formed from the
            // distances, not from rounded positions
            let v = if k == l {
                let sp = slope(mesh, p, k) * slope(mesh, q, k);
                same_cell(rule, ka, kb, s, &|_, t| sp * t * t, &mut count)
            } else if l == k + 1 {
                let (pk, pl) = (slope(mesh, p, k), slope(mesh, p, l));
                let (qk, ql) = (slope(mesh, q, k), slope(mesh, q, l));
                let g = |xi: f64, eta: f64| (pk * xi + pl * eta) * (qk * xi + ql * eta);
                touching(rule, kb - ka, lb - kb, s, &g, &mut count)
            } else {
                let f = |x: f64, y: f64| diff(x, y) * (x - y).abs().powf(-1.0 - 2.0 * s);
                adaptive2(&f, (ka, kb), (la, lb), 0, &mut count)?
            };
            // off-diagonal cell pairs appear twice in Ω×Ω
            double += if k == l { v } else { 2.0 * v };
        }
    }

    // exterior weight in terms of the distances to both ends, which stay
    // exact even where `x` itself rounds onto the boundary
    let (a, b) = (mesh.a(), mesh.b());
    let ext = |da: f64, db: f64| c / (2.0 * s) * (da.powf(-2.0 * s) + db.powf(-2.0 * s));
    let mut exterior = 0.0;
    for k in 0..n {
        if !(touches(p, k) && touches(q, k)) {
            continue;
        }
        let (ka, kb) = (xs[k], xs[k + 1]);
        if k == 0 {
            exterior += graded_1d(rule, 0.0, kb - a, true, |d| {
                count.0 += 1;
                let x = a + d;
                hat(mesh, p, x) * hat(mesh, q, x) * ext(d, (b - a) - d)
            });
        } else if k + 1 == n {
            exterior += graded_1d(rule, 0.0, b - ka, true, |d| {
                count.0 += 1;
                let x = b - d;
                hat(mesh, p, x) * hat(mesh, q, x) * ext((b - a) - d, d)
            });
        } else {
            exterior += gauss(16).integrate(ka, kb, |x| {
                count.0 += 1;
                hat(mesh, p, x) * hat(mesh, q, x) * ext(x - a, b - x)
            });
        }
    }

    let value = 0.5 * c * double + exterior;
    if !value.is_finite() {
        return Err(Error::Oracle(format!("non-finite oracle value for ({i}, {j})")));
    }
    Ok(OracleEntry { value, method: ORACLE_METHOD, evaluations: count.0 })
}

/// `∫_lo^hi f`, graded toward `lo` (`at_lo`) or `hi`.
fn graded_1d(rule: &GaussRule, lo: f64, hi: f64, at_lo: bool, mut f: impl FnMut(f64) -> f64) -> f64 {
    let pts = graded_points(hi - lo);
    pts.windows(2)
        .map(|w| {
            let (u, v) = if at_lo { (lo + w[0], lo + w[1]) } else { (hi - w[1], hi - w[0]) };
            rule.integrate(u, v, &mut f)
        })
        .sum()
}

/// `∬_{K×K} g(x, x - y) |x-y|^{-1-2s}`, with `g` symmetric in the sense
/// `g(x, t) = g(x - t, -t)`.
fn same_cell(rule: &GaussRule, ka: f64, kb: f64, s: f64, g: &impl Fn(f64, f64) -> f64, count: &mut Counter) -> f64 {
    let pts = graded_points_n(kb - ka, DIAGONAL_LEVELS);
    let mut sum = 0.0;
    for w in pts.windows(2) {
        for (t, wt) in rule.mapped(w[0], w[1]) {
            if t <= 0.0 {
                continue;
            }
            let inner: f64 = rule
                .mapped(ka + t, kb)
                .map(|(x, wx)| {
                    count.0 += 1;
                    wx * g(x, t)
                })
                .sum();
            sum += wt * t.powf(-1.0 - 2.0 * s) * inner;
        }
    }
    2.0 * sum
}

/// `∬ g(ξ, η) (ξ + η)^{-1-2s}` over `[0, h1] × [0, h2]`, with `ξ`, `η` the
/// distances to the shared node; tensor grading toward the corner.
fn touching(rule: &GaussRule, h1: f64, h2: f64, s: f64, g: &impl Fn(f64, f64) -> f64, count: &mut Counter) -> f64 {
    let px = graded_points(h1);
    let py = graded_points(h2);
    let mut sum = 0.0;
    for wx in px.windows(2) {
        for wy in py.windows(2) {
            for (xi, ax) in rule.mapped(wx[0], wx[1]) {
                for (eta, ay) in rule.mapped(wy[0], wy[1]) {
                    count.0 += 1;
                    sum += ax * ay * g(xi, eta) * (xi + eta).powf(-1.0 - 2.0 * s);
                }
            }
        }
    }
    sum
}

fn tensor(rule: &GaussRule, f: &impl Fn(f64, f64) -> f64, xr: (f64, f64), yr: (f64, f64)) -> f64 {
    rule.mapped(xr.0, xr.1).map(|(x, wx)| wx * rule.mapped(yr.0, yr.1).map(|(y, wy)| wy * f(x, y)).sum::<f64>()).sum()
}

/// Gauss 8 against Gauss 16 on the rectangle, bisecting the longer side.
fn adaptive2(
    f: &impl Fn(f64, f64) -> f64,
    xr: (f64, f64),
    yr: (f64, f64),
    depth: usize,
    count: &mut Counter,
) -> Result<f64> {
    let coarse = tensor(gauss(8), f, xr, yr);
    let fine = tensor(gauss(16), f, xr, yr);
    count.0 += 64 + 256;
    if (fine - coarse).abs() <= ADAPT_TOL * fine.abs().max(1e-300) {
        return Ok(fine);
    }
    if depth >= ADAPT_DEPTH {
        return Err(Error::Oracle(format!("adaptive quadrature did not converge on {xr:?} × {yr:?}")));
    }
    if xr.1 - xr.0 >= yr.1 - yr.0 {
        let m = 0.5 * (xr.0 + xr.1);
        Ok(adaptive2(f, (xr.0, m), yr, depth + 1, count)? + adaptive2(f, (m, xr.1), yr, depth + 1, count)?)
    } else {
        let m = 0.5 * (yr.0 + yr.1);
        Ok(adaptive2(f, xr, (yr.0, m), depth + 1, count)? + adaptive2(f, xr, (m, yr.1), depth + 1, count)?)
    }
}

/// Pointwise `(-Δ)^s u(x) = C ∫_0^∞ (2u(x) - u(x+t) - u(x-t)) t^{-1-2s} dt` for
/// `u` supported in `[-r, r]` with `|x| < r`.
///
/// `u2` is `u''(x)`, used for the Taylor piece on `[0, δ]`. The breakpoints
/// `r - |x|` and `r + |x|` are resolved by graded Gauss rules and the tail
/// beyond `r + |x|` is integrated analytically.
pub fn fractional_laplacian_at(s: f64, radius: f64, x: f64, u: impl Fn(f64) -> f64, u2: f64) -> Result<f64> {
    if !(x.abs() < radius) {
        return Err(Error::Domain(format!("|x| = {} must be below r = {radius}", x.abs())));
    }
    let c = normalization_constant(s)?;
    let ux = u(x);
    let t1 = radius - x.abs();
    let t2 = radius + x.abs();
    let delta = 1e-4 * t1;
    let f = |t: f64| (2.0 * ux - u(x + t) - u(x - t)) * t.powf(-1.0 - 2.0 * s);
    let rule = gauss(16);

    let taylor = -u2 * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    // log-spaced from δ to t1/2
    let mid = 0.5 * t1;
    let pieces = 48;
    let ratio = (mid / delta).powf(1.0 / pieces as f64);
    let mut near = 0.0;
    let mut lo = delta;
    for _ in 0..pieces {
        let hi = lo * ratio;
        near += rule.integrate(lo, hi.min(mid), f);
        lo = hi;
    }
    let before = graded_1d(rule, mid, t1, false, f);
    let between = if t2 > t1 { graded_1d(rule, t1, t2, false, f) } else { 0.0 };
    let tail = 2.0 * ux * t2.powf(-2.0 * s) / (2.0 * s);
    Ok(c * (taylor + near + before + between + tail))
}
