//! Optimizers for the fixed-γ problem.
//!
//! Both methods work in the L² geometry of the control space (cell-width
//! weighted), stop on the projected-gradient residual
//! `‖z - P(z - ∇J^γ)‖ <= opt_tol`, which implies the relative test
//! `<= opt_tol (1 + ‖z‖)`, and only ever accept iterates that pass an Armijo
//! test along the projection arc.

use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, Side};

use super::objective::{clamp_opt, Evaluation, Problem};
use super::{ControlBounds, ProblemConfig};
use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::{P0Function, P1Function};
use crate::pde::{penalty_argument, positive_part_jacobian};

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;
/// Backtracking factor.
pub const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Projected gradient, Armijo backtracking from the step `1/α`.
    ProjectedGradient,
    /// Projected semismooth Newton: generalized Hessian on the free cells,
    /// gradient scaling on the cells held at a bound.
    SemismoothNewton,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pg" | "projected-gradient" => Ok(Self::ProjectedGradient),
            "newton" | "semismooth-newton" => Ok(Self::SemismoothNewton),
            other => Err(Error::Config(format!("unknown method '{other}' (expected 'pg' or 'newton')"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ProjectedGradient => "pg",
            Self::SemismoothNewton => "newton",
        })
    }
}

/// Solution of the regularized problem for one γ.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub z: P0Function,
    pub u: P1Function,
    pub xi: P1Function,
    pub gamma: f64,
    /// `J^γ(z)`.
    pub objective: f64,
    /// `J(z)`.
    pub objective_plain: f64,
    pub kkt_residual: f64,
    /// `‖z - P(-Πξ/α)‖_{L²}`.
    pub fixed_point_residual: f64,
    /// `‖(μ̂ + γ(u - u_b))₊‖_{L¹}`.
    pub multiplier_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

impl OcpSolution {
    pub(crate) fn from_evaluation(
        ev: Evaluation,
        bounds: Option<ControlBounds>,
        alpha: f64,
        iterations: usize,
        converged: bool,
        warning: Option<String>,
    ) -> Self {
        Self {
            kkt_residual: ev.kkt_residual(bounds),
            fixed_point_residual: ev.fixed_point_residual(bounds, alpha),
            multiplier_l1: ev.penalty.l1,
            objective: ev.j_gamma,
            objective_plain: ev.j,
            gamma: ev.gamma,
            z: ev.z,
            u: ev.u,
            xi: ev.xi,
            iterations,
            converged,
            warning,
        }
    }
}

/// Minimizes `J^γ` over `Z_ad` starting from `z0` (projected first).
///
/// Exhausting `max_iter` is not an error: the best iterate is returned with
/// `converged = false` and a warning.
pub fn solve_fixed_gamma(cfg: &ProblemConfig, op: &FracOperator, gamma: f64, z0: &P0Function) -> Result<OcpSolution> {
    let problem = Problem::new(cfg, op)?;
    solve_problem(&problem, gamma, z0, cfg.method)
}

pub(crate) fn solve_problem(problem: &Problem<'_>, gamma: f64, z0: &P0Function, method: Method) -> Result<OcpSolution> {
    let z = problem.project(z0);
    let ev = problem.evaluate(&z, gamma)?;
    match method {
        Method::ProjectedGradient => projected_gradient(problem, ev),
        Method::SemismoothNewton => projected_newton(problem, ev),
    }
}

/// Objective decreases below this size are indistinguishable from rounding.
fn roundoff_level(j: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + j.abs())
}

enum Trial {
    Accepted(Evaluation),
    Rejected,
}

/// Armijo test for a trial point; in the rounding regime the trial is judged by
/// the KKT residual instead.
fn judge(problem: &Problem<'_>, current: &Evaluation, trial: &P0Function, predicted: f64) -> Result<Trial> {
    let bounds = problem.bounds();
    let fw = problem.forward(trial, current.gamma)?;
    if ARMIJO_C * predicted > roundoff_level(current.j_gamma) {
        if fw.j_gamma <= current.j_gamma - ARMIJO_C * predicted {
            return Ok(Trial::Accepted(problem.evaluate(trial, current.gamma)?));
        }
        return Ok(Trial::Rejected);
    }
    if fw.j_gamma > current.j_gamma + roundoff_level(current.j_gamma) {
        return Ok(Trial::Rejected);
    }
    let ev = problem.evaluate(trial, current.gamma)?;
    if ev.kkt_residual(bounds) < current.kkt_residual(bounds) {
        Ok(Trial::Accepted(ev))
    } else {
        Ok(Trial::Rejected)
    }
}

fn l2_dot(widths: &[f64], a: &[f64], b: &[f64]) -> f64 {
    widths.iter().zip(a).zip(b).map(|((h, x), y)| h * x * y).sum()
}

fn projected_gradient(problem: &Problem<'_>, mut ev: Evaluation) -> Result<OcpSolution> {
    let bounds = problem.bounds();
    let widths = ev.z.mesh().widths().to_vec();
    let alpha = problem.cfg.alpha;
    for it in 0..problem.cfg.max_iter {
        if ev.kkt_residual(bounds) <= problem.cfg.opt_tol {
            return Ok(OcpSolution::from_evaluation(ev, bounds, problem.cfg.alpha, it, true, None));
        }
        let mut step = 1.0 / alpha;
        let mut next = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> =
                ev.z.values().iter().zip(&ev.gradient).map(|(z, g)| clamp_opt(bounds, z - step * g)).collect();
            let delta: Vec<f64> = ev.z.values().iter().zip(&trial).map(|(a, b)| a - b).collect();
            let predicted = l2_dot(&widths, &ev.gradient, &delta);
            let trial = P0Function::new(ev.z.mesh().clone(), trial)?;
            if let Trial::Accepted(e) = judge(problem, &ev, &trial, predicted)? {
                next = Some(e);
                break;
            }
            step *= ARMIJO_SHRINK;
        }
        match next {
            Some(e) => ev = e,
            None => {
                let warning = format!("line search stalled at iteration {it}");
                log::warn!("projected gradient: {warning}");
                return Ok(OcpSolution::from_evaluation(ev, bounds, problem.cfg.alpha, it, false, Some(warning)));
            }
        }
    }
    let done = ev.kkt_residual(bounds) <= problem.cfg.opt_tol;
    let warning = (!done).then(|| format!("max_iter = {} exhausted", problem.cfg.max_iter));
    if let Some(w) = &warning {
        log::warn!("projected gradient: {w}");
    }
    Ok(OcpSolution::from_evaluation(ev, bounds, problem.cfg.alpha, problem.cfg.max_iter, done, warning))
}

/// Cells held at a bound: within `eps` of it with the gradient pushing outward.
fn binding_cells(ev: &Evaluation, bounds: Option<ControlBounds>, eps: f64) -> Vec<bool> {
    let Some(b) = bounds else {
        return vec![false; ev.gradient.len()];
    };
    ev.z.values()
        .iter()
        .zip(&ev.gradient)
        .map(|(&z, &g)| (z <= b.lo + eps && g > 0.0) || (z >= b.hi - eps && g < 0.0))
        .collect()
}

/// Solves `H_FF d = (h g)_F` with the generalized Hessian
/// `H = α D + Sᵀ (M + γ J_act) S` restricted to the free cells.
fn newton_direction(problem: &Problem<'_>, ev: &Evaluation, free: &[usize]) -> Option<Vec<f64>> {
    let op = problem.op;
    let widths = ev.z.mesh().widths();
    let s = op.control_to_state();
    let t = op.tracking_hessian();
    let nf = free.len();
    if nf == 0 {
        return Some(Vec::new());
    }
    let w = penalty_argument(&problem.mu_hat, &ev.u, ev.gamma, problem.cfg.u_b).ok()?;
    let jac = positive_part_jacobian(&w);
    let active: Vec<usize> = (0..jac.dim()).filter(|&i| jac.diag[i] > 0.0).collect();

    let mut h = Mat::from_fn(nf, nf, |a, b| t[(free[a], free[b])]);
    if !active.is_empty() {
        let na = active.len();
        let mut pos = vec![usize::MAX; jac.dim()];
        for (r, &i) in active.iter().enumerate() {
            pos[i] = r;
        }
        let s_af = Mat::from_fn(na, nf, |r, c| s[(active[r], free[c])]);
        // J is supported on the active nodes only
        let js_af = Mat::from_fn(na, nf, |r, c| {
            let i = active[r];
            let mut v = jac.diag[i] * s_af[(r, c)];
            if i > 0 && pos[i - 1] != usize::MAX {
                v += jac.off[i - 1] * s_af[(pos[i - 1], c)];
            }
            if i + 1 < jac.dim() && pos[i + 1] != usize::MAX {
                v += jac.off[i] * s_af[(pos[i + 1], c)];
            }
            v
        });
        let p = s_af.transpose() * &js_af;
        h += p * ev.gamma;
    }
    for (a, &k) in free.iter().enumerate() {
        h[(a, a)] += problem.cfg.alpha * widths[k];
    }
    let llt = h.llt(Side::Lower).ok()?;
    let rhs = Col::from_fn(nf, |a| widths[free[a]] * ev.gradient[free[a]]);
    let d = llt.solve(&rhs);
    let d: Vec<f64> = (0..nf).map(|a| d[a]).collect();
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn projected_newton(problem: &Problem<'_>, mut ev: Evaluation) -> Result<OcpSolution> {
    let bounds = problem.bounds();
    let widths = ev.z.mesh().widths().to_vec();
    let eps_bar = bounds.map_or(0.0, |b| 1e-2 * (b.hi - b.lo));
    let mut gradient_fallbacks = 0usize;
    for it in 0..problem.cfg.max_iter {
        let res = ev.kkt_residual(bounds);
        if res <= problem.cfg.opt_tol {
            return Ok(OcpSolution::from_evaluation(ev, bounds, problem.cfg.alpha, it, true, None));
        }
        let binding = binding_cells(&ev, bounds, eps_bar.min(res));
        let free: Vec<usize> = (0..binding.len()).filter(|&k| !binding[k]).collect();
        let dir_free = newton_direction(problem, &ev, &free);
        let mut dir = ev.gradient.clone();
        let newton_ok = dir_free.is_some();
        if let Some(df) = &dir_free {
            for (a, &k) in free.iter().enumerate() {
                dir[k] = df[a];
            }
        } else {
            gradient_fallbacks += 1;
        }

        let mut step = 1.0;
        let mut next = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> =
                ev.z.values().iter().zip(&dir).map(|(z, d)| clamp_opt(bounds, z - step * d)).collect();
            let predicted: f64 = (0..trial.len())
                .map(|k| {
                    let g = widths[k] * ev.gradient[k];
                    if binding[k] || !newton_ok {
                        g * (ev.z.values()[k] - trial[k])
                    } else {
                        step * g * dir[k]
                    }
                })
                .sum();
            let trial = P0Function::new(ev.z.mesh().clone(), trial)?;
            if let Trial::Accepted(e) = judge(problem, &ev, &trial, predicted.max(0.0))? {
                next = Some(e);
                break;
            }
            step *= ARMIJO_SHRINK;
        }
        match next {
            Some(e) => ev = e,
            None => {
                // one projected-gradient step before giving up
                let pg = projected_gradient_step(problem, &ev, &widths)?;
                match pg {
                    Some(e) => {
                        gradient_fallbacks += 1;
                        ev = e;
                    }
                    None => {
                        let warning = format!("line search stalled at iteration {it}");
                        log::warn!("newton: {warning}");
                        return Ok(OcpSolution::from_evaluation(
                            ev,
                            bounds,
                            problem.cfg.alpha,
                            it,
                            false,
                            Some(warning),
                        ));
                    }
                }
            }
        }
    }
    let done = ev.kkt_residual(bounds) <= problem.cfg.opt_tol;
    let warning = (!done)
        .then(|| format!("max_iter = {} exhausted ({gradient_fallbacks} gradient fallbacks)", problem.cfg.max_iter));
    if let Some(w) = &warning {
        log::warn!("newton: {w}");
    }
    Ok(OcpSolution::from_evaluation(ev, bounds, problem.cfg.alpha, problem.cfg.max_iter, done, warning))
}

fn projected_gradient_step(problem: &Problem<'_>, ev: &Evaluation, widths: &[f64]) -> Result<Option<Evaluation>> {
    let bounds = problem.bounds();
    let mut step = 1.0 / problem.cfg.alpha;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> =
            ev.z.values().iter().zip(&ev.gradient).map(|(z, g)| clamp_opt(bounds, z - step * g)).collect();
        let delta: Vec<f64> = ev.z.values().iter().zip(&trial).map(|(a, b)| a - b).collect();
        let predicted = l2_dot(widths, &ev.gradient, &delta);
        let trial = P0Function::new(ev.z.mesh().clone(), trial)?;
        if let Trial::Accepted(e) = judge(problem, ev, &trial, predicted)? {
            return Ok(Some(e));
        }
        step *= ARMIJO_SHRINK;
    }
    Ok(None)
}
