//! γ-continuation with warm starts and path diagnostics.

use std::sync::Arc;

use super::objective::Problem;
use super::optimizer::{solve_problem, OcpSolution};
use super::ProblemConfig;
use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::{NodalFunction, P0Function, P1Function};
use crate::pde::{excess, penalty_argument, positive_part};

/// `γ_k = gamma0 · factor^k` for `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub gamma0: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { gamma0: 0.1, factor: 4.0, count: 13 }
    }
}

impl Schedule {
    pub fn new(gamma0: f64, factor: f64, count: usize) -> Result<Self> {
        let s = Self { gamma0, factor, count };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::Config(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.factor > 1.0 && self.factor.is_finite()) {
            return Err(Error::Config(format!("factor must exceed 1, got {}", self.factor)));
        }
        if self.count == 0 {
            return Err(Error::Config("count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn gammas(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.gamma0 * self.factor.powi(k as i32)).collect()
    }
}

/// Diagnostics at one γ.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub gamma: f64,
    /// `J(z_γ)`.
    pub j: f64,
    /// `J^γ(z_γ)`.
    pub j_gamma: f64,
    /// `J^γ(ẑ_ref)`.
    pub j_gamma_ref: f64,
    /// `‖(u - u_b)₊‖_{L²}`.
    pub viol_l2: f64,
    /// `max (u - u_b)₊`.
    pub viol_sup: f64,
    /// `‖(μ̂ + γ(u - u_b))₊‖_{L¹}`.
    pub mult_l1: f64,
    /// `‖z_γ - z_{γ_prev}‖_{L²}`, absent for the first γ.
    pub dz_l2: Option<f64>,
    /// `√γ ‖(u - u_b)₊‖_{L²}`; bounded along the path and tends to zero.
    pub omega: f64,
    pub kkt: f64,
    /// `‖z - P(-Πξ/α)‖_{L²}`.
    pub fixed_point: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PathReport {
    pub schedule: Schedule,
    pub records: Vec<PathRecord>,
    /// Solution at the last completed γ.
    pub last: Option<OcpSolution>,
    /// Set when an inner solve failed; the records stop before that γ.
    pub failure: Option<String>,
}

impl PathReport {
    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.records.len() == self.schedule.count
    }

    pub fn all_converged(&self) -> bool {
        self.completed() && self.records.iter().all(|r| r.converged)
    }

    /// Indices violating `J <= J^γ <= J^γ(ẑ_ref)` beyond `slack`.
    pub fn chain_violations(&self, slack: impl Fn(&PathRecord) -> f64) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                let tol = slack(r);
                r.j > r.j_gamma + tol || r.j_gamma > r.j_gamma_ref + tol
            })
            .map(|(k, _)| k)
            .collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    pub fn column(&self, f: impl Fn(&PathRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }
}

/// Continuation over `γ_k = γ0 · factor^k` from the zero control, with `ẑ_ref = 0`.
pub fn gamma_continuation(
    cfg: &ProblemConfig,
    op: &FracOperator,
    gamma0: f64,
    factor: f64,
    count: usize,
) -> Result<PathReport> {
    let schedule = Schedule::new(gamma0, factor, count)?;
    let zero = P0Function::zeros(op.mesh().clone());
    continuation(cfg, op, &schedule, &zero, &zero)
}

/// Continuation from `z0` with the chain reference control `z_ref`.
///
/// Configuration errors are returned; a failing inner solve ends the path and
/// is reported through [`PathReport::failure`].
pub fn continuation(
    cfg: &ProblemConfig,
    op: &FracOperator,
    schedule: &Schedule,
    z0: &P0Function,
    z_ref: &P0Function,
) -> Result<PathReport> {
    schedule.validate()?;
    let problem = Problem::new(cfg, op)?;
    let z_ref = problem.project(z_ref);
    let mut report = PathReport { schedule: *schedule, records: Vec::new(), last: None, failure: None };
    let mut z = z0.clone();
    let mut prev: Option<P0Function> = None;
    for gamma in schedule.gammas() {
        let sol = match solve_problem(&problem, gamma, &z, cfg.method) {
            Ok(sol) => sol,
            Err(e) => {
                log::error!("γ = {gamma:e}: {e}");
                report.failure = Some(format!("γ = {gamma:e}: {e}"));
                break;
            }
        };
        let j_gamma_ref = match problem.objective(&z_ref, gamma) {
            Ok(v) => v,
            Err(e) => {
                report.failure = Some(format!("γ = {gamma:e}: reference objective: {e}"));
                break;
            }
        };
        let (viol_l2, viol_sup) = violation(&sol.u, cfg.u_b);
        let dz_l2 = prev.as_ref().map(|p| {
            let d: Vec<f64> = sol.z.values().iter().zip(p.values()).map(|(a, b)| a - b).collect();
            sol.z.mesh().widths().iter().zip(&d).map(|(h, v)| h * v * v).sum::<f64>().sqrt()
        });
        let rec = PathRecord {
            gamma,
            j: sol.objective_plain,
            j_gamma: sol.objective,
            j_gamma_ref,
            viol_l2,
            viol_sup,
            mult_l1: sol.multiplier_l1,
            dz_l2,
            omega: gamma.sqrt() * viol_l2,
            kkt: sol.kkt_residual,
            fixed_point: sol.fixed_point_residual,
            iters: sol.iterations,
            converged: sol.converged,
        };
        log::info!(
            "γ = {:.4e}  J^γ = {:.10e}  viol = {:.3e}  kkt = {:.2e}  iters = {}{}",
            rec.gamma,
            rec.j_gamma,
            rec.viol_l2,
            rec.kkt,
            rec.iters,
            if rec.converged { "" } else { "  (not converged)" }
        );
        report.records.push(rec);
        z = sol.z.clone();
        prev = Some(sol.z.clone());
        report.last = Some(sol);
    }
    Ok(report)
}

/// `(‖(u - u_b)₊‖_{L²}, max (u - u_b)₊)`; exact for P1 functions.
pub(crate) fn violation(u: &P1Function, u_b: f64) -> (f64, f64) {
    let e = excess(u, u_b);
    let sup = e.values().iter().fold(0.0f64, |m, &v| m.max(v));
    (positive_part(&e).l2, sup)
}

/// Regularized multiplier `(μ̂ + γ(u - u_b))₊`.
#[derive(Debug, Clone)]
pub struct Multiplier {
    /// Nodal values on all nodes (exact at nodes; kinks lie inside cells).
    pub nodal: NodalFunction,
    pub l1: f64,
    pub l2: f64,
    /// Cells where the multiplier is positive somewhere.
    pub active_cells: Vec<usize>,
}

pub fn recover_multiplier(cfg: &ProblemConfig, u: &P1Function, gamma: f64) -> Result<Multiplier> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("γ must be positive, got {gamma}")));
    }
    let mesh: &Arc<_> = u.mesh();
    let mu_hat = cfg.multiplier_shift(mesh);
    let w = penalty_argument(&mu_hat, u, gamma, cfg.u_b)?;
    let pp = positive_part(&w);
    let nodal = NodalFunction::new(mesh.clone(), w.values().iter().map(|v| v.max(0.0)).collect())?;
    Ok(Multiplier { nodal, l1: pp.l1, l2: pp.l2, active_cells: pp.active_cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::ocp::ControlBounds;

    #[test]
    fn schedule_grid() {
        let s = Schedule::default();
        let g = s.gammas();
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], 0.1);
        assert!((g[11] - 419_430.4).abs() < 1e-6);
        assert!(Schedule::new(0.1, 1.0, 3).is_err());
        assert!(Schedule::new(0.0, 4.0, 3).is_err());
    }

    #[test]
    fn multiplier_of_feasible_state_is_zero() {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 8).unwrap());
        let u = P1Function::new(mesh, vec![0.05; 7]).unwrap();
        let m = recover_multiplier(&ProblemConfig::default(), &u, 1e3).unwrap();
        assert_eq!(m.l1, 0.0);
        assert!(m.active_cells.is_empty());
        assert_eq!(violation(&u, 0.1), (0.0, 0.0));
    }

    #[test]
    fn short_path_is_monotone_and_chained() {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 32).unwrap());
        let op = FracOperator::assemble(mesh, 0.5).unwrap();
        let cfg = ProblemConfig {
            s: 0.5,
            control_bounds: Some(ControlBounds::new(0.0, 10.0).unwrap()),
            opt_tol: 1e-10,
            ..Default::default()
        };
        let rep = gamma_continuation(&cfg, &op, 1.0, 4.0, 6).unwrap();
        assert!(rep.all_converged());
        assert!(rep.chain_violations(|r| 1e-10 * (1.0 + r.j_gamma_ref.abs())).is_empty());
        for w in rep.records.windows(2) {
            assert!(w[1].gamma > w[0].gamma);
            assert!(w[1].viol_l2 <= w[0].viol_l2 * (1.0 + 1e-9));
        }
        assert!(rep.records[0].dz_l2.is_none());
        assert!(rep.records[1].dz_l2.is_some());
    }
}
