//! Small-instance semismooth Newton oracle.
//!
//! Solves the fixed-point form `F(z) = z - P(-Πξ(z)/α) = 0` of the optimality
//! system directly. The control-to-state map is rebuilt column by column from
//! the factorization and the Jacobian is factored with a general LU, so the
//! oracle shares neither formulation nor linear algebra path with the
//! production optimizers.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};

use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::P0Function;
use crate::ocp::{clamp_opt, ControlBounds, Evaluation, OcpSolution, Problem, ProblemConfig};
use crate::pde::{penalty_argument, positive_part_jacobian};

/// Largest mesh the oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 32;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_MAX_ITER: usize = 2000;

/// `F(z)` and the cells where the projection is inactive.
fn residual(ev: &Evaluation, bounds: Option<ControlBounds>, alpha: f64) -> (Vec<f64>, Vec<bool>) {
    let z = ev.z.values();
    // -Πξ/α = z - g/α
    let target: Vec<f64> = z.iter().zip(&ev.gradient).map(|(zk, gk)| zk - gk / alpha).collect();
    let free = target.iter().map(|&v| bounds.is_none_or(|b| v > b.lo && v < b.hi)).collect();
    let f = z.iter().zip(&target).map(|(zk, tk)| zk - clamp_opt(bounds, *tk)).collect();
    (f, free)
}

struct Linearization {
    s_mat: Mat<f64>,
    mass: Mat<f64>,
    widths: Vec<f64>,
}

/// `S = A⁻¹ B` built one cell at a time, plus the interior mass matrix.
fn linearization(op: &FracOperator) -> Linearization {
    let n = op.mesh().n_cells();
    let dofs = op.n_dofs();
    let mut s_mat = Mat::<f64>::zeros(dofs, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = op.solve(&op.coupling().apply(&e));
        for i in 0..dofs {
            s_mat[(i, k)] = col[i];
        }
    }
    Linearization { s_mat, mass: op.mass_nodal().interior().to_dense(), widths: op.mesh().widths().to_vec() }
}

/// Backtracking on `J^γ` along the projected arc `P(z + t d)`; `d = -F` when
/// the Newton step is not a descent direction.
fn damped_step(problem: &Problem<'_>, ev: &Evaluation, step: &[f64], f: &[f64]) -> Result<Evaluation> {
    let bounds = problem.cfg.control_bounds;
    let mesh = ev.z.mesh().clone();
    let widths = mesh.widths();
    let dot = |d: &[f64]| widths.iter().zip(&ev.gradient).zip(d).map(|((h, g), v)| h * g * v).sum::<f64>();
    let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
    let mut last = None;
    for dir in [step, &neg_f[..]] {
        if dot(dir) >= 0.0 {
            continue;
        }
        let mut t = 1.0;
        while t > 1e-12 {
            let z: Vec<f64> = ev.z.values().iter().zip(dir).map(|(a, d)| clamp_opt(bounds, a + t * d)).collect();
            let delta: Vec<f64> = z.iter().zip(ev.z.values()).map(|(a, b)| a - b).collect();
            let cand = problem.evaluate(&P0Function::new(mesh.clone(), z)?, ev.gamma)?;
            let decrease = ev.j_gamma - cand.j_gamma;
            let predicted = -dot(&delta);
            let roundoff = 64.0 * f64::EPSILON * (1.0 + ev.j_gamma.abs());
            if decrease >= 1e-4 * predicted && decrease > -roundoff {
                if decrease > roundoff || cand.kkt_residual(bounds) < ev.kkt_residual(bounds) {
                    return Ok(cand);
                }
            }
            last = Some(cand);
            t *= 0.5;
        }
    }
    last.ok_or_else(|| Error::Oracle("no descent direction".into()))
}

/// `dF = I + (1/α) χ_free D⁻¹ Sᵀ (M + γ J) S` at `ev`.
fn jacobian(
    problem: &Problem<'_>,
    lin: &Linearization,
    gamma: f64,
    ev: &Evaluation,
    free: &[bool],
) -> Result<Mat<f64>> {
    let cfg = problem.cfg;
    let n = free.len();
    let w = penalty_argument(&problem.mu_hat, &ev.u, gamma, cfg.u_b)?;
    let mut hess = lin.mass.clone();
    hess += positive_part_jacobian(&w).to_dense() * gamma;
    let inner = lin.s_mat.transpose() * (&hess * &lin.s_mat);
    Ok(Mat::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        if free[r] {
            id + inner[(r, c)] / (cfg.alpha * lin.widths[r])
        } else {
            id
        }
    }))
}

/// Returns the last iterate, the iteration count and convergence.
fn newton_at(
    problem: &Problem<'_>,
    lin: &Linearization,
    gamma: f64,
    mut ev: Evaluation,
) -> Result<(Evaluation, usize, bool)> {
    let cfg = problem.cfg;
    let bounds = cfg.control_bounds;
    let alpha = cfg.alpha;
    let mesh = ev.z.mesh().clone();
    let n = mesh.n_cells();
    let mut seen: Vec<(Vec<bool>, Vec<usize>)> = Vec::new();
    let mut damped = false;
    for it in 0..ORACLE_MAX_ITER {
        if ev.kkt_residual(bounds) <= ORACLE_TOL {
            return Ok((ev, it, true));
        }
        let (f, free) = residual(&ev, bounds, alpha);
        let signature = (free.clone(), ev.penalty.active_cells.clone());
        let revisited = seen.split_last().is_some_and(|(last, older)| *last != signature && older.contains(&signature));
        if !damped && revisited {
            log::debug!("oracle: active sets repeat at iteration {it}, switching to damped steps");
            damped = true;
        }
        seen.push(signature);

        let dfm = jacobian(problem, lin, gamma, &ev, &free)?;
        let rhs = Col::from_fn(n, |k| -f[k]);
        let step = dfm.partial_piv_lu().solve(&rhs);
        let step: Vec<f64> = (0..n).map(|k| step[k]).collect();
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle("singular Newton system".into()));
        }

        let next = if damped {
            damped_step(problem, &ev, &step, &f)?
        } else {
            let z: Vec<f64> = ev.z.values().iter().zip(&step).map(|(a, d)| a + d).collect();
            problem.evaluate(&P0Function::new(mesh.clone(), z)?, gamma)?
        };
        ev = next;
    }
    let done = ev.kkt_residual(bounds) <= ORACLE_TOL;
    Ok((ev, ORACLE_MAX_ITER, done))
}

/// Semismooth Newton on `F` with full steps; once the (projection, penalty)
/// active sets revisit an earlier state, the remaining iterations backtrack
/// on `J^γ` along the projected arc.
///
/// Refuses meshes with more than [`ORACLE_MAX_CELLS`] cells.
pub fn semismooth_newton_oracle(
    cfg: &ProblemConfig,
    op: &FracOperator,
    gamma: f64,
    z0: &P0Function,
) -> Result<OcpSolution> {
    let mesh = op.mesh().clone();
    let n = mesh.n_cells();
    if n > ORACLE_MAX_CELLS {
        return Err(Error::Parameter(format!("the Newton oracle is limited to {ORACLE_MAX_CELLS} cells, got {n}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("γ must be positive, got {gamma}")));
    }
    let problem = Problem::new(cfg, op)?;
    let bounds = cfg.control_bounds;
    let alpha = cfg.alpha;
    let lin = linearization(op);

    let start = problem.evaluate(&problem.project(z0), gamma)?;
    let (ev, iterations, done) = newton_at(&problem, &lin, gamma, start)?;
    let warning = (!done).then(|| "oracle iteration limit reached".to_string());
    Ok(OcpSolution::from_evaluation(ev, bounds, alpha, iterations, done, warning))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::Mesh;
    use crate::ocp::{DesiredState, ProblemConfig};

    #[test]
    fn jacobian_matches_finite_differences() {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 16).unwrap());
        let op = FracOperator::assemble(mesh.clone(), 0.5).unwrap();
        let cfg = ProblemConfig { s: 0.5, alpha: 1e-3, ..Default::default() };
        let problem = Problem::new(&cfg, &op).unwrap();
        let lin = linearization(&op);
        let gamma = 1e3;
        let z = vec![
            0.964108, 0.526423, 0.352940, 0.156788, 0.216698, 0.125945, 0.155211, 0.134935, 0.134935, 0.155211,
            0.125945, 0.216698, 0.156788, 0.352940, 0.526423, 0.964108,
        ];
        let z: Vec<f64> = z.iter().enumerate().map(|(k, v)| v + 1e-3 * k as f64).collect();
        let ev = problem.evaluate(&P0Function::new(mesh.clone(), z.clone()).unwrap(), gamma).unwrap();
        let (_, free) = residual(&ev, None, cfg.alpha);
        let jac = jacobian(&problem, &lin, gamma, &ev, &free).unwrap();
        let eps = 1e-6;
        for c in 0..16 {
            let f_at = |d: f64| {
                let mut v = z.clone();
                v[c] += d;
                let e = problem.evaluate(&P0Function::new(mesh.clone(), v).unwrap(), gamma).unwrap();
                residual(&e, None, cfg.alpha).0
            };
            let (fp, fm) = (f_at(eps), f_at(-eps));
            for r in 0..16 {
                let fd = (fp[r] - fm[r]) / (2.0 * eps);
                assert!((fd - jac[(r, c)]).abs() < 1e-5 * (1.0 + fd.abs()), "({r}, {c}): {fd} vs {}", jac[(r, c)]);
            }
        }
    }

    #[test]
    fn size_guard() {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 40).unwrap());
        let op = FracOperator::assemble(mesh.clone(), 0.5).unwrap();
        let cfg = ProblemConfig { s: 0.5, ..Default::default() };
        assert!(semismooth_newton_oracle(&cfg, &op, 1.0, &P0Function::zeros(mesh)).is_err());
    }

    #[test]
    fn smooth_quadratic_case_takes_one_step() {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 8).unwrap());
        let op = FracOperator::assemble(mesh.clone(), 0.5).unwrap();
        // u_b far above the state: the penalty never activates
        let cfg = ProblemConfig {
            s: 0.5,
            alpha: 0.1,
            desired: DesiredState::Constant(1.0),
            u_b: 100.0,
            ..Default::default()
        };
        let sol = semismooth_newton_oracle(&cfg, &op, 10.0, &P0Function::zeros(mesh)).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        let again = semismooth_newton_oracle(&cfg, &op, 10.0, &sol.z).unwrap();
        assert_eq!(again.iterations, 0);
    }
}
