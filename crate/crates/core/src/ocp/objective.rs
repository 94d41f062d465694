use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::{NodalFunction, P0Function, P1Function};
use crate::pde::{penalty_argument, positive_part, same_mesh, solve_state, tracking_load, PositivePart};

use super::{ControlBounds, ProblemConfig};

/// A [`ProblemConfig`] discretized on the mesh of an operator.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub cfg: &'a ProblemConfig,
    pub op: &'a FracOperator,
    pub u_d: NodalFunction,
    pub mu_hat: NodalFunction,
}

/// Objective value, state, adjoint and L² gradient at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub z: P0Function,
    pub gamma: f64,
    pub u: P1Function,
    pub xi: P1Function,
    /// Integrals of `(μ̂ + γ(u - u_b))₊`.
    pub penalty: PositivePart,
    /// `½‖u - u_d‖² + α/2 ‖z‖²`.
    pub j: f64,
    /// `j + ‖(μ̂ + γ(u - u_b))₊‖² / (2γ)`.
    pub j_gamma: f64,
    /// Cellwise `α z_k + (1/h_k) ∫_{T_k} ξ`.
    pub gradient: Vec<f64>,
}

/// Forward-only quantities, enough for line searches.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    pub u: P1Function,
    pub penalty: PositivePart,
    pub j: f64,
    pub j_gamma: f64,
}

impl<'a> Problem<'a> {
    pub fn new(cfg: &'a ProblemConfig, op: &'a FracOperator) -> Result<Self> {
        cfg.validate()?;
        if (cfg.s - op.s()).abs() > 0.0 {
            return Err(Error::Config(format!(
                "operator was assembled for s = {} but the problem has s = {}",
                op.s(),
                cfg.s
            )));
        }
        Ok(Self { u_d: cfg.desired_state(op.mesh()), mu_hat: cfg.multiplier_shift(op.mesh()), cfg, op })
    }

    pub fn bounds(&self) -> Option<ControlBounds> {
        self.cfg.control_bounds
    }

    fn check(&self, z: &P0Function, gamma: f64) -> Result<()> {
        same_mesh(self.op.mesh(), z.mesh())?;
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("γ must be positive, got {gamma}")));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, z: &P0Function, gamma: f64) -> Result<Forward> {
        self.check(z, gamma)?;
        let u = solve_state(self.op, z)?;
        self.forward_from_state(z, u, gamma)
    }

    fn forward_from_state(&self, z: &P0Function, u: P1Function, gamma: f64) -> Result<Forward> {
        let diff: Vec<f64> = u.to_nodal().values().iter().zip(self.u_d.values()).map(|(a, b)| a - b).collect();
        let tracking = 0.5 * self.op.mass_nodal().quadratic(&diff);
        let control = 0.5 * self.cfg.alpha * z.l2_norm().powi(2);
        let w = penalty_argument(&self.mu_hat, &u, gamma, self.cfg.u_b)?;
        let penalty = positive_part(&w);
        let j = tracking + control;
        let j_gamma = j + penalty.l2 * penalty.l2 / (2.0 * gamma);
        if !j_gamma.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        Ok(Forward { u, penalty, j, j_gamma })
    }

    pub fn objective(&self, z: &P0Function, gamma: f64) -> Result<f64> {
        Ok(self.forward(z, gamma)?.j_gamma)
    }

    /// Plain objective `J(z)` without the penalty.
    pub fn objective_plain(&self, z: &P0Function) -> Result<f64> {
        // γ only enters the penalty, which is discarded
        Ok(self.forward(z, 1.0)?.j)
    }

    pub fn evaluate(&self, z: &P0Function, gamma: f64) -> Result<Evaluation> {
        let fw = self.forward(z, gamma)?;
        let mut rhs = tracking_load(self.op, &fw.u, &self.u_d)?;
        for (r, l) in rhs.iter_mut().zip(&fw.penalty.load) {
            *r += l;
        }
        let xi = P1Function::new(self.op.mesh().clone(), self.op.solve(&rhs))?;
        let cell_int = self.op.coupling().apply_transpose(xi.values());
        let gradient = z
            .values()
            .iter()
            .zip(&cell_int)
            .zip(z.mesh().widths())
            .map(|((zk, ik), h)| self.cfg.alpha * zk + ik / h)
            .collect();
        Ok(Evaluation { z: z.clone(), gamma, u: fw.u, xi, penalty: fw.penalty, j: fw.j, j_gamma: fw.j_gamma, gradient })
    }

    pub fn project(&self, z: &P0Function) -> P0Function {
        project_control(z, self.cfg.control_bounds)
    }

    pub fn kkt_residual(&self, z: &P0Function, gamma: f64) -> Result<f64> {
        Ok(self.evaluate(z, gamma)?.kkt_residual(self.cfg.control_bounds))
    }
}

impl Evaluation {
    /// `‖z - P(z - ∇J^γ(z))‖_{L²}`; zero exactly at discrete KKT points.
    pub fn kkt_residual(&self, bounds: Option<ControlBounds>) -> f64 {
        self.projected_step_residual(bounds, 1.0)
    }

    /// `‖z - P(z - c ∇J^γ(z))‖_{L²}`.
    pub fn projected_step_residual(&self, bounds: Option<ControlBounds>, c: f64) -> f64 {
        let widths = self.z.mesh().widths();
        self.z
            .values()
            .iter()
            .zip(&self.gradient)
            .zip(widths)
            .map(|((&zk, &gk), h)| {
                let p = clamp_opt(bounds, zk - c * gk);
                h * (zk - p).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖z - P(-ξ̄/α)‖_{L²}` with the cell means `ξ̄` of the adjoint.
    pub fn fixed_point_residual(&self, bounds: Option<ControlBounds>, alpha: f64) -> f64 {
        self.projected_step_residual(bounds, 1.0 / alpha)
    }
}

pub(crate) fn clamp_opt(bounds: Option<ControlBounds>, v: f64) -> f64 {
    match bounds {
        Some(b) => b.clamp(v),
        None => v,
    }
}

/// Cellwise clamp onto the control box (identity without bounds).
pub fn project_control(z: &P0Function, bounds: Option<ControlBounds>) -> P0Function {
    let mut out = z.clone();
    for v in out.values_mut() {
        *v = clamp_opt(bounds, *v);
    }
    out
}

/// `J^γ(z)`.
pub fn objective(cfg: &ProblemConfig, op: &FracOperator, z: &P0Function, gamma: f64) -> Result<f64> {
    Problem::new(cfg, op)?.objective(z, gamma)
}

/// L² gradient `α z + Π ξ` of `J^γ` at `z`.
pub fn gradient(cfg: &ProblemConfig, op: &FracOperator, z: &P0Function, gamma: f64) -> Result<P0Function> {
    let e = Problem::new(cfg, op)?.evaluate(z, gamma)?;
    P0Function::new(z.mesh().clone(), e.gradient)
}

/// Projected-gradient residual of the discrete first-order system.
pub fn kkt_residual(cfg: &ProblemConfig, op: &FracOperator, z: &P0Function, gamma: f64) -> Result<f64> {
    Problem::new(cfg, op)?.kkt_residual(z, gamma)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::Mesh;
    use crate::ocp::DesiredState;

    fn setup(n: usize, s: f64) -> (Arc<Mesh>, FracOperator) {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n).unwrap());
        let op = FracOperator::assemble(mesh.clone(), s).unwrap();
        (mesh, op)
    }

    #[test]
    fn zero_data_zero_objective() {
        let (mesh, op) = setup(8, 0.5);
        let cfg = ProblemConfig { s: 0.5, desired: DesiredState::Constant(0.0), ..Default::default() };
        let z = P0Function::zeros(mesh);
        assert_eq!(objective(&cfg, &op, &z, 10.0).unwrap(), 0.0);
        let g = gradient(&cfg, &op, &z, 10.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert_eq!(kkt_residual(&cfg, &op, &z, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_control_tracks_desired_norm() {
        let (mesh, op) = setup(8, 0.5);
        let cfg = ProblemConfig { s: 0.5, desired: DesiredState::Constant(0.7), ..Default::default() };
        let z = P0Function::zeros(mesh);
        // ½‖0.7‖² over a unit interval
        assert!((objective(&cfg, &op, &z, 3.0).unwrap() - 0.245).abs() < 1e-15);
    }

    #[test]
    fn alpha_enters_linearly() {
        let (mesh, op) = setup(10, 0.6);
        let z = P0Function::new(mesh, (0..10).map(|k| (k as f64 * 0.7).sin()).collect()).unwrap();
        let c1 = ProblemConfig { s: 0.6, alpha: 1.0, ..Default::default() };
        let c2 = ProblemConfig { alpha: 2.0, ..c1.clone() };
        let g1 = gradient(&c1, &op, &z, 50.0).unwrap();
        let g2 = gradient(&c2, &op, &z, 50.0).unwrap();
        for ((a, b), zk) in g2.values().iter().zip(g1.values()).zip(z.values()) {
            assert!((a - b - zk).abs() < 1e-14);
        }
    }

    #[test]
    fn projection() {
        let mesh = Arc::new(Mesh::uniform(0.0, 1.0, 3).unwrap());
        let z = P0Function::new(mesh, vec![1.5, 0.3, -2.0]).unwrap();
        let b = Some(ControlBounds::new(0.0, 1.0).unwrap());
        let p = project_control(&z, b);
        assert_eq!(p.values(), &[1.0, 0.3, 0.0]);
        assert_eq!(project_control(&p, b).values(), p.values());
        assert_eq!(project_control(&z, None).values(), z.values());
    }

    #[test]
    fn operator_order_mismatch_is_rejected() {
        let (_, op) = setup(4, 0.5);
        let cfg = ProblemConfig { s: 0.4, ..Default::default() };
        assert!(Problem::new(&cfg, &op).is_err());
    }
}
