//! State and adjoint solves.
//!
//! The Moreau-Yosida term `((μ̂ + γ(u - u_b))₊, v)` is integrated exactly: the
//! penalty argument is piecewise linear, so each cell is split at its root and
//! the positive piece integrated with a two-point Gauss rule.

use std::sync::Arc;

use crate::assembly::{FracOperator, Tridiagonal};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodalFunction, P0Function, P1Function};

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::Domain("functions live on different meshes".into()))
    }
}

/// Discrete state equation `A u = B z`.
#[derive(Debug, Clone, Copy)]
pub struct StateProblem<'a> {
    pub op: &'a FracOperator,
    pub z: &'a P0Function,
}

impl StateProblem<'_> {
    pub fn solve(&self) -> Result<P1Function> {
        solve_state(self.op, self.z)
    }
}

pub fn solve_state(op: &FracOperator, z: &P0Function) -> Result<P1Function> {
    same_mesh(op.mesh(), z.mesh())?;
    let rhs = op.coupling().apply(z.values());
    P1Function::new(op.mesh().clone(), op.solve(&rhs))
}

/// Discrete adjoint equation
/// `A ξ = M (u - u_d) + ∫ (μ̂ + γ(u - u_b))₊ φ_i`.
#[derive(Debug, Clone, Copy)]
pub struct AdjointProblem<'a> {
    pub op: &'a FracOperator,
    pub u: &'a P1Function,
    pub u_d: &'a NodalFunction,
    pub mu_hat: &'a NodalFunction,
    pub gamma: f64,
    pub u_b: f64,
}

impl AdjointProblem<'_> {
    pub fn solve(&self) -> Result<P1Function> {
        solve_adjoint(self)
    }

    /// Right-hand side of the adjoint system and the penalty integrals.
    pub fn rhs(&self) -> Result<(Vec<f64>, PositivePart)> {
        if !(self.gamma > 0.0) {
            return Err(Error::Parameter(format!("γ must be positive, got {}", self.gamma)));
        }
        if self.mu_hat.values().iter().any(|&m| m < 0.0) {
            return Err(Error::Parameter("multiplier shift μ̂ must be nonnegative".into()));
        }
        let mut rhs = tracking_load(self.op, self.u, self.u_d)?;
        let w = penalty_argument(self.mu_hat, self.u, self.gamma, self.u_b)?;
        let pp = positive_part(&w);
        for (r, l) in rhs.iter_mut().zip(&pp.load) {
            *r += l;
        }
        Ok((rhs, pp))
    }
}

pub fn solve_adjoint(prob: &AdjointProblem<'_>) -> Result<P1Function> {
    let (rhs, _) = prob.rhs()?;
    P1Function::new(prob.op.mesh().clone(), prob.op.solve(&rhs))
}

/// Interior rows of `M (u - u_d)`, with `u_d` carrying boundary values.
pub fn tracking_load(op: &FracOperator, u: &P1Function, u_d: &NodalFunction) -> Result<Vec<f64>> {
    same_mesh(op.mesh(), u.mesh())?;
    same_mesh(op.mesh(), u_d.mesh())?;
    let diff: Vec<f64> = u.to_nodal().values().iter().zip(u_d.values()).map(|(a, b)| a - b).collect();
    let full = op.mass_nodal().apply(&diff);
    Ok(full[1..full.len() - 1].to_vec())
}

/// Nodal values of `μ̂ + γ (u - u_b)` on all nodes.
pub fn penalty_argument(mu_hat: &NodalFunction, u: &P1Function, gamma: f64, u_b: f64) -> Result<NodalFunction> {
    same_mesh(mu_hat.mesh(), u.mesh())?;
    let n = u.mesh().n_cells();
    let values = (0..=n).map(|i| mu_hat.values()[i] + gamma * (u.node_value(i) - u_b)).collect();
    NodalFunction::new(u.mesh().clone(), values)
}

/// Exact integrals of the positive part of a piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivePart {
    /// `∫ (w)₊ φ_i` for every interior node.
    pub load: Vec<f64>,
    /// Cells on which `w > 0` somewhere.
    pub active_cells: Vec<usize>,
    /// `‖(w)₊‖_{L¹}`.
    pub l1: f64,
    /// `‖(w)₊‖_{L²}`.
    pub l2: f64,
}

/// Positive sub-interval `[t_a, t_b]` of `[0, 1]` for `w(t) = w0 + (w1 - w0) t`.
pub(crate) fn positive_span(w0: f64, w1: f64) -> Option<(f64, f64)> {
    match (w0 > 0.0, w1 > 0.0) {
        (false, false) => None,
        (true, true) => Some((0.0, 1.0)),
        (true, false) => {
            if w1 == 0.0 {
                Some((0.0, 1.0))
            } else {
                Some((0.0, w0 / (w0 - w1)))
            }
        }
        (false, true) => {
            if w0 == 0.0 {
                Some((0.0, 1.0))
            } else {
                Some((w0 / (w0 - w1), 1.0))
            }
        }
    }
}

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Visits the two Gauss points of the positive piece of each cell with
/// `(cell, t, weight, w(t))`; exact for integrands of degree <= 3 in `t`.
fn for_positive_points(w: &NodalFunction, mut f: impl FnMut(usize, f64, f64, f64)) {
    let mesh = w.mesh();
    let v = w.values();
    for k in 0..mesh.n_cells() {
        let (w0, w1) = (v[k], v[k + 1]);
        if let Some((ta, tb)) = positive_span(w0, w1) {
            let half = 0.5 * (tb - ta);
            let mid = 0.5 * (tb + ta);
            let jac = mesh.width(k) * half;
            for g in GAUSS2 {
                let t = mid + half * g;
                let wt = w0 + (w1 - w0) * t;
                f(k, t, jac, wt.max(0.0));
            }
        }
    }
}

/// Load vector, active cells and norms of `(w)₊`.
pub fn positive_part(w: &NodalFunction) -> PositivePart {
    let mesh = w.mesh();
    let n = mesh.n_cells();
    let mut nodal = vec![0.0; n + 1];
    let mut active_cells = Vec::new();
    let (mut l1, mut l2sq) = (0.0, 0.0);
    for_positive_points(w, |k, t, jac, wt| {
        if active_cells.last() != Some(&k) {
            active_cells.push(k);
        }
        nodal[k] += jac * wt * (1.0 - t);
        nodal[k + 1] += jac * wt * t;
        l1 += jac * wt;
        l2sq += jac * wt * wt;
    });
    PositivePart { load: nodal[1..n].to_vec(), active_cells, l1, l2: l2sq.sqrt() }
}

/// `(∫ (w)₊ φ_i)_i` together with the discrete active cell set.
pub fn positive_part_load(w: &NodalFunction) -> (Vec<f64>, Vec<usize>) {
    let pp = positive_part(w);
    (pp.load, pp.active_cells)
}

/// `‖(w)₊‖_{L²(Ω)}`.
pub fn positive_part_l2norm(w: &NodalFunction) -> f64 {
    positive_part(w).l2
}

/// `‖(w)₊‖_{L¹(Ω)}`.
pub fn positive_part_l1norm(w: &NodalFunction) -> f64 {
    positive_part(w).l1
}

/// Active mass matrix `∫_{w > 0} φ_i φ_j` over interior nodes: the derivative
/// of the positive-part load with respect to the nodal values of `w`.
pub fn positive_part_jacobian(w: &NodalFunction) -> Tridiagonal {
    let n = w.mesh().n_cells();
    let mut full = Tridiagonal::zeros(n + 1);
    for_positive_points(w, |k, t, jac, _| {
        let (l, r) = (1.0 - t, t);
        full.diag[k] += jac * l * l;
        full.diag[k + 1] += jac * r * r;
        full.off[k] += jac * l * r;
    });
    full.interior()
}

/// `u - u_b` as nodal data (boundary values `-u_b`).
pub fn excess(u: &P1Function, u_b: f64) -> NodalFunction {
    let n = u.mesh().n_cells();
    let values = (0..=n).map(|i| u.node_value(i) - u_b).collect();
    NodalFunction::new(u.mesh().clone(), values).expect("length matches node count")
}
