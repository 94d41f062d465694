//! Reduced Moreau-Yosida regularized control problem
//!
//! ```text
//! min_{z ∈ Z_ad} J^γ(z) = ½‖S z - u_d‖² + α/2 ‖z‖² + 1/(2γ) ‖(μ̂ + γ(S z - u_b))₊‖²
//! ```
//!
//! over piecewise-constant controls, with the adjoint gradient, projection onto
//! the control box, two optimizers and γ-continuation.

mod objective;
mod optimizer;
mod path;

use std::sync::Arc;

pub(crate) use objective::clamp_opt;
pub use objective::{gradient, kkt_residual, objective, project_control, Evaluation, Problem};
pub use optimizer::{solve_fixed_gamma, Method, OcpSolution};
pub(crate) use path::violation;
pub use path::{continuation, gamma_continuation, recover_multiplier, Multiplier, PathRecord, PathReport, Schedule};

use crate::analysis::getoor_profile;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodalFunction};

/// Box `z_lo <= z <= z_hi` for the controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ControlBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Config(format!("control bounds need z_lo < z_hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Piecewise-linear data given by samples `(x, value)`, sorted by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples(Vec<(f64, f64)>);

impl Samples {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("sample data must not be empty".into()));
        }
        if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::Config("sample data must be finite".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self(points))
    }

    /// Linear interpolation, constant extrapolation.
    pub fn value(&self, x: f64) -> f64 {
        let pts = &self.0;
        let j = pts.partition_point(|p| p.0 < x);
        if j == 0 {
            return pts[0].1;
        }
        if j == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, v0) = pts[j - 1];
        let (x1, v1) = pts[j];
        if x1 == x0 {
            return v1;
        }
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.0
    }
}

/// Desired state `u_d`.
#[derive(Debug, Clone, PartialEq)]
pub enum DesiredState {
    /// `c(s) (r² - (x - m)²)₊^s` on the domain's midpoint `m` and half-length `r`,
    /// the solution of `(-Δ)^s u = 1`.
    Getoor,
    Constant(f64),
    Samples(Samples),
}

/// Multiplier shift `μ̂ >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierShift {
    Zero,
    Constant(f64),
    Samples(Samples),
}

/// Continuous problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub s: f64,
    pub alpha: f64,
    pub desired: DesiredState,
    pub u_b: f64,
    pub mu_hat: MultiplierShift,
    pub control_bounds: Option<ControlBounds>,
    pub opt_tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            s: 0.4,
            alpha: 1e-2,
            desired: DesiredState::Getoor,
            u_b: 0.1,
            mu_hat: MultiplierShift::Zero,
            control_bounds: None,
            opt_tol: 1e-6,
            max_iter: 500,
            method: Method::SemismoothNewton,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Config(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if self.s <= 0.25 {
            return Err(Error::Config(format!(
                "s = {} is not admissible: L² controls need p > N/(2s) with p = 2, \
                 i.e. s > N/4 = 0.25 in one dimension (the two-dimensional threshold is 0.5)",
                self.s
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.u_b.is_finite() {
            return Err(Error::Config("u_b must be finite".into()));
        }
        if let Some(b) = self.control_bounds {
            ControlBounds::new(b.lo, b.hi)?;
        }
        if !(self.opt_tol > 0.0) {
            return Err(Error::Config(format!("opt_tol must be positive, got {}", self.opt_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        match &self.mu_hat {
            MultiplierShift::Constant(c) if !(*c >= 0.0) => {
                return Err(Error::Config(format!("mu_hat must be nonnegative, got {c}")))
            }
            MultiplierShift::Samples(sm) if sm.points().iter().any(|p| !(p.1 >= 0.0)) => {
                return Err(Error::Config("mu_hat samples must be nonnegative".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Nodal interpolant of `u_d` on all nodes of `mesh`.
    pub fn desired_state(&self, mesh: &Arc<Mesh>) -> NodalFunction {
        let center = 0.5 * (mesh.a() + mesh.b());
        let radius = 0.5 * mesh.length();
        match &self.desired {
            DesiredState::Getoor => {
                NodalFunction::interpolate(mesh.clone(), |x| getoor_profile(self.s, x - center, radius))
            }
            DesiredState::Constant(c) => NodalFunction::constant(mesh.clone(), *c),
            DesiredState::Samples(sm) => NodalFunction::interpolate(mesh.clone(), |x| sm.value(x)),
        }
    }

    pub fn multiplier_shift(&self, mesh: &Arc<Mesh>) -> NodalFunction {
        match &self.mu_hat {
            MultiplierShift::Zero => NodalFunction::constant(mesh.clone(), 0.0),
            MultiplierShift::Constant(c) => NodalFunction::constant(mesh.clone(), *c),
            MultiplierShift::Samples(sm) => NodalFunction::interpolate(mesh.clone(), |x| sm.value(x).max(0.0)),
        }
    }
}
