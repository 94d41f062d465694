//! Interval meshes and the discrete function families living on them.
//!
//! States are continuous piecewise-linear functions that vanish at both
//! endpoints (and on the whole exterior), so only interior nodes carry degrees
//! of freedom. Controls are piecewise constant per cell.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};

/// Partition `a = x_0 < x_1 < ... < x_n = b` of the interval `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    widths: Vec<f64>,
    h_max: f64,
    uniform: bool,
}

impl Mesh {
    /// `n` equal cells on `(a, b)`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Config(format!("mesh endpoints must satisfy a < b, got a = {a}, b = {b}")));
        }
        if n < 2 {
            return Err(Error::Config(format!("mesh needs at least 2 cells (one interior node), got n = {n}")));
        }
        let len = b - a;
        let nodes: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + len * (i as f64) / (n as f64) }).collect();
        let mut mesh = Self::build(nodes)?;
        mesh.uniform = true;
        Ok(mesh)
    }

    /// Arbitrary (possibly graded) partition. Nodes must be strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::build(nodes)
    }

    fn build(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Config(format!("mesh needs at least 3 nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("mesh nodes must be finite".into()));
        }
        let widths: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(k) = widths.iter().position(|&h| h <= 0.0) {
            return Err(Error::Config(format!(
                "mesh nodes must be strictly increasing (cell {k} has width {})",
                widths[k]
            )));
        }
        let h_max = widths.iter().copied().fold(0.0, f64::max);
        Ok(Self { a: nodes[0], b: nodes[nodes.len() - 1], nodes, widths, h_max, uniform: false })
    }

    /// Bisects every cell.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.b);
        let mut fine = Self::build(nodes).expect("bisection of a valid mesh is valid");
        fine.uniform = self.uniform;
        fine
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn width(&self, k: usize) -> f64 {
        self.widths[k]
    }

    /// Maximal cell width.
    pub fn h(&self) -> f64 {
        self.h_max
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    /// Number of interior nodes, i.e. P1 degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Cell containing `x`. Interior nodes resolve to the cell on their left.
    pub fn locate(&self, x: f64) -> Result<usize> {
        if !(self.a..=self.b).contains(&x) {
            return Err(Error::Domain(format!("x = {x} lies outside [{}, {}]", self.a, self.b)));
        }
        // first node >= x, then step back one cell
        let idx = self.nodes.partition_point(|&node| node < x);
        Ok(idx.saturating_sub(1).min(self.n_cells() - 1))
    }

    /// True when `fine` is obtained from `self` by subdividing cells.
    pub fn is_nested_in(&self, fine: &Mesh) -> bool {
        if fine.n_cells() < self.n_cells() || self.a != fine.a || self.b != fine.b {
            return false;
        }
        let tol = 1e-12 * self.length();
        self.nodes.iter().all(|&x| {
            let j = fine.nodes.partition_point(|&y| y < x - tol);
            j < fine.nodes.len() && (fine.nodes[j] - x).abs() <= tol
        })
    }
}

/// Continuous piecewise-linear function vanishing at `a`, `b` and outside `(a, b)`.
#[derive(Debug, Clone)]
pub struct P1Function {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl P1Function {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.n_dofs(), values.len())?;
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.n_dofs()];
        Self { mesh, values }
    }

    /// Nodal interpolant of `f` at the interior nodes.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes()[1..mesh.n_nodes() - 1].iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `i` (0..=n), including the zero boundary values.
    pub fn node_value(&self, i: usize) -> f64 {
        if i == 0 || i == self.mesh.n_cells() {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let k = self.mesh.locate(x)?;
        let (x0, x1) = (self.mesh.node(k), self.mesh.node(k + 1));
        let t = (x - x0) / (x1 - x0);
        Ok((1.0 - t) * self.node_value(k) + t * self.node_value(k + 1))
    }

    /// The same function as nodal data on all nodes.
    pub fn to_nodal(&self) -> NodalFunction {
        let n = self.mesh.n_cells();
        let values = (0..=n).map(|i| self.node_value(i)).collect();
        NodalFunction { mesh: self.mesh.clone(), values }
    }

    /// Re-expresses the function on a finer nested mesh by interpolation.
    pub fn prolong(&self, fine: Arc<Mesh>) -> Result<Self> {
        if !self.mesh.is_nested_in(&fine) {
            return Err(Error::Domain("target mesh is not a refinement".into()));
        }
        let values =
            fine.nodes()[1..fine.n_nodes() - 1].iter().map(|&x| self.evaluate(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh: fine, values })
    }

    /// Restriction to a coarser nested mesh by nodal injection.
    pub fn inject(&self, coarse: Arc<Mesh>) -> Result<Self> {
        if !coarse.is_nested_in(&self.mesh) {
            return Err(Error::Domain("target mesh is not coarser and nested".into()));
        }
        let values =
            coarse.nodes()[1..coarse.n_nodes() - 1].iter().map(|&x| self.evaluate(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh: coarse, values })
    }
}

/// Piecewise-linear function given by values at every node, endpoints included.
///
/// Used for data that need not vanish on the boundary: the desired state, the
/// multiplier shift and penalty arguments.
#[derive(Debug, Clone)]
pub struct NodalFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl NodalFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.n_nodes(), values.len())?;
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.n_nodes()];
        Self { mesh, values }
    }

    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let k = self.mesh.locate(x)?;
        let (x0, x1) = (self.mesh.node(k), self.mesh.node(k + 1));
        let t = (x - x0) / (x1 - x0);
        Ok((1.0 - t) * self.values[k] + t * self.values[k + 1])
    }
}

/// Piecewise-constant function, one value per cell.
#[derive(Debug, Clone)]
pub struct P0Function {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl P0Function {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.n_cells(), values.len())?;
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.n_cells()];
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cell value; interior nodes take the value of the cell on their left.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.values[self.mesh.locate(x)?])
    }

    /// `sqrt(sum_k h_k z_k^2)`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_dot(&self.values).sqrt()
    }

    /// L² inner product with another coefficient vector on the same mesh.
    pub fn l2_dot(&self, other: &[f64]) -> f64 {
        self.mesh.widths().iter().zip(&self.values).zip(other).map(|((h, a), b)| h * a * b).sum()
    }

    /// Exact representation on a finer nested mesh.
    pub fn prolong(&self, fine: Arc<Mesh>) -> Result<Self> {
        if !self.mesh.is_nested_in(&fine) {
            return Err(Error::Domain("target mesh is not a refinement".into()));
        }
        let values = (0..fine.n_cells()).map(|k| self.evaluate(fine.midpoint(k))).collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh: fine, values })
    }

    /// L² projection onto a coarser nested mesh (cell averages).
    pub fn project(&self, coarse: Arc<Mesh>) -> Result<Self> {
        if !coarse.is_nested_in(&self.mesh) {
            return Err(Error::Domain("target mesh is not coarser and nested".into()));
        }
        let mut sums = vec![0.0; coarse.n_cells()];
        for (k, (&h, &z)) in self.mesh.widths().iter().zip(&self.values).enumerate() {
            let c = coarse.locate(self.mesh.midpoint(k))?;
            sums[c] += h * z;
        }
        let values = sums.iter().zip(coarse.widths()).map(|(s, h)| s / h).collect();
        Ok(Self { mesh: coarse, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partition() {
        let m = Mesh::uniform(-0.5, 0.5, 4).unwrap();
        assert_eq!(m.nodes(), &[-0.5, -0.25, 0.0, 0.25, 0.5]);
        assert!(m.is_uniform());

        let m = Mesh::uniform(-0.5, 0.5, 2).unwrap();
        assert_eq!(m.n_dofs(), 1);
        assert_eq!(m.node(1), 0.0);

        let m = Mesh::uniform(0.0, 1.0, 8).unwrap();
        assert_eq!(m.h(), 0.125);
        assert_eq!(m.n_dofs(), 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Mesh::uniform(0.0, 1.0, 1), Err(Error::Config(_))));
        assert!(matches!(Mesh::uniform(1.0, 1.0, 4), Err(Error::Config(_))));
        assert!(matches!(Mesh::uniform(2.0, 1.0, 4), Err(Error::Config(_))));
        assert!(Mesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn refinement() {
        let m = Mesh::uniform(0.0, 1.0, 4).unwrap().refine();
        assert_eq!(m.n_cells(), 8);
        assert!(m.is_uniform());

        let m = Mesh::from_nodes(vec![0.0, 0.5, 1.0]).unwrap().refine();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);

        let m = Mesh::uniform(0.0, 1.0, 2).unwrap().refine().refine();
        assert_eq!(m.n_cells(), 8);
    }

    #[test]
    fn evaluation() {
        let m = Arc::new(Mesh::uniform(-0.5, 0.5, 2).unwrap());
        let u = P1Function::new(m.clone(), vec![1.0]).unwrap();
        assert_eq!(u.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(u.evaluate(-0.5).unwrap(), 0.0);
        assert_eq!(u.evaluate(0.5).unwrap(), 0.0);
        assert_eq!(u.evaluate(0.25).unwrap(), 0.5);
        assert!(matches!(u.evaluate(0.6), Err(Error::Domain(_))));

        let m = Arc::new(Mesh::from_nodes(vec![0.0, 0.5, 1.0]).unwrap());
        let z = P0Function::new(m, vec![2.0, 3.0]).unwrap();
        assert_eq!(z.evaluate(0.25).unwrap(), 2.0);
        // left-cell convention at the interior node
        assert_eq!(z.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(z.evaluate(0.0).unwrap(), 2.0);
        assert_eq!(z.evaluate(1.0).unwrap(), 3.0);
    }

    #[test]
    fn p0_norm_matches_quadrature() {
        let m = Arc::new(Mesh::from_nodes(vec![0.0, 0.1, 0.35, 0.7, 1.0]).unwrap());
        let z = P0Function::new(m.clone(), vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        // midpoint sampling on a fine uniform grid integrates a step function
        // exactly once the grid resolves all nodes
        let fine = 2000;
        let q: f64 = (0..fine)
            .map(|i| {
                let x = (i as f64 + 0.5) / fine as f64;
                z.evaluate(x).unwrap().powi(2) / fine as f64
            })
            .sum();
        assert!((z.l2_norm().powi(2) - q).abs() < 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let m = Arc::new(Mesh::uniform(0.0, 1.0, 4).unwrap());
        assert!(P1Function::new(m.clone(), vec![0.0; 4]).is_err());
        assert!(P0Function::new(m.clone(), vec![0.0; 3]).is_err());
        assert!(NodalFunction::new(m, vec![0.0; 4]).is_err());
    }

    #[test]
    fn p0_projection_of_prolongation_is_identity() {
        let coarse = Arc::new(Mesh::uniform(0.0, 1.0, 4).unwrap());
        let fine = Arc::new(coarse.refine().refine());
        let z = P0Function::new(coarse.clone(), vec![1.0, -1.0, 2.0, 0.5]).unwrap();
        let back = z.prolong(fine).unwrap().project(coarse).unwrap();
        for (a, b) in back.values().iter().zip(z.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
