//! Discrete operators: fractional stiffness, P1 mass and P1×P0 coupling.

mod kernel;
mod stiffness;

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::{Llt, Solve};
use faer::{Col, Mat, Side};

pub use kernel::{kappa, kernel_moment, normalization_constant, LOG_BRANCH_TOL};
pub use stiffness::{assemble_stiffness, ASSEMBLY_METHOD};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// `xᵀ T x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on indices `1..dim-1`.
    pub fn interior(&self) -> Self {
        let n = self.dim();
        Self { diag: self.diag[1..n - 1].to_vec(), off: self.off[1..n - 2].to_vec() }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.off[i]
            } else if i == j + 1 {
                self.off[j]
            } else {
                0.0
            }
        })
    }
}

/// P1 mass matrix over all nodes, `M_pq = ∫ φ_p φ_q` (boundary hats included).
///
/// Its interior block is the state mass matrix; the boundary columns are needed
/// when the data (desired state, multiplier shift) do not vanish at `a`, `b`.
pub fn assemble_mass_nodal(mesh: &Mesh) -> Tridiagonal {
    let mut m = Tridiagonal::zeros(mesh.n_nodes());
    for (k, &h) in mesh.widths().iter().enumerate() {
        m.diag[k] += h / 3.0;
        m.diag[k + 1] += h / 3.0;
        m.off[k] += h / 6.0;
    }
    m
}

/// Mass matrix of the interior hats.
pub fn assemble_mass_p1(mesh: &Mesh) -> Tridiagonal {
    assemble_mass_nodal(mesh).interior()
}

/// P1×P0 coupling, `B_ik = ∫_{T_k} φ_i = h_k / 2` for the two hats of `T_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    widths: Vec<f64>,
}

impl Coupling {
    pub fn n_dofs(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    /// `B z`: the load `∫ z φ_i` of a piecewise-constant function.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n_cells());
        (0..self.n_dofs()).map(|i| 0.5 * (self.widths[i] * z[i] + self.widths[i + 1] * z[i + 1])).collect()
    }

    /// `Bᵀ v`: cell integrals `∫_{T_k} v` of a zero-boundary P1 function.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_dofs());
        let n = self.n_cells();
        (0..n)
            .map(|k| {
                let left = if k == 0 { 0.0 } else { v[k - 1] };
                let right = if k + 1 == n { 0.0 } else { v[k] };
                0.5 * self.widths[k] * (left + right)
            })
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(
            self.n_dofs(),
            self.n_cells(),
            |i, k| {
                if k == i || k == i + 1 {
                    0.5 * self.widths[k]
                } else {
                    0.0
                }
            },
        )
    }
}

pub fn assemble_coupling(mesh: &Mesh) -> Coupling {
    Coupling { widths: mesh.widths().to_vec() }
}

/// Assembled fractional operator on a mesh, with its Cholesky factor.
///
/// Immutable after construction; lazily cached products are behind `OnceLock`
/// so the operator can be shared across threads.
pub struct FracOperator {
    mesh: Arc<Mesh>,
    s: f64,
    c_ns: f64,
    stiffness: Mat<f64>,
    mass: Tridiagonal,
    coupling: Coupling,
    factor: Llt<f64>,
    control_to_state: OnceLock<Mat<f64>>,
    tracking_hessian: OnceLock<Mat<f64>>,
}

impl std::fmt::Debug for FracOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FracOperator")
            .field("s", &self.s)
            .field("c_ns", &self.c_ns)
            .field("n_cells", &self.mesh.n_cells())
            .finish()
    }
}

impl FracOperator {
    pub fn assemble(mesh: Arc<Mesh>, s: f64) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh, s)?;
        Self::from_stiffness(mesh, s, stiffness)
    }

    /// Wraps a given stiffness matrix (e.g. a deliberately perturbed one).
    pub fn from_stiffness(mesh: Arc<Mesh>, s: f64, stiffness: Mat<f64>) -> Result<Self> {
        let c_ns = normalization_constant(s)?;
        check_len(mesh.n_dofs(), stiffness.nrows())?;
        check_len(mesh.n_dofs(), stiffness.ncols())?;
        let factor = stiffness.llt(Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            mass: assemble_mass_nodal(&mesh),
            coupling: assemble_coupling(&mesh),
            mesh,
            s,
            c_ns,
            stiffness,
            factor,
            control_to_state: OnceLock::new(),
            tracking_hessian: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    pub fn stiffness(&self) -> &Mat<f64> {
        &self.stiffness
    }

    /// Mass matrix over all nodes.
    pub fn mass_nodal(&self) -> &Tridiagonal {
        &self.mass
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n_dofs());
        let b = Col::from_fn(rhs.len(), |i| rhs[i]);
        let x = self.factor.solve(&b);
        (0..rhs.len()).map(|i| x[i]).collect()
    }

    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_dofs());
        let x = Col::from_fn(u.len(), |i| u[i]);
        let y = &self.stiffness * &x;
        (0..u.len()).map(|i| y[i]).collect()
    }

    /// `uᵀ A u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.apply_stiffness(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Dense control-to-state matrix `S = A⁻¹ B`, computed on first use.
    pub fn control_to_state(&self) -> &Mat<f64> {
        self.control_to_state.get_or_init(|| self.factor.solve(&self.coupling.to_dense()))
    }

    /// `Sᵀ M S` with the interior mass matrix, computed on first use.
    pub fn tracking_hessian(&self) -> &Mat<f64> {
        self.tracking_hessian.get_or_init(|| {
            let s = self.control_to_state();
            let m = self.mass.interior();
            let ms = tridiag_times(&m, s);
            s.transpose() * &ms
        })
    }

    /// Writes `A`, `M` (interior) and `B` as plain-text dense matrices
    /// `<stem>_stiffness.txt`, `<stem>_mass.txt`, `<stem>_coupling.txt`.
    pub fn dump(&self, stem: &Path) -> Result<()> {
        let with_suffix = |suffix: &str| {
            let mut name = stem.file_name().unwrap_or_default().to_os_string();
            name.push(suffix);
            stem.with_file_name(name)
        };
        write_dense(&with_suffix("_stiffness.txt"), &self.stiffness)?;
        write_dense(&with_suffix("_mass.txt"), &self.mass.interior().to_dense())?;
        write_dense(&with_suffix("_coupling.txt"), &self.coupling.to_dense())?;
        Ok(())
    }
}

/// `T X` for tridiagonal `T` and dense `X`.
pub(crate) fn tridiag_times(t: &Tridiagonal, x: &Mat<f64>) -> Mat<f64> {
    let n = t.dim();
    assert_eq!(x.nrows(), n);
    Mat::from_fn(n, x.ncols(), |i, j| {
        let mut v = t.diag[i] * x[(i, j)];
        if i > 0 {
            v += t.off[i - 1] * x[(i - 1, j)];
        }
        if i + 1 < n {
            v += t.off[i] * x[(i + 1, j)];
        }
        v
    })
}

/// One row per line, entries in full-precision scientific notation.
pub fn write_dense(path: &Path, m: &Mat<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_entries_uniform() {
        let mesh = Mesh::uniform(0.0, 1.0, 8).unwrap();
        let h = mesh.h();
        let m = assemble_mass_p1(&mesh);
        assert_eq!(m.dim(), 7);
        for d in &m.diag {
            assert!((d - 2.0 * h / 3.0).abs() < 1e-15);
        }
        for o in &m.off {
            assert!((o - h / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn coupling_sums() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.3, 0.6, 1.0]).unwrap();
        let b = assemble_coupling(&mesh).to_dense();
        let total: f64 = (0..b.nrows()).flat_map(|i| (0..b.ncols()).map(move |k| (i, k))).map(|(i, k)| b[(i, k)]).sum();
        let expected = mesh.length() - mesh.width(0) / 2.0 - mesh.width(3) / 2.0;
        assert!((total - expected).abs() < 1e-15);
        // row sums are the hat integrals (h_{i-1} + h_i) / 2
        for i in 0..b.nrows() {
            let row: f64 = (0..b.ncols()).map(|k| b[(i, k)]).sum();
            assert!((row - 0.5 * (mesh.width(i) + mesh.width(i + 1))).abs() < 1e-15);
        }
    }

    #[test]
    fn coupling_transpose_is_adjoint() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.2, 0.3, 0.7, 1.0]).unwrap();
        let b = assemble_coupling(&mesh);
        let z = [1.0, -2.0, 0.5, 3.0];
        let v = [0.3, -0.7, 1.1];
        let lhs: f64 = b.apply(&z).iter().zip(&v).map(|(a, c)| a * c).sum();
        let rhs: f64 = b.apply_transpose(&v).iter().zip(&z).map(|(a, c)| a * c).sum();
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn mass_quadratic_form_matches_quadrature() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.15, 0.4, 0.55, 1.0]).unwrap();
        let m = assemble_mass_p1(&mesh);
        let ones = vec![1.0; m.dim()];
        // (Σ φ_i)² is 1 inside, linear ramps² on the boundary cells
        let rule = crate::quadrature::gauss(4);
        let mut q = 0.0;
        for k in 0..mesh.n_cells() {
            let (x0, x1) = (mesh.node(k), mesh.node(k + 1));
            q += rule.integrate(x0, x1, |x| {
                let f = if k == 0 {
                    (x - x0) / (x1 - x0)
                } else if k == mesh.n_cells() - 1 {
                    (x1 - x) / (x1 - x0)
                } else {
                    1.0
                };
                f * f
            });
        }
        assert!((m.quadratic(&ones) - q).abs() < 1e-15);
    }
}
