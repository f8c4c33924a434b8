//! Offline phase: equispaced 1D meshes and method-of-lines assembly.
//!
//! Both assemblies produce `du/dt = A u + theta(t) b` with `A` kept in banded
//! form. Periodic systems carry nodes `1..=M` (node 0 aliases node M);
//! homogeneous Dirichlet systems carry the interior nodes `1..M`.

use crate::banded::BandedMatrix;
use crate::error::{invalid, Error, Result};

/// Observed locations must sit on a node to within this fraction of `h`.
pub const NODE_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    length: f64,
    intervals: usize,
    spacing: f64,
    nodes: Vec<f64>,
}

impl SpatialMesh {
    /// Mesh of `intervals + 1` equispaced nodes on `[0, length]`.
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("domain length must be positive, got {length}"));
        }
        if intervals < 2 {
            return invalid(format!("need at least 2 mesh intervals, got {intervals}"));
        }
        let m = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * length / m).collect();
        nodes[intervals] = length;
        Ok(Self { length, intervals, spacing: length / m, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of intervals `M`; the mesh has `M + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node index whose coordinate matches `x` to within
    /// [`NODE_MATCH_TOLERANCE`]` * h`.
    pub fn node_index(&self, x: f64) -> Result<usize> {
        let k = (x / self.spacing).round();
        if k < 0.0 || k > self.intervals as f64 {
            return invalid(format!("location {x} lies outside [0, {}]", self.length));
        }
        let k = k as usize;
        if (self.nodes[k] - x).abs() > NODE_MATCH_TOLERANCE * self.spacing {
            return invalid(format!("location {x} is not a mesh node (h = {})", self.spacing));
        }
        Ok(k)
    }
}

pub fn build_mesh(length: f64, intervals: usize) -> Result<SpatialMesh> {
    SpatialMesh::new(length, intervals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// `u(0, t) = u(L, t)`.
    Periodic,
    /// `u(0, t) = u(L, t) = 0`.
    DirichletZero,
}

impl BoundaryCondition {
    pub fn state_dim(self, intervals: usize) -> usize {
        match self {
            BoundaryCondition::Periodic => intervals,
            BoundaryCondition::DirichletZero => intervals - 1,
        }
    }
}

/// Semi-discrete system `du/dt = A u + theta * b`.
#[derive(Debug, Clone)]
pub struct LinearOdeSystem {
    matrix: BandedMatrix,
    loading: Vec<f64>,
    state_nodes: Vec<usize>,
    boundary: BoundaryCondition,
    mesh: SpatialMesh,
}

impl LinearOdeSystem {
    pub fn new(
        mesh: SpatialMesh,
        boundary: BoundaryCondition,
        matrix: BandedMatrix,
        loading: Vec<f64>,
    ) -> Result<Self> {
        let d = boundary.state_dim(mesh.intervals());
        if matrix.dim() != d || loading.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "expected dimension {d}, got matrix {} and loading vector {}",
                matrix.dim(),
                loading.len()
            )));
        }
        let state_nodes = (1..=d).collect();
        Ok(Self { matrix, loading, state_nodes, boundary, mesh })
    }

    pub fn dim(&self) -> usize {
        self.loading.len()
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    pub fn loading(&self) -> &[f64] {
        &self.loading
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    /// Mesh node index carried by each state component.
    pub fn state_nodes(&self) -> &[usize] {
        &self.state_nodes
    }

    pub fn state_x(&self, state: usize) -> f64 {
        self.mesh.nodes()[self.state_nodes[state]]
    }

    /// State component holding the solution at mesh node `node`.
    pub fn state_of_node(&self, node: usize) -> Result<usize> {
        let m = self.mesh.intervals();
        match self.boundary {
            BoundaryCondition::Periodic if node == 0 => Ok(m - 1),
            BoundaryCondition::Periodic if node <= m => Ok(node - 1),
            BoundaryCondition::DirichletZero if node >= 1 && node < m => Ok(node - 1),
            BoundaryCondition::DirichletZero => invalid(format!("node {node} is a fixed Dirichlet boundary node")),
            _ => invalid(format!("node {node} out of range")),
        }
    }

    /// State component at spatial location `x`, which must be a mesh node.
    pub fn state_of_x(&self, x: f64) -> Result<usize> {
        self.state_of_node(self.mesh.node_index(x)?)
    }

    /// Expands a state vector to values at every mesh node `0..=M`.
    pub fn to_node_values(&self, state: &[f64]) -> Vec<f64> {
        let m = self.mesh.intervals();
        let mut out = vec![0.0; m + 1];
        for (k, &node) in self.state_nodes.iter().enumerate() {
            out[node] = state[k];
        }
        if self.boundary == BoundaryCondition::Periodic {
            out[0] = out[m];
        }
        out
    }

    /// Samples `f` at the state nodes.
    pub fn sample_states(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.dim()).map(|k| f(self.state_x(k))).collect()
    }

    /// `out = A u + theta * b`.
    pub fn rhs(&self, u: &[f64], theta: f64, out: &mut [f64]) {
        self.matrix.matvec(u, out);
        for (o, b) in out.iter_mut().zip(&self.loading) {
            *o += theta * b;
        }
    }
}

/// Central-difference periodic advection operator `-v du/dx` with a uniform
/// unit loading vector.
pub fn assemble_advection(mesh: &SpatialMesh, velocity: f64) -> Result<LinearOdeSystem> {
    let d = mesh.intervals();
    let c = velocity / (2.0 * mesh.spacing());
    let matrix = BandedMatrix::tridiagonal(vec![c; d], vec![0.0; d], vec![-c; d])?.with_corners(c, -c);
    LinearOdeSystem::new(mesh.clone(), BoundaryCondition::Periodic, matrix, vec![1.0; d])
}

/// Central-difference diffusion operator `alpha d2u/dx2` with homogeneous
/// Dirichlet ends; the loading vector samples `source_profile` at interior nodes.
pub fn assemble_heat(mesh: &SpatialMesh, alpha: f64, source_profile: impl Fn(f64) -> f64) -> Result<LinearOdeSystem> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return invalid(format!("diffusivity must be positive, got {alpha}"));
    }
    let d = mesh.intervals() - 1;
    let h = mesh.spacing();
    let off = alpha / (h * h);
    let matrix = BandedMatrix::tridiagonal(vec![off; d], vec![-2.0 * off; d], vec![off; d])?;
    let loading = mesh.nodes()[1..mesh.intervals()].iter().map(|&x| source_profile(x)).collect();
    LinearOdeSystem::new(mesh.clone(), BoundaryCondition::DirichletZero, matrix, loading)
}

/// Pointwise central-difference approximations of the first and second
/// derivatives of `f` at `x`.
pub fn central_diff_check(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    debug_assert!(h > 0.0);
    let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}
