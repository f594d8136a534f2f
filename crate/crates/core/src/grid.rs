//! Structured vertex-centered meshes on intervals and rectangles.
//!
//! The discrete Laplacian is the lumped-mass weak form `M⁻¹ K`, where `M`
//! holds the trapezoid weights and `K` the (product) linear stiffness
//! matrix. A Robin closure adds `α w_Γ` to the boundary diagonal of `K`,
//! so every operator built here is symmetric in the `w_Ω` inner product.

use crate::banded::BandMatrix;
use crate::error::{Result, SolverError};

/// One value per mesh node.
pub type Field = Vec<f64>;
/// One value per boundary node, ordered as [`SpatialMesh::boundary_nodes`].
pub type BoundaryField = Vec<f64>;

/// Time-indexed snapshots, `frames[n]` is the field at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(frames: Vec<Vec<f64>>) -> Self {
        Self { frames }
    }

    pub fn zeros(count: usize, len: usize) -> Self {
        Self {
            frames: vec![vec![0.0; len]; count],
        }
    }

    /// Repeats a single snapshot `count` times.
    pub fn constant(count: usize, frame: &[f64]) -> Self {
        Self {
            frames: vec![frame.to_vec(); count],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Values per snapshot (0 for an empty trajectory).
    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.frames[n]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut Vec<f64> {
        &mut self.frames[n]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Vec<f64>> {
        self.frames
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        self.frames.push(frame);
    }

    pub fn last(&self) -> &[f64] {
        self.frames.last().expect("empty trajectory")
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().flatten().copied()
    }

    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }

    pub fn zip_map(&self, other: &Trajectory, f: impl Fn(f64, f64) -> f64) -> Trajectory {
        assert_eq!(self.len(), other.len());
        Trajectory::new(
            self.frames
                .iter()
                .zip(&other.frames)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Trajectory {
        Trajectory::new(self.frames.iter().map(|f| f.iter().map(|v| s * v).collect()).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }
}

/// Boundary closure for the discrete Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub enum BcSpec {
    NeumannHomogeneous,
    /// `∂v/∂n = g − α v` on Γ.
    Robin {
        alpha: BoundaryField,
        source: BoundaryField,
    },
}

impl BcSpec {
    pub fn validate(&self, mesh: &SpatialMesh) -> Result<()> {
        if let BcSpec::Robin { alpha, source } = self {
            mesh.check_boundary(alpha, "robin alpha")?;
            mesh.check_boundary(source, "robin source")?;
            let min = alpha.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(SolverError::InvalidInput(format!(
                    "robin closure requires alpha > 0, found min {min}"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete L², H¹-seminorm and max norms of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    dim: usize,
    extents: [f64; 2],
    counts: [usize; 2],
    spacing: [f64; 2],
    coords: Vec<[f64; 2]>,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    boundary_slot: Vec<Option<usize>>,
    w_domain: Vec<f64>,
    w_boundary: Vec<f64>,
    /// Stiffness edges `(i, j, c)` with `i < j`, contributing `c (u_i − u_j)²` to `uᵀKu`.
    edges: Vec<(usize, usize, f64)>,
    bandwidth: usize,
}

fn trapezoid(count: usize, h: f64) -> Vec<f64> {
    (0..count)
        .map(|i| if i == 0 || i + 1 == count { 0.5 * h } else { h })
        .collect()
}

/// Builds a uniform vertex-centered mesh on `[0, L₁]` or `[0, L₁] × [0, L₂]`.
pub fn build_mesh(dimension: usize, extents: &[f64], node_counts: &[usize]) -> Result<SpatialMesh> {
    if dimension != 1 && dimension != 2 {
        return Err(SolverError::InvalidMesh(format!(
            "dimension must be 1 or 2, got {dimension}"
        )));
    }
    if extents.len() != dimension || node_counts.len() != dimension {
        return Err(SolverError::InvalidMesh(format!(
            "expected {dimension} extents and node counts, got {} and {}",
            extents.len(),
            node_counts.len()
        )));
    }
    for (axis, (&l, &n)) in extents.iter().zip(node_counts).enumerate() {
        if n < 3 {
            return Err(SolverError::InvalidMesh(format!(
                "axis {axis}: need at least 3 nodes, got {n}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(SolverError::InvalidMesh(format!(
                "axis {axis}: extent must be positive, got {l}"
            )));
        }
    }

    let nx = node_counts[0];
    let lx = extents[0];
    let hx = lx / (nx - 1) as f64;
    let wx = trapezoid(nx, hx);

    if dimension == 1 {
        let coords = (0..nx).map(|i| [i as f64 * hx, 0.0]).collect();
        let boundary = vec![0, nx - 1];
        let mut boundary_slot = vec![None; nx];
        boundary_slot[0] = Some(0);
        boundary_slot[nx - 1] = Some(1);
        let edges = (0..nx - 1).map(|i| (i, i + 1, 1.0 / hx)).collect();
        return Ok(SpatialMesh {
            dim: 1,
            extents: [lx, 0.0],
            counts: [nx, 1],
            spacing: [hx, 0.0],
            coords,
            boundary,
            interior: (1..nx - 1).collect(),
            boundary_slot,
            w_domain: wx,
            w_boundary: vec![1.0, 1.0],
            edges,
            bandwidth: 1,
        });
    }

    let ny = node_counts[1];
    let ly = extents[1];
    let hy = ly / (ny - 1) as f64;
    let wy = trapezoid(ny, hy);
    let n = nx * ny;
    let id = |i: usize, j: usize| j * nx + i;

    let mut coords = Vec::with_capacity(n);
    let mut w_domain = Vec::with_capacity(n);
    for j in 0..ny {
        for i in 0..nx {
            coords.push([i as f64 * hx, j as f64 * hy]);
            w_domain.push(wx[i] * wy[j]);
        }
    }

    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    let mut boundary_slot = vec![None; n];
    let mut w_boundary = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let on_x = i == 0 || i + 1 == nx;
            let on_y = j == 0 || j + 1 == ny;
            if on_x || on_y {
                // Arc length of the adjacent half-segments along Γ; corners
                // collect half a segment from each edge.
                let mut w = 0.0;
                if on_y {
                    w += wx[i];
                }
                if on_x {
                    w += wy[j];
                }
                boundary_slot[id(i, j)] = Some(boundary.len());
                boundary.push(id(i, j));
                w_boundary.push(w);
            } else {
                interior.push(id(i, j));
            }
        }
    }

    let mut edges = Vec::with_capacity(2 * n);
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                edges.push((id(i, j), id(i + 1, j), wy[j] / hx));
            }
            if j + 1 < ny {
                edges.push((id(i, j), id(i, j + 1), wx[i] / hy));
            }
        }
    }

    Ok(SpatialMesh {
        dim: 2,
        extents: [lx, ly],
        counts: [nx, ny],
        spacing: [hx, hy],
        coords,
        boundary,
        interior,
        boundary_slot,
        w_domain,
        w_boundary,
        edges,
        bandwidth: nx,
    })
}

impl SpatialMesh {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn coord(&self, node: usize) -> [f64; 2] {
        self.coords[node]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `node` within the boundary ordering, if it lies on Γ.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    pub fn domain_weights(&self) -> &[f64] {
        &self.w_domain
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.w_boundary
    }

    pub fn stiffness_edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Half-bandwidth of every nodal operator in natural ordering.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn measure(&self) -> f64 {
        self.extents[..self.dim].iter().product()
    }

    pub fn boundary_measure(&self) -> f64 {
        if self.dim == 1 {
            2.0
        } else {
            2.0 * (self.extents[0] + self.extents[1])
        }
    }

    pub fn check_field(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.node_count() {
            return Err(SolverError::ShapeMismatch {
                what: what.to_string(),
                expected: self.node_count(),
                found: v.len(),
            });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(SolverError::InvalidInput(format!("{what}: non-finite value {bad}")));
        }
        Ok(())
    }

    pub fn check_boundary(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.boundary_count() {
            return Err(SolverError::ShapeMismatch {
                what: what.to_string(),
                expected: self.boundary_count(),
                found: v.len(),
            });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(SolverError::InvalidInput(format!("{what}: non-finite value {bad}")));
        }
        Ok(())
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        self.coords.iter().map(|c| f(c[0], c[1])).collect()
    }

    /// Evaluates `f(x, y)` at every boundary node.
    pub fn sample_boundary(&self, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        self.boundary
            .iter()
            .map(|&n| f(self.coords[n][0], self.coords[n][1]))
            .collect()
    }

    pub fn trace(&self, v: &[f64]) -> BoundaryField {
        self.boundary.iter().map(|&n| v[n]).collect()
    }

    /// `K u` (weighted form, no mass inverse).
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for &(i, j, c) in &self.edges {
            let d = c * (u[i] - u[j]);
            out[i] += d;
            out[j] -= d;
        }
        out
    }

    /// `uᵀ K v`.
    pub fn stiffness_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j, c)| c * (u[i] - u[j]) * (v[i] - v[j]))
            .sum()
    }

    /// Adds `scale · K` into a banded matrix of matching dimension.
    pub fn add_stiffness(&self, m: &mut BandMatrix, scale: f64) {
        for &(i, j, c) in &self.edges {
            let s = scale * c;
            m.add(i, i, s);
            m.add(j, j, s);
            m.add(i, j, -s);
            m.add(j, i, -s);
        }
    }

    pub fn empty_band(&self) -> BandMatrix {
        BandMatrix::zeros(self.node_count(), self.bandwidth, self.bandwidth)
    }

    pub fn integrate_domain(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.node_count());
        v.iter().zip(&self.w_domain).map(|(a, w)| a * w).sum()
    }

    pub fn integrate_boundary(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.boundary_count());
        v.iter().zip(&self.w_boundary).map(|(a, w)| a * w).sum()
    }

    /// `∫Ω u v` by the nodal quadrature.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.w_domain).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn inner_boundary(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.w_boundary).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        self.stiffness_form(v, v).max(0.0).sqrt()
    }

    /// Full H¹ norm `(‖v‖² + |v|₁²)^{1/2}`.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        (self.inner(v, v) + self.stiffness_form(v, v)).max(0.0).sqrt()
    }

    pub fn boundary_l2_norm(&self, v: &[f64]) -> f64 {
        self.inner_boundary(v, v).max(0.0).sqrt()
    }

    pub fn norms(&self, v: &[f64]) -> Norms {
        Norms {
            l2: self.l2_norm(v),
            h1_semi: self.h1_seminorm(v),
            linf: v.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        }
    }

    /// `−Δ_h v` with the given boundary closure, as `M⁻¹ (K v + B_α v − W_Γ g)`.
    pub fn apply_laplacian(&self, v: &[f64], bc: &BcSpec) -> Field {
        let mut out = self.stiffness_apply(v);
        if let BcSpec::Robin { alpha, source } = bc {
            for (k, &node) in self.boundary.iter().enumerate() {
                out[node] += self.w_boundary[k] * (alpha[k] * v[node] - source[k]);
            }
        }
        out.iter_mut().zip(&self.w_domain).for_each(|(o, w)| *o /= w);
        out
    }
}
