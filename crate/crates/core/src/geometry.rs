//! Discrete domains: uniform tensor grids on an interval or rectangle,
//! trapezoidal volume/arc quadrature, boundary cycle ordering, and the
//! boundary patch Σ on which impedance perturbations live.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Domain geometry as read from experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// [0, L] with `n` grid nodes (endpoints included).
    Interval { length: f64, n: usize },
    /// [0, a] × [0, b] with nx × ny grid nodes.
    Rectangle { a: f64, b: f64, nx: usize, ny: usize },
}

impl DomainSpec {
    /// Config-level validation; stricter than what `build_mesh` needs.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Interval { length, n } => {
                if !(length > 0.0) {
                    return Err(CoreError::Config("interval length must be > 0".into()));
                }
                if n < 2 {
                    return Err(CoreError::Config("interval needs at least 2 nodes".into()));
                }
            }
            DomainSpec::Rectangle { a, b, nx, ny } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(CoreError::Config("rectangle sides must be > 0".into()));
                }
                if nx < 8 || ny < 8 {
                    return Err(CoreError::Config(format!(
                        "grid too small: nx={nx}, ny={ny} (need nx, ny >= 8)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Structured grid metadata the assembly relies on.
#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    Interval { n: usize, h: f64 },
    Rectangle { nx: usize, ny: usize, hx: f64, hy: f64 },
}

/// Discretized domain: node coordinates, trapezoidal volume weights and the
/// stencil edges carrying the Dirichlet-energy coefficients.
///
/// Immutable after construction; shared read-only across workers.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: GridKind,
    /// node coordinates; y component is 0 on an interval
    pub coords: Vec<[f64; 2]>,
    /// trapezoidal volume weights w_V (Σ w_V = |Ω|)
    pub weights: Vec<f64>,
    /// stencil edges (a, b, coef) with a < b; uᵀAu = Σ coef·(u_b − u_a)²
    /// discretizes ∫|∇u|² exactly on the tensor grid
    pub edges: Vec<(usize, usize, f64)>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.kind, GridKind::Interval { .. })
    }
}

/// Ordered boundary trace of the mesh: a single counterclockwise cycle for
/// rectangles (starting at the (0,0) corner), the two endpoints for an
/// interval. Carries the arc-length quadrature and the inward normal stencil.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    /// mesh node index at each boundary position, in cycle order
    pub node_indices: Vec<usize>,
    /// arc-length weights w_S (Σ w_S = |∂Ω|); the 0-dimensional boundary of
    /// an interval uses counting measure, w_S = 1 per endpoint
    pub weights: Vec<f64>,
    /// cumulative arc-length coordinate s per position
    pub arc: Vec<f64>,
    /// total boundary measure |∂Ω|
    pub total_arc: f64,
    /// inward node index per boundary position (normal stencil)
    pub normal_neighbor: Vec<usize>,
    /// spacing to the inward node
    pub normal_spacing: Vec<f64>,
    pub is_interval: bool,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }
}

/// Contiguous arc-index range on the boundary cycle, with one margin node
/// excluded at each end so perturbations are compactly supported in the
/// open patch. Margins are waived on an interval (0-dimensional boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaPatch {
    /// first boundary position inside the patch (inclusive)
    pub first: usize,
    /// last boundary position inside the patch (inclusive)
    pub last: usize,
    /// nodes dropped at each end of the requested range
    pub margin: usize,
}

impl SigmaPatch {
    pub fn positions(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false // constructible patches are nonempty by contract
    }

    pub fn contains(&self, position: usize) -> bool {
        position >= self.first && position <= self.last
    }
}

/// Build the volume mesh and its boundary trace.
///
/// The 2-D boundary cycle starts at the corner (0,0) and proceeds
/// counterclockwise; each corner belongs to the edge it starts, and its
/// arc weight combines the two adjacent half-segments.
pub fn build_mesh(spec: &DomainSpec) -> Result<(Mesh, BoundaryMesh)> {
    match *spec {
        DomainSpec::Interval { length, n } => {
            if !(length > 0.0) {
                return Err(CoreError::Config("interval length must be > 0".into()));
            }
            if n < 2 {
                return Err(CoreError::Config("grid too small: interval needs n >= 2".into()));
            }
            let h = length / (n - 1) as f64;
            let coords: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
            let mut weights = vec![h; n];
            weights[0] = 0.5 * h;
            weights[n - 1] = 0.5 * h;
            let edges = (0..n - 1).map(|i| (i, i + 1, 1.0 / h)).collect();
            let mesh = Mesh {
                kind: GridKind::Interval { n, h },
                coords,
                weights,
                edges,
            };
            let bmesh = BoundaryMesh {
                node_indices: vec![0, n - 1],
                weights: vec![1.0, 1.0],
                arc: vec![0.0, 1.0],
                total_arc: 2.0,
                normal_neighbor: vec![1, n - 2],
                normal_spacing: vec![h, h],
                is_interval: true,
            };
            Ok((mesh, bmesh))
        }
        DomainSpec::Rectangle { a, b, nx, ny } => {
            if !(a > 0.0 && b > 0.0) {
                return Err(CoreError::Config("rectangle sides must be > 0".into()));
            }
            if nx < 2 || ny < 2 {
                return Err(CoreError::Config(
                    "grid too small: rectangle needs nx, ny >= 2".into(),
                ));
            }
            let hx = a / (nx - 1) as f64;
            let hy = b / (ny - 1) as f64;
            let idx = |i: usize, j: usize| j * nx + i;

            let mut coords = Vec::with_capacity(nx * ny);
            let mut weights = Vec::with_capacity(nx * ny);
            let wx = |i: usize| if i == 0 || i == nx - 1 { 0.5 * hx } else { hx };
            let wy = |j: usize| if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
            for j in 0..ny {
                for i in 0..nx {
                    coords.push([i as f64 * hx, j as f64 * hy]);
                    weights.push(wx(i) * wy(j));
                }
            }

            // x-edges carry wy/hx, y-edges wx/hy: uᵀAu then reproduces the
            // tensor-trapezoid discretization of ∫|∇u|² node-exactly
            let mut edges = Vec::with_capacity(2 * nx * ny);
            for j in 0..ny {
                for i in 0..nx - 1 {
                    edges.push((idx(i, j), idx(i + 1, j), wy(j) / hx));
                }
            }
            for j in 0..ny - 1 {
                for i in 0..nx {
                    edges.push((idx(i, j), idx(i, j + 1), wx(i) / hy));
                }
            }
            edges.sort_by_key(|&(p, q, _)| (q - p, p));

            // boundary cycle, counterclockwise from (0,0)
            let mut cycle = Vec::with_capacity(2 * (nx + ny) - 4);
            for i in 0..nx - 1 {
                cycle.push(idx(i, 0));
            }
            for j in 0..ny - 1 {
                cycle.push(idx(nx - 1, j));
            }
            for i in (1..nx).rev() {
                cycle.push(idx(i, ny - 1));
            }
            for j in (1..ny).rev() {
                cycle.push(idx(0, j));
            }
            let m = cycle.len();

            // segment lengths between consecutive cycle positions
            let seg = |p: usize| {
                let [x0, y0] = coords[cycle[p]];
                let [x1, y1] = coords[cycle[(p + 1) % m]];
                ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
            };
            let mut bweights = vec![0.0; m];
            let mut arc = vec![0.0; m];
            for p in 0..m {
                let s_next = seg(p);
                let s_prev = seg((p + m - 1) % m);
                bweights[p] = 0.5 * (s_prev + s_next);
                if p + 1 < m {
                    arc[p + 1] = arc[p] + s_next;
                }
            }
            let total_arc = arc[m - 1] + seg(m - 1);

            let mut normal_neighbor = vec![0usize; m];
            let mut normal_spacing = vec![0.0; m];
            for p in 0..m {
                let node = cycle[p];
                let i = node % nx;
                let j = node / nx;
                let (ni, nj) = match (i, j) {
                    (0, 0) => (1, 1),
                    (i, 0) if i == nx - 1 => (nx - 2, 1),
                    (i, j) if i == nx - 1 && j == ny - 1 => (nx - 2, ny - 2),
                    (0, j) if j == ny - 1 => (1, ny - 2),
                    (i, 0) => (i, 1),
                    (i, j) if i == nx - 1 => (nx - 2, j),
                    (i, j) if j == ny - 1 => (i, ny - 2),
                    (0, j) => (1, j),
                    _ => unreachable!("cycle position off the boundary"),
                };
                normal_neighbor[p] = idx(ni, nj);
                let [x0, y0] = coords[node];
                let [x1, y1] = coords[idx(ni, nj)];
                normal_spacing[p] = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
            }

            let mesh = Mesh {
                kind: GridKind::Rectangle { nx, ny, hx, hy },
                coords,
                weights,
                edges,
            };
            let bmesh = BoundaryMesh {
                node_indices: cycle,
                weights: bweights,
                arc,
                total_arc,
                normal_neighbor,
                normal_spacing,
                is_interval: false,
            };
            Ok((mesh, bmesh))
        }
    }
}

/// Boundary patch covering the nodes with arc coordinate in
/// [arc_start, arc_end], minus one margin node per end (2-D only).
pub fn make_sigma(bmesh: &BoundaryMesh, arc_start: f64, arc_end: f64) -> Result<SigmaPatch> {
    if !(0.0 <= arc_start && arc_start < arc_end && arc_end <= bmesh.total_arc + 1e-12) {
        return Err(CoreError::Config(format!(
            "invalid arc range [{arc_start}, {arc_end}] on boundary of measure {}",
            bmesh.total_arc
        )));
    }
    let tol = 1e-9 * (1.0 + bmesh.total_arc);
    let in_range: Vec<usize> = (0..bmesh.len())
        .filter(|&p| bmesh.arc[p] >= arc_start - tol && bmesh.arc[p] <= arc_end + tol)
        .collect();
    if bmesh.is_interval {
        // margins waived: the boundary is two isolated points
        let (Some(&first), Some(&last)) = (in_range.first(), in_range.last()) else {
            return Err(CoreError::PatchTooSmall(
                "no boundary point in the requested arc range".into(),
            ));
        };
        return Ok(SigmaPatch { first, last, margin: 0 });
    }
    if in_range.len() < 3 {
        return Err(CoreError::PatchTooSmall(format!(
            "range holds {} node(s); none left after margins",
            in_range.len()
        )));
    }
    Ok(SigmaPatch {
        first: in_range[0] + 1,
        last: in_range[in_range.len() - 1] - 1,
        margin: 1,
    })
}

/// Σ f·w_S over the whole boundary (flat measure; any conformal factor is
/// applied by the spectral module's metric-aware weights).
pub fn integrate_boundary(bmesh: &BoundaryMesh, f: &[f64]) -> Result<f64> {
    if f.len() != bmesh.len() {
        return Err(CoreError::Contract(format!(
            "boundary function has {} values, boundary has {} nodes",
            f.len(),
            bmesh.len()
        )));
    }
    Ok(f.iter().zip(&bmesh.weights).map(|(v, w)| v * w).sum())
}
