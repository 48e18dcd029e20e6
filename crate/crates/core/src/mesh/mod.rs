//! Closed triangulated surfaces embedded in R³.
//!
//! A [`SurfaceMesh`] is a closed, consistently oriented 2-manifold triangle
//! mesh with precomputed edge adjacency. Construction validates every
//! invariant and reports all violations at once.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

mod analytic;
mod frame;
mod generate;
mod io;

pub use analytic::{refine_project, AnalyticSurface};
pub use frame::{tangent_frames, TangentFrame};
pub use generate::{generate_sphere, generate_sphere_with_steps, generate_torus, IcosphereStep};
pub use io::{load_mesh, save_mesh, MeshFormat};

/// A single violated mesh invariant, reported by construction or validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshViolation {
    /// Edge with exactly one incident triangle.
    BoundaryEdge { v0: usize, v1: usize },
    /// Edge with more than two incident triangles.
    NonManifoldEdge { v0: usize, v1: usize, count: usize },
    /// Edge traversed in the same direction by both incident triangles.
    InconsistentOrientation { v0: usize, v1: usize },
    /// Triangle with zero (or negative) area.
    ZeroAreaTriangle { triangle: usize },
    /// Two vertices with bitwise identical coordinates.
    DuplicateVertex { first: usize, second: usize },
    /// Triangle referencing a vertex index out of range.
    VertexIndexOutOfRange { triangle: usize, index: usize },
    /// Triangle listing the same vertex twice.
    RepeatedVertexInTriangle { triangle: usize },
    /// V - E + F is odd or greater than 2.
    EulerCharacteristic { chi: i64 },
}

impl std::fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BoundaryEdge { v0, v1 } => write!(f, "boundary edge ({v0}, {v1})"),
            Self::NonManifoldEdge { v0, v1, count } => {
                write!(f, "non-manifold edge ({v0}, {v1}) with {count} incident triangles")
            }
            Self::InconsistentOrientation { v0, v1 } => {
                write!(f, "inconsistent orientation across edge ({v0}, {v1})")
            }
            Self::ZeroAreaTriangle { triangle } => write!(f, "zero-area triangle {triangle}"),
            Self::DuplicateVertex { first, second } => {
                write!(f, "duplicate vertices {first} and {second}")
            }
            Self::VertexIndexOutOfRange { triangle, index } => {
                write!(f, "triangle {triangle} references out-of-range vertex {index}")
            }
            Self::RepeatedVertexInTriangle { triangle } => {
                write!(f, "triangle {triangle} repeats a vertex")
            }
            Self::EulerCharacteristic { chi } => {
                write!(f, "Euler characteristic {chi} is not an even integer <= 2")
            }
        }
    }
}

fn format_violations(violations: &[MeshViolation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Errors produced by mesh construction, loading, and refinement.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("mesh validation failed:\n{}", format_violations(.0))]
    Invalid(Vec<MeshViolation>),
    #[error("projection failed for vertex {index}: {reason}")]
    Projection { index: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Closed oriented triangle mesh in R³ with edge adjacency.
///
/// Immutable after construction; all invariants hold by construction.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    /// Undirected edges as (lo, hi) vertex pairs, in first-seen order.
    edges: Vec<[usize; 2]>,
    /// The two triangles incident to each edge.
    edge_triangles: Vec<[usize; 2]>,
    /// Edge ids of each triangle, slot k holding edge (v_k, v_{k+1 mod 3}).
    triangle_edges: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    /// Build a mesh from raw vertices and counterclockwise triangles,
    /// checking every invariant. On failure the error lists all violations.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let mut violations = Vec::new();
        let nv = vertices.len();

        let mut indices_ok = true;
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    violations.push(MeshViolation::VertexIndexOutOfRange { triangle: t, index: i });
                    indices_ok = false;
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                violations.push(MeshViolation::RepeatedVertexInTriangle { triangle: t });
                indices_ok = false;
            }
        }
        if !indices_ok {
            return Err(MeshError::Invalid(violations));
        }

        // Reject exact coordinate duplicates instead of welding them.
        let mut seen: HashMap<[u64; 3], usize> = HashMap::with_capacity(nv);
        for (i, v) in vertices.iter().enumerate() {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            if let Some(&first) = seen.get(&key) {
                violations.push(MeshViolation::DuplicateVertex { first, second: i });
            } else {
                seen.insert(key, i);
            }
        }

        for (t, tri) in triangles.iter().enumerate() {
            if triangle_area_of(&vertices, tri) <= 0.0 {
                violations.push(MeshViolation::ZeroAreaTriangle { triangle: t });
            }
        }

        // Undirected edge incidence, keeping traversal direction per triangle.
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut incidence: Vec<Vec<(usize, bool)>> = Vec::new(); // (triangle, traversed lo->hi)
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    incidence.push(Vec::new());
                    edges.len() - 1
                });
                incidence[id].push((t, a < b));
                triangle_edges[t][k] = id;
            }
        }

        let mut edge_triangles = vec![[usize::MAX; 2]; edges.len()];
        for (id, inc) in incidence.iter().enumerate() {
            let [v0, v1] = edges[id];
            match inc.len() {
                1 => violations.push(MeshViolation::BoundaryEdge { v0, v1 }),
                2 => {
                    if inc[0].1 == inc[1].1 {
                        violations.push(MeshViolation::InconsistentOrientation { v0, v1 });
                    }
                    edge_triangles[id] = [inc[0].0, inc[1].0];
                }
                n => violations.push(MeshViolation::NonManifoldEdge { v0, v1, count: n }),
            }
        }

        let chi = nv as i64 - edges.len() as i64 + triangles.len() as i64;
        if chi % 2 != 0 || chi > 2 {
            violations.push(MeshViolation::EulerCharacteristic { chi });
        }

        if !violations.is_empty() {
            return Err(MeshError::Invalid(violations));
        }

        Ok(Self { vertices, triangles, edges, edge_triangles, triangle_edges })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// The two triangles incident to edge `e`.
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.edge_triangles[e]
    }

    /// Edge ids of triangle `t`; slot k holds the edge between local
    /// vertices k and k+1.
    pub fn triangle_edge_ids(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    pub fn genus(&self) -> i64 {
        (2 - self.euler_characteristic()) / 2
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area_of(&self.vertices, &self.triangles[t])
    }

    /// Unit outward normal of triangle `t`.
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let ab = self.vertices[b] - self.vertices[a];
        let ac = self.vertices[c] - self.vertices[a];
        ab.cross(&ac).normalize()
    }

    pub fn triangle_centroid(&self, t: usize) -> Point3<f64> {
        let [a, b, c] = self.triangles[t];
        Point3::from(
            (self.vertices[a].coords + self.vertices[b].coords + self.vertices[c].coords) / 3.0,
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Longest edge of triangle `t` (its diameter).
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pa - pb).norm().max((pb - pc).norm()).max((pc - pa).norm())
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_diameter(t)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_diameter(t)).fold(f64::INFINITY, f64::min)
    }

    /// Diameter of the axis-aligned bounding box.
    pub fn bounding_box_diameter(&self) -> f64 {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Point3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        (hi - lo).norm()
    }

    /// Index of the vertex closest to `p`.
    pub fn nearest_vertex(&self, p: &Point3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn triangle_area_of(vertices: &[Point3<f64>], tri: &[usize; 3]) -> f64 {
    let ab = vertices[tri[1]] - vertices[tri[0]];
    let ac = vertices[tri[2]] - vertices[tri[0]];
    0.5 * ab.cross(&ac).norm()
}

/// Pass/fail flags for each [`SurfaceMesh`] invariant, recomputed directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvariantFlags {
    pub closed: bool,
    pub oriented: bool,
    pub nondegenerate: bool,
    pub euler_ok: bool,
}

impl InvariantFlags {
    pub fn all_pass(&self) -> bool {
        self.closed && self.oriented && self.nondegenerate && self.euler_ok
    }
}

/// Geometric and topological summary of a mesh.
#[derive(Debug, Clone)]
pub struct MeshReport {
    pub h_max: f64,
    pub h_min: f64,
    pub min_angle_deg: f64,
    pub area: f64,
    pub genus: i64,
    pub quasi_uniformity: f64,
    pub flags: InvariantFlags,
}

impl MeshReport {
    /// Flat `key = value` text record.
    pub fn to_text(&self) -> String {
        format!(
            "h_max = {}\nh_min = {}\nmin_angle_deg = {}\narea = {}\ngenus = {}\n\
             quasi_uniformity = {}\nclosed = {}\noriented = {}\nnondegenerate = {}\neuler_ok = {}\n",
            self.h_max,
            self.h_min,
            self.min_angle_deg,
            self.area,
            self.genus,
            self.quasi_uniformity,
            self.flags.closed,
            self.flags.oriented,
            self.flags.nondegenerate,
            self.flags.euler_ok,
        )
    }
}

/// Recompute every invariant and size measure of a mesh.
///
/// Violations are reported through the flags, never thrown.
pub fn validate(mesh: &SurfaceMesh) -> MeshReport {
    let mut min_angle = f64::INFINITY;
    let mut nondegenerate = true;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_area(t) <= 0.0 {
            nondegenerate = false;
        }
        let [a, b, c] = mesh.triangles[t];
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        for (p, q, r) in [(pa, pb, pc), (pb, pc, pa), (pc, pa, pb)] {
            let u = (q - p).normalize();
            let v = (r - p).normalize();
            min_angle = min_angle.min(u.dot(&v).clamp(-1.0, 1.0).acos());
        }
    }

    // Edge incidence and orientation, recomputed from the triangle list.
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            *directed.entry((a, b)).or_insert(0) += 1;
            *undirected.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let closed = undirected.values().all(|&n| n == 2);
    let oriented = directed.values().all(|&n| n == 1);
    let chi = mesh.euler_characteristic();
    let euler_ok = chi % 2 == 0 && chi <= 2;

    MeshReport {
        h_max: mesh.h_max(),
        h_min: mesh.h_min(),
        min_angle_deg: min_angle.to_degrees(),
        area: mesh.total_area(),
        genus: mesh.genus(),
        quasi_uniformity: mesh.h_max() / mesh.h_min(),
        flags: InvariantFlags { closed, oriented, nondegenerate, euler_ok },
    }
}
