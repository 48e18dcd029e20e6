//! Per-triangle orthonormal tangent frames.

use nalgebra::{Point3, Vector3};

use super::SurfaceMesh;

/// Orthonormal frame (e1, e2, n) of a triangle's plane, with
/// n = e1 x e2 the outward normal.
///
/// The frame is a function of the triangle's vertex set alone: e1 points
/// along the edge from the lowest-index vertex to the next vertex in
/// cyclic order, so any consistently oriented copy of the triangle gets
/// the same frame regardless of which vertex the face list starts at.
#[derive(Debug, Clone, Copy)]
pub struct TangentFrame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Origin of the in-plane coordinates: the lowest-index vertex.
    pub origin: Point3<f64>,
}

impl TangentFrame {
    pub fn from_triangle(mesh: &SurfaceMesh, t: usize) -> Self {
        let tri = mesh.triangles()[t];
        // Rotate so the lowest vertex index comes first; cyclic rotation
        // preserves orientation.
        let k = (0..3).min_by_key(|&k| tri[k]).unwrap();
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let c = tri[(k + 2) % 3];
        let (pa, pb, pc) = (mesh.vertices()[a], mesh.vertices()[b], mesh.vertices()[c]);

        let e1 = (pb - pa).normalize();
        let normal = (pb - pa).cross(&(pc - pa)).normalize();
        let e2 = normal.cross(&e1);
        Self { e1, e2, normal, origin: pa }
    }

    /// In-plane coordinates of a point of the triangle's plane.
    pub fn project(&self, p: &Point3<f64>) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(&self.e1), d.dot(&self.e2)]
    }

    /// Lift in-plane vector components back to R³.
    pub fn lift(&self, v: [f64; 2]) -> Vector3<f64> {
        self.e1 * v[0] + self.e2 * v[1]
    }
}

/// Frames for every triangle of the mesh.
pub fn tangent_frames(mesh: &SurfaceMesh) -> Vec<TangentFrame> {
    (0..mesh.n_triangles()).map(|t| TangentFrame::from_triangle(mesh, t)).collect()
}
