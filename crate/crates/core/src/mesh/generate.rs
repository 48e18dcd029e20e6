//! Built-in mesh generators: subdivided icosahedron spheres and tori of
//! revolution.

use std::collections::HashMap;

use nalgebra::Point3;

use super::{MeshError, SurfaceMesh};

/// One icosphere subdivision step, recording where the appended midpoint
/// vertices came from.
///
/// Vertex `coarse_vertices + i` of the refined mesh is the reprojected
/// midpoint of `midpoint_parents[i]`. Face `f` of the coarse mesh becomes
/// faces `4f..4f+4` of the refined mesh, and the spherical triangles of the
/// children partition the parent's spherical triangle exactly (the midpoint
/// of an arc lies on that arc).
#[derive(Debug, Clone)]
pub struct IcosphereStep {
    pub coarse_vertices: usize,
    pub midpoint_parents: Vec<[usize; 2]>,
}

/// Unit icosahedron with vertices at both poles: vertex 0 = (0,0,1),
/// vertex 11 = (0,0,-1), two staggered 5-rings between. Putting the poles
/// on vertices keeps distance functions from a pole well resolved at
/// their antipodal singularity.
fn icosahedron_unit() -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let ring_z = 1.0 / 5.0_f64.sqrt();
    let ring_r = 2.0 / 5.0_f64.sqrt();
    let mut vertices = vec![Point3::new(0.0, 0.0, 1.0)];
    for k in 0..5 {
        let th = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
        vertices.push(Point3::new(ring_r * th.cos(), ring_r * th.sin(), ring_z));
    }
    for k in 0..5 {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 5.0;
        vertices.push(Point3::new(ring_r * th.cos(), ring_r * th.sin(), -ring_z));
    }
    vertices.push(Point3::new(0.0, 0.0, -1.0));

    let u = |k: usize| 1 + k % 5;
    let l = |k: usize| 6 + k % 5;
    let mut triangles = Vec::with_capacity(20);
    for k in 0..5 {
        triangles.push([0, u(k), u(k + 1)]);
    }
    for k in 0..5 {
        triangles.push([u(k), l(k), u(k + 1)]);
        triangles.push([u(k + 1), l(k), l(k + 1)]);
    }
    for k in 0..5 {
        triangles.push([11, l(k + 1), l(k)]);
    }
    (vertices, triangles)
}

/// Sphere of the given radius as a subdivided icosahedron.
///
/// Level n has 20*4^n triangles; every vertex lies exactly on the sphere.
/// Subdividing is incremental: the level-n vertices are a prefix of the
/// level-(n+1) vertices with unchanged indices.
pub fn generate_sphere(radius: f64, subdivisions: u32) -> Result<SurfaceMesh, MeshError> {
    generate_sphere_with_steps(radius, subdivisions).map(|(mesh, _)| mesh)
}

/// As [`generate_sphere`], also returning the per-step midpoint lineage.
pub fn generate_sphere_with_steps(
    radius: f64,
    subdivisions: u32,
) -> Result<(SurfaceMesh, Vec<IcosphereStep>), MeshError> {
    if !(radius > 0.0) {
        return Err(MeshError::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let (mut vertices, mut triangles) = icosahedron_unit();
    let mut steps = Vec::with_capacity(subdivisions as usize);

    for _ in 0..subdivisions {
        let coarse_vertices = vertices.len();
        let mut parents: Vec<[usize; 2]> = Vec::new();
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = (vertices[a].coords + vertices[b].coords).normalize();
                vertices.push(Point3::from(m));
                parents.push([key.0, key.1]);
                vertices.len() - 1
            })
        };

        let mut refined = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let mab = midpoint(a, b, &mut vertices);
            let mbc = midpoint(b, c, &mut vertices);
            let mca = midpoint(c, a, &mut vertices);
            refined.push([a, mab, mca]);
            refined.push([mab, b, mbc]);
            refined.push([mca, mbc, c]);
            refined.push([mab, mbc, mca]);
        }
        triangles = refined;
        steps.push(IcosphereStep { coarse_vertices, midpoint_parents: parents });
    }

    let scaled = vertices.into_iter().map(|p| Point3::from(p.coords * radius)).collect();
    Ok((SurfaceMesh::new(scaled, triangles)?, steps))
}

/// Torus of revolution around the z axis.
///
/// `n_major` samples the angle around the axis, `n_minor` the angle around
/// the tube. Vertex `iu * n_minor + iv` sits at parameters
/// (2*pi*iu/n_major, 2*pi*iv/n_minor).
pub fn generate_torus(
    major_radius: f64,
    minor_radius: f64,
    n_major: usize,
    n_minor: usize,
) -> Result<SurfaceMesh, MeshError> {
    if !(major_radius > minor_radius && minor_radius > 0.0) {
        return Err(MeshError::InvalidParameter(format!(
            "torus radii must satisfy major > minor > 0, got major={major_radius} minor={minor_radius}"
        )));
    }
    if n_major < 3 || n_minor < 3 {
        return Err(MeshError::InvalidParameter(format!(
            "torus resolution must be at least 3x3, got {n_major}x{n_minor}"
        )));
    }

    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for iu in 0..n_major {
        let u = 2.0 * std::f64::consts::PI * iu as f64 / n_major as f64;
        for iv in 0..n_minor {
            let v = 2.0 * std::f64::consts::PI * iv as f64 / n_minor as f64;
            let ring = major_radius + minor_radius * v.cos();
            vertices.push(Point3::new(
                ring * u.cos(),
                ring * u.sin(),
                minor_radius * v.sin(),
            ));
        }
    }

    let idx = |iu: usize, iv: usize| (iu % n_major) * n_minor + (iv % n_minor);
    let mut triangles = Vec::with_capacity(2 * n_major * n_minor);
    for iu in 0..n_major {
        for iv in 0..n_minor {
            let a = idx(iu, iv);
            let b = idx(iu + 1, iv);
            let c = idx(iu + 1, iv + 1);
            let d = idx(iu, iv + 1);
            // The diagonal flips between the two halves of the tube angle,
            // so the triangulation is symmetric under the mirror v -> -v
            // (for even n_minor): quads meeting across the z = 0 rings are
            // mirror images rather than translates.
            if 2 * iv >= n_minor {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }
    SurfaceMesh::new(vertices, triangles)
}
