//! Smooth reference surfaces with closed-form closest-point projection.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{MeshError, SurfaceMesh};

/// Surfaces for which the closest-point projection has a closed form.
///
/// The torus is centered at the origin and revolves around the z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticSurface {
    Sphere { center: Point3<f64>, radius: f64 },
    TorusOfRevolution { major_radius: f64, minor_radius: f64 },
}

impl AnalyticSurface {
    /// Closest point of the surface, defined away from the medial axis.
    ///
    /// Fails on the sphere's center, the torus' rotation axis, and the
    /// torus' spine circle, where the projection is not unique.
    pub fn closest_point(&self, p: &Point3<f64>) -> Result<Point3<f64>, String> {
        match *self {
            Self::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    return Err("projection undefined at the sphere center".into());
                }
                Ok(center + d * (radius / n))
            }
            Self::TorusOfRevolution { major_radius, minor_radius } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                if rho == 0.0 {
                    return Err("projection undefined on the torus axis".into());
                }
                let spine = Point3::new(major_radius * p.x / rho, major_radius * p.y / rho, 0.0);
                let d = p - spine;
                let dn = d.norm();
                if dn == 0.0 {
                    return Err("projection undefined on the torus spine circle".into());
                }
                Ok(spine + d * (minor_radius / dn))
            }
        }
    }

    /// Signed distance to the surface, negative inside.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        match *self {
            Self::Sphere { center, radius } => (p - center).norm() - radius,
            Self::TorusOfRevolution { major_radius, minor_radius } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                ((rho - major_radius).powi(2) + p.z * p.z).sqrt() - minor_radius
            }
        }
    }

    /// Outward unit normal at a surface point.
    pub fn normal_at(&self, a: &Point3<f64>) -> Vector3<f64> {
        match *self {
            Self::Sphere { center, .. } => (a - center).normalize(),
            Self::TorusOfRevolution { major_radius, .. } => {
                let rho = (a.x * a.x + a.y * a.y).sqrt();
                let spine = Point3::new(major_radius * a.x / rho, major_radius * a.y / rho, 0.0);
                (a - spine).normalize()
            }
        }
    }

    /// Reach of the surface: the projection is unique (and smooth) for
    /// points with |signed distance| below this.
    pub fn reach(&self) -> f64 {
        match *self {
            Self::Sphere { radius, .. } => radius,
            Self::TorusOfRevolution { major_radius, minor_radius } => {
                minor_radius.min(major_radius - minor_radius)
            }
        }
    }
}

/// One round of 4-to-1 midpoint refinement followed by projection of every
/// vertex onto `surface`.
///
/// Children of triangle `f` are triangles `4f..4f+4` of the result. Fails
/// if any vertex (original or midpoint) leaves the tubular neighborhood
/// where the projection is unique.
pub fn refine_project(
    mesh: &SurfaceMesh,
    surface: &AnalyticSurface,
) -> Result<SurfaceMesh, MeshError> {
    let mut vertices: Vec<Point3<f64>> = mesh.vertices().to_vec();
    let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *cache.entry(key).or_insert_with(|| {
            let m = (vertices[a].coords + vertices[b].coords) * 0.5;
            vertices.push(Point3::from(m));
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(mesh.n_triangles() * 4);
    for &[a, b, c] in mesh.triangles() {
        let mab = midpoint(a, b, &mut vertices);
        let mbc = midpoint(b, c, &mut vertices);
        let mca = midpoint(c, a, &mut vertices);
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }

    let reach = surface.reach();
    let projected = vertices
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if surface.signed_distance(p).abs() >= reach {
                return Err(MeshError::Projection {
                    index,
                    reason: format!(
                        "vertex at distance {} from the surface exceeds the reach {reach}",
                        surface.signed_distance(p).abs()
                    ),
                });
            }
            surface.closest_point(p).map_err(|reason| MeshError::Projection { index, reason })
        })
        .collect::<Result<Vec<_>, _>>()?;

    SurfaceMesh::new(projected, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_sphere, generate_torus, validate};

    fn unit_sphere() -> AnalyticSurface {
        AnalyticSurface::Sphere { center: Point3::origin(), radius: 1.0 }
    }

    #[test]
    fn sphere_projection() {
        let s = AnalyticSurface::Sphere { center: Point3::origin(), radius: 2.0 };
        let p = Point3::new(0.0, 3.0, 4.0);
        let a = s.closest_point(&p).unwrap();
        assert!((a - Point3::new(0.0, 1.2, 1.6)).norm() < 1e-15);
        assert!((s.signed_distance(&p) - 3.0).abs() < 1e-15);
        assert!(s.closest_point(&Point3::origin()).is_err());
        assert!(s.signed_distance(&Point3::new(0.0, 0.0, 1.0)) < 0.0);
    }

    #[test]
    fn torus_projection() {
        let t = AnalyticSurface::TorusOfRevolution { major_radius: 2.0, minor_radius: 0.5 };
        let a = t.closest_point(&Point3::new(4.0, 0.0, 0.0)).unwrap();
        assert!((a - Point3::new(2.5, 0.0, 0.0)).norm() < 1e-15);
        let b = t.closest_point(&Point3::new(2.0, 0.0, 0.1)).unwrap();
        assert!((b - Point3::new(2.0, 0.0, 0.5)).norm() < 1e-15);
        assert!(t.closest_point(&Point3::new(0.0, 0.0, 1.0)).is_err());
        assert!(t.closest_point(&Point3::new(2.0, 0.0, 0.0)).is_err());
        assert_eq!(t.reach(), 0.5);
    }

    #[test]
    fn projection_decomposition_identity() {
        // x = a(x) + d(x) * normal(a(x)) wherever the projection is defined.
        let surfaces = [
            AnalyticSurface::Sphere { center: Point3::new(0.5, -1.0, 2.0), radius: 1.5 },
            AnalyticSurface::TorusOfRevolution { major_radius: 2.0, minor_radius: 0.7 },
        ];
        let probes = [
            Point3::new(2.1, 0.3, 0.4),
            Point3::new(-1.0, 1.5, -0.2),
            Point3::new(0.4, -2.0, 0.9),
        ];
        for s in &surfaces {
            for p in &probes {
                let a = s.closest_point(p).unwrap();
                let d = s.signed_distance(p);
                let rebuilt = a + s.normal_at(&a) * d;
                assert!((rebuilt - p).norm() < 1e-12);
                assert!(s.signed_distance(&a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refine_project_matches_direct_subdivision() {
        let coarse = generate_sphere(1.0, 1).unwrap();
        let refined = refine_project(&coarse, &unit_sphere()).unwrap();
        let direct = generate_sphere(1.0, 2).unwrap();
        assert_eq!(refined.triangles(), direct.triangles());
        for (a, b) in refined.vertices().iter().zip(direct.vertices()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn refine_icosahedron_counts() {
        let refined = refine_project(&generate_sphere(1.0, 0).unwrap(), &unit_sphere()).unwrap();
        assert_eq!(refined.n_triangles(), 80);
        for v in refined.vertices() {
            assert!((v.coords.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn refine_twice_quarters_h() {
        let base = generate_sphere(1.0, 1).unwrap();
        let once = refine_project(&base, &unit_sphere()).unwrap();
        let twice = refine_project(&once, &unit_sphere()).unwrap();
        let ratio = twice.h_max() / base.h_max();
        assert!((0.2..=0.3).contains(&ratio), "h_max ratio {ratio}");
    }

    #[test]
    fn refine_project_halves_h_on_torus() {
        let surface = AnalyticSurface::TorusOfRevolution { major_radius: 2.0, minor_radius: 1.0 };
        let coarse = generate_torus(2.0, 1.0, 16, 8).unwrap();
        let fine = refine_project(&coarse, &surface).unwrap();
        assert_eq!(fine.n_triangles(), 4 * coarse.n_triangles());
        assert!(validate(&fine).flags.all_pass());
        assert!(fine.h_max() < 0.62 * coarse.h_max());
        for v in fine.vertices() {
            assert!(surface.signed_distance(v).abs() < 1e-12);
        }
    }

    #[test]
    fn refine_outside_tubular_neighborhood_fails() {
        let torus_mesh = generate_torus(2.0, 1.0, 8, 8).unwrap();
        let tiny = AnalyticSurface::Sphere { center: Point3::origin(), radius: 0.5 };
        let err = refine_project(&torus_mesh, &tiny).unwrap_err();
        assert!(matches!(err, MeshError::Projection { .. }));
    }
}
