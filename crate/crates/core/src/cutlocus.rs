//! Extraction of the gradient-slack region that approximates the cut locus.
//!
//! Given a solved field `u`, the set of interest collects the points where
//! the gradient constraint is strictly slack in the calibrated sense
//! `|∇u|² ≤ 1 − λ²/u²`. Away from the source the distance function has unit
//! gradient, so slack only survives near the distance function's ridge; the
//! parameter λ trims the neighborhood of the source where `u` is small.
//! Flags are evaluated at the constraint points and reported per triangle,
//! the same granularity at which the constraint was imposed. Tiny spurious
//! components, an artifact of first-order elements, are removed by an area
//! filter.

use nalgebra::Point3;
use thiserror::Error;

use crate::fem::{self, FunctionSpace};
use crate::mesh::SurfaceMesh;
use crate::oracle::DistanceOracle;
use crate::solver::SourceSet;

#[derive(Debug, Error)]
pub enum CutLocusError {
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("area fraction must lie in [0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} sources, got {got}")]
    TooFewSources { needed: usize, got: usize },
    #[error("oracle sources do not match the source set")]
    SourcesMismatch,
    #[error("oracle covers {got} vertices but the mesh has {expected}")]
    OracleMismatch { expected: usize, got: usize },
    #[error("the flagged set is empty")]
    EmptySet,
    #[error("the reference point set is empty")]
    EmptyReference,
}

/// One edge-connected component of flagged triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Triangle indices, sorted ascending.
    pub triangles: Vec<usize>,
    /// Sum of the member triangle areas.
    pub area: f64,
}

/// The flagged region extracted from a solution field.
#[derive(Debug, Clone, PartialEq)]
pub struct CutLocusSet {
    pub lambda: f64,
    /// Indicator per constraint point, aligned with the space's point list.
    pub flags: Vec<bool>,
    /// Triangles containing at least one flagged point, sorted ascending.
    pub flagged_triangles: Vec<usize>,
    /// Edge-connected components of the flagged triangles, largest first.
    pub components: Vec<Component>,
    /// Sum of the flagged triangle areas.
    pub total_area: f64,
    /// Area of the whole mesh; filter thresholds are relative to it.
    pub mesh_area: f64,
    /// Number of consecutive flag slots per triangle.
    pub points_per_triangle: usize,
    /// Set when `lambda >= max u`, which empties the set by construction.
    pub empty_warning: bool,
}

/// Per-vertex and per-triangle nearest-source assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoronoiLabeling {
    /// Index into the source list of the nearest source per vertex.
    pub vertex_labels: Vec<usize>,
    /// Majority vertex label per triangle; ties take the lowest label.
    pub triangle_labels: Vec<usize>,
}

/// Flag the constraint points where the gradient slack exceeds the
/// λ-calibrated threshold: `|∇u(p)|² ≤ 1 − λ²/u(p)²` with `u(p) > 0`.
///
/// `coeffs` may come from a raw or a normalized solution on `space`. When
/// `lambda` is at least the largest point value the set is empty and the
/// result carries `empty_warning`.
pub fn extract(
    coeffs: &[f64],
    space: &FunctionSpace,
    lambda: f64,
) -> Result<CutLocusSet, CutLocusError> {
    if !(lambda > 0.0) {
        return Err(CutLocusError::InvalidLambda(lambda));
    }
    if coeffs.len() != space.n_dofs() {
        return Err(CutLocusError::DimensionMismatch {
            expected: space.n_dofs(),
            got: coeffs.len(),
        });
    }
    let values = fem::values_at_constraints(space, coeffs).expect("length checked");
    let gradients = fem::gradient_at_constraints(space, coeffs).expect("length checked");

    let max_u = values.iter().fold(0.0f64, |a, &b| a.max(b));
    let flags: Vec<bool> = values
        .iter()
        .zip(&gradients)
        .map(|(&u, g)| u > 0.0 && g[0] * g[0] + g[1] * g[1] <= 1.0 - lambda * lambda / (u * u))
        .collect();

    Ok(from_flags(space.mesh(), space.constraints_per_triangle(), flags, lambda, lambda >= max_u))
}

/// Assemble a set from per-point flags. `per_triangle` is the number of
/// consecutive flag slots per triangle.
fn from_flags(
    mesh: &SurfaceMesh,
    per_triangle: usize,
    flags: Vec<bool>,
    lambda: f64,
    empty_warning: bool,
) -> CutLocusSet {
    let flagged_triangles: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| flags[t * per_triangle..(t + 1) * per_triangle].iter().any(|&f| f))
        .collect();
    let total_area = flagged_triangles.iter().map(|&t| mesh.triangle_area(t)).sum();
    let mut set = CutLocusSet {
        lambda,
        flags,
        flagged_triangles,
        components: Vec::new(),
        total_area,
        mesh_area: mesh.total_area(),
        points_per_triangle: per_triangle,
        empty_warning,
    };
    set.components = components(&set, mesh);
    set
}

/// Connected components of the flagged triangles, sorted by area descending.
/// Adjacency is through shared edges only; touching at a single vertex does
/// not connect, so spurious flags cannot chain through vertex pinches.
pub fn components(set: &CutLocusSet, mesh: &SurfaceMesh) -> Vec<Component> {
    let mut in_set = vec![false; mesh.n_triangles()];
    for &t in &set.flagged_triangles {
        in_set[t] = true;
    }
    let mut seen = vec![false; mesh.n_triangles()];
    let mut out = Vec::new();
    for &start in &set.flagged_triangles {
        if seen[start] {
            continue;
        }
        let mut triangles = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(t) = stack.pop() {
            triangles.push(t);
            for e in mesh.triangle_edge_ids(t) {
                for other in mesh.edge_triangles(e) {
                    if in_set[other] && !seen[other] {
                        seen[other] = true;
                        stack.push(other);
                    }
                }
            }
        }
        triangles.sort_unstable();
        let area = triangles.iter().map(|&t| mesh.triangle_area(t)).sum();
        out.push(Component { triangles, area });
    }
    out.sort_by(|a, b| b.area.total_cmp(&a.area));
    out
}

/// Euler characteristic V − E + F of the subcomplex spanned by the given
/// triangles. Distinguishes disks (1) from annuli and graphs with cycles
/// (≤ 0).
pub fn subcomplex_euler(mesh: &SurfaceMesh, triangles: &[usize]) -> i64 {
    let mut vertices = std::collections::HashSet::new();
    let mut edges = std::collections::HashSet::new();
    for &t in triangles {
        for v in mesh.triangles()[t] {
            vertices.insert(v);
        }
        for e in mesh.triangle_edge_ids(t) {
            edges.insert(e);
        }
    }
    vertices.len() as i64 - edges.len() as i64 + triangles.len() as i64
}

/// Drop components whose area is below `min_area_fraction` of the mesh
/// area. Unflags their points; idempotent for a fixed fraction.
pub fn filter(set: &CutLocusSet, min_area_fraction: f64) -> Result<CutLocusSet, CutLocusError> {
    if !(0.0..1.0).contains(&min_area_fraction) {
        return Err(CutLocusError::InvalidFraction(min_area_fraction));
    }
    let threshold = min_area_fraction * set.mesh_area;
    let keep: Vec<Component> =
        set.components.iter().filter(|c| c.area >= threshold).cloned().collect();

    let ppt = set.points_per_triangle;
    let mut kept_triangle = vec![false; set.flags.len() / ppt];
    let mut flagged_triangles = Vec::new();
    for c in &keep {
        for &t in &c.triangles {
            kept_triangle[t] = true;
            flagged_triangles.push(t);
        }
    }
    flagged_triangles.sort_unstable();

    let mut flags = set.flags.clone();
    for (p, f) in flags.iter_mut().enumerate() {
        if *f && !kept_triangle[p / ppt] {
            *f = false;
        }
    }

    let total_area: f64 = keep.iter().map(|c| c.area).sum();
    Ok(CutLocusSet {
        lambda: set.lambda,
        flags,
        flagged_triangles,
        components: keep,
        total_area,
        mesh_area: set.mesh_area,
        points_per_triangle: ppt,
        empty_warning: set.empty_warning,
    })
}

/// Nearest-source labels for every vertex and triangle. Requires at least
/// two sources and an oracle built on the same sorted source list.
pub fn label_cells(
    mesh: &SurfaceMesh,
    sources: &SourceSet,
    oracle: &DistanceOracle,
) -> Result<VoronoiLabeling, CutLocusError> {
    if sources.len() < 2 {
        return Err(CutLocusError::TooFewSources { needed: 2, got: sources.len() });
    }
    if oracle.sources != sources.indices() {
        return Err(CutLocusError::SourcesMismatch);
    }
    if oracle.nearest_source().len() != mesh.n_vertices() {
        return Err(CutLocusError::OracleMismatch {
            expected: mesh.n_vertices(),
            got: oracle.nearest_source().len(),
        });
    }
    let vertex_labels = oracle.nearest_source().to_vec();
    let triangle_labels = mesh
        .triangles()
        .iter()
        .map(|tri| {
            let l = [vertex_labels[tri[0]], vertex_labels[tri[1]], vertex_labels[tri[2]]];
            // Majority of three, lowest label on a three-way tie.
            if l[0] == l[1] || l[0] == l[2] {
                l[0]
            } else if l[1] == l[2] {
                l[1]
            } else {
                l.into_iter().min().expect("nonempty")
            }
        })
        .collect();
    Ok(VoronoiLabeling { vertex_labels, triangle_labels })
}

/// One-sided Hausdorff distances between the flagged triangles, represented
/// by their centroids, and a reference point sample. Euclidean ambient
/// metric. Returns `(sup over set of dist to reference, sup over reference
/// of dist to set)`.
pub fn hausdorff_to_reference(
    set: &CutLocusSet,
    mesh: &SurfaceMesh,
    reference: &[Point3<f64>],
) -> Result<(f64, f64), CutLocusError> {
    if set.flagged_triangles.is_empty() {
        return Err(CutLocusError::EmptySet);
    }
    if reference.is_empty() {
        return Err(CutLocusError::EmptyReference);
    }
    let points: Vec<Point3<f64>> =
        set.flagged_triangles.iter().map(|&t| mesh.triangle_centroid(t)).collect();
    let min_dist = |p: &Point3<f64>, qs: &[Point3<f64>]| -> f64 {
        qs.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)
    };
    let set_to_ref = points.iter().map(|p| min_dist(p, reference)).fold(0.0f64, f64::max);
    let ref_to_set = reference.iter().map(|q| min_dist(q, &points)).fold(0.0f64, f64::max);
    Ok((set_to_ref, ref_to_set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, build_space, QuadraticForm};
    use crate::mesh::{generate_sphere, generate_torus};
    use crate::solver::{normalize_lipschitz, solve, SolutionField, SolveParams};
    use nalgebra::Point3;

    fn octahedron() -> SurfaceMesh {
        let vertices = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 0.0, -1.0),
        ];
        let triangles = vec![
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 1],
            [5, 2, 1],
            [5, 3, 2],
            [5, 4, 3],
            [5, 1, 4],
        ];
        SurfaceMesh::new(vertices, triangles).unwrap()
    }

    fn solve_on(
        mesh: &SurfaceMesh,
        sources: &[usize],
        m: f64,
    ) -> (FunctionSpace, QuadraticForm, SolutionField) {
        let space = build_space(mesh, 1, 1).unwrap();
        let form = assemble(&space);
        let set = SourceSet::new(sources.to_vec(), space.n_dofs()).unwrap();
        let params = SolveParams::new(m, &form, &space);
        let sol = solve(&form, &space, &set, &params).unwrap();
        assert!(sol.converged);
        (space, form, sol)
    }

    #[test]
    fn extract_validates_inputs() {
        let mesh = octahedron();
        let space = build_space(&mesh, 1, 1).unwrap();
        let coeffs = vec![0.5; space.n_dofs()];
        assert!(matches!(extract(&coeffs, &space, 0.0), Err(CutLocusError::InvalidLambda(_))));
        assert!(matches!(extract(&coeffs, &space, -0.1), Err(CutLocusError::InvalidLambda(_))));
        assert!(matches!(
            extract(&coeffs, &space, f64::NAN),
            Err(CutLocusError::InvalidLambda(_))
        ));
        assert!(matches!(
            extract(&coeffs[..3], &space, 0.1),
            Err(CutLocusError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lambda_above_max_empties_the_set() {
        let mesh = octahedron();
        let (space, _, sol) = solve_on(&mesh, &[0], 10.0);
        let set = extract(&sol.coeffs, &space, 10.0).unwrap();
        assert!(set.empty_warning);
        assert!(set.flags.iter().all(|&f| !f));
        assert!(set.flagged_triangles.is_empty());
        assert!(set.components.is_empty());
        assert_eq!(set.total_area, 0.0);
        assert!(matches!(
            hausdorff_to_reference(&set, &mesh, &[Point3::origin()]),
            Err(CutLocusError::EmptySet)
        ));
    }

    #[test]
    fn flags_follow_the_slack_inequality() {
        let mesh = octahedron();
        let (space, _, sol) = solve_on(&mesh, &[0], 10.0);
        let lambda = 0.5;
        let set = extract(&sol.coeffs, &space, lambda).unwrap();
        assert!(!set.empty_warning);

        let values = fem::values_at_constraints(&space, &sol.coeffs).unwrap();
        let grads = fem::gradient_at_constraints(&space, &sol.coeffs).unwrap();
        for p in 0..values.len() {
            let expected = values[p] > 0.0
                && grads[p][0] * grads[p][0] + grads[p][1] * grads[p][1]
                    <= 1.0 - lambda * lambda / (values[p] * values[p]);
            assert_eq!(set.flags[p], expected, "flag mismatch at point {p}");
            if values[p] <= lambda {
                assert!(!set.flags[p], "point with u <= lambda flagged");
            }
        }
    }

    #[test]
    fn larger_lambda_flags_a_subset() {
        let mesh = generate_sphere(1.0, 2).unwrap();
        let (space, _, sol) = solve_on(&mesh, &[0], 50.0);
        let loose = extract(&sol.coeffs, &space, 0.05).unwrap();
        let tight = extract(&sol.coeffs, &space, 0.2).unwrap();
        assert!(tight.flagged_triangles.len() <= loose.flagged_triangles.len());
        for (p, &f) in tight.flags.iter().enumerate() {
            if f {
                assert!(loose.flags[p], "lambda=0.2 flag at {p} missing for lambda=0.05");
            }
        }
    }

    #[test]
    fn sphere_slack_region_is_the_antipode() {
        let mesh = generate_sphere(1.0, 4).unwrap();
        let (space, _, sol) = solve_on(&mesh, &[0], 50.0);
        let normalized = normalize_lipschitz(&sol, &space).unwrap();
        let set = extract(&normalized.coeffs, &space, 0.1).unwrap();
        assert!(!set.empty_warning);
        assert!(!set.flagged_triangles.is_empty());

        let filtered = filter(&set, 1e-3).unwrap();
        assert_eq!(filtered.components.len(), 1, "expected a single component");

        // The true ridge of the distance function is the antipode of the
        // source pole; every surviving triangle must sit next to it.
        let south = Point3::new(0.0, 0.0, -1.0);
        for &t in &filtered.flagged_triangles {
            let c = mesh.triangle_centroid(t).coords.normalize();
            let geodesic = c.dot(&south.coords).clamp(-1.0, 1.0).acos();
            assert!(geodesic <= 0.15, "flagged triangle {t} at geodesic distance {geodesic}");
        }
        let (set_to_ref, ref_to_set) = hausdorff_to_reference(&filtered, &mesh, &[south]).unwrap();
        assert!(set_to_ref <= 0.15, "sup distance to antipode {set_to_ref}");
        assert!(ref_to_set <= 0.15, "antipode to set distance {ref_to_set}");

        // The principal component is stable under the filter threshold; the
        // looser fraction may keep extra specks but the main cap is fixed.
        let alt = filter(&set, 1e-4).unwrap();
        assert_eq!(filtered.components[0], alt.components[0]);
    }

    #[test]
    fn components_partition_the_flagged_triangles() {
        let mesh = generate_sphere(1.0, 2).unwrap();
        let (space, _, sol) = solve_on(&mesh, &[0], 50.0);
        let set = extract(&sol.coeffs, &space, 0.05).unwrap();
        assert!(!set.flagged_triangles.is_empty());

        let mut union: Vec<usize> = set.components.iter().flat_map(|c| c.triangles.clone()).collect();
        union.sort_unstable();
        assert_eq!(union, set.flagged_triangles);

        let sum: f64 = set.components.iter().map(|c| c.area).sum();
        assert!((sum - set.total_area).abs() <= 1e-12 * set.total_area.max(1.0));
        for w in set.components.windows(2) {
            assert!(w[0].area >= w[1].area, "components not sorted by area");
        }
    }

    #[test]
    fn euler_characteristic_of_subcomplexes() {
        let mesh = generate_torus(2.0, 1.0, 16, 8).unwrap();
        // A single triangle is a disk.
        assert_eq!(subcomplex_euler(&mesh, &[0]), 1);
        // Two disjoint triangles.
        let far = 2 * (8 * 8) + 1;
        assert_eq!(subcomplex_euler(&mesh, &[0, far]), 2);
        // The full ring of triangles around the tube at fixed major angle
        // is an annulus.
        let ring: Vec<usize> = (0..16).collect();
        assert_eq!(subcomplex_euler(&mesh, &ring), 0);
        // The whole torus.
        let all: Vec<usize> = (0..mesh.n_triangles()).collect();
        assert_eq!(subcomplex_euler(&mesh, &all), 0);
    }

    #[test]
    fn filter_semantics() {
        let mesh = generate_sphere(1.0, 3).unwrap();
        // Synthetic set: a cap around the south pole plus one isolated
        // triangle near the equator.
        let mut flags = vec![false; mesh.n_triangles()];
        let mut isolated = None;
        for t in 0..mesh.n_triangles() {
            let c = mesh.triangle_centroid(t);
            if c.z < -0.8 {
                flags[t] = true;
            } else if isolated.is_none() && c.z.abs() < 0.05 {
                isolated = Some(t);
                flags[t] = true;
            }
        }
        let isolated = isolated.unwrap();
        let set = from_flags(&mesh, 1, flags, 0.1, false);
        assert!(set.components.len() >= 2);

        // fraction 0 keeps everything.
        let same = filter(&set, 0.0).unwrap();
        assert_eq!(same, set);

        // The singleton is far below a 1e-3 area fraction and is dropped.
        let filtered = filter(&set, 1e-3).unwrap();
        assert!(!filtered.flagged_triangles.contains(&isolated));
        assert!(filtered.components.len() < set.components.len());
        assert!(filtered.total_area < set.total_area);

        // Idempotence.
        let twice = filter(&filtered, 1e-3).unwrap();
        assert_eq!(twice, filtered);

        // Threshold semantics on the component areas themselves.
        let a_small = mesh.triangle_area(isolated);
        assert!(a_small < 1e-3 * mesh.total_area());

        assert!(matches!(filter(&set, 1.0), Err(CutLocusError::InvalidFraction(_))));
        assert!(matches!(filter(&set, -0.1), Err(CutLocusError::InvalidFraction(_))));
    }

    #[test]
    fn sources_are_excluded_above_mesh_scale() {
        let mesh = generate_sphere(1.0, 2).unwrap();
        let (space, _, sol) = solve_on(&mesh, &[0], 50.0);
        let lambda = 0.5;
        assert!(lambda > mesh.h_max());
        let set = extract(&sol.coeffs, &space, lambda).unwrap();
        assert!(!set.flagged_triangles.is_empty());
        for &t in &set.flagged_triangles {
            assert!(
                !mesh.triangles()[t].contains(&0),
                "triangle {t} touches the source but is flagged"
            );
        }
    }

    #[test]
    fn labeling_splits_antipodal_sources_evenly() {
        let mesh = generate_sphere(1.0, 3).unwrap();
        let n = mesh.n_vertices();
        let sources = SourceSet::new(vec![0, 11], n).unwrap();
        let oracle = DistanceOracle::graph(&mesh, sources.indices(), 0).unwrap();
        let labels = label_cells(&mesh, &sources, &oracle).unwrap();

        assert_eq!(labels.vertex_labels[0], 0);
        assert_eq!(labels.vertex_labels[11], 1);
        assert_eq!(labels.vertex_labels.len(), n);
        assert_eq!(labels.triangle_labels.len(), mesh.n_triangles());
        assert!(labels.vertex_labels.iter().all(|&l| l < 2));
        assert!(labels.triangle_labels.iter().all(|&l| l < 2));

        let north = labels.vertex_labels.iter().filter(|&&l| l == 0).count();
        let south = n - north;
        let imbalance = (north as f64 - south as f64).abs() / n as f64;
        assert!(imbalance <= 0.05, "hemisphere imbalance {imbalance}");

        // Majority labeling: a triangle with two vertices in one cell takes
        // that cell's label.
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let l: Vec<usize> = tri.iter().map(|&v| labels.vertex_labels[v]).collect();
            let expected = if l[0] == l[1] || l[0] == l[2] {
                l[0]
            } else if l[1] == l[2] {
                l[1]
            } else {
                *l.iter().min().unwrap()
            };
            assert_eq!(labels.triangle_labels[t], expected);
        }
    }

    #[test]
    fn labeling_preconditions() {
        let mesh = generate_sphere(1.0, 1).unwrap();
        let n = mesh.n_vertices();
        let single = SourceSet::new(vec![0], n).unwrap();
        let oracle = DistanceOracle::graph(&mesh, &[0], 0).unwrap();
        assert!(matches!(
            label_cells(&mesh, &single, &oracle),
            Err(CutLocusError::TooFewSources { needed: 2, got: 1 })
        ));

        let pair = SourceSet::new(vec![0, 11], n).unwrap();
        let wrong = DistanceOracle::graph(&mesh, &[0, 5], 0).unwrap();
        assert!(matches!(label_cells(&mesh, &pair, &wrong), Err(CutLocusError::SourcesMismatch)));

        let other = generate_sphere(1.0, 2).unwrap();
        let foreign = DistanceOracle::graph(&other, &[0, 11], 0).unwrap();
        assert!(matches!(
            label_cells(&mesh, &pair, &foreign),
            Err(CutLocusError::OracleMismatch { .. })
        ));
    }

    #[test]
    fn two_source_slack_region_hugs_the_equator() {
        let mesh = generate_sphere(1.0, 4).unwrap();
        assert!((mesh.vertices()[0] - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((mesh.vertices()[11] - Point3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        let (space, _, sol) = solve_on(&mesh, &[0, 11], 50.0);
        let set = extract(&sol.coeffs, &space, 0.1).unwrap();
        let filtered = filter(&set, 1e-3).unwrap();
        assert!(!filtered.flagged_triangles.is_empty());
        // The ridge between two antipodal sources is the equator; allow one
        // triangle diameter of slop.
        for &t in &filtered.flagged_triangles {
            let z = mesh.triangle_centroid(t).z;
            assert!(z.abs() <= mesh.h_max(), "flagged triangle at height {z}");
        }
    }

    #[test]
    fn hausdorff_examples() {
        let mesh = octahedron();
        let mut flags = vec![false; mesh.n_triangles()];
        flags[0] = true;
        flags[5] = true;
        let set = from_flags(&mesh, 1, flags, 0.1, false);

        // Reference equal to the set's own representatives.
        let reference = vec![mesh.triangle_centroid(0), mesh.triangle_centroid(5)];
        let (a, b) = hausdorff_to_reference(&set, &mesh, &reference).unwrap();
        assert_eq!((a, b), (0.0, 0.0));

        // Singleton at a known offset.
        let mut flags = vec![false; mesh.n_triangles()];
        flags[0] = true;
        let single = from_flags(&mesh, 1, flags, 0.1, false);
        let c0 = mesh.triangle_centroid(0);
        let target = Point3::new(c0.x, c0.y, c0.z + 2.0);
        let (a, b) = hausdorff_to_reference(&single, &mesh, &[target]).unwrap();
        assert!((a - 2.0).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);

        assert!(matches!(
            hausdorff_to_reference(&single, &mesh, &[]),
            Err(CutLocusError::EmptyReference)
        ));
    }

    #[test]
    fn torus_ridge_wraps_the_tube() {
        // Downscaled version of the torus experiment: the ridge of the
        // distance function from a point on the outer equator runs along the
        // far meridian, over the top and bottom of the tube and through the
        // inner equator. At this resolution the extracted band is too sparse
        // to assert its cycle topology, but its principal piece must span the
        // whole tube section: full height range and both extreme distances
        // from the axis.
        let mesh = generate_torus(2.0, 1.0, 48, 24).unwrap();
        let (space, _, sol) = solve_on(&mesh, &[0], 50.0);
        let set = extract(&sol.coeffs, &space, 0.1).unwrap();
        let filtered = filter(&set, 1e-3).unwrap();
        assert!(!filtered.components.is_empty());
        let principal = &filtered.components[0];
        let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &t in &principal.triangles {
            let c = mesh.triangle_centroid(t);
            let rho = c.x.hypot(c.y);
            zmin = zmin.min(c.z);
            zmax = zmax.max(c.z);
            rmin = rmin.min(rho);
            rmax = rmax.max(rho);
        }
        assert!(
            zmin < -0.9 && zmax > 0.9,
            "principal component spans z in [{zmin:.3}, {zmax:.3}]"
        );
        assert!(
            rmin < 1.2 && rmax > 2.8,
            "principal component spans axis distance in [{rmin:.3}, {rmax:.3}]"
        );
    }
}
