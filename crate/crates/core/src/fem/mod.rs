//! Lagrange finite elements of order 1 and 2 on affine surface triangles.
//!
//! Degrees of freedom sit at vertices (order 1) plus true edge midpoints
//! (order 2). Gradients live in each triangle's [`TangentFrame`] as
//! in-plane 2-vectors. The gradient-norm constraint is imposed at one
//! interior point per triangle for order 1 (the gradient is constant
//! there) and at `g` interior Gauss points for order 2.

mod quadrature;
mod sparse;

pub use quadrature::{triangle_rule, QuadratureRule};
pub use sparse::CsrMatrix;

use nalgebra::{DMatrix, Point3};
use thiserror::Error;

use crate::mesh::{tangent_frames, SurfaceMesh, TangentFrame};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("unsupported element order {0} (supported: 1, 2)")]
    UnsupportedOrder(u32),
    #[error("unsupported constraint-point count {0} for order 2 (supported: 3, 6, 7)")]
    UnsupportedConstraintCount(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Shape function values at a barycentric point; entries past `n_local`
/// are zero.
fn shape_values(order: u32, l: [f64; 3]) -> [f64; 6] {
    match order {
        1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        2 => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
        other => panic!("unsupported order {other}"),
    }
}

/// Shape function gradients at a barycentric point, given the in-plane
/// gradients of the barycentric coordinates.
fn shape_gradients(order: u32, gl: [[f64; 2]; 3], l: [f64; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    match order {
        1 => {
            g[..3].copy_from_slice(&gl);
        }
        2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                g[i] = [s * gl[i][0], s * gl[i][1]];
            }
            let pairs = [(0, 1), (1, 2), (2, 0)];
            for (k, (a, b)) in pairs.into_iter().enumerate() {
                g[3 + k] = [
                    4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]),
                    4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1]),
                ];
            }
        }
        other => panic!("unsupported order {other}"),
    }
    g
}

/// One point where the gradient-norm constraint is imposed.
#[derive(Debug, Clone)]
pub struct ConstraintPoint {
    pub triangle: usize,
    pub bary: [f64; 3],
    /// Quadrature weight within the triangle; a triangle's weights sum to 1.
    pub weight: f64,
    /// Ambient position on the affine triangle.
    pub position: Point3<f64>,
    /// Global dofs of the triangle (first `n_local` entries meaningful).
    pub dofs: [usize; 6],
    /// In-plane gradient map: entry j is d(shape_j) in the tangent frame.
    pub grad: [[f64; 2]; 6],
}

/// A Lagrange space over a fixed mesh, with per-triangle gradient maps
/// precomputed at the constraint points.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: SurfaceMesh,
    order: u32,
    n_dofs: usize,
    n_local: usize,
    constraints_per_triangle: usize,
    frames: Vec<TangentFrame>,
    element_dofs: Vec<[usize; 6]>,
    /// Barycentric gradients per triangle (constant on affine triangles).
    bary_gradients: Vec<[[f64; 2]; 3]>,
    /// Triangle areas from the in-plane Jacobian determinant.
    areas: Vec<f64>,
    constraint_points: Vec<ConstraintPoint>,
    quadrature: QuadratureRule,
}

/// Build the order-1 or order-2 space. `g` (constraint points per
/// triangle) is forced to 1 for order 1 and must be 3, 6, or 7 for order 2.
pub fn build_space(mesh: &SurfaceMesh, order: u32, g: usize) -> Result<FunctionSpace, FemError> {
    if order != 1 && order != 2 {
        return Err(FemError::UnsupportedOrder(order));
    }
    let constraint_rule = if order == 1 {
        triangle_rule(1)
    } else {
        match g {
            3 => triangle_rule(2),
            6 => triangle_rule(4),
            7 => triangle_rule(5),
            other => return Err(FemError::UnsupportedConstraintCount(other)),
        }
    };

    let n_local = if order == 1 { 3 } else { 6 };
    let n_dofs = if order == 1 {
        mesh.n_vertices()
    } else {
        mesh.n_vertices() + mesh.n_edges()
    };
    let frames = tangent_frames(mesh);

    let nt = mesh.n_triangles();
    let mut element_dofs = vec![[usize::MAX; 6]; nt];
    let mut bary_gradients = Vec::with_capacity(nt);
    let mut areas = Vec::with_capacity(nt);
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        element_dofs[t][..3].copy_from_slice(&tri);
        if order == 2 {
            let eids = mesh.triangle_edge_ids(t);
            for k in 0..3 {
                element_dofs[t][3 + k] = mesh.n_vertices() + eids[k];
            }
        }

        let frame = &frames[t];
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| frame.project(&mesh.vertices()[v])).collect();
        let (a, b) = (p[1][0] - p[0][0], p[2][0] - p[0][0]);
        let (c, d) = (p[1][1] - p[0][1], p[2][1] - p[0][1]);
        let det = a * d - b * c;
        let gl1 = [d / det, -b / det];
        let gl2 = [-c / det, a / det];
        let gl0 = [-gl1[0] - gl2[0], -gl1[1] - gl2[1]];
        bary_gradients.push([gl0, gl1, gl2]);
        areas.push(0.5 * det);
    }

    let mut constraint_points = Vec::with_capacity(nt * constraint_rule.len());
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        for (q, &bary) in constraint_rule.points.iter().enumerate() {
            let position = Point3::from(
                mesh.vertices()[tri[0]].coords * bary[0]
                    + mesh.vertices()[tri[1]].coords * bary[1]
                    + mesh.vertices()[tri[2]].coords * bary[2],
            );
            constraint_points.push(ConstraintPoint {
                triangle: t,
                bary,
                weight: constraint_rule.weights[q],
                position,
                dofs: element_dofs[t],
                grad: shape_gradients(order, bary_gradients[t], bary),
            });
        }
    }

    Ok(FunctionSpace {
        mesh: mesh.clone(),
        order,
        n_dofs,
        n_local,
        constraints_per_triangle: constraint_rule.len(),
        frames,
        element_dofs,
        bary_gradients,
        areas,
        constraint_points,
        quadrature: triangle_rule(4),
    })
}

impl FunctionSpace {
    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn constraints_per_triangle(&self) -> usize {
        self.constraints_per_triangle
    }

    pub fn frames(&self) -> &[TangentFrame] {
        &self.frames
    }

    pub fn constraint_points(&self) -> &[ConstraintPoint] {
        &self.constraint_points
    }

    /// Global dofs of triangle `t`.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t][..self.n_local]
    }

    /// Whether dof `i` sits at a mesh vertex (as opposed to an edge node).
    pub fn is_vertex_dof(&self, i: usize) -> bool {
        i < self.mesh.n_vertices()
    }

    /// Node position of dof `i`: vertex, or edge midpoint for order 2.
    pub fn dof_point(&self, i: usize) -> Point3<f64> {
        if i < self.mesh.n_vertices() {
            self.mesh.vertices()[i]
        } else {
            let [a, b] = self.mesh.edges()[i - self.mesh.n_vertices()];
            Point3::from((self.mesh.vertices()[a].coords + self.mesh.vertices()[b].coords) * 0.5)
        }
    }

    /// Element stiffness matrix of triangle `t` (n_local x n_local).
    pub fn element_stiffness(&self, t: usize) -> DMatrix<f64> {
        let n = self.n_local;
        let mut k = DMatrix::zeros(n, n);
        for (q, &bary) in self.quadrature.points.iter().enumerate() {
            let w = self.quadrature.weights[q] * self.areas[t];
            let g = shape_gradients(self.order, self.bary_gradients[t], bary);
            for i in 0..n {
                for j in 0..n {
                    k[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        k
    }

    /// Value of the FE function at a barycentric point of triangle `t`.
    pub fn value_at(&self, t: usize, bary: [f64; 3], coeffs: &[f64]) -> f64 {
        let shapes = shape_values(self.order, bary);
        self.element_dofs(t)
            .iter()
            .enumerate()
            .map(|(j, &dof)| coeffs[dof] * shapes[j])
            .sum()
    }
}

/// Stiffness matrix, load vector and total area of a space.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub area: f64,
}

impl QuadraticForm {
    /// Coordinate-format text of the stiffness matrix (row col value lines
    /// after a `rows cols nnz` header).
    pub fn to_coordinate_text(&self) -> String {
        self.stiffness.to_coordinate_text()
    }
}

/// Assemble the stiffness matrix K[i][j] = integral of grad(phi_i) .
/// grad(phi_j) and the consistent load l[i] = integral of phi_i.
///
/// The fixed degree-4 quadrature is exact for both integrands at orders
/// 1 and 2 (degrees 2r-2 and r).
pub fn assemble(space: &FunctionSpace) -> QuadraticForm {
    let n = space.n_dofs;
    let nloc = space.n_local;
    let mut triplets = Vec::with_capacity(space.mesh.n_triangles() * nloc * nloc);
    let mut load = vec![0.0; n];
    let mut area = 0.0;

    for t in 0..space.mesh.n_triangles() {
        let dofs = space.element_dofs(t);
        let k = space.element_stiffness(t);
        for i in 0..nloc {
            for j in 0..nloc {
                triplets.push((dofs[i], dofs[j], k[(i, j)]));
            }
        }
        for (q, &bary) in space.quadrature.points.iter().enumerate() {
            let w = space.quadrature.weights[q] * space.areas[t];
            let shapes = shape_values(space.order, bary);
            for i in 0..nloc {
                load[dofs[i]] += w * shapes[i];
            }
        }
        area += space.areas[t];
    }

    QuadraticForm { stiffness: CsrMatrix::from_triplets(n, n, triplets), load, area }
}

/// Gradient of the FE function at every constraint point, as in-plane
/// 2-vectors in the triangle frames.
pub fn gradient_at_constraints(
    space: &FunctionSpace,
    coeffs: &[f64],
) -> Result<Vec<[f64; 2]>, FemError> {
    if coeffs.len() != space.n_dofs {
        return Err(FemError::DimensionMismatch { expected: space.n_dofs, got: coeffs.len() });
    }
    let nloc = space.n_local;
    Ok(space
        .constraint_points
        .iter()
        .map(|cp| {
            let mut g = [0.0; 2];
            for j in 0..nloc {
                let c = coeffs[cp.dofs[j]];
                g[0] += c * cp.grad[j][0];
                g[1] += c * cp.grad[j][1];
            }
            g
        })
        .collect())
}

/// Value of the FE function at every constraint point.
pub fn values_at_constraints(
    space: &FunctionSpace,
    coeffs: &[f64],
) -> Result<Vec<f64>, FemError> {
    if coeffs.len() != space.n_dofs {
        return Err(FemError::DimensionMismatch { expected: space.n_dofs, got: coeffs.len() });
    }
    Ok(space
        .constraint_points
        .iter()
        .map(|cp| space.value_at(cp.triangle, cp.bary, coeffs))
        .collect())
}

/// Lagrange interpolation: evaluate `f` at every dof node.
pub fn interpolate(space: &FunctionSpace, f: impl Fn(&Point3<f64>) -> f64) -> Vec<f64> {
    (0..space.n_dofs).map(|i| f(&space.dof_point(i))).collect()
}
