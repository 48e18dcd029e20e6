//! Numerical approximation of the cut locus of a point (or point set) on a
//! closed triangulated surface.
//!
//! The distance function from a source set is recovered as the solution of a
//! gradient-constrained convex variational problem discretized with Lagrange
//! finite elements, and the cut locus is extracted as the region where the
//! gradient of the computed distance drops below a curvature-dependent
//! threshold. The pipeline is:
//!
//! 1. [`mesh`]: closed oriented triangle meshes, generators, file i/o.
//! 2. [`fem`]: P1/P2 spaces on affine triangles, stiffness and load assembly,
//!    gradient evaluation at constraint points.
//! 3. [`solver`]: first-order splitting method for the constrained problem.
//! 4. [`cutlocus`]: thresholded set extraction, components, Voronoi labels.
//! 5. [`oracle`]: independent reference values (analytic and graph-based
//!    distances) used for validation.
//! 6. [`export`]: VTK / PLY / CSV output of fields and labeled sets.

pub mod cutlocus;
pub mod export;
pub mod fem;
pub mod mesh;
pub mod oracle;
pub mod solver;
