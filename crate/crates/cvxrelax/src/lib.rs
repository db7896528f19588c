//! Convexity-constrained variational problems through relaxed convexity
//! constraints.
//!
//! A finite-element function on a simplicial mesh is constrained to be convex
//! along discrete segments joining an `ε`-sampling of the domain boundary. Each
//! segment contributes one block of evaluation rows whose values must form a
//! discrete convex sequence; support functions on the sphere get the analogous
//! great-circle blocks. Problems are solved by a proximal splitting scheme
//! (SDMM) in which every block's prox is an exact cone projection.
//!
//! ```
//! use cvxrelax::prelude::*;
//!
//! let mesh = build_grid_mesh(&Domain::unit_square(), 8).unwrap();
//! let u = sample_boundary(&Domain::unit_square(), 0.25).unwrap();
//! let blocks = build_convexity_blocks(&mesh, &u, 0.25).unwrap();
//! let f = interpolate(|p| (p[0] - 0.5).powi(2) + p[1] * p[1], &mesh).unwrap();
//! let report = verify_feasibility(&f.values, &blocks, 1e-12);
//! assert!(report.is_feasible());
//! ```

pub mod bodies;
pub mod cones;
pub mod constraints;
pub mod envelope;
pub mod error;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod row;
pub mod sdmm;
pub mod sphere;

mod active_set;

pub use error::{Error, Result};

/// The commonly used types and builders.
pub mod prelude {
    pub use crate::bodies::{reconstruct_body, support_of_polytope, surface_area, volume, width_stats, Polytope};
    pub use crate::cones::{project_uniform_convex, project_weighted_cyclic, CyclicWorkspace, Hinge1DWorkspace};
    pub use crate::constraints::{
        build_circle_block, build_convexity_blocks, build_gradient_box_blocks, build_lower_bound_block,
        build_spherical_blocks, build_width_block, verify_feasibility, Cone, ConstraintBlock,
    };
    pub use crate::envelope::{convex_envelope, lipschitz_constant, qp_oracle, radial_pa_oracle, DenseQp};
    pub use crate::error::{Error, Result};
    pub use crate::functionals::{
        assemble_geometric_pa, assemble_linear_pa, assemble_quadrature, lumped_l2_term, prox, ProxTerm,
    };
    pub use crate::mesh::{
        build_disk_mesh, build_grid_mesh, build_grid_mesh_with, interpolate, sample_boundary, Diagonal, Domain, NodalField,
        SimplicialMesh,
    };
    pub use crate::row::EvalRow;
    pub use crate::sdmm::{solve, Block, SdmmProblem, SolverConfig, SolverReport};
    pub use crate::sphere::{build_circle_mesh, build_sphere_mesh, sample_great_circles, SphereMesh};
}
