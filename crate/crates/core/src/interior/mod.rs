//! Volume-level verification: the Helmholtz Dirichlet extension, Reilly's
//! formula as an identity, the first Dirichlet eigenvalue bound, and the
//! boundary-maximum probe for the subharmonic function phi.

pub mod fem;
pub mod mesh;
pub mod phi;
pub mod reilly;

pub use fem::{dirichlet_lambda1, solve_helmholtz_dirichlet, FemField};
pub use mesh::{build_interior_mesh, template_for, template_text, InteriorDomain, VolumeMesh};
pub use phi::{phi_boundary_max_probe, PhiReport, PhiVariant};
pub use reilly::{reilly_residual, ReillyReport};
