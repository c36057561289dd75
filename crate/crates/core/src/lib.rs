//! Numerical verification laboratory for boundary geometry of space-form
//! domains: boundary Poincare-type functionals, total-mean-curvature bounds
//! for immersions into the three model ambients, Reilly's identity and
//! Dirichlet eigenvalue bounds, all checked against closed-form oracles and
//! mesh-refinement convergence.

pub mod error;
pub mod interior;
pub mod linalg;
pub mod poincare;
pub mod quadrature;
pub mod spaceform;
pub mod tmc;
pub mod surface;

pub use error::{Error, Result};
pub use spaceform::{AmbientVector, SpaceForm, SpaceFormKind, SupportFunction};
pub use surface::{BoundaryFunction, BoundarySurface};
