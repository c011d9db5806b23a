//! Midpoint variational integrators for Lagrangian mechanics, with surrogate Lagrangians
//! that raise their order of accuracy, and the reference integrators they are compared
//! against.

pub mod del;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod ref_integrators;
pub mod scalar;
pub mod surrogate;
pub mod systems;

pub use error::{Error, Result};

/// The guide's chapters, compiled so that every listing in `book/` runs as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/stepping.md")]
    mod stepping {}
    #[doc = include_str!("../../../book/src/surrogates.md")]
    mod surrogates {}
    #[doc = include_str!("../../../book/src/forces_constraints.md")]
    mod forces_constraints {}
    #[doc = include_str!("../../../book/src/reference_integrators.md")]
    mod reference_integrators {}
}
