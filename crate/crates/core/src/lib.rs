pub mod acc;
pub mod error;
pub mod geometry;
pub mod lp;
pub mod rmpc;
pub mod safesets;
pub mod runtime;
pub mod skip_drl;
pub mod skip_model;
pub mod system;

pub use error::{Error, Result};
pub use geometry::Polytope;
