pub mod charts;
pub mod config;
pub mod conformal;
pub mod construction;
pub mod curvature;
pub mod cyclic;
pub mod error;
pub mod export;
pub mod hypersurface;
pub mod jet;
pub mod pipeline;
pub mod quadrature;
pub mod report;
pub mod spaceform;
pub mod tolerances;

pub use error::{Error, Result};
pub use spaceform::Epsilon;
