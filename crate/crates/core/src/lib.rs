pub mod error;
pub mod estimates;
pub mod fit;
pub mod flow;
pub mod functionals;
pub mod measure;
pub mod sde;
pub mod spectral;

pub use error::{Error, Result};
