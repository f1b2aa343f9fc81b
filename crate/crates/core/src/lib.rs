pub mod calderon;
pub mod convergence;
pub mod csalg;
pub mod dirac;
pub mod error;
pub mod hilbmod;
pub mod io;
pub mod linalg;
pub mod scenario;
pub mod sobolev;

pub use error::{Error, Result};
