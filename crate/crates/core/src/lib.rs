pub mod chains;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod ising;
pub mod params;
pub mod seed;
pub mod spectral;
pub mod structure;
pub mod walks;

pub use error::{Error, Result};
pub use graph::Graph;
pub use params::ModelParams;
