pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod gaussmix;
pub mod generate;
pub mod lattice;
pub mod mc;
pub mod model;
pub mod net;
pub mod process;
pub mod thermo;
pub mod train;

pub use error::{Error, Result};
pub use gaussmix::GaussianMixture;
pub use mc::{MCEstimate, Points, SimRng};
pub use process::{DiffusionSpec, KernelParams, NoisedSample, ProcessKind};
