//! Fourier-feature MLP for `ε_θ(x, s)` with hand-written backpropagation.

mod adam;
mod checkpoint;
mod fourier;
mod mlp;
mod real;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{AdamState, Checkpoint, RngState};
pub use fourier::FourierEmbedding;
pub use mlp::{n_params, Activation, Cache, NetConfig, Network};
pub use real::{matmul, matmul_nt, matmul_tn, Real};
