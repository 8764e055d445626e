//! Random-sparsification compressors.
//!
//! A sparsifier keeps a mask of `m` out of `d` coordinates and rescales them
//! by `d / m`. Rand-m draws masks independently; BanLast and KAWASAKI draw
//! them from a law that depends on the last `K` masks, which turns the mask
//! sequence into a Markov chain (see [`crate::chain`]).

mod baselines;
mod mask;
mod probability;
mod sampling;
mod state;

pub use baselines::{
    natural_compress, perm_k_masks, DENSE_BITS_PER_COORD, NATURAL_BITS_PER_COORD,
};
pub use mask::{CoordinateMask, History};
pub use probability::{
    banlast_probabilities, kawasaki_probabilities, kawasaki_weights, normalize,
    project_to_simplex, softmax, Activation, ProbabilityVector, SIMPLEX_TOLERANCE,
};
pub use sampling::{sample_mask, subset_probability};
pub use state::{sparsify, Compressed, CompressorConfig, CompressorKind, CompressorState};
