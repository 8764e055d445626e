//! LIBSVM data, sharding and the regularised logistic objective.

mod dataset;
mod libsvm;
mod logistic;
mod synthetic;

pub use dataset::{partition, Dataset};
pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_str, serialize_libsvm};
pub use logistic::{
    estimate_global_smoothness, estimate_similarity, estimate_smoothness, gaussian_probes,
    loss_and_gradient, power_iteration, similarity_pairs, strong_convexity_constant,
    ProblemConstants, ShardedProblem, POWER_ITERATION_TOLERANCE,
};
pub use synthetic::shifted_shards;
