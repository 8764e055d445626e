//! Markovian random-sparsification compressors and the tooling around them.
//!
//! The crate is organised bottom-up:
//!
//! * [`compressors`]: masks, probability laws (BanLast, KAWASAKI), simplex
//!   activations, sampling and the Rand-m / PermK / Natural baselines.
//! * [`chain`]: exact finite-state analysis of the selection chains
//!   (stationarity, mixing time, ergodicity bounds) and hitting-time formulas.
//! * [`data`]: LIBSVM parsing, sharding and the L2-regularised logistic
//!   objective with its smoothness / similarity constants.
//! * [`optim`]: MQSGD, AMQSGD and DIANA loops with pluggable compressors.
//! * [`harness`]: configuration, experiment runs, sweeps and CSV output used
//!   by the `markov-sparsify` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod compressors;
pub mod data;
pub mod error;
pub mod harness;
pub mod objective;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
