//! Damage localisation from transmissibility novelty features.
//!
//! The crate covers the whole numerical pipeline: a synthetic chain structure
//! that produces transmissibility records, Mahalanobis novelty indices over
//! spectral windows, genetic feature selection, a two-layer perceptron with
//! frozen-layer transfer, and the experiment driver that compares a single
//! nine-class classifier with a split pair of sub-classifiers.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, threading and
//! the command-line driver live in the `shm-locate` companion crate.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod error;
pub mod exec;
pub mod features;
pub mod matrix;
pub mod mlp;
pub mod novelty;
pub mod pipeline;
pub mod rng;
pub mod signals;
pub mod synthdata;

pub use error::{Error, Result, Stage};
pub use exec::{Executor, Sequential};
pub use matrix::Matrix;
