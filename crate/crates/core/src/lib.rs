//! Bayesian meta-analysis of ordinal diagnostic test accuracy data with
//! missing thresholds.
//!
//! The crate is `no_std` (it needs `alloc`) and carries all numerical work:
//! the cumulative-count likelihood, the induced-Dirichlet cutpoint density,
//! the hierarchical model families, network meta-analysis, a NUTS sampler
//! with warmup adaptation, posterior summaries, K-fold model comparison and
//! the simulation harness. File formats, threading and the command line live
//! in the `ordmeta` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ad;
pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod mcmc;
pub mod model;
pub mod nma;
pub mod posterior;
pub mod sim;
pub mod special;
pub mod transform;

pub use error::{Error, Result};
