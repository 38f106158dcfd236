//! Bayesian models for crowdsourced binary ratings.
//!
//! The models generalize Dawid and Skene's sensitivity/specificity rater
//! model with item-level difficulty, discrimination and guessing. The
//! latent true category of every item is summed out, so the posterior
//! over the continuous parameters can be sampled with a gradient-based
//! sampler ([`sampler`]) and checked with posterior predictive checks and
//! PSIS-LOO ([`evaluate`]).
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command
//! line live in the `crowdirt` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod datagen;
mod error;
pub mod evaluate;
pub mod linalg;
pub mod math;
pub mod model;
pub mod params;
pub mod sampler;
pub mod spec;
pub mod trainlab;

pub use data::RatingDataset;
pub use error::{Error, Result};
pub use params::{ParamBlock, ParamLayout};
pub use spec::ModelSpec;
