//! Microgrid economic dispatch: an exact per-step oracle, synthetic labelled
//! datasets, and physics-informed neural surrogates trained from scratch.
//!
//! Data flows `config` → `datagen` (weather, load and oracle labels) →
//! `trainer` (models from `nn`, objectives from `loss`) → `bench`.

pub mod bench;
pub mod config;
pub mod datagen;
pub mod error;
pub mod grid;
pub mod loss;
pub mod nn;
pub mod oracle;
pub mod trainer;

pub use error::{Error, Result};
