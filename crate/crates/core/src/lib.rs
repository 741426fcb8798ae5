//! Minority oversampling for multi-modal (continuous + categorical) tabular
//! data by interpolating in the latent space of an autoencoder.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense layers, embeddings, losses with explicit gradients, Adam.
//! - [`tabular`]: schemas, CSV ingestion, standardization, stratified splits.
//! - [`interp`]: exact k-NN search and the feature-space oversamplers
//!   (ROS, SMOTE, SMOTE-NC, Poly star).
//! - [`autoencoder`]: AE / VAE / RAE with categorical embeddings.
//! - [`oversampler`]: the latent interpolation pipeline behind one interface
//!   together with the feature-space methods.
//! - [`bench`]: sphere-manifold benchmark generation, cover / error metrics
//!   and Pareto fronts.
//! - [`eval`]: ROC-AUC, a k-NN scorer, and the experiment runners used by the
//!   `taei` binary.

pub mod autoencoder;
pub mod bench;
mod error;
pub mod eval;
pub mod interp;
pub mod nn;
pub mod oversampler;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
