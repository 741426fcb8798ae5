//! Autoencoders over mixed continuous and categorical rows.
//!
//! Categorical columns pass through learned embeddings of width
//! `min(8, ceil(|D| / 2))`. The reconstruction objective is the MSE over the
//! continuous block plus `loss_alpha` times the softmax cross-entropy of each
//! categorical head. VAE adds a unit-weight KL term and encodes to the
//! posterior mean; RAE adds `rae_lambda` times the mean squared latent norm
//! plus the squared decoder weights.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{
    build_model, default_latent_dim, embedding_dim, reconstruction_loss, ArchConfig, AutoencoderModel, DecodedRows,
    LatentMatrix, LossBreakdown, Variant,
};
pub use train::{train, TrainConfig, TrainHistory};
