use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AutoencoderModel, Variant};
use crate::nn::{AdamConfig, AdamState, Parameters};
use crate::tabular::MixedDataset;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping. Zero stops
    /// after the first epoch.
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 500,
            batch_size: 128,
            patience: 10,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Per-epoch losses. `train[e]` is the mean minibatch objective of epoch
/// `e`; `val[e]` the validation reconstruction loss after it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    /// Epoch (0-based) of the returned snapshot.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val.len()
    }

    pub fn best_val(&self) -> f64 {
        self.val[self.best_epoch]
    }

    /// Running minimum of the validation loss.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.val
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

fn divergence(epoch: usize, err: Error) -> Error {
    match err {
        Error::Numeric { .. } => Error::Divergence { epoch, loss: f64::NAN },
        other => other,
    }
}

/// Trains with Adam on shuffled minibatches and early stopping on `val`.
///
/// Returns the parameters of the epoch with the lowest validation loss.
pub fn train(
    model: &AutoencoderModel,
    train_set: &MixedDataset,
    val_set: &MixedDataset,
    config: &TrainConfig,
) -> Result<(AutoencoderModel, TrainHistory)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::TooFewRows("autoencoder training needs nonempty train and validation folds".into()));
    }
    if config.max_epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidArgument("max_epochs and batch_size must be positive".into()));
    }
    if train_set.schema().hash() != model.schema_hash || val_set.schema().hash() != model.schema_hash {
        return Err(Error::Schema("data schema does not match the model".into()));
    }
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut current = model.clone();
    let mut state = AdamState::new();
    let mut order_rng = rng::stream(config.seed, 0);
    let mut noise_rng = rng::stream(config.seed, 1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = TrainHistory::default();
    let mut best = current.clone();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let cont = train_set.continuous().select(Axis(0), chunk);
            let codes = train_set.categorical().select(Axis(0), chunk);
            let noise = (current.variant == Variant::Vae).then(|| {
                Array2::from_shape_simple_fn((chunk.len(), current.latent_dim), || noise_rng.sample(StandardNormal))
            });
            let (parts, grads) = current
                .loss_and_gradients(cont.view(), codes.view(), noise.as_ref().map(|n| n.view()))
                .map_err(|e| divergence(epoch, e))?;
            let loss = parts.total();
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            state.step(&adam, current.parameters_mut(), &grads)?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train_set.len() as f64;
        let val_loss = current
            .validation_loss(val_set.continuous(), val_set.categorical())
            .map_err(|e| divergence(epoch, e))?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_loss });
        }
        history.train.push(train_loss);
        history.val.push(val_loss);
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");

        if val_loss < best_val {
            best_val = val_loss;
            best = current.clone();
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{build_model, ArchConfig};
    use crate::tabular::{ColumnSpec, TabularSchema};
    use std::sync::Arc;

    fn identity_data(n: usize, seed: u64) -> MixedDataset {
        let schema = TabularSchema::new(
            vec![ColumnSpec::continuous("x"), ColumnSpec::categorical("y", ["0", "1"])],
            "y",
            "1",
        )
        .unwrap();
        let mut r = rng::seeded(seed);
        let cont = Array2::from_shape_simple_fn((n, 1), || r.sample(StandardNormal));
        let labels = (0..n).map(|i| i % 5 == 0).collect();
        MixedDataset::new(Arc::new(schema), cont, Array2::zeros((n, 0)), labels).unwrap()
    }

    fn linear() -> ArchConfig {
        ArchConfig {
            hidden_widths: vec![],
            latent_dim: Some(1),
            ..ArchConfig::default()
        }
    }

    #[test]
    fn linear_ae_learns_identity() {
        let (tr, va) = (identity_data(1024, 1), identity_data(256, 2));
        let m = build_model(tr.schema(), Variant::Ae, &linear(), 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 200,
            patience: 200,
            ..TrainConfig::default()
        };
        let (fitted, history) = train(&m, &tr, &va, &cfg).unwrap();
        assert!(history.epochs() <= 200);
        assert!(history.best_val() < 1e-3, "val MSE {}", history.best_val());
        let z = fitted.encode(tr.continuous(), tr.categorical()).unwrap();
        let back = fitted.decode(z.view()).unwrap();
        let mse = (&back.continuous - &tr.continuous()).mapv(|v| v * v).mean().unwrap();
        assert!(mse < 1e-2);
    }

    #[test]
    fn zero_patience_runs_one_epoch() {
        let (tr, va) = (identity_data(64, 1), identity_data(16, 2));
        let m = build_model(tr.schema(), Variant::Ae, &linear(), 0).unwrap();
        let cfg = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        let (_, history) = train(&m, &tr, &va, &cfg).unwrap();
        assert_eq!(history.epochs(), 1);
    }

    #[test]
    fn snapshot_matches_history_minimum() {
        let (tr, va) = (identity_data(200, 3), identity_data(50, 4));
        for variant in [Variant::Ae, Variant::Vae, Variant::Rae] {
            let m = build_model(tr.schema(), variant, &ArchConfig::default(), 5).unwrap();
            let cfg = TrainConfig {
                max_epochs: 40,
                patience: 3,
                lr: 1e-2,
                seed: 11,
                ..TrainConfig::default()
            };
            let (fitted, history) = train(&m, &tr, &va, &cfg).unwrap();
            let min = history.val.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(history.best_val(), min);
            assert_eq!(fitted.validation_loss(va.continuous(), va.categorical()).unwrap(), min);
            let running = history.best_so_far();
            assert!(running.windows(2).all(|w| w[1] <= w[0]));

            let (again, h2) = train(&m, &tr, &va, &cfg).unwrap();
            assert_eq!(again, fitted);
            assert_eq!(h2, history);
        }
    }

    #[test]
    fn overflowing_parameters_diverge() {
        let (tr, va) = (identity_data(64, 1), identity_data(16, 2));
        let mut m = build_model(tr.schema(), Variant::Ae, &linear(), 0).unwrap();
        for p in m.parameters_mut() {
            p.fill(1e200);
        }
        let err = train(&m, &tr, &va, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 0, .. }), "{err:?}");
    }
}
