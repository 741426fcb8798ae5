//! Dense-network numerics with hand-written reverse-mode gradients.
//!
//! Everything is `f64`. Losses are averaged over the batch dimension so the
//! learning rate does not depend on batch size.

mod gradcheck;
mod layer;
mod loss;
mod optim;

use ndarray::{Array1, Array2};

pub use gradcheck::finite_diff_check;
pub use layer::{Activation, DenseLayer, EmbeddedMlp, EmbeddingTable, Mlp, MlpCache, MlpGradients};
pub use loss::{gaussian_kl, mse_loss, softmax_ce_loss, softmax_ce_loss_masked, LossSpec, LossTerm};
pub use optim::{AdamConfig, AdamState};

/// Flat view over the trainable arrays of a model.
///
/// Both methods must yield the arrays in the same order, which is also the
/// order of the [`GradientSet`] the model produces.
pub trait Parameters {
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
}

/// Gradients of a model, one flat array per parameter array.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    tensors: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn new(tensors: Vec<Vec<f64>>) -> Self {
        GradientSet { tensors }
    }

    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    pub fn push(&mut self, values: Vec<f64>) {
        self.tensors.push(values);
    }

    pub fn push_array2(&mut self, a: Array2<f64>) {
        self.tensors.push(a.as_standard_layout().iter().copied().collect());
    }

    pub fn push_array1(&mut self, a: Array1<f64>) {
        self.tensors.push(a.to_vec());
    }

    pub fn extend(&mut self, other: GradientSet) {
        self.tensors.extend(other.tensors);
    }

    pub fn from_mlp(grads: MlpGradients) -> Self {
        let mut set = GradientSet::default();
        for (w, b) in grads {
            set.push_array2(w);
            set.push_array1(b);
        }
        set
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.tensors.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}
