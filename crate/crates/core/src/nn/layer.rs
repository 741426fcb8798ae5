use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{GradientSet, LossSpec, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A fully connected layer `y = act(x W + b)`.
///
/// `weights` has shape `[fan_in, fan_out]` so a batch of row vectors is
/// transformed by a single matrix product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "weights are {}x{} but bias has {} entries",
                weights.nrows(),
                weights.ncols(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numeric("dense layer parameters"));
        }
        Ok(DenseLayer {
            weights: weights.as_standard_layout().into_owned(),
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng));
        DenseLayer {
            weights,
            bias: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn bias(&self) -> ArrayView1<'_, f64> {
        self.bias.view()
    }

    #[cfg(test)]
    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.fan_in() {
            return Err(Error::Shape(format!(
                "layer expects {} input columns, got {}",
                self.fan_in(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (_, out) = self.forward_with_pre(x)?;
        Ok(out)
    }

    /// Returns `(x W + b, act(x W + b))`.
    pub fn forward_with_pre(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_input(&x)?;
        let mut pre = x.dot(&self.weights);
        pre += &self.bias;
        let act = self.activation;
        let out = pre.mapv(|v| act.apply(v));
        Ok((pre, out))
    }

    /// Backpropagates `grad_out` (gradient w.r.t. this layer's output).
    ///
    /// Returns `(grad_input, grad_weights, grad_bias)`.
    pub fn backward(
        &self,
        input: ArrayView2<'_, f64>,
        pre: ArrayView2<'_, f64>,
        grad_out: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let act = self.activation;
        let mut delta = grad_out.to_owned();
        if act != Activation::Identity {
            delta.zip_mut_with(&pre, |d, &p| *d *= act.derivative(p));
        }
        let grad_w = input.t().dot(&delta);
        let grad_b = delta.sum_axis(Axis(0));
        let grad_in = delta.dot(&self.weights.t());
        (grad_in, grad_w, grad_b)
    }
}

/// Embedding vectors for one categorical column, one row per code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    vectors: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::Shape(format!(
                "embedding table must be non-empty, got {}x{}",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("embedding table"));
        }
        Ok(EmbeddingTable {
            vectors: vectors.as_standard_layout().into_owned(),
        })
    }

    /// Uniform entries in `±0.05`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-0.05, 0.05).expect("finite bounds");
        EmbeddingTable {
            vectors: Array2::from_shape_simple_fn((rows, dim), || dist.sample(rng)),
        }
    }

    pub fn rows(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn lookup(&self, codes: impl IntoIterator<Item = usize>) -> Result<Array2<f64>> {
        let codes: Vec<usize> = codes.into_iter().collect();
        let mut out = Array2::zeros((codes.len(), self.dim()));
        for (i, &c) in codes.iter().enumerate() {
            if c >= self.rows() {
                return Err(Error::InvalidArgument(format!(
                    "code {c} outside embedding table of {} rows",
                    self.rows()
                )));
            }
            out.row_mut(i).assign(&self.vectors.row(c));
        }
        Ok(out)
    }

    /// Adds row `i` of `grad` into row `codes[i]` of `acc`.
    pub fn scatter_grad(
        codes: impl IntoIterator<Item = usize>,
        grad: ArrayView2<'_, f64>,
        acc: &mut Array2<f64>,
    ) {
        for (i, c) in codes.into_iter().enumerate() {
            let mut row = acc.row_mut(c);
            row += &grad.row(i);
        }
    }
}

/// Intermediate values of an [`Mlp`] forward pass needed for backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Gradients of one [`Mlp`], `(weights, bias)` per layer.
pub type MlpGradients = Vec<(Array2<f64>, Array1<f64>)>;

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} takes {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-initialised network through `widths` (input first, output last).
    /// Every layer but the last uses `hidden`; the last uses `output`.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("invalid MLP widths {widths:?}")));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::glorot(widths[i], widths[i + 1], act, rng)
            })
            .collect();
        Mlp::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    #[cfg(test)]
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward(h.view())?;
        }
        Ok(h)
    }

    /// Forward pass keeping every intermediate. Fails with the index of the
    /// first layer whose output is not finite.
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<MlpCache> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let (p, out) = layer.forward_with_pre(h.view())?;
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("output of layer {i}")));
            }
            inputs.push(h);
            pre.push(p);
            h = out;
        }
        Ok(MlpCache {
            inputs,
            pre,
            output: h,
        })
    }

    /// Reverse pass; returns the gradient w.r.t. the network input and the
    /// per-layer parameter gradients.
    pub fn backward(&self, cache: &MlpCache, grad_out: Array2<f64>) -> (Array2<f64>, MlpGradients) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gi, gw, gb) = layer.backward(cache.inputs[i].view(), cache.pre[i].view(), g.view());
            grads.push((gw, gb));
            g = gi;
        }
        grads.reverse();
        (g, grads)
    }

    /// Loss and exact gradients of every parameter for one batch.
    pub fn gradients(&self, x: ArrayView2<'_, f64>, loss: &LossSpec) -> Result<(f64, GradientSet)> {
        let cache = self.forward_cached(x)?;
        let (value, grad_out) = loss.evaluate(cache.output.view())?;
        let (_, grads) = self.backward(&cache, grad_out);
        Ok((value, GradientSet::from_mlp(grads)))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

impl Parameters for Mlp {
    fn parameters(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

/// Categorical embeddings followed by an [`Mlp`].
///
/// The network input is `[continuous | emb_0(codes[:, 0]) | emb_1(...) | ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedMlp {
    pub embeddings: Vec<EmbeddingTable>,
    pub mlp: Mlp,
}

impl EmbeddedMlp {
    pub fn new(embeddings: Vec<EmbeddingTable>, mlp: Mlp) -> Self {
        EmbeddedMlp { embeddings, mlp }
    }

    pub fn input_width(&self, n_continuous: usize) -> usize {
        n_continuous + self.embeddings.iter().map(|e| e.dim()).sum::<usize>()
    }

    /// Concatenates continuous values with the looked-up embeddings.
    pub fn embed(
        &self,
        continuous: ArrayView2<'_, f64>,
        codes: ArrayView2<'_, usize>,
    ) -> Result<Array2<f64>> {
        if continuous.nrows() != codes.nrows() {
            return Err(Error::Shape(format!(
                "{} continuous rows but {} categorical rows",
                continuous.nrows(),
                codes.nrows()
            )));
        }
        if codes.ncols() != self.embeddings.len() {
            return Err(Error::Shape(format!(
                "{} categorical columns for {} embedding tables",
                codes.ncols(),
                self.embeddings.len()
            )));
        }
        let width = self.input_width(continuous.ncols());
        let mut x = Array2::zeros((continuous.nrows(), width));
        x.slice_mut(s![.., ..continuous.ncols()]).assign(&continuous);
        let mut offset = continuous.ncols();
        for (j, table) in self.embeddings.iter().enumerate() {
            let e = table.lookup(codes.column(j).iter().copied())?;
            x.slice_mut(s![.., offset..offset + table.dim()]).assign(&e);
            offset += table.dim();
        }
        Ok(x)
    }

    /// Splits an input gradient into per-table embedding gradients.
    pub fn embedding_gradients(
        &self,
        n_continuous: usize,
        codes: ArrayView2<'_, usize>,
        grad_input: ArrayView2<'_, f64>,
    ) -> Vec<Array2<f64>> {
        let mut offset = n_continuous;
        self.embeddings
            .iter()
            .enumerate()
            .map(|(j, table)| {
                let mut acc = Array2::zeros((table.rows(), table.dim()));
                let g = grad_input.slice(s![.., offset..offset + table.dim()]);
                EmbeddingTable::scatter_grad(codes.column(j).iter().copied(), g, &mut acc);
                offset += table.dim();
                acc
            })
            .collect()
    }

    /// Loss and gradients for a mixed batch. Gradient order: embedding
    /// tables, then the MLP layers.
    pub fn gradients(
        &self,
        continuous: ArrayView2<'_, f64>,
        codes: ArrayView2<'_, usize>,
        loss: &LossSpec,
    ) -> Result<(f64, GradientSet)> {
        let x = self.embed(continuous, codes)?;
        let cache = self.mlp.forward_cached(x.view())?;
        let (value, grad_out) = loss.evaluate(cache.output.view())?;
        let (grad_in, layer_grads) = self.mlp.backward(&cache, grad_out);
        let mut set = GradientSet::default();
        for g in self.embedding_gradients(continuous.ncols(), codes, grad_in.view()) {
            set.push_array2(g);
        }
        set.extend(GradientSet::from_mlp(layer_grads));
        Ok((value, set))
    }
}

impl Parameters for EmbeddedMlp {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut p: Vec<&[f64]> = self
            .embeddings
            .iter()
            .map(|e| e.vectors.as_slice().expect("standard layout"))
            .collect();
        p.extend(self.mlp.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p: Vec<&mut [f64]> = self
            .embeddings
            .iter_mut()
            .map(|e| e.vectors.as_slice_mut().expect("standard layout"))
            .collect();
        p.extend(self.mlp.parameters_mut());
        p
    }
}
