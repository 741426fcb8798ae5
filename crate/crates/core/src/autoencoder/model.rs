use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, EmbeddedMlp, EmbeddingTable, GradientSet, LossSpec, LossTerm, Mlp, Parameters};
use crate::tabular::TabularSchema;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "AE")]
    Ae,
    #[serde(rename = "VAE")]
    Vae,
    #[serde(rename = "RAE")]
    Rae,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ae => "AE",
            Variant::Vae => "VAE",
            Variant::Rae => "RAE",
        }
    }
}

/// Architecture and loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden_widths: Vec<usize>,
    /// `None` picks [`default_latent_dim`].
    pub latent_dim: Option<usize>,
    /// Weight of the categorical cross-entropy terms.
    pub loss_alpha: f64,
    /// RAE penalty on latent and decoder weight norms.
    pub rae_lambda: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            hidden_widths: vec![64, 32],
            latent_dim: None,
            loss_alpha: 0.3,
            rae_lambda: 1e-4,
        }
    }
}

/// Embedding width for a categorical column with `cardinality` values.
pub fn embedding_dim(cardinality: usize) -> usize {
    cardinality.div_ceil(2).clamp(1, 8)
}

/// `max(2, ceil(input_width / 2))`, capped at 16.
pub fn default_latent_dim(input_width: usize) -> usize {
    input_width.div_ceil(2).clamp(2, 16)
}

/// Latent codes of a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    pub values: Array2<f64>,
}

impl LatentMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("latent matrix"));
        }
        Ok(LatentMatrix { values })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

/// Decoder output mapped back to feature encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRows {
    pub continuous: Array2<f64>,
    pub categorical: Array2<usize>,
}

/// Loss value split into its components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// MSE plus weighted cross-entropy.
    pub recon: f64,
    pub kl: f64,
    pub rae: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.recon + self.kl + self.rae
    }
}

/// Multi-modal autoencoder with categorical embeddings.
///
/// The decoder emits one linear block for all continuous columns followed by
/// one logit block of width `|D_j|` per categorical column. Embedding tables
/// carry one extra row for the reserved unseen code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub variant: Variant,
    pub schema_hash: String,
    pub n_continuous: usize,
    pub vocab_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub loss_alpha: f64,
    pub rae_lambda: f64,
    pub encoder: EmbeddedMlp,
    pub decoder: Mlp,
}

/// Builds a freshly initialised model. Deterministic in `seed`.
pub fn build_model(schema: &TabularSchema, variant: Variant, arch: &ArchConfig, seed: u64) -> Result<AutoencoderModel> {
    schema.validate()?;
    let n_cont = schema.n_continuous();
    let vocab = schema.vocab_sizes();
    if n_cont + vocab.len() == 0 {
        return Err(Error::Schema("schema has no feature columns".into()));
    }
    if !(arch.loss_alpha >= 0.0) || !(arch.rae_lambda >= 0.0) {
        return Err(Error::InvalidArgument("loss weights must be >= 0".into()));
    }
    if arch.hidden_widths.contains(&0) {
        return Err(Error::InvalidArgument("hidden widths must be positive".into()));
    }
    let input_width = n_cont + vocab.iter().map(|&v| embedding_dim(v)).sum::<usize>();
    let latent_dim = arch.latent_dim.unwrap_or_else(|| default_latent_dim(input_width));
    if latent_dim == 0 {
        return Err(Error::InvalidArgument("latent_dim must be >= 1".into()));
    }
    let output_width = n_cont + vocab.iter().sum::<usize>();

    let mut r = rng::stream(seed, 0);
    let embeddings = vocab
        .iter()
        .map(|&v| EmbeddingTable::uniform(v + 1, embedding_dim(v), &mut r))
        .collect();
    let enc_out = if variant == Variant::Vae { 2 * latent_dim } else { latent_dim };
    let mut enc_widths = vec![input_width];
    enc_widths.extend(&arch.hidden_widths);
    enc_widths.push(enc_out);
    let encoder = Mlp::glorot(&enc_widths, Activation::Relu, Activation::Identity, &mut r)?;
    let mut dec_widths = vec![latent_dim];
    dec_widths.extend(arch.hidden_widths.iter().rev());
    dec_widths.push(output_width);
    let decoder = Mlp::glorot(&dec_widths, Activation::Relu, Activation::Identity, &mut r)?;

    Ok(AutoencoderModel {
        variant,
        schema_hash: schema.hash(),
        n_continuous: n_cont,
        vocab_sizes: vocab,
        latent_dim,
        loss_alpha: arch.loss_alpha,
        rae_lambda: arch.rae_lambda,
        encoder: EmbeddedMlp::new(embeddings, encoder),
        decoder,
    })
}

impl AutoencoderModel {
    pub fn input_width(&self) -> usize {
        self.encoder.input_width(self.n_continuous)
    }

    pub fn output_width(&self) -> usize {
        self.n_continuous + self.vocab_sizes.iter().sum::<usize>()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Structural consistency, used after deserialisation.
    pub fn validate(&self) -> Result<()> {
        let enc_out = if self.variant == Variant::Vae { 2 * self.latent_dim } else { self.latent_dim };
        let ok = self.latent_dim >= 1
            && self.encoder.embeddings.len() == self.vocab_sizes.len()
            && self
                .encoder
                .embeddings
                .iter()
                .zip(&self.vocab_sizes)
                .all(|(e, &v)| e.rows() == v + 1)
            && self.encoder.mlp.input_width() == self.input_width()
            && self.encoder.mlp.output_width() == enc_out
            && self.decoder.input_width() == self.latent_dim
            && self.decoder.output_width() == self.output_width();
        if !ok {
            return Err(Error::Shape("autoencoder layer shapes are inconsistent".into()));
        }
        Ok(())
    }

    fn check_batch(&self, continuous: &ArrayView2<'_, f64>, codes: &ArrayView2<'_, usize>) -> Result<()> {
        if continuous.ncols() != self.n_continuous || codes.ncols() != self.vocab_sizes.len() {
            return Err(Error::Shape(format!(
                "batch has {} + {} features, model expects {} + {}",
                continuous.ncols(),
                codes.ncols(),
                self.n_continuous,
                self.vocab_sizes.len()
            )));
        }
        Ok(())
    }

    /// Latent codes; the posterior mean for VAE.
    pub fn encode(&self, continuous: ArrayView2<'_, f64>, codes: ArrayView2<'_, usize>) -> Result<LatentMatrix> {
        self.check_batch(&continuous, &codes)?;
        let x = self.encoder.embed(continuous, codes)?;
        let out = self.encoder.mlp.forward(x.view())?;
        let z = out.slice(s![.., ..self.latent_dim]).to_owned();
        LatentMatrix::new(z)
    }

    /// Decodes latent rows. Categorical values are the argmax of each head,
    /// ties going to the lowest code.
    pub fn decode(&self, latents: ArrayView2<'_, f64>) -> Result<DecodedRows> {
        if latents.ncols() != self.latent_dim {
            return Err(Error::Shape(format!(
                "latent width {} but model has {}",
                latents.ncols(),
                self.latent_dim
            )));
        }
        let out = self.decoder.forward(latents)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("decoder output"));
        }
        let continuous = out.slice(s![.., ..self.n_continuous]).to_owned();
        let mut categorical = Array2::zeros((out.nrows(), self.vocab_sizes.len()));
        let mut offset = self.n_continuous;
        for (j, &k) in self.vocab_sizes.iter().enumerate() {
            let head = out.slice(s![.., offset..offset + k]);
            for (i, row) in head.axis_iter(Axis(0)).enumerate() {
                categorical[[i, j]] = argmax(row.iter().copied());
            }
            offset += k;
        }
        Ok(DecodedRows { continuous, categorical })
    }

    fn recon_spec(&self, continuous: ArrayView2<'_, f64>, codes: ArrayView2<'_, usize>) -> LossSpec {
        let mut terms = Vec::new();
        if self.n_continuous > 0 {
            terms.push((
                1.0,
                LossTerm::Mse {
                    columns: 0..self.n_continuous,
                    target: continuous.to_owned(),
                },
            ));
        }
        let mut offset = self.n_continuous;
        for (j, &k) in self.vocab_sizes.iter().enumerate() {
            let labels = codes.column(j).iter().map(|&c| (c < k).then_some(c)).collect();
            terms.push((
                self.loss_alpha,
                LossTerm::SoftmaxCe {
                    columns: offset..offset + k,
                    labels,
                },
            ));
            offset += k;
        }
        LossSpec::new(terms)
    }

    /// Reconstruction objective with `z = encode(x)` and no regularizers.
    /// This is the quantity monitored for early stopping.
    pub fn validation_loss(&self, continuous: ArrayView2<'_, f64>, codes: ArrayView2<'_, usize>) -> Result<f64> {
        let z = self.encode(continuous, codes)?;
        let out = self.decoder.forward(z.view())?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("decoder output"));
        }
        Ok(self.recon_spec(continuous, codes).evaluate(out.view())?.0)
    }

    /// Full training objective and its gradients in [`Parameters`] order.
    ///
    /// For VAE, `noise` holds the reparameterisation draws `eps`
    /// (`z = mu + exp(logvar / 2) * eps`); `None` means `eps = 0`. It is
    /// ignored by the other variants.
    pub fn loss_and_gradients(
        &self,
        continuous: ArrayView2<'_, f64>,
        codes: ArrayView2<'_, usize>,
        noise: Option<ArrayView2<'_, f64>>,
    ) -> Result<(LossBreakdown, GradientSet)> {
        self.check_batch(&continuous, &codes)?;
        let l = self.latent_dim;
        let x = self.encoder.embed(continuous, codes)?;
        let enc = self.encoder.mlp.forward_cached(x.view())?;

        let mut parts = LossBreakdown::default();
        let (z, vae) = match self.variant {
            Variant::Vae => {
                let mu = enc.output.slice(s![.., ..l]);
                let logvar = enc.output.slice(s![.., l..]);
                let eps = match noise {
                    Some(e) if e.dim() == mu.dim() => e.to_owned(),
                    Some(e) => {
                        return Err(Error::Shape(format!("noise is {:?}, latent is {:?}", e.dim(), mu.dim())));
                    }
                    None => Array2::zeros(mu.dim()),
                };
                let std = logvar.mapv(|v| (0.5 * v).exp());
                let z = &mu + &(&std * &eps);
                let (kl, g_mu, g_lv) = crate::nn::gaussian_kl(mu, logvar)?;
                parts.kl = kl;
                (z, Some((eps, std, g_mu, g_lv)))
            }
            _ => (enc.output.clone(), None),
        };

        let dec = self.decoder.forward_cached(z.view())?;
        let (recon, g_out) = self.recon_spec(continuous, codes).evaluate(dec.output.view())?;
        parts.recon = recon;
        let (mut g_z, mut dec_grads) = self.decoder.backward(&dec, g_out);

        if self.variant == Variant::Rae {
            let b = z.nrows().max(1) as f64;
            let lam = self.rae_lambda;
            let z_norm = z.iter().map(|v| v * v).sum::<f64>() / b;
            let w_norm: f64 = self
                .decoder
                .layers()
                .iter()
                .map(|layer| layer.weights().iter().map(|w| w * w).sum::<f64>())
                .sum();
            parts.rae = lam * (z_norm + w_norm);
            g_z.scaled_add(2.0 * lam / b, &z);
            for (layer, (gw, _)) in self.decoder.layers().iter().zip(dec_grads.iter_mut()) {
                gw.scaled_add(2.0 * lam, &layer.weights());
            }
        }

        let g_enc = match vae {
            Some((eps, std, g_mu, g_lv)) => {
                let mut g = Array2::zeros(enc.output.dim());
                g.slice_mut(s![.., ..l]).assign(&(&g_z + &g_mu));
                let g_logvar = &g_z * &eps * &std * 0.5 + &g_lv;
                g.slice_mut(s![.., l..]).assign(&g_logvar);
                g
            }
            None => g_z,
        };
        let (g_x, enc_grads) = self.encoder.mlp.backward(&enc, g_enc);

        let mut grads = GradientSet::default();
        for g in self.encoder.embedding_gradients(self.n_continuous, codes, g_x.view()) {
            grads.push_array2(g);
        }
        grads.extend(GradientSet::from_mlp(enc_grads));
        grads.extend(GradientSet::from_mlp(dec_grads));
        Ok((parts, grads))
    }
}

/// Composite reconstruction loss and gradients; see
/// [`AutoencoderModel::loss_and_gradients`].
pub fn reconstruction_loss(
    model: &AutoencoderModel,
    continuous: ArrayView2<'_, f64>,
    codes: ArrayView2<'_, usize>,
    noise: Option<ArrayView2<'_, f64>>,
) -> Result<(f64, GradientSet)> {
    let (parts, grads) = model.loss_and_gradients(continuous, codes, noise)?;
    Ok((parts.total(), grads))
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl Parameters for AutoencoderModel {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut p = self.encoder.parameters();
        p.extend(self.decoder.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.encoder.parameters_mut();
        p.extend(self.decoder.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_check;
    use crate::tabular::ColumnSpec;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn schema(n_cont: usize, cats: &[usize]) -> TabularSchema {
        let mut cols: Vec<ColumnSpec> = (0..n_cont).map(|i| ColumnSpec::continuous(format!("x{i}"))).collect();
        for (j, &k) in cats.iter().enumerate() {
            cols.push(ColumnSpec::categorical(format!("c{j}"), (0..k).map(|v| v.to_string())));
        }
        cols.push(ColumnSpec::categorical("y", ["0", "1"]));
        TabularSchema::new(cols, "y", "1").unwrap()
    }

    fn small_arch() -> ArchConfig {
        ArchConfig {
            hidden_widths: vec![5, 4],
            latent_dim: Some(3),
            ..ArchConfig::default()
        }
    }

    fn batch(n: usize, n_cont: usize, cats: &[usize], seed: u64) -> (Array2<f64>, Array2<usize>) {
        let mut r = rng::seeded(seed);
        let cont = Array2::from_shape_simple_fn((n, n_cont), || r.sample(StandardNormal));
        let mut codes = Array2::zeros((n, cats.len()));
        for ((_, j), c) in codes.indexed_iter_mut() {
            *c = r.random_range(0..cats[j]);
        }
        (cont, codes)
    }

    #[test]
    fn input_width_follows_embedding_rule() {
        let m = build_model(&schema(3, &[4]), Variant::Ae, &ArchConfig::default(), 0).unwrap();
        assert_eq!(m.input_width(), 5);
        assert_eq!(m.latent_dim, 3);
        assert_eq!(embedding_dim(1), 1);
        assert_eq!(embedding_dim(40), 8);
        assert_eq!(default_latent_dim(2), 2);
        assert_eq!(default_latent_dim(100), 16);
        m.validate().unwrap();
    }

    #[test]
    fn vae_encoder_emits_mu_and_logvar() {
        let m = build_model(&schema(3, &[4]), Variant::Vae, &small_arch(), 0).unwrap();
        assert_eq!(m.encoder.mlp.output_width(), 6);
        let (c, d) = batch(7, 3, &[4], 1);
        assert_eq!(m.encode(c.view(), d.view()).unwrap().values.dim(), (7, 3));
    }

    #[test]
    fn same_seed_same_parameters() {
        let s = schema(2, &[3, 5]);
        let a = build_model(&s, Variant::Rae, &ArchConfig::default(), 9).unwrap();
        let b = build_model(&s, Variant::Rae, &ArchConfig::default(), 9).unwrap();
        assert_eq!(a, b);
        let c = build_model(&s, Variant::Rae, &ArchConfig::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_schema_is_rejected() {
        let s = TabularSchema::new(vec![ColumnSpec::categorical("y", ["0", "1"])], "y", "1");
        // either layer may refuse a schema with no features
        if let Ok(s) = s {
            assert!(build_model(&s, Variant::Ae, &ArchConfig::default(), 0).is_err());
        }
    }

    #[test]
    fn perfect_reconstruction_costs_nothing() {
        // latent = input and identity layers
        let s = schema(2, &[]);
        let mut m = build_model(
            &s,
            Variant::Ae,
            &ArchConfig {
                hidden_widths: vec![],
                latent_dim: Some(2),
                ..ArchConfig::default()
            },
            0,
        )
        .unwrap();
        for layer in m.encoder.mlp.layers_mut().iter_mut().chain(m.decoder.layers_mut()) {
            layer.weights_mut().assign(&Array2::eye(2));
        }
        let (c, d) = batch(5, 2, &[], 0);
        let (loss, _) = reconstruction_loss(&m, c.view(), d.view(), None).unwrap();
        assert!(loss.abs() < 1e-24);
    }

    #[test]
    fn alpha_limits() {
        let s = schema(2, &[3]);
        let (c, d) = batch(6, 2, &[3], 4);
        let mut arch = small_arch();
        arch.loss_alpha = 0.0;
        let m0 = build_model(&s, Variant::Ae, &arch, 1).unwrap();
        let (loss0, _) = reconstruction_loss(&m0, c.view(), d.view(), None).unwrap();
        let z = m0.encode(c.view(), d.view()).unwrap();
        let out = m0.decoder.forward(z.view()).unwrap();
        let (mse, _) = crate::nn::mse_loss(out.slice(s![.., ..2]), c.view()).unwrap();
        assert!((loss0 - mse).abs() < 1e-12);

        arch.loss_alpha = 1e3;
        let m1 = build_model(&s, Variant::Ae, &arch, 1).unwrap();
        let (loss1, _) = reconstruction_loss(&m1, c.view(), d.view(), None).unwrap();
        let labels: Vec<usize> = d.column(0).to_vec();
        let (ce, _) = crate::nn::softmax_ce_loss(out.slice(s![.., 2..5]), &labels).unwrap();
        assert!((loss1 - mse - 1e3 * ce).abs() < 1e-9);
        assert!(1e3 * ce > 100.0 * mse);
    }

    #[test]
    fn gradients_pass_finite_differences() {
        let s = schema(2, &[3, 2]);
        let (c, d) = batch(6, 2, &[3, 2], 5);
        let mut r = rng::seeded(6);
        let eps = Array2::from_shape_simple_fn((6, 3), || r.sample(StandardNormal));
        for variant in [Variant::Ae, Variant::Vae, Variant::Rae] {
            let mut arch = small_arch();
            // a visible penalty so its gradient is actually exercised
            arch.rae_lambda = 0.05;
            let mut m = build_model(&s, variant, &arch, 2).unwrap();
            assert!(m.parameter_count() <= 10_000);
            // zero biases put ReLU pre-activations exactly on the kink
            for p in m.parameters_mut() {
                for v in p.iter_mut() {
                    *v += 0.1 * r.sample::<f64, _>(StandardNormal);
                }
            }
            let err = finite_diff_check(
                &m,
                |m| reconstruction_loss(m, c.view(), d.view(), Some(eps.view())),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{variant:?}: {err}");
        }
    }

    #[test]
    fn reserved_codes_add_no_loss() {
        let s = schema(1, &[3]);
        let m = build_model(&s, Variant::Ae, &small_arch(), 0).unwrap();
        let c = array![[0.5], [0.5]];
        let full = m.validation_loss(c.view(), array![[3usize], [3]].view()).unwrap();
        let z = m.encode(c.view(), array![[3usize], [3]].view()).unwrap();
        let out = m.decoder.forward(z.view()).unwrap();
        let (mse, _) = crate::nn::mse_loss(out.slice(s![.., ..1]), c.view()).unwrap();
        assert!((full - mse).abs() < 1e-15);
        assert!(m.encode(c.view(), array![[4usize], [0]].view()).is_err());
    }

    #[test]
    fn rae_penalty_is_zero_only_at_zero() {
        let s = schema(2, &[]);
        let arch = ArchConfig {
            hidden_widths: vec![],
            latent_dim: Some(2),
            rae_lambda: 1.0,
            ..ArchConfig::default()
        };
        let mut m = build_model(&s, Variant::Rae, &arch, 0).unwrap();
        let (c, d) = batch(4, 2, &[], 1);
        let (parts, _) = m.loss_and_gradients(c.view(), d.view(), None).unwrap();
        assert!(parts.rae > 0.0);
        for layer in m.encoder.mlp.layers_mut().iter_mut().chain(m.decoder.layers_mut()) {
            layer.weights_mut().fill(0.0);
        }
        let (parts, _) = m.loss_and_gradients(c.view(), d.view(), None).unwrap();
        assert_eq!(parts.rae, 0.0);
    }

    #[test]
    fn decode_argmax_and_shapes() {
        assert_eq!(argmax([0.5, 2.0, 2.0, 1.0].into_iter()), 1);
        assert_eq!(argmax([3.0, 3.0].into_iter()), 0);
        let s = schema(1, &[3, 4]);
        let m = build_model(&s, Variant::Ae, &small_arch(), 3).unwrap();
        let mut r = rng::seeded(1);
        let z = Array2::from_shape_simple_fn((50, 3), || r.sample::<f64, _>(StandardNormal) * 10.0);
        let out = m.decode(z.view()).unwrap();
        assert_eq!(out.continuous.dim(), (50, 1));
        assert!(out.categorical.column(0).iter().all(|&c| c < 3));
        assert!(out.categorical.column(1).iter().all(|&c| c < 4));
        assert!(m.decode(Array2::zeros((1, 2)).view()).is_err());
    }

    #[test]
    fn encode_is_deterministic() {
        let s = schema(2, &[3]);
        let m = build_model(&s, Variant::Vae, &small_arch(), 3).unwrap();
        let (c, d) = batch(10, 2, &[3], 2);
        assert_eq!(m.encode(c.view(), d.view()).unwrap(), m.encode(c.view(), d.view()).unwrap());
    }
}
