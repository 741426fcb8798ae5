//! One interface over feature-space and latent-space oversamplers.
//!
//! Latent methods fit standardization on the training fold, train an
//! autoencoder on every training row with early stopping on the validation
//! fold, interpolate between encoded minority rows, decode and undo the
//! standardization. Feature-space SMOTE and Poly treat categorical codes as
//! numbers and round the result back to the nearest valid code.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{self, ArchConfig, AutoencoderModel, TrainConfig, TrainHistory, Variant};
use crate::interp::{self, Provenance, SyntheticBatch};
use crate::tabular::{MixedDataset, PreprocessState};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "NoOS")]
    NoOs,
    #[serde(rename = "ROS")]
    Ros,
    #[serde(rename = "SMOTE")]
    Smote,
    #[serde(rename = "SMOTE_NC")]
    SmoteNc,
    #[serde(rename = "Poly")]
    Poly,
    #[serde(rename = "SMOTE_AE")]
    SmoteAe,
    #[serde(rename = "SMOTE_VAE")]
    SmoteVae,
    #[serde(rename = "SMOTE_RAE")]
    SmoteRae,
    #[serde(rename = "Poly_AE")]
    PolyAe,
    #[serde(rename = "Poly_VAE")]
    PolyVae,
    #[serde(rename = "Poly_RAE")]
    PolyRae,
}

/// Interpolator used by a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolator {
    Smote,
    Poly,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::NoOs,
        Method::Ros,
        Method::Smote,
        Method::SmoteNc,
        Method::Poly,
        Method::SmoteAe,
        Method::SmoteVae,
        Method::SmoteRae,
        Method::PolyAe,
        Method::PolyVae,
        Method::PolyRae,
    ];

    /// Identifier used in configs and on the command line.
    pub fn id(self) -> &'static str {
        match self {
            Method::NoOs => "NoOS",
            Method::Ros => "ROS",
            Method::Smote => "SMOTE",
            Method::SmoteNc => "SMOTE_NC",
            Method::Poly => "Poly",
            Method::SmoteAe => "SMOTE_AE",
            Method::SmoteVae => "SMOTE_VAE",
            Method::SmoteRae => "SMOTE_RAE",
            Method::PolyAe => "Poly_AE",
            Method::PolyVae => "Poly_VAE",
            Method::PolyRae => "Poly_RAE",
        }
    }

    /// Label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::NoOs => "No OS",
            Method::Ros => "ROS",
            Method::Smote => "SMOTE",
            Method::SmoteNc => "SMOTE-NC",
            Method::Poly => "Poly",
            Method::SmoteAe => "SMOTE+AE",
            Method::SmoteVae => "SMOTE+VAE",
            Method::SmoteRae => "SMOTE+RAE",
            Method::PolyAe => "Poly+AE",
            Method::PolyVae => "Poly+VAE",
            Method::PolyRae => "Poly+RAE",
        }
    }

    /// Autoencoder variant of a latent method.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::SmoteAe | Method::PolyAe => Some(Variant::Ae),
            Method::SmoteVae | Method::PolyVae => Some(Variant::Vae),
            Method::SmoteRae | Method::PolyRae => Some(Variant::Rae),
            _ => None,
        }
    }

    pub fn interpolator(self) -> Option<Interpolator> {
        match self {
            Method::Smote | Method::SmoteNc | Method::SmoteAe | Method::SmoteVae | Method::SmoteRae => {
                Some(Interpolator::Smote)
            }
            Method::Poly | Method::PolyAe | Method::PolyVae | Method::PolyRae => Some(Interpolator::Poly),
            Method::NoOs | Method::Ros => None,
        }
    }

    pub fn is_latent(self) -> bool {
        self.variant().is_some()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts ids and labels, ignoring case and the separators `_ - + space`.
    fn from_str(s: &str) -> Result<Self> {
        let norm = |x: &str| {
            x.chars()
                .filter(|c| !matches!(c, '_' | '-' | '+' | ' '))
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let want = norm(s);
        Method::ALL
            .into_iter()
            .find(|m| norm(m.id()) == want || norm(m.label()) == want)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown oversampling method {s:?}")))
    }
}

/// How many synthetic rows to create.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amount {
    /// Fraction of the majority-minority gap to close, in (0, 1].
    Ratio(f64),
    NSyn(usize),
}

impl Amount {
    pub fn resolve(self, n_min: usize, n_maj: usize) -> Result<usize> {
        match self {
            Amount::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::InvalidArgument(format!("ratio {r} must be in (0, 1]")));
                }
                Ok(resolve_n_syn(r, n_min, n_maj))
            }
            Amount::NSyn(n) => Ok(n),
        }
    }
}

/// `round(ratio * (n_maj - n_min))`, zero when the minority is not smaller.
pub fn resolve_n_syn(ratio: f64, n_min: usize, n_maj: usize) -> usize {
    if n_maj <= n_min {
        return 0;
    }
    (ratio * (n_maj - n_min) as f64).round().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversamplerSpec {
    pub method: Method,
    pub amount: Amount,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    /// Seed for autoencoder initialisation and training; `seed` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ae_seed: Option<u64>,
}

fn default_k() -> usize {
    5
}

impl OversamplerSpec {
    pub fn new(method: Method, amount: Amount) -> Self {
        OversamplerSpec {
            method,
            amount,
            k: default_k(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            ae_seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A fitted autoencoder together with the standardization it was trained on.
#[derive(Debug, Clone)]
pub struct FittedAutoencoder {
    pub model: AutoencoderModel,
    pub preprocess: PreprocessState,
    pub history: TrainHistory,
}

/// Latent-space intermediates of a latent method.
#[derive(Debug, Clone)]
pub struct LatentTrace {
    /// Encoded minority training rows, in training-fold order.
    pub encoded_minority: Array2<f64>,
    /// Interpolated latents before decoding, one row per synthetic.
    pub synthetic_latents: Array2<f64>,
    pub history: TrainHistory,
}

/// Original rows plus labelled synthetic minority rows.
#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub original: MixedDataset,
    /// Every row labelled minority.
    pub synthetic: MixedDataset,
    /// Indices refer to the minority rows of `original`, in order.
    pub provenance: Vec<Provenance>,
    pub latent: Option<LatentTrace>,
}

impl AugmentedDataset {
    pub fn n_syn(&self) -> usize {
        self.synthetic.len()
    }

    /// Original rows followed by synthetic rows.
    pub fn combined(&self) -> Result<MixedDataset> {
        self.original.concat(&self.synthetic)
    }
}

/// Shared store of fitted autoencoders keyed by a caller-chosen id and
/// variant. Lets a harness reuse one model across ratios and interpolators.
#[derive(Debug, Default)]
pub struct AutoencoderCache {
    inner: Mutex<HashMap<(String, Variant), Arc<FittedAutoencoder>>>,
}

impl AutoencoderCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fits standardization and an autoencoder of `variant` on `train`.
pub fn fit_autoencoder(
    train: &MixedDataset,
    val: &MixedDataset,
    variant: Variant,
    arch: &ArchConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<FittedAutoencoder> {
    let preprocess = PreprocessState::fit(train)?;
    let train_t = preprocess.transform(train)?;
    let val_t = preprocess.transform(val)?;
    let model = autoencoder::build_model(train.schema(), variant, arch, rng::derive_seed(&[seed, 1]))?;
    let config = TrainConfig {
        seed: rng::derive_seed(&[seed, 2]),
        ..config.clone()
    };
    let (model, history) = autoencoder::train(&model, &train_t, &val_t, &config)?;
    Ok(FittedAutoencoder {
        model,
        preprocess,
        history,
    })
}

/// Runs the oversampler described by `spec` on the training fold.
///
/// `val` is only used for autoencoder early stopping.
pub fn oversample(train: &MixedDataset, val: &MixedDataset, spec: &OversamplerSpec) -> Result<AugmentedDataset> {
    oversample_cached(train, val, spec, None)
}

/// [`oversample`] that takes fitted autoencoders from `cache` under `key`
/// when given.
pub fn oversample_cached(
    train: &MixedDataset,
    val: &MixedDataset,
    spec: &OversamplerSpec,
    cache: Option<(&AutoencoderCache, &str)>,
) -> Result<AugmentedDataset> {
    let schema = train.schema_arc();
    let empty = || MixedDataset::empty(Arc::clone(schema));
    if spec.method == Method::NoOs {
        return Ok(AugmentedDataset {
            original: train.clone(),
            synthetic: empty(),
            provenance: Vec::new(),
            latent: None,
        });
    }
    let n_min = train.minority_count();
    if n_min < 2 {
        return Err(Error::TooFewRows(format!(
            "{} needs at least 2 minority training rows, got {n_min}",
            spec.method.label()
        )));
    }
    if spec.method == Method::SmoteNc && (schema.n_continuous() == 0 || schema.n_categorical() == 0) {
        return Err(Error::UnsupportedSchema {
            method: "SMOTE-NC".into(),
            reason: "needs at least one continuous and one categorical feature".into(),
        });
    }
    let n_syn = spec.amount.resolve(n_min, train.majority_count())?;
    let interp_seed = rng::derive_seed(&[spec.seed, 3]);
    let minority = train.minority();

    let (cont, cat, provenance, latent) = match spec.method.variant() {
        None => {
            let (c, d, p) = feature_space(train, &minority, spec, n_syn, interp_seed)?;
            (c, d, p, None)
        }
        Some(variant) => {
            let fitted = match cache {
                Some((store, key)) => cached_fit(store, key, train, val, variant, spec)?,
                None => Arc::new(fit_autoencoder(
                    train,
                    val,
                    variant,
                    &spec.arch,
                    &spec.train,
                    spec.ae_seed.unwrap_or(spec.seed),
                )?),
            };
            latent_space(&fitted, &minority, spec, n_syn, interp_seed)?
        }
    };

    let synthetic = MixedDataset::new(Arc::clone(schema), cont, cat, vec![true; n_syn])?;
    Ok(AugmentedDataset {
        original: train.clone(),
        synthetic,
        provenance,
        latent,
    })
}

fn cached_fit(
    store: &AutoencoderCache,
    key: &str,
    train: &MixedDataset,
    val: &MixedDataset,
    variant: Variant,
    spec: &OversamplerSpec,
) -> Result<Arc<FittedAutoencoder>> {
    let id = (key.to_string(), variant);
    if let Some(hit) = store.inner.lock().expect("cache lock").get(&id) {
        return Ok(Arc::clone(hit));
    }
    // trained outside the lock; a concurrent miss computes the same model
    let fitted = Arc::new(fit_autoencoder(
        train,
        val,
        variant,
        &spec.arch,
        &spec.train,
        spec.ae_seed.unwrap_or(spec.seed),
    )?);
    let mut map = store.inner.lock().expect("cache lock");
    Ok(Arc::clone(map.entry(id).or_insert(fitted)))
}

type Rows = (Array2<f64>, Array2<usize>, Vec<Provenance>);

fn feature_space(
    train: &MixedDataset,
    minority: &MixedDataset,
    spec: &OversamplerSpec,
    n_syn: usize,
    seed: u64,
) -> Result<Rows> {
    if spec.method == Method::Ros {
        let b = interp::ros(minority.continuous(), minority.categorical(), n_syn, seed)?;
        return Ok((b.continuous, b.categorical, b.provenance));
    }
    let state = PreprocessState::fit(train)?;
    let m = state.transform(minority)?;
    let batch = match spec.method {
        Method::SmoteNc => interp::smote_nc(m.continuous(), m.categorical(), n_syn, spec.k, seed)?,
        Method::Smote | Method::Poly => {
            let joined = ordinal_matrix(m.continuous(), m.categorical())?;
            let b = if spec.method == Method::Smote {
                interp::smote(joined.view(), n_syn, spec.k, seed)?
            } else {
                interp::poly_star(joined.view(), n_syn, seed)?
            };
            split_ordinal(b, m.continuous().ncols(), &m.schema().vocab_sizes())
        }
        other => unreachable!("{other:?} is not a feature-space method"),
    };
    let cont = state.inverse_continuous(batch.continuous)?;
    Ok((cont, batch.categorical, batch.provenance))
}

/// `[continuous | codes as reals]`.
fn ordinal_matrix(cont: ArrayView2<'_, f64>, codes: ArrayView2<'_, usize>) -> Result<Array2<f64>> {
    let codes = codes.mapv(|c| c as f64);
    concatenate(Axis(1), &[cont, codes.view()]).map_err(|e| Error::Shape(e.to_string()))
}

/// Splits an interpolated ordinal matrix, rounding codes to the nearest valid one.
fn split_ordinal(b: SyntheticBatch, n_cont: usize, vocab: &[usize]) -> SyntheticBatch {
    let cont = b.continuous.slice(s![.., ..n_cont]).to_owned();
    let mut cat = Array2::zeros((b.continuous.nrows(), vocab.len()));
    for ((i, j), c) in cat.indexed_iter_mut() {
        let v = b.continuous[[i, n_cont + j]].round();
        *c = v.clamp(0.0, (vocab[j] - 1) as f64) as usize;
    }
    SyntheticBatch {
        continuous: cont,
        categorical: cat,
        provenance: b.provenance,
    }
}

fn latent_space(
    fitted: &FittedAutoencoder,
    minority: &MixedDataset,
    spec: &OversamplerSpec,
    n_syn: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<usize>, Vec<Provenance>, Option<LatentTrace>)> {
    let m = fitted.preprocess.transform(minority)?;
    let z = fitted.model.encode(m.continuous(), m.categorical())?;
    let batch = match spec.method.interpolator() {
        Some(Interpolator::Smote) => interp::smote(z.view(), n_syn, spec.k, seed)?,
        Some(Interpolator::Poly) => interp::poly_star(z.view(), n_syn, seed)?,
        None => unreachable!("latent methods always interpolate"),
    };
    let decoded = fitted.model.decode(batch.continuous.view())?;
    let cont = fitted.preprocess.inverse_continuous(decoded.continuous)?;
    let trace = LatentTrace {
        encoded_minority: z.values,
        synthetic_latents: batch.continuous,
        history: fitted.history.clone(),
    };
    Ok((cont, decoded.categorical, batch.provenance, Some(trace)))
}
