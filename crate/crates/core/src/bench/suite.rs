use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{apply_bins, BinFeature, BinMaps, SphereSpec};
use crate::tabular::MixedDataset;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Continuous,
    Multimodal,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Continuous => "continuous",
            Modality::Multimodal => "multimodal",
        }
    }
}

/// Grid of sphere datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub modalities: Vec<Modality>,
    pub repeats: usize,
    pub minority_frac: f64,
    pub bins: usize,
    pub base_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            dims: vec![6, 10],
            sizes: vec![1_000, 10_000, 100_000],
            modalities: vec![Modality::Continuous, Modality::Multimodal],
            repeats: 7,
            minority_frac: 0.05,
            bins: 7,
            base_seed: 0,
        }
    }
}

/// One cell of the grid, before generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub id: String,
    /// Dataset class shared by all repeats.
    pub class: String,
    pub dims: usize,
    pub n_samples: usize,
    pub modality: Modality,
    pub repeat: usize,
    /// Shared by both modalities of the same `(dims, n_samples, repeat)`, so
    /// a multimodal dataset is the discretized twin of a continuous one.
    pub seed: u64,
}

/// Every entry of the grid in a fixed order: dims, sizes, modalities, repeats.
pub fn suite_entries(config: &SuiteConfig) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for &dims in &config.dims {
        for &n in &config.sizes {
            for &modality in &config.modalities {
                let class = format!("d{dims}-n{n}-{}", modality.name());
                for repeat in 0..config.repeats {
                    out.push(SuiteEntry {
                        id: format!("sphere-{class}-r{repeat}"),
                        class: class.clone(),
                        dims,
                        n_samples: n,
                        modality,
                        repeat,
                        seed: rng::derive_seed(&[config.base_seed, dims as u64, n as u64, repeat as u64]),
                    });
                }
            }
        }
    }
    out
}

/// A generated sphere dataset with everything needed to sample more points
/// from the same manifolds and map rows back to geometry.
#[derive(Debug, Clone)]
pub struct BenchmarkDataset {
    pub id: String,
    pub class: String,
    pub spec: SphereSpec,
    /// Empty feature list for continuous datasets.
    pub bins: BinMaps,
    pub dataset: MixedDataset,
}

/// Coordinates discretized in multimodal datasets: the first `ceil(dims/2)`.
pub fn discretized_coordinates(dims: usize) -> Vec<usize> {
    (0..dims.div_ceil(2)).collect()
}

impl BenchmarkDataset {
    /// Samples the dataset of `spec` and discretizes it according to `bins`.
    pub fn from_parts(id: impl Into<String>, class: impl Into<String>, spec: SphereSpec, bins: BinMaps) -> Result<Self> {
        if bins.dims != spec.dims {
            return Err(Error::Shape("bin maps and sphere disagree on dimensions".into()));
        }
        let dataset = apply_bins(&spec.sample(), &bins)?;
        Ok(BenchmarkDataset {
            id: id.into(),
            class: class.into(),
            spec,
            bins,
            dataset,
        })
    }

    pub fn generate(entry: &SuiteEntry, config: &SuiteConfig) -> Result<Self> {
        let spec = SphereSpec::new(entry.dims, entry.n_samples, config.minority_frac, entry.seed)?;
        let coords = match entry.modality {
            Modality::Continuous => Vec::new(),
            Modality::Multimodal => discretized_coordinates(entry.dims),
        };
        let bins = BinMaps::random(entry.dims, &coords, config.bins, rng::derive_seed(&[entry.seed, 7]))?;
        BenchmarkDataset::from_parts(entry.id.clone(), entry.class.clone(), spec, bins)
    }

    /// Fresh labelled rows (minority first) from streams `stream` and
    /// `stream + 1`, encoded like the dataset.
    pub fn sample_more(&self, n_min: usize, n_maj: usize, stream: u64) -> Result<MixedDataset> {
        apply_bins(&self.spec.sample_with_streams(stream, stream + 1, n_min, n_maj), &self.bins)
    }

    pub fn to_geometric(&self, rows: &MixedDataset) -> Result<Array2<f64>> {
        self.bins.dataset_to_geometric(rows)
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            dims: self.spec.dims,
            n_samples: self.spec.n_samples,
            alpha: self.spec.slice_alpha,
            mu: self.spec.minority_frac,
            seed: self.spec.seed,
            rotation: self.spec.rotation.iter().copied().collect(),
            bins: self.bins.bins,
            discretized: self.bins.coordinates(),
            permutations: self.bins.features.iter().map(|f| f.permutation.clone()).collect(),
        }
    }

    /// Rebuilds a dataset from its sidecar; sampling is deterministic, so
    /// the rows are identical to the original ones.
    pub fn from_sidecar(id: impl Into<String>, sidecar: &Sidecar) -> Result<Self> {
        let (spec, bins) = sidecar.to_parts()?;
        let id = id.into();
        BenchmarkDataset::from_parts(id.clone(), id, spec, bins)
    }
}

/// Generates every dataset of the grid.
pub fn make_benchmark_suite(config: &SuiteConfig) -> Result<Vec<BenchmarkDataset>> {
    suite_entries(config)
        .iter()
        .map(|e| BenchmarkDataset::generate(e, config))
        .collect()
}

/// Generator state written next to a generated dataset so that metrics can
/// be recomputed elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: usize,
    pub n_samples: usize,
    pub alpha: f64,
    pub mu: f64,
    pub seed: u64,
    /// Row-major `dims x dims` rotation.
    pub rotation: Vec<f64>,
    pub bins: usize,
    pub discretized: Vec<usize>,
    /// `permutations[i][bin]` is the code of `bin` for `discretized[i]`.
    pub permutations: Vec<Vec<usize>>,
}

impl Sidecar {
    pub fn to_parts(&self) -> Result<(SphereSpec, BinMaps)> {
        let rotation = Array2::from_shape_vec((self.dims, self.dims), self.rotation.clone())
            .map_err(|e| Error::Shape(format!("rotation: {e}")))?;
        let spec = SphereSpec {
            dims: self.dims,
            n_samples: self.n_samples,
            minority_frac: self.mu,
            slice_alpha: self.alpha,
            rotation,
            seed: self.seed,
        };
        if self.discretized.len() != self.permutations.len() {
            return Err(Error::InvalidArgument("one permutation per discretized coordinate is required".into()));
        }
        let features = self
            .discretized
            .iter()
            .zip(&self.permutations)
            .map(|(&c, p)| BinFeature::new(c, p.clone()))
            .collect::<Result<_>>()?;
        let bins = BinMaps {
            dims: self.dims,
            bins: self.bins,
            features,
        };
        bins.validate()?;
        Ok((spec, bins))
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}
