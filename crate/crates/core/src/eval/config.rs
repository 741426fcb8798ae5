use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ClassifierSpec;
use crate::autoencoder::{ArchConfig, TrainConfig};
use crate::bench::{Modality, SuiteConfig};
use crate::oversampler::{Amount, Method, OversamplerSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Artificial,
    Real,
}

/// Hyperparameter grid of one oversampler.
///
/// The grid is the product of the axes the method actually uses: `amounts`
/// for everything but No OS, `k` for the SMOTE family, and `latent_dims` for
/// latent methods. `None` in `latent_dims` means the default latent size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversamplerGrid {
    pub method: Method,
    #[serde(default = "default_amounts")]
    pub amounts: Vec<Amount>,
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    #[serde(default = "default_latent_dims")]
    pub latent_dims: Vec<Option<usize>>,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_amounts() -> Vec<Amount> {
    vec![Amount::Ratio(0.1), Amount::Ratio(0.2), Amount::Ratio(0.3)]
}

fn default_ks() -> Vec<usize> {
    vec![5]
}

fn default_latent_dims() -> Vec<Option<usize>> {
    vec![None]
}

/// One point of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpConfig {
    pub index: usize,
    /// Seed fields are filled per cell.
    pub spec: OversamplerSpec,
}

impl OversamplerGrid {
    pub fn new(method: Method) -> Self {
        OversamplerGrid {
            method,
            amounts: default_amounts(),
            k: default_ks(),
            latent_dims: default_latent_dims(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
        }
    }

    /// Default grids for all eleven methods.
    pub fn all_methods() -> Vec<Self> {
        Method::ALL.iter().map(|&m| OversamplerGrid::new(m)).collect()
    }

    fn uses_k(&self) -> bool {
        matches!(
            self.method,
            Method::Smote | Method::SmoteNc | Method::SmoteAe | Method::SmoteVae | Method::SmoteRae
        )
    }

    /// Enumerates the grid. `amount_override` replaces the amount axis.
    pub fn expand(&self, amount_override: Option<Amount>) -> Result<Vec<HpConfig>> {
        let amounts = match (self.method, amount_override) {
            (Method::NoOs, _) => vec![Amount::NSyn(0)],
            (_, Some(a)) => vec![a],
            (_, None) => self.amounts.clone(),
        };
        let ks = if self.uses_k() { self.k.clone() } else { vec![default_k_placeholder()] };
        let latents = if self.method.is_latent() {
            self.latent_dims.clone()
        } else {
            vec![None]
        };
        if amounts.is_empty() || ks.is_empty() || latents.is_empty() {
            return Err(Error::InvalidArgument(format!("empty hyperparameter axis for {}", self.method)));
        }
        let mut out = Vec::new();
        for &amount in &amounts {
            for &k in &ks {
                for &latent_dim in &latents {
                    let mut spec = OversamplerSpec::new(self.method, amount);
                    spec.k = k;
                    spec.arch = ArchConfig {
                        latent_dim: latent_dim.or(self.arch.latent_dim),
                        ..self.arch.clone()
                    };
                    spec.train = self.train.clone();
                    out.push(HpConfig { index: out.len(), spec });
                }
            }
        }
        Ok(out)
    }
}

// k is not used by these methods; the default keeps specs comparable
fn default_k_placeholder() -> usize {
    5
}

/// Artificial-benchmark settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtificialConfig {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub modalities: Vec<Modality>,
    pub minority_frac: f64,
    pub bins: usize,
    /// Synthetic rows per cell; replaces the grids' amount axis when set.
    pub n_synthetic: Option<usize>,
    /// Fresh minority reference points for cover and error.
    pub n_reference: usize,
    /// Fresh majority reference points for error; `n_reference` when unset.
    pub n_majority_reference: Option<usize>,
    /// Size of the autoencoder validation sample relative to the dataset.
    pub val_fraction: f64,
}

impl Default for ArtificialConfig {
    fn default() -> Self {
        let suite = SuiteConfig::default();
        ArtificialConfig {
            dims: suite.dims,
            sizes: suite.sizes,
            modalities: suite.modalities,
            minority_frac: suite.minority_frac,
            bins: suite.bins,
            n_synthetic: Some(10_000),
            n_reference: 500_000,
            n_majority_reference: None,
            val_fraction: 0.25,
        }
    }
}

impl ArtificialConfig {
    pub fn suite(&self, repeats: usize, base_seed: u64) -> SuiteConfig {
        SuiteConfig {
            dims: self.dims.clone(),
            sizes: self.sizes.clone(),
            modalities: self.modalities.clone(),
            repeats,
            minority_frac: self.minority_frac,
            bins: self.bins,
            base_seed,
        }
    }

    pub fn majority_references(&self) -> usize {
        self.n_majority_reference.unwrap_or(self.n_reference)
    }
}

/// A real dataset: CSV rows plus a JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub id: String,
    pub data: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealConfig {
    pub datasets: Vec<DatasetSource>,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
}

impl Default for RealConfig {
    fn default() -> Self {
        RealConfig {
            datasets: Vec::new(),
            split: [0.6, 0.2, 0.2],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

/// Everything a run needs. Read from JSON; see the README for the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default = "default_oversamplers")]
    pub oversamplers: Vec<OversamplerGrid>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub artificial: ArtificialConfig,
    #[serde(default)]
    pub real: RealConfig,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub output: OutputPaths,
    /// Store per-cell wall time. Off by default because timings make
    /// reports differ between otherwise identical runs.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_oversamplers() -> Vec<OversamplerGrid> {
    OversamplerGrid::all_methods()
}

fn default_repeats() -> usize {
    7
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        ExperimentConfig {
            task,
            oversamplers: default_oversamplers(),
            repeats: default_repeats(),
            base_seed: 0,
            artificial: ArtificialConfig::default(),
            real: RealConfig::default(),
            classifier: ClassifierSpec::default(),
            output: OutputPaths::default(),
            record_timing: false,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_reader(BufReader::new(file))?;
        Ok(config)
    }

    /// Checks invariants that do not depend on the file system.
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.oversamplers.is_empty() {
            return Err(Error::InvalidArgument("no oversamplers configured".into()));
        }
        let mut seen = Vec::new();
        for g in &self.oversamplers {
            if seen.contains(&g.method) {
                return Err(Error::InvalidArgument(format!("{} is listed twice", g.method)));
            }
            seen.push(g.method);
            g.expand(None)?;
        }
        match self.task {
            Task::Artificial => {
                let a = &self.artificial;
                if a.dims.is_empty() || a.sizes.is_empty() || a.modalities.is_empty() {
                    return Err(Error::InvalidArgument("artificial grid is empty".into()));
                }
                if a.n_reference == 0 {
                    return Err(Error::InvalidArgument("n_reference must be positive".into()));
                }
                if !(a.val_fraction > 0.0) {
                    return Err(Error::InvalidArgument("val_fraction must be positive".into()));
                }
            }
            Task::Real => {
                if self.real.datasets.is_empty() {
                    return Err(Error::InvalidArgument("no datasets configured".into()));
                }
                let mut ids = Vec::new();
                for d in &self.real.datasets {
                    if ids.contains(&&d.id) {
                        return Err(Error::InvalidArgument(format!("dataset id {:?} is used twice", d.id)));
                    }
                    ids.push(&d.id);
                }
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        if self.task == Task::Real {
            for d in &self.real.datasets {
                for p in [&d.data, &d.schema] {
                    if !p.is_file() {
                        return Err(Error::io(
                            p,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let mut g = OversamplerGrid::new(Method::PolyVae);
        g.latent_dims = vec![None, Some(4)];
        g.k = vec![3, 5, 7];
        // k does not apply to Poly
        assert_eq!(g.expand(None).unwrap().len(), 6);
        g.method = Method::SmoteVae;
        assert_eq!(g.expand(None).unwrap().len(), 18);
        g.method = Method::Smote;
        assert_eq!(g.expand(None).unwrap().len(), 9);
        assert_eq!(g.expand(Some(Amount::NSyn(10))).unwrap().len(), 3);
        g.method = Method::NoOs;
        assert_eq!(g.expand(None).unwrap().len(), 1);
        let hp = g.expand(None).unwrap();
        assert_eq!(hp[0].index, 0);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"task": "artificial"}"#).unwrap();
        assert_eq!(c.repeats, 7);
        assert_eq!(c.oversamplers.len(), 11);
        assert_eq!(c.artificial.n_synthetic, Some(10_000));
        c.validate().unwrap();
        let r: ExperimentConfig = serde_json::from_str(r#"{"task": "real"}"#).unwrap();
        assert!(r.validate().is_err());
        let bad: ExperimentConfig = serde_json::from_str(r#"{"task": "artificial", "repeats": 0}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn majority_references_default_to_the_minority_count() {
        let mut a = ArtificialConfig {
            n_reference: 100,
            ..ArtificialConfig::default()
        };
        assert_eq!(a.majority_references(), 100);
        a.n_majority_reference = Some(7);
        assert_eq!(a.majority_references(), 7);
    }
}
