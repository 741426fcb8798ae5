use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::MixedDataset;
use crate::{Error, Result};

/// Fitted standardization of continuous columns.
///
/// Non-constant columns are centred and divided by their sample (N - 1)
/// standard deviation. Constant columns pass through with centre 0 and
/// scale 1. Categorical codes are left as they are; codes equal to the
/// vocabulary size mark unseen values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub schema_hash: String,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    pub vocab_sizes: Vec<usize>,
}

impl PreprocessState {
    pub fn fit(dataset: &MixedDataset) -> Result<Self> {
        let n = dataset.len();
        if n < 2 {
            return Err(Error::TooFewRows(format!("standardization needs at least 2 rows, got {n}")));
        }
        let mut centers = Vec::new();
        let mut scales = Vec::new();
        for col in dataset.continuous().columns() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let std = var.sqrt();
            if std <= 1e-12 * mean.abs().max(1.0) {
                centers.push(0.0);
                scales.push(1.0);
            } else {
                centers.push(mean);
                scales.push(std);
            }
        }
        Ok(PreprocessState {
            schema_hash: dataset.schema().hash(),
            centers,
            scales,
            vocab_sizes: dataset.schema().vocab_sizes(),
        })
    }

    fn check(&self, dataset: &MixedDataset) -> Result<()> {
        if dataset.schema().hash() != self.schema_hash {
            return Err(Error::Schema("preprocessing state was fitted on a different schema".into()));
        }
        Ok(())
    }

    pub fn transform(&self, dataset: &MixedDataset) -> Result<MixedDataset> {
        self.check(dataset)?;
        let mut cont = dataset.continuous().to_owned();
        for (j, mut col) in cont.columns_mut().into_iter().enumerate() {
            let (c, s) = (self.centers[j], self.scales[j]);
            col.mapv_inplace(|v| (v - c) / s);
        }
        dataset.with_features(cont, dataset.categorical().to_owned())
    }

    pub fn inverse_transform(&self, dataset: &MixedDataset) -> Result<MixedDataset> {
        self.check(dataset)?;
        let cont = self.inverse_continuous(dataset.continuous().to_owned())?;
        dataset.with_features(cont, dataset.categorical().to_owned())
    }

    /// De-standardizes a bare continuous matrix.
    pub fn inverse_continuous(&self, mut cont: Array2<f64>) -> Result<Array2<f64>> {
        if cont.ncols() != self.centers.len() {
            return Err(Error::Shape(format!(
                "{} continuous columns, state has {}",
                cont.ncols(),
                self.centers.len()
            )));
        }
        for (j, mut col) in cont.columns_mut().into_iter().enumerate() {
            let (c, s) = (self.centers[j], self.scales[j]);
            col.mapv_inplace(|v| v * s + c);
        }
        Ok(cont)
    }
}

/// Fits a [`PreprocessState`] on `dataset` and applies it.
pub fn fit_transform(dataset: &MixedDataset) -> Result<(MixedDataset, PreprocessState)> {
    let state = PreprocessState::fit(dataset)?;
    Ok((state.transform(dataset)?, state))
}
