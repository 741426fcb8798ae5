use std::sync::Arc;

use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};

use super::TabularSchema;
use crate::{Error, Result};

/// Encoded rows of a [`TabularSchema`]: continuous values, categorical codes
/// and binary labels (`true` = minority).
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    schema: Arc<TabularSchema>,
    continuous: Array2<f64>,
    categorical: Array2<usize>,
    labels: Vec<bool>,
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct MixedRow<'a> {
    pub continuous: ArrayView1<'a, f64>,
    pub categorical: ArrayView1<'a, usize>,
}

impl MixedDataset {
    pub fn new(
        schema: Arc<TabularSchema>,
        continuous: Array2<f64>,
        categorical: Array2<usize>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let n = labels.len();
        if continuous.nrows() != n || categorical.nrows() != n {
            return Err(Error::Shape(format!(
                "row counts disagree: {} continuous, {} categorical, {} labels",
                continuous.nrows(),
                categorical.nrows(),
                n
            )));
        }
        if continuous.ncols() != schema.n_continuous() || categorical.ncols() != schema.n_categorical() {
            return Err(Error::Shape(format!(
                "schema has {} continuous / {} categorical features, data has {} / {}",
                schema.n_continuous(),
                schema.n_categorical(),
                continuous.ncols(),
                categorical.ncols()
            )));
        }
        if continuous.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("continuous features"));
        }
        for (j, &size) in schema.vocab_sizes().iter().enumerate() {
            if let Some(&c) = categorical.column(j).iter().find(|&&c| c > size) {
                return Err(Error::InvalidArgument(format!(
                    "code {c} in categorical column {j} exceeds the reserved code {size}"
                )));
            }
        }
        Ok(MixedDataset {
            schema,
            continuous: continuous.as_standard_layout().into_owned(),
            categorical: categorical.as_standard_layout().into_owned(),
            labels,
        })
    }

    pub fn empty(schema: Arc<TabularSchema>) -> Self {
        let (c, d) = (schema.n_continuous(), schema.n_categorical());
        MixedDataset {
            schema,
            continuous: Array2::zeros((0, c)),
            categorical: Array2::zeros((0, d)),
            labels: Vec::new(),
        }
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<TabularSchema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn continuous(&self) -> ArrayView2<'_, f64> {
        self.continuous.view()
    }

    pub fn categorical(&self) -> ArrayView2<'_, usize> {
        self.categorical.view()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> MixedRow<'_> {
        MixedRow {
            continuous: self.continuous.row(i),
            categorical: self.categorical.row(i),
        }
    }

    pub fn minority_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn majority_count(&self) -> usize {
        self.len() - self.minority_count()
    }

    pub fn indices_with_label(&self, label: bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn select(&self, rows: &[usize]) -> MixedDataset {
        MixedDataset {
            schema: Arc::clone(&self.schema),
            continuous: self.continuous.select(Axis(0), rows),
            categorical: self.categorical.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn minority(&self) -> MixedDataset {
        self.select(&self.indices_with_label(true))
    }

    /// Copy with the same labels and new feature matrices.
    pub fn with_features(&self, continuous: Array2<f64>, categorical: Array2<usize>) -> Result<Self> {
        MixedDataset::new(Arc::clone(&self.schema), continuous, categorical, self.labels.clone())
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &MixedDataset) -> Result<MixedDataset> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(MixedDataset {
            schema: Arc::clone(&self.schema),
            continuous: concatenate(Axis(0), &[self.continuous.view(), other.continuous.view()])
                .map_err(|e| Error::Shape(e.to_string()))?,
            categorical: concatenate(Axis(0), &[self.categorical.view(), other.categorical.view()])
                .map_err(|e| Error::Shape(e.to_string()))?,
            labels,
        })
    }
}
