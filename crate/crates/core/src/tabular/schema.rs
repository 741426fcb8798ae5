use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: None,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: Some(categories.into_iter().map(Into::into).collect()),
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        self.categories.as_deref().unwrap_or(&[])
    }
}

/// Where a feature column lives inside a [`MixedDataset`](super::MixedDataset).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSlot {
    /// Index into the continuous matrix.
    Continuous(usize),
    /// Index into the categorical code matrix.
    Categorical(usize),
}

/// Column layout of a binary classification table.
///
/// The target is one of the `columns`: a categorical column with exactly two
/// categories, one of which is `minority_label`. Every other column is a
/// feature. Categorical codes follow vocabulary order; code `|vocabulary|` is
/// reserved for values not in the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularSchema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    pub minority_label: String,
}

impl TabularSchema {
    pub fn new(columns: Vec<ColumnSpec>, target: impl Into<String>, minority_label: impl Into<String>) -> Result<Self> {
        let schema = TabularSchema {
            columns,
            target: target.into(),
            minority_label: minority_label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", col.name)));
            }
            match col.kind {
                ColumnKind::Continuous => {
                    if col.categories.is_some() {
                        return Err(Error::Schema(format!(
                            "continuous column {:?} declares categories",
                            col.name
                        )));
                    }
                }
                ColumnKind::Categorical => {
                    let vocab = col.vocabulary();
                    if vocab.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical column {:?} has an empty vocabulary",
                            col.name
                        )));
                    }
                    let unique: HashSet<&String> = vocab.iter().collect();
                    if unique.len() != vocab.len() {
                        return Err(Error::Schema(format!(
                            "categorical column {:?} has duplicate categories",
                            col.name
                        )));
                    }
                }
            }
        }
        let target = self
            .columns
            .iter()
            .find(|c| c.name == self.target)
            .ok_or_else(|| Error::Schema(format!("target {:?} is not a column", self.target)))?;
        if target.kind != ColumnKind::Categorical || target.vocabulary().len() != 2 {
            return Err(Error::Schema(format!(
                "target {:?} must be categorical with exactly two categories",
                self.target
            )));
        }
        if !target.vocabulary().contains(&self.minority_label) {
            return Err(Error::Schema(format!(
                "minority label {:?} is not a category of {:?}",
                self.minority_label, self.target
            )));
        }
        if self.feature_columns().next().is_none() {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let schema: TabularSchema = serde_json::from_reader(BufReader::new(file))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Feature columns in declaration order (the target excluded).
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> + '_ {
        self.columns.iter().filter(move |c| c.name != self.target)
    }

    pub fn continuous_columns(&self) -> impl Iterator<Item = &ColumnSpec> + '_ {
        self.feature_columns().filter(|c| c.kind == ColumnKind::Continuous)
    }

    pub fn categorical_columns(&self) -> impl Iterator<Item = &ColumnSpec> + '_ {
        self.feature_columns().filter(|c| c.kind == ColumnKind::Categorical)
    }

    pub fn n_continuous(&self) -> usize {
        self.continuous_columns().count()
    }

    pub fn n_categorical(&self) -> usize {
        self.categorical_columns().count()
    }

    /// Vocabulary size of each categorical feature.
    pub fn vocab_sizes(&self) -> Vec<usize> {
        self.categorical_columns().map(|c| c.vocabulary().len()).collect()
    }

    /// Slot of each feature column, in declaration order.
    pub fn layout(&self) -> Vec<FeatureSlot> {
        let (mut ci, mut di) = (0, 0);
        self.feature_columns()
            .map(|c| match c.kind {
                ColumnKind::Continuous => {
                    ci += 1;
                    FeatureSlot::Continuous(ci - 1)
                }
                ColumnKind::Categorical => {
                    di += 1;
                    FeatureSlot::Categorical(di - 1)
                }
            })
            .collect()
    }

    pub fn target_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.name == self.target)
            .expect("validated schema has a target column")
    }

    pub fn majority_label(&self) -> &str {
        self.target_column()
            .vocabulary()
            .iter()
            .find(|c| **c != self.minority_label)
            .expect("validated target has two categories")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> TabularSchema {
        TabularSchema::new(
            vec![
                ColumnSpec::continuous("age"),
                ColumnSpec::categorical("color", ["red", "green"]),
                ColumnSpec::continuous("income"),
                ColumnSpec::categorical("y", ["no", "yes"]),
            ],
            "y",
            "yes",
        )
        .unwrap()
    }

    #[test]
    fn layout_and_counts() {
        let s = schema();
        assert_eq!(s.n_continuous(), 2);
        assert_eq!(s.n_categorical(), 1);
        assert_eq!(
            s.layout(),
            vec![FeatureSlot::Continuous(0), FeatureSlot::Categorical(0), FeatureSlot::Continuous(1)]
        );
        assert_eq!(s.majority_label(), "no");
        assert_eq!(s.vocab_sizes(), vec![2]);
    }

    #[test]
    fn json_round_trip() {
        let s = schema();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"kind\":\"categorical\""));
        let back: TabularSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn invalid_schemas_are_rejected() {
        let dup = vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::continuous("a"),
            ColumnSpec::categorical("y", ["0", "1"]),
        ];
        assert!(TabularSchema::new(dup, "y", "1").is_err());

        let empty_vocab = vec![ColumnSpec::categorical("c", Vec::<String>::new()), ColumnSpec::categorical("y", ["0", "1"])];
        assert!(TabularSchema::new(empty_vocab, "y", "1").is_err());

        let dup_vocab = vec![ColumnSpec::categorical("c", ["a", "a"]), ColumnSpec::categorical("y", ["0", "1"])];
        assert!(TabularSchema::new(dup_vocab, "y", "1").is_err());

        let ternary = vec![ColumnSpec::continuous("a"), ColumnSpec::categorical("y", ["0", "1", "2"])];
        assert!(TabularSchema::new(ternary, "y", "1").is_err());

        let bad_label = vec![ColumnSpec::continuous("a"), ColumnSpec::categorical("y", ["0", "1"])];
        assert!(TabularSchema::new(bad_label, "y", "2").is_err());

        let no_features = vec![ColumnSpec::categorical("y", ["0", "1"])];
        assert!(TabularSchema::new(no_features, "y", "1").is_err());
    }
}
