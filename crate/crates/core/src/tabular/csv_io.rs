use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use super::{ColumnKind, FeatureSlot, MixedDataset, TabularSchema};
use crate::{Error, Result};

/// Written for reserved (unseen) categorical codes.
pub const UNSEEN_TOKEN: &str = "<unseen>";

/// Result of parsing a CSV file.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: MixedDataset,
    /// Categorical cells mapped to the reserved code.
    pub unseen_categories: usize,
}

/// Reads `path` into a dataset encoded with `schema`.
///
/// Unknown categorical values are mapped to the reserved code and counted;
/// a warning is logged when any are found.
pub fn load_csv(path: impl AsRef<Path>, schema: &TabularSchema) -> Result<MixedDataset> {
    let path = path.as_ref();
    let loaded = load_csv_with_stats(path, schema)?;
    if loaded.unseen_categories > 0 {
        log::warn!(
            "{}: {} categorical values not in the schema vocabulary were mapped to the reserved code",
            path.display(),
            loaded.unseen_categories
        );
    }
    Ok(loaded.dataset)
}

pub fn load_csv_with_stats(path: impl AsRef<Path>, schema: &TabularSchema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, path)
}

/// Parses CSV text from any reader. `source` is used in error messages.
pub fn read_csv<R: Read>(reader: R, schema: &TabularSchema, source: &Path) -> Result<LoadedCsv> {
    schema.validate()?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let column_index = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };

    let target_idx = column_index(&schema.target)?;
    let mut feature_idx = Vec::new();
    for col in schema.feature_columns() {
        feature_idx.push(column_index(&col.name)?);
    }
    let vocab: Vec<HashMap<&str, usize>> = schema
        .categorical_columns()
        .map(|c| c.vocabulary().iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect())
        .collect();
    let layout = schema.layout();
    let features: Vec<_> = schema.feature_columns().collect();

    let (nc, nd) = (schema.n_continuous(), schema.n_categorical());
    let mut cont = Vec::new();
    let mut cat = Vec::new();
    let mut labels = Vec::new();
    let mut unseen = 0usize;

    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(row_no as u64 + 2);
        let cell = |idx: usize, name: &str| -> Result<&str> {
            match record.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(parse_err(line, format!("missing value for column {name:?}"))),
            }
        };

        let mut row_cont = vec![0.0; nc];
        let mut row_cat = vec![0usize; nd];
        for ((slot, &idx), col) in layout.iter().zip(&feature_idx).zip(&features) {
            let text = cell(idx, &col.name)?;
            match *slot {
                FeatureSlot::Continuous(j) => {
                    let v: f64 = text.trim().parse().map_err(|_| {
                        parse_err(line, format!("cannot parse {text:?} in column {:?} as a number", col.name))
                    })?;
                    if !v.is_finite() {
                        return Err(parse_err(line, format!("non-finite value in column {:?}", col.name)));
                    }
                    row_cont[j] = v;
                }
                FeatureSlot::Categorical(j) => {
                    row_cat[j] = match vocab[j].get(text) {
                        Some(&code) => code,
                        None => {
                            unseen += 1;
                            vocab[j].len()
                        }
                    };
                }
            }
        }
        let label = cell(target_idx, &schema.target)?;
        if label == schema.minority_label {
            labels.push(true);
        } else if label == schema.majority_label() {
            labels.push(false);
        } else {
            return Err(parse_err(line, format!("target value {label:?} is not a declared class")));
        }
        cont.extend(row_cont);
        cat.extend(row_cat);
    }

    if labels.is_empty() {
        return Err(parse_err(1, "file has no data rows".into()));
    }
    let n = labels.len();
    let dataset = MixedDataset::new(
        Arc::new(schema.clone()),
        Array2::from_shape_vec((n, nc), cont).map_err(|e| Error::Shape(e.to_string()))?,
        Array2::from_shape_vec((n, nd), cat).map_err(|e| Error::Shape(e.to_string()))?,
        labels,
    )?;
    Ok(LoadedCsv {
        dataset,
        unseen_categories: unseen,
    })
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(path: impl AsRef<Path>, dataset: &MixedDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, dataset)
}

/// Writes the header in schema column order, then one line per row.
pub fn write_csv_to<W: Write>(writer: W, dataset: &MixedDataset) -> Result<()> {
    let schema = dataset.schema();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;

    let layout = schema.layout();
    let slot_of: HashMap<&str, FeatureSlot> = schema
        .feature_columns()
        .zip(layout.iter())
        .map(|(c, s)| (c.name.as_str(), *s))
        .collect();
    let vocabs: Vec<&[String]> = schema.categorical_columns().map(|c| c.vocabulary()).collect();

    let mut fields: Vec<String> = Vec::with_capacity(schema.columns.len());
    for i in 0..dataset.len() {
        fields.clear();
        let row = dataset.row(i);
        for col in &schema.columns {
            if col.name == schema.target {
                let label = if dataset.labels()[i] {
                    schema.minority_label.as_str()
                } else {
                    schema.majority_label()
                };
                fields.push(label.to_string());
                continue;
            }
            match slot_of[col.name.as_str()] {
                FeatureSlot::Continuous(j) => fields.push(format_float(row.continuous[j])),
                FeatureSlot::Categorical(j) => {
                    debug_assert_eq!(col.kind, ColumnKind::Categorical);
                    let code = row.categorical[j];
                    fields.push(
                        vocabs[j]
                            .get(code)
                            .cloned()
                            .unwrap_or_else(|| UNSEEN_TOKEN.to_string()),
                    );
                }
            }
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
