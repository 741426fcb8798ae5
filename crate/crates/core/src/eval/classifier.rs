use std::path::Path;
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interp::{median_std, NeighborIndex};
use crate::tabular::{write_csv, write_csv_to, MixedDataset, PreprocessState};
use crate::{Error, Result};

/// Minority probability of every query row: the fraction of its `k` nearest
/// training rows that are minority.
///
/// Rows are compared with the SMOTE-NC distance; the categorical mismatch
/// penalty is the median standard deviation of the minority rows'
/// continuous features. Ties in distance go to the lower training index.
pub fn knn_classifier(train: &MixedDataset, query: &MixedDataset, k: usize) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::TooFewRows("k-NN needs a nonempty training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={} (training rows)",
            train.len()
        )));
    }
    if train.schema().hash() != query.schema().hash() {
        return Err(Error::Schema("training and query rows use different schemas".into()));
    }
    let med = median_std(train.minority().continuous());
    let index = NeighborIndex::nc_augmented(train.continuous().to_owned(), train.categorical().to_owned(), med)?;
    let labels = train.labels();
    (0..query.len())
        .into_par_iter()
        .map(|i| {
            let row = query.row(i);
            let hits = index.k_nearest(&row.continuous.to_vec(), &row.categorical.to_vec(), k)?;
            Ok(hits.iter().filter(|h| labels[h.index]).count() as f64 / k as f64)
        })
        .collect()
}

/// Classifier used to score oversampled training sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    /// Built-in k-NN scorer. With `standardize`, continuous features are
    /// standardized with statistics of the (augmented) training set first.
    Knn {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_true")]
        standardize: bool,
    },
    /// External program exchanging CSV files.
    ///
    /// `command[0]` is run with the remaining elements as arguments after
    /// substituting `{train}`, `{query}`, `{schema}` and `{out}` with file
    /// paths. `{train}` and `{query}` are written in the dataset's CSV
    /// layout; the query file has no target column. The program must write
    /// one minority score per query row to `{out}`, optionally after a header
    /// line.
    External { command: Vec<String> },
}

fn default_k() -> usize {
    5
}

fn default_true() -> bool {
    true
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Knn {
            k: default_k(),
            standardize: true,
        }
    }
}

impl ClassifierSpec {
    /// Fits on `train` and returns minority scores for each query set.
    pub fn fit_score(&self, train: &MixedDataset, queries: &[&MixedDataset]) -> Result<Vec<Vec<f64>>> {
        match self {
            ClassifierSpec::Knn { k, standardize } => {
                if *standardize {
                    let pre = PreprocessState::fit(train)?;
                    let train_t = pre.transform(train)?;
                    queries
                        .iter()
                        .map(|q| knn_classifier(&train_t, &pre.transform(q)?, *k))
                        .collect()
                } else {
                    queries.iter().map(|q| knn_classifier(train, q, *k)).collect()
                }
            }
            ClassifierSpec::External { command } => queries.iter().map(|q| run_external(command, train, q)).collect(),
        }
    }
}

fn run_external(command: &[String], train: &MixedDataset, query: &MixedDataset) -> Result<Vec<f64>> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("external classifier command is empty".into()))?;
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let train_path = dir.path().join("train.csv");
    let query_path = dir.path().join("query.csv");
    let schema_path = dir.path().join("schema.json");
    let out_path = dir.path().join("scores.csv");
    write_csv(&train_path, train)?;
    write_query(&query_path, query)?;
    train.schema().to_json_file(&schema_path)?;

    let substitute = |a: &String| {
        a.replace("{train}", &train_path.to_string_lossy())
            .replace("{query}", &query_path.to_string_lossy())
            .replace("{schema}", &schema_path.to_string_lossy())
            .replace("{out}", &out_path.to_string_lossy())
    };
    let output = Command::new(substitute(program))
        .args(args.iter().map(substitute))
        .output()
        .map_err(|e| Error::External(format!("cannot run {program:?}: {e}")))?;
    if !output.status.success() {
        return Err(Error::External(format!(
            "{program:?} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&out_path).map_err(|e| Error::io(&out_path, e))?;
    let scores = parse_scores(&text)?;
    if scores.len() != query.len() {
        return Err(Error::External(format!(
            "{program:?} wrote {} scores for {} query rows",
            scores.len(),
            query.len()
        )));
    }
    Ok(scores)
}

fn write_query(path: &Path, query: &MixedDataset) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(&mut buf, query)?;
    let target = query.schema().target.as_str();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let header = rdr.headers()?.clone();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| &header[i] != target).collect();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(keep.iter().map(|&i| &header[i]))?;
    for rec in rdr.records() {
        let rec = rec?;
        wtr.write_record(keep.iter().map(|&i| &rec[i]))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

fn parse_scores(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => return Err(Error::External(format!("line {}: score {v} is not finite", i + 1))),
            // a header is allowed on the first line only
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::External(format!("line {}: cannot parse score {field:?}", i + 1))),
        }
    }
    Ok(out)
}
