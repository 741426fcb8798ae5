use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Task};
use crate::bench::pareto_front;
use crate::oversampler::{Method, OversamplerSpec};
use crate::tabular::format_float;
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Outcome of one (dataset, oversampler, HP, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    /// Dataset class; repeats of an artificial dataset share it.
    pub dataset: String,
    /// Concrete dataset instance of this repeat.
    pub instance: String,
    pub method: Method,
    pub hp_index: usize,
    /// Full oversampler settings including the cell's seeds.
    pub hp: OversamplerSpec,
    pub repeat: usize,
    pub seed: u64,
    pub n_synthetic: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_val: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_test: Option<f64>,
    /// Set when the cell failed; failed cells are left out of aggregates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl CellRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Classifier-only run on the un-augmented training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub dataset: String,
    pub repeat: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_val: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_test: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Means over the successful repeats of one (dataset, oversampler, HP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub dataset: String,
    pub method: Method,
    pub hp_index: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_val: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc_test: Option<f64>,
    /// Whether the group is on its dataset's cover/error Pareto front.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pareto: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// HP with the highest mean test ROC-AUC.
    BestTest,
    /// HP with the highest mean validation ROC-AUC, reported on test.
    BestValidation,
}

impl SelectionMode {
    pub const ALL: [SelectionMode; 2] = [SelectionMode::BestTest, SelectionMode::BestValidation];

    pub fn name(self) -> &'static str {
        match self {
            SelectionMode::BestTest => "best_test",
            SelectionMode::BestValidation => "best_validation",
        }
    }
}

/// HP chosen for one (dataset, oversampler) under one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub dataset: String,
    pub method: Method,
    pub mode: SelectionMode,
    pub hp_index: usize,
    pub roc_auc_val: f64,
    pub roc_auc_test: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vs_baseline: Option<f64>,
}

/// One row of the real-data table: an oversampler across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mode: SelectionMode,
    /// Selected test ROC-AUC per dataset, in configuration order.
    pub per_dataset: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    /// Mean difference from the classifier-only baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub task: Task,
    pub config: ExperimentConfig,
    pub records: Vec<CellRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baselines: Vec<BaselineRecord>,
    pub groups: Vec<GroupAggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selections: Vec<Selection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summary: Vec<MethodSummary>,
    pub failed_cells: usize,
}

/// Mean of the present values, in order; `None` when there are none.
pub fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.into_iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Groups records by (dataset, method, HP) in order of first appearance and
/// averages the successful ones. Pareto flags are set per dataset for
/// groups with both cover and error.
pub fn aggregate_groups(records: &[CellRecord]) -> Vec<GroupAggregate> {
    let mut keys: Vec<(&str, Method, usize)> = Vec::new();
    for r in records {
        let key = (r.dataset.as_str(), r.method, r.hp_index);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut groups: Vec<GroupAggregate> = keys
        .iter()
        .map(|&(dataset, method, hp_index)| {
            let members: Vec<&CellRecord> = records
                .iter()
                .filter(|r| r.dataset == dataset && r.method == method && r.hp_index == hp_index)
                .collect();
            let ok: Vec<&&CellRecord> = members.iter().filter(|r| r.ok()).collect();
            GroupAggregate {
                dataset: dataset.to_string(),
                method,
                hp_index,
                n_ok: ok.len(),
                n_failed: members.len() - ok.len(),
                cover: mean(ok.iter().map(|r| r.cover)),
                error: mean(ok.iter().map(|r| r.error)),
                roc_auc_val: mean(ok.iter().map(|r| r.roc_auc_val)),
                roc_auc_test: mean(ok.iter().map(|r| r.roc_auc_test)),
                pareto: None,
            }
        })
        .collect();
    mark_pareto(&mut groups);
    groups
}

/// Sets `pareto` on every group with both cover and error, per dataset.
pub fn mark_pareto(groups: &mut [GroupAggregate]) {
    let mut datasets: Vec<String> = Vec::new();
    for g in groups.iter() {
        if !datasets.contains(&g.dataset) {
            datasets.push(g.dataset.clone());
        }
    }
    for d in datasets {
        let members: Vec<usize> = (0..groups.len())
            .filter(|&i| groups[i].dataset == d && groups[i].cover.is_some() && groups[i].error.is_some())
            .collect();
        let points: Vec<(f64, f64)> = members
            .iter()
            .map(|&i| (groups[i].cover.unwrap_or(f64::NAN), groups[i].error.unwrap_or(f64::NAN)))
            .collect();
        let front = pareto_front(&points);
        for (pos, &i) in members.iter().enumerate() {
            groups[i].pareto = Some(front.contains(&pos));
        }
    }
}

/// HP selection under both modes. Ties go to the lower HP index.
pub fn select_hps(groups: &[GroupAggregate], baselines: &[BaselineRecord]) -> Vec<Selection> {
    let mut out = Vec::new();
    let mut pairs: Vec<(&str, Method)> = Vec::new();
    for g in groups {
        if !pairs.contains(&(g.dataset.as_str(), g.method)) {
            pairs.push((g.dataset.as_str(), g.method));
        }
    }
    for (dataset, method) in pairs {
        let base = baseline_mean(baselines, dataset);
        let candidates: Vec<(&GroupAggregate, f64, f64)> = groups
            .iter()
            .filter(|g| g.dataset == dataset && g.method == method)
            .filter_map(|g| Some((g, g.roc_auc_val?, g.roc_auc_test?)))
            .collect();
        for mode in SelectionMode::ALL {
            let mut best: Option<&(&GroupAggregate, f64, f64)> = None;
            for c in &candidates {
                let key = |c: &(&GroupAggregate, f64, f64)| match mode {
                    SelectionMode::BestTest => c.2,
                    SelectionMode::BestValidation => c.1,
                };
                if best.is_none_or(|b| key(c) > key(b)) {
                    best = Some(c);
                }
            }
            if let Some(&(g, val, test)) = best {
                out.push(Selection {
                    dataset: dataset.to_string(),
                    method,
                    mode,
                    hp_index: g.hp_index,
                    roc_auc_val: val,
                    roc_auc_test: test,
                    vs_baseline: base.map(|b| test - b),
                });
            }
        }
    }
    out
}

/// Mean test ROC-AUC of the successful baseline runs of `dataset`.
pub fn baseline_mean(baselines: &[BaselineRecord], dataset: &str) -> Option<f64> {
    mean(
        baselines
            .iter()
            .filter(|b| b.dataset == dataset && b.failure.is_none())
            .map(|b| b.roc_auc_test),
    )
}

/// One summary row per oversampler and mode, in the order of `methods`.
pub fn summarize(selections: &[Selection], methods: &[Method], datasets: &[String]) -> Vec<MethodSummary> {
    let mut out = Vec::new();
    for &method in methods {
        for mode in SelectionMode::ALL {
            let picked: Vec<Option<&Selection>> = datasets
                .iter()
                .map(|d| {
                    selections
                        .iter()
                        .find(|s| &s.dataset == d && s.method == method && s.mode == mode)
                })
                .collect();
            out.push(MethodSummary {
                method,
                mode,
                per_dataset: picked.iter().map(|s| s.map(|s| s.roc_auc_test)).collect(),
                mean: mean(picked.iter().map(|s| s.map(|s| s.roc_auc_test))),
                vs_baseline: mean(picked.iter().map(|s| s.and_then(|s| s.vs_baseline))),
            });
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl RunReport {
    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let report: RunReport = serde_json::from_reader(BufReader::new(file))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "report format version {} is not supported",
                report.format_version
            )));
        }
        Ok(report)
    }

    /// Artificial table: one row per (dataset, oversampler, HP) with mean
    /// cover and error and the Pareto flag. Real table: one row per
    /// oversampler with both HP-selection modes and per-dataset columns.
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        match self.task {
            Task::Artificial => write_pareto_table(writer, &self.groups),
            Task::Real => self.write_real_table(writer),
        }
    }

    pub fn write_table_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_table(BufWriter::new(file))
    }

    fn write_real_table<W: Write>(&self, writer: W) -> Result<()> {
        let datasets: Vec<&str> = self.config.real.datasets.iter().map(|d| d.id.as_str()).collect();
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string(), "label".to_string()];
        for mode in SelectionMode::ALL {
            header.push(format!("{}_mean", mode.name()));
            header.push(format!("{}_vs_baseline", mode.name()));
            for d in &datasets {
                header.push(format!("{}:{d}", mode.name()));
            }
        }
        wtr.write_record(&header)?;
        let mut methods: Vec<Method> = Vec::new();
        for s in &self.summary {
            if !methods.contains(&s.method) {
                methods.push(s.method);
            }
        }
        for method in methods {
            let mut row = vec![method.id().to_string(), method.label().to_string()];
            for mode in SelectionMode::ALL {
                let s = self.summary.iter().find(|s| s.method == method && s.mode == mode);
                row.push(opt(s.and_then(|s| s.mean)));
                row.push(opt(s.and_then(|s| s.vs_baseline)));
                for i in 0..datasets.len() {
                    row.push(opt(s.and_then(|s| s.per_dataset.get(i).copied().flatten())));
                }
            }
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("table", e))
    }
}

/// Cover / error table with Pareto flags recomputed from the groups.
pub fn write_pareto_table<W: Write>(writer: W, groups: &[GroupAggregate]) -> Result<()> {
    let mut groups = groups.to_vec();
    mark_pareto(&mut groups);
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "dataset", "method", "label", "hp_index", "n_ok", "n_failed", "cover", "error", "pareto",
    ])?;
    for g in &groups {
        wtr.write_record([
            g.dataset.clone(),
            g.method.id().to_string(),
            g.method.label().to_string(),
            g.hp_index.to_string(),
            g.n_ok.to_string(),
            g.n_failed.to_string(),
            opt(g.cover),
            opt(g.error),
            g.pareto.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("table", e))
}
