use std::time::Instant;

use ndarray::{concatenate, s, Array2, Axis};
use rayon::prelude::*;

use super::report::{aggregate_groups, CellRecord, RunReport, REPORT_FORMAT_VERSION};
use super::{guarded, ExperimentConfig, HpConfig, Task};
use crate::bench::{cover, error_metric, suite_entries, BenchmarkDataset, SuiteConfig, SuiteEntry};
use crate::oversampler::{oversample_cached, Amount, AutoencoderCache, Method};
use crate::tabular::MixedDataset;
use crate::{rng, Error, Result};

/// Random streams of a sphere's seed used for extra samples. The dataset
/// itself uses streams 1 and 2, the rotation stream 0.
const VAL_STREAM: u64 = 3;
const REFERENCE_STREAM: u64 = 5;

/// Geometric reference sets of one dataset.
struct References {
    /// Fresh minority samples; cover is measured against these.
    cover: Array2<f64>,
    /// Dataset minority rows followed by fresh minority samples.
    minority: Array2<f64>,
    /// Dataset majority rows followed by fresh majority samples.
    majority: Array2<f64>,
    /// Geometric dataset minority rows, the point set scored for No OS.
    dataset_minority: Array2<f64>,
}

fn split_by_label(points: &Array2<f64>, labels: &[bool]) -> (Array2<f64>, Array2<f64>) {
    let min: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let maj: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    (points.select(Axis(0), &min), points.select(Axis(0), &maj))
}

fn references(bench: &BenchmarkDataset, config: &ExperimentConfig) -> Result<References> {
    let a = &config.artificial;
    let geo = bench.to_geometric(&bench.dataset)?;
    let (data_min, data_maj) = split_by_label(&geo, bench.dataset.labels());
    let n_ref = a.n_reference;
    let fresh = bench.to_geometric(&bench.sample_more(n_ref, a.majority_references(), REFERENCE_STREAM)?)?;
    let fresh_min = fresh.slice(s![..n_ref, ..]);
    let fresh_maj = fresh.slice(s![n_ref.., ..]);
    let join = |x: &Array2<f64>, y| concatenate(Axis(0), &[x.view(), y]).map_err(|e| Error::Shape(e.to_string()));
    Ok(References {
        cover: fresh_min.to_owned(),
        minority: join(&data_min, fresh_min)?,
        majority: join(&data_maj, fresh_maj)?,
        dataset_minority: data_min,
    })
}

/// Autoencoder validation sample: fresh rows from the same manifolds with
/// the dataset's class balance.
fn validation_sample(bench: &BenchmarkDataset, val_fraction: f64) -> Result<MixedDataset> {
    let n = ((bench.spec.n_samples as f64 * val_fraction).round() as usize).max(2);
    let n_min = ((n as f64 * bench.spec.minority_frac).round() as usize).clamp(1, n - 1);
    bench.sample_more(n_min, n - n_min, VAL_STREAM)
}

/// Seed of one cell, stable under reordering of the configuration.
pub fn cell_seed(base_seed: u64, dataset: &str, method: Method, hp_index: usize, repeat: usize) -> u64 {
    rng::derive_seed(&[
        base_seed,
        rng::hash_str(dataset),
        rng::hash_str(method.id()),
        hp_index as u64,
        repeat as u64,
    ])
}

/// Key identifying the autoencoder settings of an HP config, so cells that
/// differ only in interpolation share one fitted model.
pub(crate) fn autoencoder_key(hp: &HpConfig) -> String {
    serde_json::to_string(&(&hp.spec.arch, &hp.spec.train)).expect("settings serialize")
}

pub(crate) type Grid = Vec<(Method, Vec<HpConfig>)>;

pub(crate) fn expand_grids(config: &ExperimentConfig, amount: Option<Amount>) -> Result<Grid> {
    config
        .oversamplers
        .iter()
        .map(|g| Ok((g.method, g.expand(amount)?)))
        .collect()
}

/// Cover and error of every oversampler on every sphere dataset.
///
/// No OS is scored on the dataset's own minority rows, every other method on
/// its synthetic rows only. A failing cell is recorded with its message and
/// the run continues.
pub fn run_artificial(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if config.task != Task::Artificial {
        return Err(Error::InvalidArgument("configuration is not for the artificial task".into()));
    }
    let suite = config.artificial.suite(config.repeats, config.base_seed);
    let grids = expand_grids(config, config.artificial.n_synthetic.map(Amount::NSyn))?;
    let entries = suite_entries(&suite);
    let per_entry: Vec<Vec<CellRecord>> = entries
        .par_iter()
        .map(|entry| run_entry(entry, &suite, &grids, config))
        .collect();
    let records: Vec<CellRecord> = per_entry.into_iter().flatten().collect();
    let failed_cells = records.iter().filter(|r| !r.ok()).count();
    Ok(RunReport {
        format_version: REPORT_FORMAT_VERSION,
        task: Task::Artificial,
        config: config.clone(),
        groups: aggregate_groups(&records),
        records,
        baselines: Vec::new(),
        selections: Vec::new(),
        summary: Vec::new(),
        failed_cells,
    })
}

struct Prepared {
    bench: BenchmarkDataset,
    val: MixedDataset,
    refs: References,
}

fn prepare(entry: &SuiteEntry, suite: &SuiteConfig, config: &ExperimentConfig) -> Result<Prepared> {
    let bench = BenchmarkDataset::generate(entry, suite)?;
    let val = validation_sample(&bench, config.artificial.val_fraction)?;
    let refs = references(&bench, config)?;
    Ok(Prepared { bench, val, refs })
}

fn run_entry(entry: &SuiteEntry, suite: &SuiteConfig, grids: &Grid, config: &ExperimentConfig) -> Vec<CellRecord> {
    let prepared = prepare(entry, suite, config);
    let cache = AutoencoderCache::new();
    let mut out = Vec::new();
    for (method, hps) in grids {
        for hp in hps {
            let seed = cell_seed(config.base_seed, &entry.class, *method, hp.index, entry.repeat);
            let mut spec = hp.spec.clone().with_seed(seed);
            let ae_key = autoencoder_key(hp);
            spec.ae_seed = Some(rng::derive_seed(&[
                config.base_seed,
                rng::hash_str(&entry.id),
                rng::hash_str(&ae_key),
            ]));
            let start = Instant::now();
            let result = match &prepared {
                Ok(p) => guarded(|| score_cell(p, &spec, &cache, &ae_key)),
                Err(e) => Err(format!("dataset generation failed: {e}")),
            };
            let wall_time = config.record_timing.then(|| start.elapsed().as_secs_f64());
            let (n_synthetic, cover, error, failure) = match result {
                Ok((n, c, e)) => (n, Some(c), Some(e), None),
                Err(msg) => {
                    log::warn!("{} {} hp {}: {msg}", entry.id, method, hp.index);
                    (0, None, None, Some(msg))
                }
            };
            out.push(CellRecord {
                dataset: entry.class.clone(),
                instance: entry.id.clone(),
                method: *method,
                hp_index: hp.index,
                hp: spec,
                repeat: entry.repeat,
                seed,
                n_synthetic,
                cover,
                error,
                roc_auc_val: None,
                roc_auc_test: None,
                failure,
                wall_time,
            });
        }
    }
    out
}

fn score_cell(
    p: &Prepared,
    spec: &crate::oversampler::OversamplerSpec,
    cache: &AutoencoderCache,
    ae_key: &str,
) -> Result<(usize, f64, f64)> {
    let points = if spec.method == Method::NoOs {
        p.refs.dataset_minority.clone()
    } else {
        let aug = oversample_cached(&p.bench.dataset, &p.val, spec, Some((cache, ae_key)))?;
        if aug.n_syn() == 0 {
            return Err(Error::InvalidArgument("no synthetic rows to score".into()));
        }
        p.bench.to_geometric(&aug.synthetic)?
    };
    let c = cover(points.view(), p.refs.cover.view())?;
    let e = error_metric(points.view(), p.refs.minority.view(), p.refs.majority.view())?;
    Ok((points.nrows(), c, e))
}
