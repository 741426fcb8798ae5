use std::time::Instant;

use rayon::prelude::*;

use super::artificial::{autoencoder_key, cell_seed, expand_grids, Grid};
use super::report::{aggregate_groups, select_hps, summarize, BaselineRecord, CellRecord, RunReport, REPORT_FORMAT_VERSION};
use super::{guarded, roc_auc, ClassifierSpec, DatasetSource, ExperimentConfig, Task};
use crate::oversampler::{oversample_cached, AutoencoderCache, OversamplerSpec};
use crate::tabular::{load_csv, stratified_split, MixedDataset, Split, TabularSchema};
use crate::{rng, Error, Result};

/// Loads a dataset and its schema.
pub fn load_source(source: &DatasetSource) -> Result<MixedDataset> {
    let schema = TabularSchema::from_json_file(&source.schema)?;
    load_csv(&source.data, &schema)
}

/// Seed of the split of `dataset` in `repeat`; shared by all oversamplers.
pub fn split_seed(base_seed: u64, dataset: &str, repeat: usize) -> u64 {
    rng::derive_seed(&[base_seed, rng::hash_str(dataset), repeat as u64, 0x5e1f])
}

/// Validation and test ROC-AUC of `classifier` trained on `train`.
pub fn score_split(classifier: &ClassifierSpec, train: &MixedDataset, split: &Split) -> Result<(f64, f64)> {
    let scores = classifier.fit_score(train, &[&split.val, &split.test])?;
    let val = roc_auc(&scores[0], split.val.labels())?;
    let test = roc_auc(&scores[1], split.test.labels())?;
    Ok((val, test))
}

/// ROC-AUC of every oversampler and HP on every real dataset.
///
/// Each repeat splits the data 60/20/20 (configurable), oversamples the
/// training fold, fits the classifier on the augmented fold and scores the
/// validation and test folds. A classifier-only baseline is run on every
/// split. Failing cells are recorded and the run continues.
pub fn run_real(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if config.task != Task::Real {
        return Err(Error::InvalidArgument("configuration is not for the real-data task".into()));
    }
    config.check_files()?;
    let grids = expand_grids(config, None)?;

    let loaded: Vec<std::result::Result<MixedDataset, String>> = config
        .real
        .datasets
        .iter()
        .map(|d| load_source(d).map_err(|e| format!("cannot load {}: {e}", d.id)))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..config.real.datasets.len())
        .flat_map(|d| (0..config.repeats).map(move |r| (d, r)))
        .collect();
    let per_job: Vec<(BaselineRecord, Vec<CellRecord>)> = jobs
        .par_iter()
        .map(|&(d, repeat)| run_split(&config.real.datasets[d].id, &loaded[d], repeat, &grids, config))
        .collect();

    let mut baselines = Vec::new();
    let mut records = Vec::new();
    for (b, cells) in per_job {
        baselines.push(b);
        records.extend(cells);
    }
    let groups = aggregate_groups(&records);
    let selections = select_hps(&groups, &baselines);
    let methods: Vec<_> = config.oversamplers.iter().map(|g| g.method).collect();
    let dataset_ids: Vec<String> = config.real.datasets.iter().map(|d| d.id.clone()).collect();
    let summary = summarize(&selections, &methods, &dataset_ids);
    let failed_cells = records.iter().filter(|r| !r.ok()).count();
    Ok(RunReport {
        format_version: REPORT_FORMAT_VERSION,
        task: Task::Real,
        config: config.clone(),
        records,
        baselines,
        groups,
        selections,
        summary,
        failed_cells,
    })
}

fn run_split(
    dataset_id: &str,
    data: &std::result::Result<MixedDataset, String>,
    repeat: usize,
    grids: &Grid,
    config: &ExperimentConfig,
) -> (BaselineRecord, Vec<CellRecord>) {
    let seed = split_seed(config.base_seed, dataset_id, repeat);
    let split = match data {
        Ok(d) => stratified_split(d, config.real.split, seed).map_err(|e| format!("split failed: {e}")),
        Err(e) => Err(e.clone()),
    };
    let base = split
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|s| guarded(|| score_split(&config.classifier, &s.train, s)));
    let baseline = BaselineRecord {
        dataset: dataset_id.to_string(),
        repeat,
        seed,
        roc_auc_val: base.as_ref().ok().map(|v| v.0),
        roc_auc_test: base.as_ref().ok().map(|v| v.1),
        failure: base.err(),
    };

    let cache = AutoencoderCache::new();
    let mut cells = Vec::new();
    for (method, hps) in grids {
        for hp in hps {
            let seed = cell_seed(config.base_seed, dataset_id, *method, hp.index, repeat);
            let mut spec = hp.spec.clone().with_seed(seed);
            let ae_key = autoencoder_key(hp);
            spec.ae_seed = Some(rng::derive_seed(&[
                config.base_seed,
                rng::hash_str(dataset_id),
                repeat as u64,
                rng::hash_str(&ae_key),
            ]));
            let start = Instant::now();
            let result = match &split {
                Ok(s) => guarded(|| score_cell(s, &spec, &config.classifier, &cache, &ae_key)),
                Err(e) => Err(e.clone()),
            };
            let wall_time = config.record_timing.then(|| start.elapsed().as_secs_f64());
            let (n_synthetic, val, test, failure) = match result {
                Ok((n, v, t)) => (n, Some(v), Some(t), None),
                Err(msg) => {
                    log::warn!("{dataset_id} r{repeat} {method} hp {}: {msg}", hp.index);
                    (0, None, None, Some(msg))
                }
            };
            cells.push(CellRecord {
                dataset: dataset_id.to_string(),
                instance: format!("{dataset_id}-r{repeat}"),
                method: *method,
                hp_index: hp.index,
                hp: spec,
                repeat,
                seed,
                n_synthetic,
                cover: None,
                error: None,
                roc_auc_val: val,
                roc_auc_test: test,
                failure,
                wall_time,
            });
        }
    }
    (baseline, cells)
}

fn score_cell(
    split: &Split,
    spec: &OversamplerSpec,
    classifier: &ClassifierSpec,
    cache: &AutoencoderCache,
    ae_key: &str,
) -> Result<(usize, f64, f64)> {
    let aug = oversample_cached(&split.train, &split.val, spec, Some((cache, ae_key)))?;
    let (val, test) = score_split(classifier, &aug.combined()?, split)?;
    Ok((aug.n_syn(), val, test))
}
