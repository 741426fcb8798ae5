//! Experiment runners: cover / error on the sphere benchmark and ROC-AUC on
//! real datasets, plus the classifiers and report formats they use.
//!
//! Every cell draws its seeds from the base seed and its identifiers, so a
//! report is byte-identical across runs and thread counts.

mod artificial;
mod classifier;
mod config;
mod real;
mod report;
mod roc;

use std::panic::{catch_unwind, AssertUnwindSafe};

pub use artificial::{cell_seed, run_artificial};
pub use classifier::{knn_classifier, ClassifierSpec};
pub use config::{
    ArtificialConfig, DatasetSource, ExperimentConfig, HpConfig, OutputPaths, OversamplerGrid, RealConfig, Task,
};
pub use real::{load_source, run_real, score_split, split_seed};
pub use report::{
    aggregate_groups, baseline_mean, mark_pareto, mean, select_hps, summarize, write_pareto_table, BaselineRecord,
    CellRecord, GroupAggregate, MethodSummary, RunReport, Selection, SelectionMode, REPORT_FORMAT_VERSION,
};
pub use roc::roc_auc;

/// Runs `f`, turning errors and panics into a message so that one bad cell
/// cannot abort a run.
fn guarded<T>(f: impl FnOnce() -> crate::Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(match panic.downcast_ref::<&str>() {
            Some(s) => format!("panic: {s}"),
            None => match panic.downcast_ref::<String>() {
                Some(s) => format!("panic: {s}"),
                None => "panic".to_string(),
            },
        }),
    }
}
