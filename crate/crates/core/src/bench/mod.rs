//! Artificial benchmark on the unit sphere.
//!
//! The minority manifold is the slice `|x_0| <= alpha` of the unit sphere and
//! the majority manifold its complement, both randomly rotated. Multimodal
//! variants replace half of the coordinates with shuffled bin codes. Cover
//! and error compare synthetic minority points with fresh samples from the
//! true manifolds after mapping codes back to bin centres.

mod discretize;
mod metrics;
mod sphere;
mod suite;

pub use discretize::{apply_bins, bin_center, bin_index, discretize, BinFeature, BinMaps};
pub use metrics::{cover, error_metric, nearest_reference, pareto_front, MetricReport};
pub use sphere::{random_rotation, slice_probability, solve_alpha, unrotate, SphereSpec, MAJORITY, MINORITY, TARGET};
pub use suite::{
    discretized_coordinates, make_benchmark_suite, suite_entries, BenchmarkDataset, Modality, Sidecar, SuiteConfig,
    SuiteEntry,
};
