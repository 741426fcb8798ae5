//! Schemas, CSV ingestion, standardization and stratified splitting.

mod csv_io;
mod dataset;
mod preprocess;
mod schema;
mod split;

pub use csv_io::{format_float, load_csv, load_csv_with_stats, read_csv, write_csv, write_csv_to, LoadedCsv, UNSEEN_TOKEN};
pub use dataset::{MixedDataset, MixedRow};
pub use preprocess::{fit_transform, PreprocessState};
pub use schema::{ColumnKind, ColumnSpec, FeatureSlot, TabularSchema};
pub use split::{apportion, stratified_split, Split};
