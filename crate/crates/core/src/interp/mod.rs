//! Feature-space oversamplers and the exact k-NN search they share.
//!
//! Poly is implemented with the star topology only: every synthetic lies on
//! the segment between a minority row and the minority centroid.

mod neighbors;
mod sampling;

pub use neighbors::{median_std, nc_distance, squared_euclidean, Metric, Neighbor, NeighborIndex};
pub use sampling::{poly_star, ros, smote, smote_nc, Provenance, SyntheticBatch};
