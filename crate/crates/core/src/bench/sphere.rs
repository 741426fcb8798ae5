use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::tabular::{ColumnSpec, MixedDataset, TabularSchema};
use crate::{rng, Error, Result};

/// Target column of generated sphere datasets.
pub const TARGET: &str = "label";
pub const MINORITY: &str = "minority";
pub const MAJORITY: &str = "majority";

/// `P(|x_0| <= alpha)` for `x` uniform on the unit sphere in `dims`
/// dimensions. `x_0^2` follows `Beta(1/2, (dims - 1)/2)`.
pub fn slice_probability(alpha: f64, dims: usize) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    if alpha >= 1.0 {
        return 1.0;
    }
    beta_reg(0.5, (dims as f64 - 1.0) / 2.0, alpha * alpha)
}

/// Half-width `alpha` of the slice `|x_0| <= alpha` holding a fraction `mu`
/// of the sphere's surface, by bisection on [`slice_probability`].
pub fn solve_alpha(mu: f64, dims: usize) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidArgument(format!("minority fraction {mu} must be in (0, 1]")));
    }
    if dims < 3 {
        return Err(Error::InvalidArgument(format!("sphere needs at least 3 dimensions, got {dims}")));
    }
    if mu == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slice_probability(mid, dims) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniformly random rotation: Gram-Schmidt on a Gaussian matrix. The
/// implied QR factor has a positive diagonal, which makes the result Haar
/// distributed.
pub fn random_rotation(dims: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, 0);
    let g = Array2::from_shape_simple_fn((dims, dims), || r.sample::<f64, _>(StandardNormal));
    let mut q = Array2::<f64>::zeros((dims, dims));
    for j in 0..dims {
        let mut v = g.column(j).to_owned();
        // two passes keep the columns orthogonal to working precision
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.scaled_add(-proj, &qi);
            }
        }
        let norm = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / norm));
    }
    q
}

/// Generator settings for one sphere dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub dims: usize,
    pub n_samples: usize,
    pub minority_frac: f64,
    pub slice_alpha: f64,
    /// Row-major orthogonal matrix; rows are rotated as `x R^T`.
    pub rotation: Array2<f64>,
    pub seed: u64,
}

impl SphereSpec {
    /// Solves `alpha` for `minority_frac` and draws the rotation from `seed`.
    pub fn new(dims: usize, n_samples: usize, minority_frac: f64, seed: u64) -> Result<Self> {
        if !(minority_frac > 0.0 && minority_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "minority fraction {minority_frac} must be in (0, 1)"
            )));
        }
        Ok(SphereSpec {
            dims,
            n_samples,
            minority_frac,
            slice_alpha: solve_alpha(minority_frac, dims)?,
            rotation: random_rotation(dims, seed),
            seed,
        })
    }

    pub fn with_rotation(mut self, rotation: Array2<f64>) -> Result<Self> {
        if rotation.dim() != (self.dims, self.dims) {
            return Err(Error::Shape(format!("rotation must be {0}x{0}", self.dims)));
        }
        self.rotation = rotation;
        Ok(self)
    }

    pub fn n_minority(&self) -> usize {
        (self.n_samples as f64 * self.minority_frac).round() as usize
    }

    pub fn n_majority(&self) -> usize {
        self.n_samples - self.n_minority()
    }

    pub fn schema(&self) -> TabularSchema {
        let mut cols: Vec<ColumnSpec> = (0..self.dims).map(|i| ColumnSpec::continuous(format!("x{i}"))).collect();
        cols.push(ColumnSpec::categorical(TARGET, [MAJORITY, MINORITY]));
        TabularSchema::new(cols, TARGET, MINORITY).expect("generated schema is valid")
    }

    /// Rotated unit vectors from the minority slice (`minority = true`) or its
    /// complement, drawn on random stream `stream`.
    pub fn sample_region(&self, n: usize, minority: bool, stream: u64) -> Array2<f64> {
        let mut r = rng::stream(self.seed, stream);
        let mut out = Array2::zeros((n, self.dims));
        let mut filled = 0;
        let mut v = Array1::<f64>::zeros(self.dims);
        while filled < n {
            v.mapv_inplace(|_| r.sample(StandardNormal));
            let norm = v.dot(&v).sqrt();
            if norm == 0.0 {
                continue;
            }
            v /= norm;
            if (v[0].abs() <= self.slice_alpha) == minority {
                out.row_mut(filled).assign(&self.rotation.dot(&v));
                filled += 1;
            }
        }
        out
    }

    /// The dataset itself: minority rows first, then majority rows.
    pub fn sample(&self) -> MixedDataset {
        self.sample_with_streams(1, 2, self.n_minority(), self.n_majority())
    }

    /// Further labelled rows from the same manifolds on other streams.
    pub fn sample_with_streams(&self, min_stream: u64, maj_stream: u64, n_min: usize, n_maj: usize) -> MixedDataset {
        let min = self.sample_region(n_min, true, min_stream);
        let maj = self.sample_region(n_maj, false, maj_stream);
        let cont = ndarray::concatenate![ndarray::Axis(0), min, maj];
        let labels = (0..n_min + n_maj).map(|i| i < n_min).collect();
        let n = n_min + n_maj;
        MixedDataset::new(Arc::new(self.schema()), cont, Array2::zeros((n, 0)), labels)
            .expect("unit vectors are finite")
    }
}

/// Sphere rows in the un-rotated frame, for checking the slice condition.
pub fn unrotate(spec: &SphereSpec, rows: &Array2<f64>) -> Array2<f64> {
    rows.dot(&spec.rotation)
}
