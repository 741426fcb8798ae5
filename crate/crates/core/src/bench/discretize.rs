use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::tabular::{ColumnSpec, MixedDataset, TabularSchema};
use crate::{rng, Error, Result};

const RANGE_TOLERANCE: f64 = 1e-9;

/// Shuffled bin labels of one discretized coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinFeature {
    /// Coordinate index in the geometric space.
    pub coordinate: usize,
    /// `permutation[bin]` is the category code of geometric bin `bin`.
    pub permutation: Vec<usize>,
    /// `inverse[code]` is the geometric bin of category code `code`.
    pub inverse: Vec<usize>,
}

/// Discretization of a `dims`-dimensional space into `bins` equal bins on
/// [-1, 1] for a subset of coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMaps {
    pub dims: usize,
    pub bins: usize,
    /// Sorted by coordinate.
    pub features: Vec<BinFeature>,
}

/// Geometric bin of `v` among `m` equal bins on [-1, 1].
pub fn bin_index(v: f64, m: usize) -> usize {
    let b = ((v + 1.0) * m as f64 / 2.0).floor();
    b.clamp(0.0, (m - 1) as f64) as usize
}

/// Centre of geometric bin `k`: `-1 + (2k + 1) / m`.
pub fn bin_center(k: usize, m: usize) -> f64 {
    -1.0 + (2 * k + 1) as f64 / m as f64
}

impl BinMaps {
    /// Random permutations for `coordinates`, drawn from `seed`.
    pub fn random(dims: usize, coordinates: &[usize], bins: usize, seed: u64) -> Result<Self> {
        let mut coords = coordinates.to_vec();
        coords.sort_unstable();
        coords.dedup();
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        if coords.iter().any(|&c| c >= dims) {
            return Err(Error::InvalidArgument(format!("coordinates {coords:?} out of range for {dims} dims")));
        }
        let mut r = rng::stream(seed, 0);
        let features = coords
            .into_iter()
            .map(|coordinate| {
                let mut permutation: Vec<usize> = (0..bins).collect();
                permutation.shuffle(&mut r);
                BinFeature::new(coordinate, permutation).expect("shuffle is a bijection")
            })
            .collect();
        Ok(BinMaps { dims, bins, features })
    }

    /// Identity permutations; useful in tests.
    pub fn identity(dims: usize, coordinates: &[usize], bins: usize) -> Result<Self> {
        let mut maps = BinMaps::random(dims, coordinates, bins, 0)?;
        for f in &mut maps.features {
            *f = BinFeature::new(f.coordinate, (0..bins).collect())?;
        }
        Ok(maps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidArgument("need at least 2 bins".into()));
        }
        let mut last = None;
        for f in &self.features {
            if f.coordinate >= self.dims || last.is_some_and(|l| l >= f.coordinate) {
                return Err(Error::InvalidArgument("bin map coordinates must be sorted and in range".into()));
            }
            last = Some(f.coordinate);
            if f.permutation.len() != self.bins || BinFeature::new(f.coordinate, f.permutation.clone())? != *f {
                return Err(Error::InvalidArgument("bin map permutation is inconsistent".into()));
            }
        }
        Ok(())
    }

    pub fn coordinates(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.coordinate).collect()
    }

    fn feature_of(&self, coordinate: usize) -> Option<&BinFeature> {
        self.features.iter().find(|f| f.coordinate == coordinate)
    }

    /// Maps feature matrices back to geometric coordinates: codes become the
    /// centre of their un-permuted bin, continuous values pass through.
    /// Continuous columns hold the non-discretized coordinates in order and
    /// categorical columns the discretized ones.
    pub fn to_geometric(&self, continuous: ArrayView2<'_, f64>, codes: ArrayView2<'_, usize>) -> Result<Array2<f64>> {
        let n_disc = self.features.len();
        if codes.ncols() != n_disc || continuous.ncols() + n_disc != self.dims || continuous.nrows() != codes.nrows() {
            return Err(Error::Shape(format!(
                "{} continuous + {} categorical columns do not match {} dims with {} discretized",
                continuous.ncols(),
                codes.ncols(),
                self.dims,
                n_disc
            )));
        }
        let mut out = Array2::zeros((continuous.nrows(), self.dims));
        let (mut ci, mut di) = (0, 0);
        for coord in 0..self.dims {
            match self.feature_of(coord) {
                Some(f) => {
                    for (o, &c) in out.column_mut(coord).iter_mut().zip(codes.column(di)) {
                        let bin = *f
                            .inverse
                            .get(c)
                            .ok_or_else(|| Error::InvalidArgument(format!("code {c} out of range for {} bins", self.bins)))?;
                        *o = bin_center(bin, self.bins);
                    }
                    di += 1;
                }
                None => {
                    out.column_mut(coord).assign(&continuous.column(ci));
                    ci += 1;
                }
            }
        }
        Ok(out)
    }

    /// Geometric coordinates of every row of a dataset produced by
    /// [`discretize`] (or of a purely continuous one when no coordinate is
    /// discretized).
    pub fn dataset_to_geometric(&self, dataset: &MixedDataset) -> Result<Array2<f64>> {
        self.to_geometric(dataset.continuous(), dataset.categorical())
    }
}

impl BinFeature {
    pub fn new(coordinate: usize, permutation: Vec<usize>) -> Result<Self> {
        let m = permutation.len();
        let mut inverse = vec![usize::MAX; m];
        for (bin, &code) in permutation.iter().enumerate() {
            if code >= m || inverse[code] != usize::MAX {
                return Err(Error::InvalidArgument(format!("{permutation:?} is not a permutation")));
            }
            inverse[code] = bin;
        }
        Ok(BinFeature {
            coordinate,
            permutation,
            inverse,
        })
    }
}

/// Discretizes `coordinates` of an all-continuous dataset into `bins`
/// shuffled bins drawn from `seed`.
pub fn discretize(
    dataset: &MixedDataset,
    coordinates: &[usize],
    bins: usize,
    seed: u64,
) -> Result<(MixedDataset, BinMaps)> {
    let maps = BinMaps::random(dataset.schema().n_continuous(), coordinates, bins, seed)?;
    Ok((apply_bins(dataset, &maps)?, maps))
}

/// Replaces the coordinates covered by `maps` with shuffled bin codes.
///
/// `dataset` must be all-continuous with one column per coordinate. The
/// result keeps the column order; discretized columns become categorical with
/// vocabulary `"0"` .. `"M-1"`.
pub fn apply_bins(dataset: &MixedDataset, maps: &BinMaps) -> Result<MixedDataset> {
    maps.validate()?;
    let schema = dataset.schema();
    if schema.n_categorical() != 0 || schema.n_continuous() != maps.dims {
        return Err(Error::Schema(format!(
            "discretize needs {} continuous features and no categorical ones",
            maps.dims
        )));
    }
    let cont = dataset.continuous();
    for f in &maps.features {
        if let Some(v) = cont
            .column(f.coordinate)
            .iter()
            .find(|v| v.abs() > 1.0 + RANGE_TOLERANCE)
        {
            return Err(Error::InvalidArgument(format!(
                "value {v} in column {} is outside [-1, 1]",
                f.coordinate
            )));
        }
    }

    let vocab: Vec<String> = (0..maps.bins).map(|c| c.to_string()).collect();
    let coords = maps.coordinates();
    let mut columns = Vec::new();
    let mut feature_idx = 0;
    for col in &schema.columns {
        if col.name == schema.target {
            columns.push(col.clone());
            continue;
        }
        if coords.contains(&feature_idx) {
            columns.push(ColumnSpec::categorical(col.name.clone(), vocab.iter().cloned()));
        } else {
            columns.push(col.clone());
        }
        feature_idx += 1;
    }
    let new_schema = TabularSchema::new(columns, schema.target.clone(), schema.minority_label.clone())?;

    let n = dataset.len();
    let kept: Vec<usize> = (0..maps.dims).filter(|c| !coords.contains(c)).collect();
    let new_cont = cont.select(ndarray::Axis(1), &kept);
    let mut codes = Array2::zeros((n, coords.len()));
    for (j, f) in maps.features.iter().enumerate() {
        for (code, &v) in codes.column_mut(j).iter_mut().zip(cont.column(f.coordinate)) {
            *code = f.permutation[bin_index(v, maps.bins)];
        }
    }
    MixedDataset::new(Arc::new(new_schema), new_cont, codes, dataset.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::SphereSpec;
    use ndarray::array;

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(-1.0, 7), 0);
        assert_eq!(bin_index(1.0, 7), 6);
        assert_eq!(bin_index(-0.3, 2), 0);
        assert_eq!(bin_index(0.3, 2), 1);
        assert!((bin_center(0, 7) + 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn permutations_are_bijections() {
        let maps = BinMaps::random(6, &[2, 0, 1], 7, 3).unwrap();
        assert_eq!(maps.coordinates(), vec![0, 1, 2]);
        for f in &maps.features {
            for (bin, &code) in f.permutation.iter().enumerate() {
                assert_eq!(f.inverse[code], bin);
            }
        }
        maps.validate().unwrap();
        assert!(BinFeature::new(0, vec![0, 0, 1]).is_err());
        assert!(BinMaps::random(3, &[0], 1, 0).is_err());
    }

    #[test]
    fn continuous_rows_pass_through() {
        let maps = BinMaps::identity(3, &[], 7).unwrap();
        let cont = array![[0.1, -0.2, 0.3]];
        let geo = maps.to_geometric(cont.view(), Array2::zeros((1, 0)).view()).unwrap();
        assert_eq!(geo, cont);
    }

    #[test]
    fn round_trip_within_half_bin() {
        let spec = SphereSpec::new(6, 500, 0.1, 2).unwrap();
        let d = spec.sample();
        for maps in [
            BinMaps::identity(6, &[0, 1, 2], 7).unwrap(),
            BinMaps::random(6, &[0, 1, 2], 7, 9).unwrap(),
        ] {
            let disc = apply_bins(&d, &maps).unwrap();
            assert_eq!(disc.schema().n_categorical(), 3);
            assert!(disc.categorical().iter().all(|&c| c < 7));
            let geo = maps.dataset_to_geometric(&disc).unwrap();
            for (a, b) in geo.iter().zip(d.continuous().iter()) {
                assert!((a - b).abs() <= 1.0 / 7.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_values_outside_range() {
        let spec = SphereSpec::new(3, 20, 0.1, 2).unwrap();
        let d = spec.sample();
        let scaled = d.with_features(d.continuous().mapv(|v| v * 3.0), Array2::zeros((20, 0))).unwrap();
        let maps = BinMaps::identity(3, &[0, 1, 2], 7).unwrap();
        assert!(apply_bins(&scaled, &maps).is_err());
        assert!(discretize(&d, &[0], 7, 1).is_ok());
        let bad = maps.to_geometric(array![[0.0; 0]].view(), array![[0usize, 1, 9]].view());
        assert!(bad.is_err());
    }
}
