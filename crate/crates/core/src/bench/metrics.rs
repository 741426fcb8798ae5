use ndarray::{concatenate, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interp::NeighborIndex;
use crate::{Error, Result};

/// Cover and error of one synthetic set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cover: f64,
    pub error: f64,
    pub n_synthetic: usize,
    pub n_reference: usize,
    pub seed: u64,
}

fn nonempty(m: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    Ok(())
}

fn same_width(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("point widths differ: {} vs {}", a.ncols(), b.ncols())));
    }
    Ok(())
}

/// Mean distance from each reference point to its nearest synthetic point.
pub fn cover(synthetic: ArrayView2<'_, f64>, reference: ArrayView2<'_, f64>) -> Result<f64> {
    nonempty(&synthetic, "synthetic set")?;
    nonempty(&reference, "reference set")?;
    same_width(&synthetic, &reference)?;
    let index = NeighborIndex::kd_tree(synthetic.to_owned());
    let reference = reference.as_standard_layout();
    let distances: Vec<f64> = (0..reference.nrows())
        .into_par_iter()
        .map(|i| {
            let row = reference.row(i);
            index.nearest(row.as_slice().expect("standard layout")).map(|h| h.distance)
        })
        .collect::<Result<_>>()?;
    // summed in row order so the result does not depend on thread scheduling
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

/// Index of the nearest reference for every synthetic point over the union
/// `[minority; majority]`. Minority rows come first, so exact ties resolve to
/// a minority point.
pub fn nearest_reference(
    synthetic: ArrayView2<'_, f64>,
    minority: ArrayView2<'_, f64>,
    majority: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    nonempty(&synthetic, "synthetic set")?;
    nonempty(&minority, "minority reference set")?;
    same_width(&synthetic, &minority)?;
    same_width(&minority, &majority)?;
    let all = concatenate(Axis(0), &[minority, majority]).map_err(|e| Error::Shape(e.to_string()))?;
    let index = NeighborIndex::kd_tree(all);
    let synthetic = synthetic.as_standard_layout();
    (0..synthetic.nrows())
        .into_par_iter()
        .map(|i| {
            let row = synthetic.row(i);
            index.nearest(row.as_slice().expect("standard layout")).map(|h| h.index)
        })
        .collect()
}

/// Fraction of synthetic points whose nearest reference is a majority point.
pub fn error_metric(
    synthetic: ArrayView2<'_, f64>,
    minority: ArrayView2<'_, f64>,
    majority: ArrayView2<'_, f64>,
) -> Result<f64> {
    let n_min = minority.nrows();
    let nearest = nearest_reference(synthetic, minority, majority)?;
    let invalid = nearest.iter().filter(|&&i| i >= n_min).count();
    Ok(invalid as f64 / nearest.len() as f64)
}

/// Indices of the points not strictly dominated by any other point, both
/// coordinates minimized, in input order. Points with a NaN coordinate are
/// never on the front.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| !points[i].0.is_nan() && !points[i].1.is_nan())
        .collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut front = Vec::new();
    // lowest second coordinate among points with strictly smaller first coordinate
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let c = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == c {
            j += 1;
        }
        let group_min = points[order[i]].1;
        if group_min < best_before {
            front.extend(order[i..j].iter().copied().filter(|&k| points[k].1 == group_min));
        }
        best_before = best_before.min(group_min);
        i = j;
    }
    front.sort_unstable();
    front
}
