use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::neighbors::{median_std, NeighborIndex};
use crate::{rng, Error, Result};

/// Where one synthetic row came from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    /// Minority row the synthetic was grown from.
    pub base: usize,
    /// Interpolation partner; `None` for copies and for the Poly centroid.
    pub neighbor: Option<usize>,
    /// Interpolation coefficient, 0 for copies.
    pub t: f64,
}

/// Rows produced by one oversampler call.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub continuous: Array2<f64>,
    pub categorical: Array2<usize>,
    pub provenance: Vec<Provenance>,
}

impl SyntheticBatch {
    pub fn empty(n_cont: usize, n_cat: usize) -> Self {
        SyntheticBatch {
            continuous: Array2::zeros((0, n_cont)),
            categorical: Array2::zeros((0, n_cat)),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

// Stream 0 draws base rows for every method, so SMOTE with t = 0 picks the
// same bases as ROS. Stream 1 draws neighbors and coefficients.
const BASE_STREAM: u64 = 0;
const STEP_STREAM: u64 = 1;

fn require_rows(n: usize, method: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::TooFewRows(format!("{method} needs at least one minority row")));
    }
    Ok(())
}

/// Random oversampling: `n_syn` uniform draws with replacement.
pub fn ros(
    continuous: ArrayView2<'_, f64>,
    categorical: ArrayView2<'_, usize>,
    n_syn: usize,
    seed: u64,
) -> Result<SyntheticBatch> {
    let n = continuous.nrows();
    if categorical.nrows() != n {
        return Err(Error::Shape("continuous and categorical row counts differ".into()));
    }
    require_rows(n, "ROS")?;
    let mut base_rng = rng::stream(seed, BASE_STREAM);
    let bases: Vec<usize> = (0..n_syn).map(|_| base_rng.random_range(0..n)).collect();
    Ok(SyntheticBatch {
        continuous: continuous.select(Axis(0), &bases),
        categorical: categorical.select(Axis(0), &bases),
        provenance: bases
            .into_iter()
            .map(|base| Provenance {
                base,
                neighbor: None,
                t: 0.0,
            })
            .collect(),
    })
}

fn effective_k(n: usize, k: usize, method: &str) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument(format!("{method}: k must be positive")));
    }
    if n <= k {
        log::warn!("{method}: only {n} minority rows for k = {k}, using k = {}", n - 1);
        return Ok(n - 1);
    }
    Ok(k)
}

/// Neighbor lists of every stored point, excluding itself.
fn neighbor_lists(index: &NeighborIndex, k: usize) -> Result<Vec<Vec<usize>>> {
    (0..index.len())
        .map(|i| Ok(index.knn_of_point(i, k)?.into_iter().map(|h| h.index).collect()))
        .collect()
}

/// SMOTE on a real matrix.
///
/// Each synthetic is `x + t (x_nn - x)` for a uniform base `x`, a uniform pick
/// among its `k` nearest minority neighbors and `t ~ U(0, 1)`.
pub fn smote(points: ArrayView2<'_, f64>, n_syn: usize, k: usize, seed: u64) -> Result<SyntheticBatch> {
    smote_with(points, n_syn, k, seed, None)
}

pub(crate) fn smote_with(
    points: ArrayView2<'_, f64>,
    n_syn: usize,
    k: usize,
    seed: u64,
    fixed_t: Option<f64>,
) -> Result<SyntheticBatch> {
    let n = points.nrows();
    require_rows(n, "SMOTE")?;
    let empty_cat = Array2::zeros((n, 0));
    if n == 1 {
        log::warn!("SMOTE: a single minority row, falling back to duplication");
        return ros(points, empty_cat.view(), n_syn, seed);
    }
    let k = effective_k(n, k, "SMOTE")?;
    let index = NeighborIndex::kd_tree(points.to_owned());
    let neighbors = neighbor_lists(&index, k)?;

    let mut base_rng = rng::stream(seed, BASE_STREAM);
    let mut step_rng = rng::stream(seed, STEP_STREAM);
    let mut out = Array2::zeros((n_syn, points.ncols()));
    let mut provenance = Vec::with_capacity(n_syn);
    for mut row in out.rows_mut() {
        let base = base_rng.random_range(0..n);
        let nn = neighbors[base][step_rng.random_range(0..k)];
        let t = match fixed_t {
            Some(t) => t,
            None => step_rng.random::<f64>(),
        };
        let x = points.row(base);
        let y = points.row(nn);
        row.assign(&(&x + &((&y - &x) * t)));
        provenance.push(Provenance {
            base,
            neighbor: Some(nn),
            t,
        });
    }
    Ok(SyntheticBatch {
        continuous: out,
        categorical: Array2::zeros((n_syn, 0)),
        provenance,
    })
}

/// SMOTE-NC on mixed minority rows.
///
/// Neighbors use the augmented distance with `med` taken as the median
/// per-column standard deviation of the minority continuous features.
/// Continuous features are interpolated as in [`smote`]; each categorical
/// feature is the most frequent code among the `k` neighbors, ties going to
/// the lowest code.
pub fn smote_nc(
    continuous: ArrayView2<'_, f64>,
    categorical: ArrayView2<'_, usize>,
    n_syn: usize,
    k: usize,
    seed: u64,
) -> Result<SyntheticBatch> {
    let unsupported = |reason: &str| Error::UnsupportedSchema {
        method: "SMOTE-NC".into(),
        reason: reason.into(),
    };
    if continuous.ncols() == 0 {
        return Err(unsupported("no continuous features"));
    }
    if categorical.ncols() == 0 {
        return Err(unsupported("no categorical features"));
    }
    let n = continuous.nrows();
    if categorical.nrows() != n {
        return Err(Error::Shape("continuous and categorical row counts differ".into()));
    }
    require_rows(n, "SMOTE-NC")?;
    if n == 1 {
        log::warn!("SMOTE-NC: a single minority row, falling back to duplication");
        return ros(continuous, categorical, n_syn, seed);
    }
    let k = effective_k(n, k, "SMOTE-NC")?;
    let med = median_std(continuous);
    let index = NeighborIndex::nc_augmented(continuous.to_owned(), categorical.to_owned(), med)?;
    let neighbors = neighbor_lists(&index, k)?;

    // the categorical part only depends on the base row
    let modes: Vec<Vec<usize>> = neighbors
        .iter()
        .map(|nbrs| {
            (0..categorical.ncols())
                .map(|j| mode(nbrs.iter().map(|&i| categorical[[i, j]])))
                .collect()
        })
        .collect();

    let mut base_rng = rng::stream(seed, BASE_STREAM);
    let mut step_rng = rng::stream(seed, STEP_STREAM);
    let mut cont = Array2::zeros((n_syn, continuous.ncols()));
    let mut cat = Array2::zeros((n_syn, categorical.ncols()));
    let mut provenance = Vec::with_capacity(n_syn);
    for s in 0..n_syn {
        let base = base_rng.random_range(0..n);
        let nn = neighbors[base][step_rng.random_range(0..k)];
        let t: f64 = step_rng.random();
        let x = continuous.row(base);
        let y = continuous.row(nn);
        cont.row_mut(s).assign(&(&x + &((&y - &x) * t)));
        cat.row_mut(s).assign(&Array1::from(modes[base].clone()));
        provenance.push(Provenance {
            base,
            neighbor: Some(nn),
            t,
        });
    }
    Ok(SyntheticBatch {
        continuous: cont,
        categorical: cat,
        provenance,
    })
}

/// Most frequent value, lowest value on ties.
fn mode(values: impl Iterator<Item = usize>) -> usize {
    let mut vals: Vec<usize> = values.collect();
    vals.sort_unstable();
    let mut best = (0usize, 0usize);
    let mut i = 0;
    while i < vals.len() {
        let j = vals[i..].iter().position(|&v| v != vals[i]).map_or(vals.len(), |p| i + p);
        if j - i > best.1 {
            best = (vals[i], j - i);
        }
        i = j;
    }
    best.0
}

/// Poly with star topology: `x + t (c - x)` with `c` the minority centroid.
pub fn poly_star(points: ArrayView2<'_, f64>, n_syn: usize, seed: u64) -> Result<SyntheticBatch> {
    let n = points.nrows();
    require_rows(n, "Poly")?;
    if n < 2 {
        log::warn!("Poly: a single minority row, falling back to duplication");
        return ros(points, Array2::zeros((n, 0)).view(), n_syn, seed);
    }
    let centroid = points.mean_axis(Axis(0)).expect("nonempty");
    let mut base_rng = rng::stream(seed, BASE_STREAM);
    let mut step_rng = rng::stream(seed, STEP_STREAM);
    let mut out = Array2::zeros((n_syn, points.ncols()));
    let mut provenance = Vec::with_capacity(n_syn);
    for mut row in out.rows_mut() {
        let base = base_rng.random_range(0..n);
        let t: f64 = step_rng.random();
        let x = points.row(base);
        row.assign(&(&x + &((&centroid - &x) * t)));
        provenance.push(Provenance {
            base,
            neighbor: None,
            t,
        });
    }
    Ok(SyntheticBatch {
        continuous: out,
        categorical: Array2::zeros((n_syn, 0)),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, ArrayView1};

    fn residual(x: ArrayView1<f64>, y: ArrayView1<f64>, t: f64, s: ArrayView1<f64>) -> f64 {
        x.iter()
            .zip(y)
            .zip(s)
            .map(|((a, b), c)| (a + t * (b - a) - c).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn ros_examples() {
        let one = array![[1.5, -2.0]];
        let cat = array![[3usize]];
        let b = ros(one.view(), cat.view(), 3, 0).unwrap();
        assert_eq!(b.continuous, array![[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]);
        assert_eq!(b.categorical, array![[3], [3], [3]]);
        assert!(ros(one.view(), cat.view(), 0, 0).unwrap().is_empty());
        assert!(ros(Array2::zeros((0, 2)).view(), Array2::zeros((0, 1)).view(), 3, 0).is_err());
    }

    #[test]
    fn ros_is_uniform() {
        let pts = array![[0.0], [1.0]];
        let n = 10_000;
        let b = ros(pts.view(), Array2::zeros((2, 0)).view(), n, 42).unwrap();
        let ones = b.continuous.iter().filter(|&&v| v == 1.0).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn smote_identical_rows_and_segments() {
        let same = Array2::from_elem((6, 2), 0.7);
        let b = smote(same.view(), 20, 5, 1).unwrap();
        assert!(b.continuous.iter().all(|&v| v == 0.7));

        let two = array![[0.0], [1.0]];
        let b = smote(two.view(), 100, 1, 2).unwrap();
        assert_eq!(b.len(), 100);
        assert!(b.continuous.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn smote_provenance_replay() {
        let mut r = rng::seeded(9);
        let pts = Array2::from_shape_simple_fn((40, 3), || r.random_range(-5.0..5.0));
        let b = smote(pts.view(), 300, 5, 3).unwrap();
        let idx = NeighborIndex::brute_force(pts.clone());
        for (row, p) in b.continuous.rows().into_iter().zip(&b.provenance) {
            let nn = p.neighbor.unwrap();
            assert!((0.0..=1.0).contains(&p.t));
            assert!(residual(pts.row(p.base), pts.row(nn), p.t, row) < 1e-9);
            let nbrs: Vec<usize> = idx.knn_of_point(p.base, 5).unwrap().iter().map(|h| h.index).collect();
            assert!(nbrs.contains(&nn));
        }
    }

    #[test]
    fn smote_small_minority_falls_back() {
        let pts = array![[0.0], [1.0], [3.0]];
        let b = smote(pts.view(), 50, 5, 0).unwrap();
        assert_eq!(b.len(), 50);
        let single = array![[2.0, 2.0]];
        let b = smote(single.view(), 4, 5, 0).unwrap();
        assert!(b.continuous.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn smote_with_zero_t_reproduces_ros_bases() {
        let mut r = rng::seeded(4);
        let pts = Array2::from_shape_simple_fn((25, 2), || r.random_range(0.0..1.0));
        let a = smote_with(pts.view(), 200, 5, 77, Some(0.0)).unwrap();
        let b = ros(pts.view(), Array2::zeros((25, 0)).view(), 200, 77).unwrap();
        assert_eq!(a.continuous, b.continuous);
        let bases_a: Vec<_> = a.provenance.iter().map(|p| p.base).collect();
        let bases_b: Vec<_> = b.provenance.iter().map(|p| p.base).collect();
        assert_eq!(bases_a, bases_b);
    }

    #[test]
    fn smote_nc_votes() {
        // row 0's two nearest neighbors are rows 1 and 2, both coded 1
        let cont = array![[0.0], [0.1], [0.2]];
        let cat = array![[0usize], [1], [1]];
        let b = smote_nc(cont.view(), cat.view(), 30, 2, 5).unwrap();
        for (codes, p) in b.categorical.rows().into_iter().zip(&b.provenance) {
            if p.base == 0 {
                assert_eq!(codes[0], 1);
            }
        }
        assert!(b.provenance.iter().any(|p| p.base == 0));
    }

    #[test]
    fn smote_nc_identical_rows_and_schema_errors() {
        let cont = Array2::from_elem((5, 2), 1.0);
        let cat = Array2::from_elem((5, 1), 2usize);
        let b = smote_nc(cont.view(), cat.view(), 10, 3, 0).unwrap();
        assert!(b.continuous.iter().all(|&v| v == 1.0));
        assert!(b.categorical.iter().all(|&v| v == 2));
        assert!(matches!(
            smote_nc(cont.view(), Array2::zeros((5, 0)).view(), 1, 3, 0),
            Err(Error::UnsupportedSchema { .. })
        ));
        assert!(matches!(
            smote_nc(Array2::zeros((5, 0)).view(), cat.view(), 1, 3, 0),
            Err(Error::UnsupportedSchema { .. })
        ));
    }

    #[test]
    fn smote_nc_codes_come_from_neighbors() {
        let mut r = rng::seeded(12);
        for trial in 0..20 {
            let cont = Array2::from_shape_simple_fn((15, 2), || r.random_range(-1.0..1.0));
            let cat = Array2::from_shape_simple_fn((15, 2), || r.random_range(0..4usize));
            let med = median_std(cont.view());
            let idx = NeighborIndex::nc_augmented(cont.clone(), cat.clone(), med).unwrap();
            let b = smote_nc(cont.view(), cat.view(), 40, 5, trial).unwrap();
            for (codes, p) in b.categorical.rows().into_iter().zip(&b.provenance) {
                let nbrs = idx.knn_of_point(p.base, 5).unwrap();
                for j in 0..2 {
                    assert!(nbrs.iter().any(|h| cat[[h.index, j]] == codes[j]));
                }
            }
        }
    }

    #[test]
    fn mode_ties_go_low() {
        assert_eq!(mode([3, 1, 3, 1, 2].into_iter()), 1);
        assert_eq!(mode([4, 4, 0].into_iter()), 4);
    }

    #[test]
    fn poly_star_examples() {
        let pts = array![[-1.0], [1.0]];
        let b = poly_star(pts.view(), 100, 0).unwrap();
        assert!(b.continuous.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        let same = Array2::from_elem((4, 3), -0.25);
        assert!(poly_star(same.view(), 10, 0).unwrap().continuous.iter().all(|&v| v == -0.25));

        let mut r = rng::seeded(8);
        let pts = Array2::from_shape_simple_fn((30, 4), || r.random_range(-2.0..2.0));
        let c = pts.mean_axis(Axis(0)).unwrap();
        let b = poly_star(pts.view(), 200, 1).unwrap();
        for (row, p) in b.continuous.rows().into_iter().zip(&b.provenance) {
            assert!(residual(pts.row(p.base), c.view(), p.t, row) < 1e-9);
        }
    }
}
