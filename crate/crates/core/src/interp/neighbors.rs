use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::tabular::MixedRow;
use crate::{Error, Result};

/// Distance used by a [`NeighborIndex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Euclidean over continuous features plus `med^2` for every categorical
    /// feature that differs.
    NcAugmented { med: f64 },
}

/// One search hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nc_squared(a_cont: &[f64], a_cat: &[usize], b_cont: &[f64], b_cat: &[usize], med: f64) -> f64 {
    let mismatches = a_cat.iter().zip(b_cat).filter(|(x, y)| x != y).count();
    squared_euclidean(a_cont, b_cont) + med * med * mismatches as f64
}

/// SMOTE-NC distance between two mixed rows:
/// `sqrt(sum_c (a_c - b_c)^2 + med^2 * #{d : a_d != b_d})`.
pub fn nc_distance(a: MixedRow<'_>, b: MixedRow<'_>, med: f64) -> f64 {
    let a_cont = a.continuous.to_vec();
    let b_cont = b.continuous.to_vec();
    let a_cat = a.categorical.to_vec();
    let b_cat = b.categorical.to_vec();
    nc_squared(&a_cont, &a_cat, &b_cont, &b_cat, med).sqrt()
}

/// Median of the per-column sample standard deviations. Zero for fewer than
/// two rows or no columns.
pub fn median_std(continuous: ArrayView2<'_, f64>) -> f64 {
    let n = continuous.nrows();
    if n < 2 || continuous.ncols() == 0 {
        return 0.0;
    }
    let mut stds: Vec<f64> = continuous
        .columns()
        .into_iter()
        .map(|c| {
            let mean = c.sum() / n as f64;
            (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        })
        .collect();
    stds.sort_by(f64::total_cmp);
    let m = stds.len();
    if m % 2 == 1 {
        stds[m / 2]
    } else {
        0.5 * (stds[m / 2 - 1] + stds[m / 2])
    }
}

/// Bounded candidate list ordered by `(squared distance, index)`.
struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Candidates {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].0
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, d2: f64, index: usize) {
        let key = (d2, index);
        let better = |a: &(f64, usize), b: &(f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
        if self.full() && !better(&key, &self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|it| better(it, &key));
        self.items.insert(pos, key);
        self.items.truncate(self.k);
    }

    fn into_neighbors(self) -> Vec<Neighbor> {
        self.items
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }
}

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over the rows of a point matrix.
#[derive(Debug, Clone)]
struct KdTree {
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    fn build(points: &Array2<f64>) -> Self {
        let mut tree = KdTree {
            order: (0..points.nrows()).collect(),
            nodes: Vec::new(),
        };
        if points.nrows() > 0 {
            tree.build_node(points, 0, points.nrows());
        }
        tree
    }

    fn build_node(&mut self, points: &Array2<f64>, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE || points.ncols() == 0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the dimension with the largest spread
        let mut best = (0, -1.0);
        for d in 0..points.ncols() {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points[[i, d]];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        let dim = best.0;
        if best.1 <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[[a, dim]].total_cmp(&points[[b, dim]]));
        let value = points[[self.order[mid], dim]];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn search(
        &self,
        points: &Array2<f64>,
        node: usize,
        query: &[f64],
        exclude: Option<usize>,
        out: &mut Candidates,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let row = points.row(i);
                    let d2 = squared_euclidean(query, row.as_slice().expect("standard layout"));
                    out.offer(d2, i);
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(points, near, query, exclude, out);
                // ties must still be visited: a lower index may sit across the plane
                if diff * diff <= out.worst() {
                    self.search(points, far, query, exclude, out);
                }
            }
        }
    }
}

/// Exact k-nearest-neighbor index.
///
/// Results are ordered by distance with ties broken by lower index, and are
/// identical whether the k-d tree or the linear scan answers the query.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Array2<f64>,
    codes: Array2<usize>,
    metric: Metric,
    tree: Option<KdTree>,
}

impl NeighborIndex {
    /// Euclidean index backed by a k-d tree.
    pub fn kd_tree(points: Array2<f64>) -> Self {
        let points = points.as_standard_layout().into_owned();
        let tree = Some(KdTree::build(&points));
        let n = points.nrows();
        NeighborIndex {
            points,
            codes: Array2::zeros((n, 0)),
            metric: Metric::Euclidean,
            tree,
        }
    }

    /// Euclidean index answered by linear scan.
    pub fn brute_force(points: Array2<f64>) -> Self {
        let n = points.nrows();
        NeighborIndex {
            points: points.as_standard_layout().into_owned(),
            codes: Array2::zeros((n, 0)),
            metric: Metric::Euclidean,
            tree: None,
        }
    }

    /// Mixed-row index under [`Metric::NcAugmented`], answered by linear scan.
    pub fn nc_augmented(continuous: Array2<f64>, codes: Array2<usize>, med: f64) -> Result<Self> {
        if continuous.nrows() != codes.nrows() {
            return Err(Error::Shape("continuous and categorical row counts differ".into()));
        }
        if !(med >= 0.0) {
            return Err(Error::InvalidArgument(format!("med must be >= 0, got {med}")));
        }
        Ok(NeighborIndex {
            points: continuous.as_standard_layout().into_owned(),
            codes: codes.as_standard_layout().into_owned(),
            metric: Metric::NcAugmented { med },
            tree: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    fn search(&self, query: &[f64], query_codes: &[usize], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        let available = self.len() - usize::from(exclude.is_some());
        if k == 0 || k > available {
            return Err(Error::InvalidArgument(format!(
                "k = {k} but only {available} candidate points are available"
            )));
        }
        if query.len() != self.points.ncols() || query_codes.len() != self.codes.ncols() {
            return Err(Error::Shape(format!(
                "query has {} + {} features, index has {} + {}",
                query.len(),
                query_codes.len(),
                self.points.ncols(),
                self.codes.ncols()
            )));
        }
        let mut out = Candidates::new(k);
        match (&self.tree, self.metric) {
            (Some(tree), Metric::Euclidean) => tree.search(&self.points, 0, query, exclude, &mut out),
            (_, metric) => {
                for i in 0..self.len() {
                    if Some(i) == exclude {
                        continue;
                    }
                    let row = self.points.row(i);
                    let row = row.as_slice().expect("standard layout");
                    let d2 = match metric {
                        Metric::Euclidean => squared_euclidean(query, row),
                        Metric::NcAugmented { med } => {
                            let codes = self.codes.row(i);
                            nc_squared(query, query_codes, row, codes.as_slice().expect("standard layout"), med)
                        }
                    };
                    out.offer(d2, i);
                }
            }
        }
        Ok(out.into_neighbors())
    }

    /// The `k` nearest stored points to `query`. Requires `k < len()`.
    pub fn knn(&self, query: ArrayView1<'_, f64>, k: usize) -> Result<Vec<Neighbor>> {
        if k >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must be smaller than the {} indexed points",
                self.len()
            )));
        }
        self.search(&query.to_vec(), &[], k, None)
    }

    /// Like [`knn`](Self::knn) for a mixed query row.
    pub fn knn_mixed(&self, query: MixedRow<'_>, k: usize) -> Result<Vec<Neighbor>> {
        if k >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must be smaller than the {} indexed points",
                self.len()
            )));
        }
        self.search(&query.continuous.to_vec(), &query.categorical.to_vec(), k, None)
    }

    /// Up to `k` nearest points to an arbitrary query; `k` may equal `len()`.
    pub fn k_nearest(&self, query: &[f64], query_codes: &[usize], k: usize) -> Result<Vec<Neighbor>> {
        self.search(query, query_codes, k, None)
    }

    /// The single nearest stored point.
    pub fn nearest(&self, query: &[f64]) -> Result<Neighbor> {
        Ok(self.search(query, &[], 1, None)?[0])
    }

    /// The `k` nearest neighbors of stored point `i`, excluding `i` itself
    /// (duplicates of `i` at other indices are kept).
    pub fn knn_of_point(&self, i: usize, k: usize) -> Result<Vec<Neighbor>> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!("point {i} out of range")));
        }
        let q = self.points.row(i).to_vec();
        let c = self.codes.row(i).to_vec();
        self.search(&q, &c, k, Some(i))
    }
}
