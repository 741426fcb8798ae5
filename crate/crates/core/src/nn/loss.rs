use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use crate::{Error, Result};

fn check_same_shape(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Sum of squared differences per row, averaged over rows.
///
/// Returns the loss and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    check_same_shape(&pred, &target, "mse_loss")?;
    let b = pred.nrows().max(1) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / b;
    Ok((loss, diff * (2.0 / b)))
}

/// Mean negative log-softmax of the true class.
///
/// Returns the loss and `(softmax(logits) - onehot) / B`.
pub fn softmax_ce_loss(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let masked: Vec<Option<usize>> = labels.iter().copied().map(Some).collect();
    softmax_ce_loss_masked(logits, &masked)
}

/// [`softmax_ce_loss`] where `None` labels contribute neither loss nor
/// gradient. The average is still taken over all `B` rows.
pub fn softmax_ce_loss_masked(
    logits: ArrayView2<'_, f64>,
    labels: &[Option<usize>],
) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows but {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    let k = logits.ncols();
    let b = logits.nrows().max(1) as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, label) in labels.iter().enumerate() {
        let Some(y) = *label else { continue };
        if y >= k {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {k} classes"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[y];
        let mut g = grad.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            g[j] = (v - log_z).exp() / b;
        }
        g[y] -= 1.0 / b;
    }
    Ok((loss / b, grad))
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal, summed over
/// latent dimensions and averaged over rows.
///
/// Returns `(loss, grad_mu, grad_logvar)`.
pub fn gaussian_kl(
    mu: ArrayView2<'_, f64>,
    logvar: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    check_same_shape(&mu, &logvar, "gaussian_kl")?;
    if mu.iter().chain(logvar.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numeric("gaussian_kl input"));
    }
    let b = mu.nrows().max(1) as f64;
    let mut loss = 0.0;
    for (&m, &lv) in mu.iter().zip(logvar.iter()) {
        loss += 0.5 * (m * m + lv.exp() - 1.0 - lv);
    }
    let grad_mu = mu.mapv(|m| m / b);
    let grad_lv = logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0) / b);
    Ok((loss / b, grad_mu, grad_lv))
}

/// One term of a composite loss over column ranges of a network output.
#[derive(Debug, Clone)]
pub enum LossTerm {
    Mse {
        columns: Range<usize>,
        target: Array2<f64>,
    },
    /// `None` labels are skipped (see [`softmax_ce_loss_masked`]).
    SoftmaxCe {
        columns: Range<usize>,
        labels: Vec<Option<usize>>,
    },
    GaussianKl {
        mu: Range<usize>,
        logvar: Range<usize>,
    },
}

/// Weighted sum of [`LossTerm`]s.
#[derive(Debug, Clone, Default)]
pub struct LossSpec {
    terms: Vec<(f64, LossTerm)>,
}

impl LossSpec {
    pub fn new(terms: Vec<(f64, LossTerm)>) -> Self {
        LossSpec { terms }
    }

    pub fn single(term: LossTerm) -> Self {
        LossSpec {
            terms: vec![(1.0, term)],
        }
    }

    /// Loss value and gradient w.r.t. `output`.
    pub fn evaluate(&self, output: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
        let width = output.ncols();
        let check = |r: &Range<usize>| {
            if r.start > r.end || r.end > width {
                Err(Error::Shape(format!("loss columns {r:?} outside output width {width}")))
            } else {
                Ok(())
            }
        };
        let mut total = 0.0;
        let mut grad = Array2::zeros(output.dim());
        for (weight, term) in &self.terms {
            match term {
                LossTerm::Mse { columns, target } => {
                    check(columns)?;
                    let (l, g) = mse_loss(output.slice(s![.., columns.clone()]), target.view())?;
                    total += weight * l;
                    let mut dst = grad.slice_mut(s![.., columns.clone()]);
                    dst.scaled_add(*weight, &g);
                }
                LossTerm::SoftmaxCe { columns, labels } => {
                    check(columns)?;
                    let (l, g) = softmax_ce_loss_masked(output.slice(s![.., columns.clone()]), labels)?;
                    total += weight * l;
                    let mut dst = grad.slice_mut(s![.., columns.clone()]);
                    dst.scaled_add(*weight, &g);
                }
                LossTerm::GaussianKl { mu, logvar } => {
                    check(mu)?;
                    check(logvar)?;
                    let (l, gm, gl) = gaussian_kl(
                        output.slice(s![.., mu.clone()]),
                        output.slice(s![.., logvar.clone()]),
                    )?;
                    total += weight * l;
                    grad.slice_mut(s![.., mu.clone()]).scaled_add(*weight, &gm);
                    grad.slice_mut(s![.., logvar.clone()]).scaled_add(*weight, &gl);
                }
            }
        }
        Ok((total, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_simple_fn((rows, cols), || r.sample(StandardNormal))
    }

    #[test]
    fn mse_examples() {
        let a = array![[1.0, 0.0]];
        assert_eq!(mse_loss(a.view(), a.view()).unwrap().0, 0.0);
        assert_eq!(mse_loss(a.view(), array![[0.0, 0.0]].view()).unwrap().0, 1.0);
        assert!(mse_loss(a.view(), array![[0.0]].view()).is_err());
    }

    #[test]
    fn mse_matches_double_loop() {
        let p = random_matrix(4, 3, 1);
        let t = random_matrix(4, 3, 2);
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                acc += (p[[i, j]] - t[[i, j]]).powi(2);
            }
        }
        let (l, _) = mse_loss(p.view(), t.view()).unwrap();
        assert!((l - acc / 4.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let (l, _) = softmax_ce_loss(Array2::zeros((2, 4)).view(), &[0, 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_class_has_tiny_loss() {
        let (l, _) = softmax_ce_loss(array![[50.0, 0.0, 0.0]].view(), &[0]).unwrap();
        assert!(l < 1e-20);
    }

    #[test]
    fn softmax_matches_explicit_normalisation() {
        let logits = random_matrix(3, 5, 3);
        let labels = [4, 0, 2];
        let (l, g) = softmax_ce_loss(logits.view(), &labels).unwrap();
        let mut acc = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let z: f64 = logits.row(i).iter().map(|v| v.exp()).sum();
            acc += -(logits[[i, y]].exp() / z).ln();
        }
        assert!((l - acc / 3.0).abs() < 1e-10);
        for row in g.rows() {
            assert!(row.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_out_of_range_label() {
        assert!(matches!(
            softmax_ce_loss(Array2::zeros((1, 3)).view(), &[3]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn masked_rows_are_ignored() {
        let logits = random_matrix(2, 3, 4);
        let (l, g) = softmax_ce_loss_masked(logits.view(), &[Some(1), None]).unwrap();
        let (l1, _) = softmax_ce_loss(logits.slice(s![0..1, ..]), &[1]).unwrap();
        assert!((l - l1 / 2.0).abs() < 1e-12);
        assert!(g.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kl_examples() {
        let z = Array2::zeros((2, 3));
        assert_eq!(gaussian_kl(z.view(), z.view()).unwrap().0, 0.0);
        let (l, _, _) = gaussian_kl(array![[1.0]].view(), array![[0.0]].view()).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert!(gaussian_kl(array![[f64::INFINITY]].view(), array![[0.0]].view()).is_err());
    }

    #[test]
    fn kl_matches_scalar_formula() {
        let mu = random_matrix(3, 4, 5);
        let lv = random_matrix(3, 4, 6);
        let (l, _, _) = gaussian_kl(mu.view(), lv.view()).unwrap();
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                let (m, v) = (mu[[i, j]], lv[[i, j]]);
                acc += 0.5 * (m * m + v.exp() - 1.0 - v);
            }
        }
        assert!((l - acc / 3.0).abs() < 1e-12);
    }
}
