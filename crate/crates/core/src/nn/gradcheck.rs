use super::{GradientSet, Parameters};
use crate::{Error, Result};

/// Gradients smaller than this are compared in absolute terms.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Compares analytic gradients against central finite differences.
///
/// `loss` evaluates the model on a fixed batch and returns the loss and the
/// analytic gradients in [`Parameters`] order. Every parameter is perturbed
/// by `±epsilon`; the return value is the worst
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn finite_diff_check<M, F>(model: &M, loss: F, epsilon: f64) -> Result<f64>
where
    M: Parameters + Clone,
    F: Fn(&M) -> Result<(f64, GradientSet)>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} must be in (0, 1e-3]"
        )));
    }
    let (_, analytic) = loss(model)?;
    let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    if analytic.tensors().len() != shapes.len()
        || analytic
            .tensors()
            .iter()
            .zip(&shapes)
            .any(|(g, &n)| g.len() != n)
    {
        return Err(Error::Shape("gradients are not congruent with parameters".into()));
    }

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (t, &len) in shapes.iter().enumerate() {
        for j in 0..len {
            let original = probe.parameters()[t][j];
            probe.parameters_mut()[t][j] = original + epsilon;
            let (plus, _) = loss(&probe)?;
            probe.parameters_mut()[t][j] = original - epsilon;
            let (minus, _) = loss(&probe)?;
            probe.parameters_mut()[t][j] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[t][j];
            let denom = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(Vec<f64>);

    impl Parameters for Scalar {
        fn parameters(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn quadratic_is_exact() {
        // L = (3w - 2)^2, dL/dw = 6(3w - 2)
        let m = Scalar(vec![0.4]);
        let err = finite_diff_check(
            &m,
            |m: &Scalar| {
                let w = m.0[0];
                Ok(((3.0 * w - 2.0).powi(2), GradientSet::new(vec![vec![6.0 * (3.0 * w - 2.0)]])))
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let m = Scalar(vec![1.0]);
        let err = finite_diff_check(
            &m,
            |m: &Scalar| Ok((m.0[0] * m.0[0], GradientSet::new(vec![vec![m.0[0]]]))),
            1e-5,
        )
        .unwrap();
        assert!(err > 0.4);
    }

    #[test]
    fn epsilon_is_validated() {
        let m = Scalar(vec![1.0]);
        let f = |_: &Scalar| Ok((0.0, GradientSet::new(vec![vec![0.0]])));
        assert!(finite_diff_check(&m, f, 0.0).is_err());
        assert!(finite_diff_check(&m, f, 1e-2).is_err());
    }
}
