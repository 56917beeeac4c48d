use super::NnError;
use crate::Scalar;

/// Probabilities are clamped to at least this value before taking the log in
/// cross-entropy, so degenerate predictions cannot produce infinities.
pub const CROSS_ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        }
    }
}

/// Loss for a single prediction vector.
///
/// MSE averages squared differences over the elements. Cross-entropy expects
/// a probability vector and a one-hot (or soft) target and sums
/// `-t * ln(max(p, floor))` over the classes.
pub fn loss<T: Scalar>(kind: LossKind, prediction: &[T], target: &[T]) -> Result<T, NnError> {
    if prediction.len() != target.len() {
        return Err(NnError::Shape(format!(
            "prediction length {} != target length {}",
            prediction.len(),
            target.len()
        )));
    }
    if prediction.is_empty() {
        return Err(NnError::Shape("empty prediction".into()));
    }
    match kind {
        LossKind::Mse => {
            let mut sum = T::ZERO;
            for (&p, &t) in prediction.iter().zip(target) {
                let d = t - p;
                sum += d * d;
            }
            Ok(sum / T::from_f64(prediction.len() as f64))
        }
        LossKind::CrossEntropy => {
            let floor = T::from_f64(CROSS_ENTROPY_FLOOR);
            let mut sum = T::ZERO;
            for (&p, &t) in prediction.iter().zip(target) {
                sum += t * p.max(floor).ln();
            }
            Ok(-sum)
        }
    }
}

/// Mean loss over rows of equal-shaped prediction/target matrices.
pub fn loss_mean<T: Scalar>(
    kind: LossKind,
    predictions: &[Vec<T>],
    targets: &[Vec<T>],
) -> Result<T, NnError> {
    if predictions.len() != targets.len() {
        return Err(NnError::Shape(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(NnError::Shape("empty batch".into()));
    }
    let mut sum = T::ZERO;
    for (p, t) in predictions.iter().zip(targets) {
        sum += loss(kind, p, t)?;
    }
    Ok(sum / T::from_f64(predictions.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_identical_vectors_is_zero() {
        let v = vec![0.3_f64, -1.2, 4.5];
        assert_eq!(loss(LossKind::Mse, &v, &v).unwrap(), 0.0);
    }

    #[test]
    fn mse_hand_arithmetic() {
        assert_eq!(loss(LossKind::Mse, &[0.0_f64], &[2.0]).unwrap(), 4.0);
        assert_eq!(
            loss(LossKind::Mse, &[1.0_f64, 3.0], &[2.0, 1.0]).unwrap(),
            (1.0 + 4.0) / 2.0
        );
    }

    #[test]
    fn cross_entropy_of_uniform_is_ln_k() {
        for k in [2usize, 3, 10] {
            let pred = vec![1.0 / k as f64; k];
            let mut target = vec![0.0; k];
            target[k / 2] = 1.0;
            let ce = loss(LossKind::CrossEntropy, &pred, &target).unwrap();
            assert!((ce - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let ce = loss(LossKind::CrossEntropy, &[0.0_f64, 1.0], &[1.0, 0.0]).unwrap();
        assert!(ce.is_finite());
        assert!((ce - (-CROSS_ENTROPY_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(loss(LossKind::Mse, &[1.0_f64], &[1.0, 2.0]).is_err());
        assert!(loss_mean(
            LossKind::Mse,
            &[vec![1.0_f64]],
            &[vec![1.0], vec![2.0]]
        )
        .is_err());
    }

    #[test]
    fn loss_mean_averages_rows() {
        let preds = vec![vec![0.0_f64], vec![0.0]];
        let targets = vec![vec![2.0_f64], vec![4.0]];
        assert_eq!(loss_mean(LossKind::Mse, &preds, &targets).unwrap(), 10.0);
    }
}
