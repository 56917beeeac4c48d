use crate::Scalar;

/// Activation function kinds. ReLU and sigmoid serve hidden layers; linear
/// and softmax serve the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
    Softmax,
}

impl Activation {
    /// Applies the activation to a pre-activation vector.
    ///
    /// Softmax subtracts the maximum before exponentiating, so the result is
    /// a probability vector even for large inputs and is bitwise invariant
    /// under exactly-representable constant shifts.
    pub fn apply<T: Scalar>(self, z: &[T]) -> Vec<T> {
        match self {
            Activation::Relu | Activation::Sigmoid | Activation::Linear => {
                z.iter().map(|&v| self.apply_scalar(v)).collect()
            }
            Activation::Softmax => {
                let max = z
                    .iter()
                    .copied()
                    .fold(T::from_f64(f64::NEG_INFINITY), |acc, v| acc.max(v));
                let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
                let sum: T = exps.iter().copied().sum();
                exps.into_iter().map(|e| e / sum).collect()
            }
        }
    }

    /// Scalar form for the per-neuron kinds. Softmax is a whole-layer
    /// operation and is rejected; network validation keeps it off this path.
    pub fn apply_scalar<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::ZERO {
                    z
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => T::ONE / (T::ONE + (-z).exp()),
            Activation::Linear => z,
            Activation::Softmax => panic!("softmax is not a per-neuron activation"),
        }
    }

    /// Derivative with respect to the pre-activation, for the per-neuron
    /// kinds. The ReLU subgradient at exactly 0 is 0.
    pub fn derivative_scalar<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => {
                let s = Activation::Sigmoid.apply_scalar(z);
                s * (T::ONE - s)
            }
            Activation::Linear => T::ONE,
            Activation::Softmax => panic!("softmax has no per-neuron derivative"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "linear" => Some(Activation::Linear),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(
            Activation::Relu.apply(&[-1.0_f64, 0.0, 2.0]),
            vec![0.0, 0.0, 2.0]
        );
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(Activation::Sigmoid.apply(&[0.0_f64]), vec![0.5]);
    }

    #[test]
    fn softmax_of_equal_inputs_is_uniform() {
        for c in [-100.0_f64, 0.0, 3.5, 1e6] {
            let p = Activation::Softmax.apply(&[c, c, c]);
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15, "softmax({c},..) gave {v}");
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = Activation::Softmax.apply(&[1.0_f64, -2.0, 700.0, 3.0]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        assert_eq!(Activation::Relu.derivative_scalar(0.0_f64), 0.0);
        assert_eq!(Activation::Relu.derivative_scalar(1e-300_f64), 1.0);
        assert_eq!(Activation::Relu.derivative_scalar(-1e-300_f64), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for a in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Linear,
            Activation::Softmax,
        ] {
            assert_eq!(Activation::from_name(a.name()), Some(a));
        }
        assert_eq!(Activation::from_name("tanh"), None);
    }
}
