use super::{Activation, ActivationRecord, FailureMask, NetworkSpec, NnError, Parameters};
use crate::Scalar;

/// The per-neuron weighted sum every execution path shares.
///
/// The accumulator starts at the bias and adds `weights[i] * inputs[i]` in
/// strictly ascending index order. Distributed nodes call this exact function
/// on `f32` slices, which is what makes cluster outputs bit-identical to the
/// in-memory forward pass.
#[inline]
pub fn neuron_preactivation<T: Scalar>(weights: &[T], bias: T, inputs: &[T]) -> T {
    debug_assert_eq!(weights.len(), inputs.len());
    let mut acc = bias;
    for i in 0..weights.len() {
        acc += weights[i] * inputs[i];
    }
    acc
}

/// One neuron end to end: weighted sum then a per-neuron activation.
#[inline]
pub fn neuron_activate<T: Scalar>(kind: Activation, weights: &[T], bias: T, inputs: &[T]) -> T {
    kind.apply_scalar(neuron_preactivation(weights, bias, inputs))
}

/// Forward pass with a failure mask: masked neurons have their activation
/// forced to exactly `0` before the next layer reads it.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    input: &[T],
    mask: &FailureMask,
) -> Result<ActivationRecord<T>, NnError> {
    mask.validate(spec, true)?;
    let scales = mask_scales(spec, mask);
    forward_scaled(spec, params, input, Some(&scales))
}

/// Forward pass with per-layer multiplicative masks on layers `1..=L-1`
/// (hidden) and optionally `L`; `None` means no masking anywhere.
///
/// `scales[l - 1][k]` multiplies the activation of neuron `k` in layer `l`.
/// A scale of exactly `0` zeroes the unit (the failure model); a scale of
/// `1/keep_prob` is inverted dropout. Entries are applied after the
/// activation function.
pub fn forward_scaled<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    input: &[T],
    scales: Option<&[Vec<T>]>,
) -> Result<ActivationRecord<T>, NnError> {
    params.check_shape(spec)?;
    if input.len() != spec.input_dim() {
        return Err(NnError::Shape(format!(
            "input length {} != input dimension {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if let Some(scales) = scales {
        if scales.len() != spec.depth() {
            return Err(NnError::Shape(format!(
                "expected {} scale vectors, got {}",
                spec.depth(),
                scales.len()
            )));
        }
        for (idx, s) in scales.iter().enumerate() {
            let want = spec.layer_sizes()[idx + 1];
            if s.len() != want {
                return Err(NnError::Shape(format!(
                    "scale vector for layer {} has length {}, expected {want}",
                    idx + 1,
                    s.len()
                )));
            }
        }
    }

    let mut record = ActivationRecord {
        layers: Vec::with_capacity(spec.depth() + 1),
    };
    record.layers.push(input.to_vec());

    for l in 1..=spec.depth() {
        let layer = &params.layers[l - 1];
        let prev = &record.layers[l - 1];
        let kind = spec.activation_for_layer(l);
        let mut acts = if kind == Activation::Softmax {
            let z: Vec<T> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, &b)| neuron_preactivation(row, b, prev))
                .collect();
            kind.apply(&z)
        } else {
            layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, &b)| neuron_activate(kind, row, b, prev))
                .collect()
        };
        if let Some(scales) = scales {
            for (a, &r) in acts.iter_mut().zip(&scales[l - 1]) {
                // Assign exact zero for dropped units instead of multiplying,
                // so a failed neuron is +0.0 rather than a signed zero.
                *a = if r == T::ZERO { T::ZERO } else { *a * r };
            }
        }
        record.layers.push(acts);
    }
    Ok(record)
}

/// Expands a failure mask into per-layer scale vectors of 0/1.
pub(crate) fn mask_scales<T: Scalar>(spec: &NetworkSpec, mask: &FailureMask) -> Vec<Vec<T>> {
    let mut scales: Vec<Vec<T>> = spec.layer_sizes()[1..]
        .iter()
        .map(|&n| vec![T::ONE; n])
        .collect();
    for (layer, neuron) in mask.iter() {
        scales[layer - 1][neuron] = T::ZERO;
    }
    scales
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, InitScheme, LayerParams};
    use crate::rng::Rng;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec::new(vec![1, 1], Activation::Relu, Activation::Linear).unwrap()
    }

    #[test]
    fn single_linear_neuron_hand_arithmetic() {
        let spec = tiny_spec();
        let params = Parameters {
            layers: vec![LayerParams {
                weights: vec![vec![2.0_f64]],
                bias: vec![1.0],
            }],
        };
        let rec = forward(&spec, &params, &[3.0], &FailureMask::empty()).unwrap();
        assert_eq!(rec.output(), &[7.0]);
    }

    #[test]
    fn masking_a_whole_layer_leaves_bias_only() {
        let spec = NetworkSpec::new(vec![3, 4, 2], Activation::Relu, Activation::Linear).unwrap();
        let mut rng = Rng::new(5);
        let params = init_params::<f64>(&spec, InitScheme::He, &mut rng);
        let mask = FailureMask::from_pairs((0..4).map(|k| (1, k)));
        let rec = forward(&spec, &params, &[0.3, -0.2, 0.9], &mask).unwrap();
        assert!(rec.activation(1).iter().all(|&a| a == 0.0));
        // With the entire previous layer silent, the output layer sees only
        // its bias.
        let expected: Vec<f64> = params.layers[1].bias.clone();
        assert_eq!(rec.output(), expected.as_slice());
    }

    #[test]
    fn masked_units_are_exactly_positive_zero() {
        let spec = NetworkSpec::new(vec![1, 2, 1], Activation::Relu, Activation::Linear).unwrap();
        let params = Parameters {
            layers: vec![
                LayerParams {
                    weights: vec![vec![-3.0_f64], vec![2.0]],
                    bias: vec![-1.0, 0.5],
                },
                LayerParams {
                    weights: vec![vec![1.0, 1.0]],
                    bias: vec![0.0],
                },
            ],
        };
        let mask = FailureMask::from_pairs([(1, 0), (1, 1)]);
        let rec = forward(&spec, &params, &[2.0], &mask).unwrap();
        for &a in rec.activation(1) {
            assert_eq!(a.to_bits(), 0.0_f64.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let spec = tiny_spec();
        let params = Parameters {
            layers: vec![LayerParams {
                weights: vec![vec![2.0_f64, 9.0]],
                bias: vec![1.0],
            }],
        };
        assert!(matches!(
            forward(&spec, &params, &[3.0], &FailureMask::empty()),
            Err(NnError::Shape(_))
        ));
        let ok_params = Parameters {
            layers: vec![LayerParams {
                weights: vec![vec![2.0_f64]],
                bias: vec![1.0],
            }],
        };
        assert!(matches!(
            forward(&spec, &ok_params, &[3.0, 4.0], &FailureMask::empty()),
            Err(NnError::Shape(_))
        ));
    }

    /// Second, independently coded straight-line evaluator for the reference
    /// network: unrolled loops, no shared helpers.
    fn straight_line_eval_10_10_10_1(params: &Parameters<f64>, x: &[f64; 10]) -> f64 {
        let mut h1 = [0.0_f64; 10];
        for j in 0..10 {
            let mut s = params.layers[0].bias[j];
            for i in 0..10 {
                s += params.layers[0].weights[j][i] * x[i];
            }
            h1[j] = if s > 0.0 { s } else { 0.0 };
        }
        let mut h2 = [0.0_f64; 10];
        for j in 0..10 {
            let mut s = params.layers[1].bias[j];
            for i in 0..10 {
                s += params.layers[1].weights[j][i] * h1[i];
            }
            h2[j] = if s > 0.0 { s } else { 0.0 };
        }
        let mut out = params.layers[2].bias[0];
        for i in 0..10 {
            out += params.layers[2].weights[0][i] * h2[i];
        }
        out
    }

    #[test]
    fn zero_input_matches_independent_evaluator() {
        let spec = NetworkSpec::reference();
        let mut rng = Rng::new(42);
        let params = init_params::<f64>(&spec, InitScheme::He, &mut rng);
        let rec = forward(&spec, &params, &[0.0; 10], &FailureMask::empty()).unwrap();
        let expected = straight_line_eval_10_10_10_1(&params, &[0.0; 10]);
        assert_eq!(rec.output()[0], expected);
    }

    #[test]
    fn random_inputs_match_independent_evaluator_bitwise() {
        let spec = NetworkSpec::reference();
        let mut rng = Rng::new(1001);
        let params = init_params::<f64>(&spec, InitScheme::Xavier, &mut rng);
        for _ in 0..50 {
            let mut x = [0.0_f64; 10];
            for v in &mut x {
                *v = rng.uniform(-1.0, 1.0);
            }
            let rec = forward(&spec, &params, &x, &FailureMask::empty()).unwrap();
            assert_eq!(rec.output()[0], straight_line_eval_10_10_10_1(&params, &x));
        }
    }

    /// Brute-force re-evaluation oracle for masked forwards: run unmasked,
    /// zero the masked activations by hand, recompute downstream layer by
    /// layer with a fresh implementation.
    fn masked_reference(
        spec: &NetworkSpec,
        params: &Parameters<f64>,
        x: &[f64],
        mask: &FailureMask,
    ) -> Vec<f64> {
        let mut prev: Vec<f64> = x.to_vec();
        for l in 1..=spec.depth() {
            let kind = spec.activation_for_layer(l);
            let mut acts = Vec::new();
            for j in 0..spec.layer_sizes()[l] {
                let mut s = params.layers[l - 1].bias[j];
                for (i, &p) in prev.iter().enumerate() {
                    s += params.layers[l - 1].weights[j][i] * p;
                }
                acts.push(kind.apply_scalar(s));
            }
            for j in 0..acts.len() {
                if mask.contains(l, j) {
                    acts[j] = 0.0;
                }
            }
            prev = acts;
        }
        prev
    }

    #[test]
    fn masked_forward_matches_bruteforce_reevaluation() {
        let spec = NetworkSpec::new(vec![4, 6, 5, 2], Activation::Relu, Activation::Linear).unwrap();
        let mut rng = Rng::new(77);
        let params = init_params::<f64>(&spec, InitScheme::He, &mut rng);
        for trial in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let k = (trial % 6) as usize;
            let hidden = spec.hidden_neurons();
            let picks = rng.sample_indices(hidden.len(), k);
            let mask = FailureMask::from_pairs(picks.into_iter().map(|i| hidden[i]));
            let rec = forward(&spec, &params, &x, &mask).unwrap();
            let expect = masked_reference(&spec, &params, &x, &mask);
            assert_eq!(rec.output(), expect.as_slice());
        }
    }
}
