use super::forward::neuron_preactivation;
use super::{Activation, Gradient, LossKind, NetworkSpec, NnError, Parameters};
use crate::Scalar;

/// Exact gradient of `loss(forward(x), target)` with respect to all weights
/// and biases, under optional per-layer multiplicative masks.
///
/// `scales` follows [`super::forward_scaled`]: one vector per weight layer,
/// applied after the activation. Masks are replayed inside this function so
/// the differentiated forward pass is exactly the masked one. A unit with
/// scale 0 contributes zero to its own bias/incoming-weight gradients and to
/// every outgoing-weight gradient.
///
/// Supported pairings: MSE with any output activation, cross-entropy with a
/// softmax output. Cross-entropy over a linear output is rejected because the
/// predictions are not probabilities.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    input: &[T],
    target: &[T],
    loss_kind: LossKind,
    scales: Option<&[Vec<T>]>,
) -> Result<Gradient<T>, NnError> {
    params.check_shape(spec)?;
    if input.len() != spec.input_dim() {
        return Err(NnError::Shape(format!(
            "input length {} != input dimension {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if target.len() != spec.output_dim() {
        return Err(NnError::Shape(format!(
            "target length {} != output dimension {}",
            target.len(),
            spec.output_dim()
        )));
    }
    if loss_kind == LossKind::CrossEntropy && spec.output_activation() != Activation::Softmax {
        return Err(NnError::LossCombo(
            "cross-entropy requires a softmax output layer".into(),
        ));
    }

    let depth = spec.depth();

    // Forward pass, keeping pre-activations (z), raw activations (h = f(z)),
    // and post-mask activations (a) per layer. a[0] is the input.
    let mut zs: Vec<Vec<T>> = Vec::with_capacity(depth);
    let mut hs: Vec<Vec<T>> = Vec::with_capacity(depth);
    let mut activations: Vec<Vec<T>> = Vec::with_capacity(depth + 1);
    activations.push(input.to_vec());
    for l in 1..=depth {
        let layer = &params.layers[l - 1];
        let prev = &activations[l - 1];
        let kind = spec.activation_for_layer(l);
        let z: Vec<T> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, &b)| neuron_preactivation(row, b, prev))
            .collect();
        let h: Vec<T> = if kind == Activation::Softmax {
            kind.apply(&z)
        } else {
            z.iter().map(|&v| kind.apply_scalar(v)).collect()
        };
        let a: Vec<T> = match scales {
            Some(scales) => h
                .iter()
                .zip(&scales[l - 1])
                .map(|(&hv, &r)| if r == T::ZERO { T::ZERO } else { hv * r })
                .collect(),
            None => h.clone(),
        };
        zs.push(z);
        hs.push(h);
        activations.push(a);
    }

    let scale_at = |l: usize, j: usize| -> T {
        match scales {
            Some(scales) => scales[l - 1][j],
            None => T::ONE,
        }
    };

    // Delta of the output layer: dL/dz_L, folding in the output mask if any.
    let out_kind = spec.output_activation();
    let n_out = spec.output_dim();
    let outputs = &activations[depth];
    let mut delta: Vec<T> = match (loss_kind, out_kind) {
        (LossKind::CrossEntropy, Activation::Softmax) => {
            // Composite softmax + cross-entropy derivative: p * sum(t) - t,
            // which is the classic p - t for one-hot targets. Masking a
            // softmax output would couple through the whole Jacobian, so it
            // is rejected rather than silently miscomputed.
            if (0..n_out).any(|j| scale_at(depth, j) != T::ONE) {
                return Err(NnError::LossCombo(
                    "cross-entropy does not support masked softmax outputs".into(),
                ));
            }
            let p = &hs[depth - 1];
            let sum_t: T = target.iter().copied().sum();
            (0..n_out).map(|j| p[j] * sum_t - target[j]).collect()
        }
        (LossKind::Mse, Activation::Softmax) => {
            // dL/da = 2 (a - y) / n, then through the softmax Jacobian
            // J = diag(p) - p p^T, honoring per-output masks.
            let p = &hs[depth - 1];
            let g: Vec<T> = (0..n_out)
                .map(|j| {
                    let d = outputs[j] - target[j];
                    (d + d) / T::from_f64(n_out as f64) * scale_at(depth, j)
                })
                .collect();
            let dot: T = (0..n_out).map(|j| g[j] * p[j]).sum();
            (0..n_out).map(|j| p[j] * (g[j] - dot)).collect()
        }
        (LossKind::Mse, _) => (0..n_out)
            .map(|j| {
                let r = scale_at(depth, j);
                if r == T::ZERO {
                    return T::ZERO;
                }
                let d = outputs[j] - target[j];
                (d + d) / T::from_f64(n_out as f64)
                    * r
                    * out_kind.derivative_scalar(zs[depth - 1][j])
            })
            .collect(),
        (LossKind::CrossEntropy, _) => unreachable!("rejected above"),
    };

    let mut grad = Parameters::zeros(spec);

    for l in (1..=depth).rev() {
        let prev = &activations[l - 1];
        let g_layer = &mut grad.layers[l - 1];
        for (j, &d) in delta.iter().enumerate() {
            g_layer.bias[j] = d;
            let row = &mut g_layer.weights[j];
            for (i, &a) in prev.iter().enumerate() {
                row[i] = d * a;
            }
        }
        if l == 1 {
            break;
        }
        // Propagate: delta_prev[i] = (sum_j W[j][i] * delta[j]) * r_i * f'(z_i).
        let w = &params.layers[l - 1].weights;
        let kind = spec.activation_for_layer(l - 1);
        let prev_z = &zs[l - 2];
        let next: Vec<T> = (0..spec.layer_sizes()[l - 1])
            .map(|i| {
                let r = scale_at(l - 1, i);
                if r == T::ZERO {
                    return T::ZERO;
                }
                let mut s = T::ZERO;
                for (j, &d) in delta.iter().enumerate() {
                    s += w[j][i] * d;
                }
                s * r * kind.derivative_scalar(prev_z[i])
            })
            .collect();
        delta = next;
    }

    Ok(grad)
}
