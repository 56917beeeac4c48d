//! Pure, deterministic MLP mathematics.
//!
//! Everything here is a total function over immutable inputs: forward passes
//! with optional failure masks, losses, reverse-mode gradients, and weight
//! initialization. No internal state, no wall clock, no global RNG — the same
//! inputs and seed always produce bitwise-identical outputs.
//!
//! The summation order inside a neuron is part of the public contract: the
//! accumulator starts at the bias and adds `w[i] * a[i]` in strictly ascending
//! input order. The distributed runtime evaluates neurons through the same
//! [`neuron_preactivation`] function, which is what makes a simulated cluster
//! bit-identical to the in-memory forward pass at `f32`.

mod activation;
mod backward;
mod forward;
mod init;
mod loss;

pub use activation::Activation;
pub use backward::backward;
pub use forward::{forward, forward_scaled, neuron_activate, neuron_preactivation};
pub use init::{init_params, InitScheme};
pub use loss::{loss, loss_mean, LossKind, CROSS_ENTROPY_FLOOR};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("invalid failure mask entry (layer {layer}, neuron {neuron}): {reason}")]
    Mask {
        layer: usize,
        neuron: usize,
        reason: String,
    },
    #[error("unsupported loss/output-activation pairing: {0}")]
    LossCombo(String),
}

/// Layer sizes and activation kinds of an MLP.
///
/// `layer_sizes = [n0, n1, ..., nL]` where `n0` is the input dimension and
/// layers `1..=L` carry weights. Hidden layers use `hidden_activation`,
/// the output layer uses `output_activation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::Spec(
                "need at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(NnError::Spec("every layer must have at least one neuron".into()));
        }
        if !matches!(hidden_activation, Activation::Relu | Activation::Sigmoid) {
            return Err(NnError::Spec(format!(
                "hidden activation must be relu or sigmoid, got {hidden_activation:?}"
            )));
        }
        if !matches!(output_activation, Activation::Linear | Activation::Softmax) {
            return Err(NnError::Spec(format!(
                "output activation must be linear or softmax, got {output_activation:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        })
    }

    /// The 10-10-10-1 regression network used throughout the experiments:
    /// two ReLU hidden layers of 10 neurons, one linear output.
    pub fn reference() -> Self {
        Self::new(vec![10, 10, 10, 1], Activation::Relu, Activation::Linear)
            .expect("reference spec is valid")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of weight layers (L).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    /// Total neurons across hidden layers (layers `1..L`).
    pub fn hidden_neuron_count(&self) -> usize {
        let l = self.depth();
        self.layer_sizes[1..l].iter().sum()
    }

    /// All `(layer, neuron)` pairs of the hidden layers, in ascending order.
    pub fn hidden_neurons(&self) -> Vec<(usize, usize)> {
        let l = self.depth();
        let mut out = Vec::with_capacity(self.hidden_neuron_count());
        for layer in 1..l {
            for neuron in 0..self.layer_sizes[layer] {
                out.push((layer, neuron));
            }
        }
        out
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Activation used by weight layer `l` in `1..=L`.
    pub fn activation_for_layer(&self, l: usize) -> Activation {
        if l == self.depth() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

/// Weights and biases of one layer: `weights[j][i]` connects input `i` to
/// neuron `j`, so each row is exactly the slice a deployed neuron owns.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

/// Per-layer weight matrices and bias vectors for a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub layers: Vec<LayerParams<T>>,
}

/// Gradients share the exact shape of the parameters they differentiate.
pub type Gradient<T> = Parameters<T>;

impl<T: Scalar> Parameters<T> {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let sizes = spec.layer_sizes();
        let layers = (1..sizes.len())
            .map(|l| LayerParams {
                weights: vec![vec![T::ZERO; sizes[l - 1]]; sizes[l]],
                bias: vec![T::ZERO; sizes[l]],
            })
            .collect();
        Self { layers }
    }

    /// Checks that shapes match `spec` exactly.
    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<(), NnError> {
        let sizes = spec.layer_sizes();
        if self.layers.len() != spec.depth() {
            return Err(NnError::Shape(format!(
                "expected {} weight layers, got {}",
                spec.depth(),
                self.layers.len()
            )));
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            let l = idx + 1;
            let (rows, cols) = (sizes[l], sizes[l - 1]);
            if layer.weights.len() != rows || layer.bias.len() != rows {
                return Err(NnError::Shape(format!(
                    "layer {l}: expected {rows} neurons, got {} weight rows / {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            for (j, row) in layer.weights.iter().enumerate() {
                if row.len() != cols {
                    return Err(NnError::Shape(format!(
                        "layer {l} neuron {j}: expected fan-in {cols}, got {}",
                        row.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|layer| {
            layer.bias.iter().all(|b| b.is_finite())
                && layer.weights.iter().flatten().all(|w| w.is_finite())
        })
    }

    /// Casts every entry, e.g. quantizing trained `f64` weights to the `f32`
    /// used on the wire and on nodes.
    pub fn convert<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|layer| LayerParams {
                    weights: layer
                        .weights
                        .iter()
                        .map(|row| row.iter().map(|w| U::from_f64(w.to_f64())).collect())
                        .collect(),
                    bias: layer.bias.iter().map(|b| U::from_f64(b.to_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Weight row and bias of one neuron; `layer` is 1-based.
    pub fn neuron(&self, layer: usize, neuron: usize) -> Option<(&[T], T)> {
        let lp = self.layers.get(layer.checked_sub(1)?)?;
        Some((lp.weights.get(neuron)?.as_slice(), *lp.bias.get(neuron)?))
    }
}

/// Activations of every layer for one input, `a(0)` being the input itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord<T> {
    pub layers: Vec<Vec<T>>,
}

impl<T: Scalar> ActivationRecord<T> {
    pub fn activation(&self, layer: usize) -> &[T] {
        &self.layers[layer]
    }

    pub fn output(&self) -> &[T] {
        self.layers.last().expect("record always has layers")
    }
}

/// Set of `(layer, neuron)` pairs whose activations are forced to zero,
/// modeling dead nodes. Layer indices are 1-based weight layers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureMask {
    entries: BTreeSet<(usize, usize)>,
}

impl FailureMask {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        Self {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, layer: usize, neuron: usize) {
        self.entries.insert((layer, neuron));
    }

    pub fn contains(&self, layer: usize, neuron: usize) -> bool {
        self.entries.contains(&(layer, neuron))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    /// Validates indices against `spec`. By default only hidden layers may
    /// fail; pass `allow_output` to also admit output-layer entries.
    pub fn validate(&self, spec: &NetworkSpec, allow_output: bool) -> Result<(), NnError> {
        let depth = spec.depth();
        for &(layer, neuron) in &self.entries {
            if layer < 1 || layer > depth {
                return Err(NnError::Mask {
                    layer,
                    neuron,
                    reason: format!("layer out of range 1..={depth}"),
                });
            }
            if !allow_output && layer == depth {
                return Err(NnError::Mask {
                    layer,
                    neuron,
                    reason: "output-layer failures are disabled by default".into(),
                });
            }
            let size = spec.layer_sizes()[layer];
            if neuron >= size {
                return Err(NnError::Mask {
                    layer,
                    neuron,
                    reason: format!("neuron out of range 0..{size}"),
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<(usize, usize)> for FailureMask {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Self::from_pairs(iter)
    }
}
