use super::{NetworkSpec, Parameters};
use crate::rng::Rng;
use crate::Scalar;

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Gaussian with variance `2 / (fan_in + fan_out)`.
    Xavier,
    /// Gaussian with variance `2 / fan_in`, suited to ReLU layers.
    He,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::Xavier => "xavier",
            InitScheme::He => "he",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "xavier" => Some(InitScheme::Xavier),
            "he" => Some(InitScheme::He),
            _ => None,
        }
    }
}

/// Draws weights layer by layer, row by row, column by column from the given
/// generator; biases start at zero. Sampling happens in `f64` and is then
/// converted to `T`, so the `f32` parameters of a deployed network are the
/// quantization of the `f64` ones drawn from the same seed.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, scheme: InitScheme, rng: &mut Rng) -> Parameters<T> {
    let sizes = spec.layer_sizes();
    let mut params = Parameters::<T>::zeros(spec);
    for l in 1..sizes.len() {
        let (fan_in, fan_out) = (sizes[l - 1], sizes[l]);
        let variance = match scheme {
            InitScheme::He => 2.0 / fan_in as f64,
            InitScheme::Xavier => 2.0 / (fan_in + fan_out) as f64,
        };
        let std = variance.sqrt();
        let layer = &mut params.layers[l - 1];
        for row in &mut layer.weights {
            for w in row.iter_mut() {
                *w = T::from_f64(rng.gaussian() * std);
            }
        }
    }
    params
}
