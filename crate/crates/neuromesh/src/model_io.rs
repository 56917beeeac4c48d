//! Text persistence for trained parameters.
//!
//! The format is `key=value` lines: network shape up front, then one
//! comma-separated weight row per neuron (`w.<layer>.<neuron>`) and one bias
//! vector per layer (`b.<layer>`). Values use shortest-round-trip decimals,
//! so `read(write(p)) == p` holds bitwise for `f64` parameters.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::config::{KvError, KvMap};
use crate::nn::{Activation, LayerParams, NetworkSpec, NnError, Parameters};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Kv(#[from] KvError),
    #[error("{0}")]
    Nn(#[from] NnError),
    #[error("model file: {0}")]
    Format(String),
}

pub fn render_params(spec: &NetworkSpec, params: &Parameters<f64>) -> Result<String, ModelIoError> {
    params.check_shape(spec)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "layers={}",
        spec.layer_sizes()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(out, "hidden_activation={}", spec.hidden_activation().name());
    let _ = writeln!(out, "output_activation={}", spec.output_activation().name());
    for (idx, layer) in params.layers.iter().enumerate() {
        let l = idx + 1;
        let _ = writeln!(
            out,
            "b.{l}={}",
            layer
                .bias
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
        for (n, row) in layer.weights.iter().enumerate() {
            let _ = writeln!(
                out,
                "w.{l}.{n}={}",
                row.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
            );
        }
    }
    Ok(out)
}

pub fn parse_params(text: &str) -> Result<(NetworkSpec, Parameters<f64>), ModelIoError> {
    let kv = KvMap::parse(text)?;
    let layers = kv
        .get_usize_list("layers")?
        .ok_or_else(|| ModelIoError::Format("missing layers".into()))?;
    let hidden = kv.require("hidden_activation")?;
    let output = kv.require("output_activation")?;
    let spec = NetworkSpec::new(
        layers,
        Activation::from_name(hidden)
            .ok_or_else(|| ModelIoError::Format(format!("bad hidden_activation {hidden:?}")))?,
        Activation::from_name(output)
            .ok_or_else(|| ModelIoError::Format(format!("bad output_activation {output:?}")))?,
    )?;
    let parse_floats = |key: &str| -> Result<Vec<f64>, ModelIoError> {
        kv.require(key)?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ModelIoError::Format(format!("bad float in {key}")))
            })
            .collect()
    };
    let sizes = spec.layer_sizes();
    let mut param_layers = Vec::with_capacity(spec.depth());
    for l in 1..=spec.depth() {
        let bias = parse_floats(&format!("b.{l}"))?;
        if bias.len() != sizes[l] {
            return Err(ModelIoError::Format(format!(
                "b.{l} has {} entries, expected {}",
                bias.len(),
                sizes[l]
            )));
        }
        let mut weights = Vec::with_capacity(sizes[l]);
        for n in 0..sizes[l] {
            weights.push(parse_floats(&format!("w.{l}.{n}"))?);
        }
        param_layers.push(LayerParams { weights, bias });
    }
    let params = Parameters { layers: param_layers };
    params.check_shape(&spec)?;
    Ok((spec, params))
}

pub fn write_params(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    path: &Path,
) -> Result<(), ModelIoError> {
    std::fs::write(path, render_params(spec, params)?)?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<(NetworkSpec, Parameters<f64>), ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    parse_params(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, InitScheme};
    use crate::rng::Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let spec = NetworkSpec::reference();
        let params = init_params::<f64>(&spec, InitScheme::He, &mut Rng::new(77));
        let text = render_params(&spec, &params).unwrap();
        let (spec2, params2) = parse_params(&text).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
    }

    #[test]
    fn missing_row_is_an_error() {
        let spec = NetworkSpec::reference();
        let params = init_params::<f64>(&spec, InitScheme::He, &mut Rng::new(1));
        let text = render_params(&spec, &params).unwrap();
        let broken: String = text.lines().filter(|l| !l.starts_with("w.2.3=")).fold(
            String::new(),
            |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            },
        );
        assert!(parse_params(&broken).is_err());
    }
}
