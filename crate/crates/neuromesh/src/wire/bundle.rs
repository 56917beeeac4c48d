//! Per-neuron deployment bundles.
//!
//! A bundle is a directory holding one binary blob per non-input neuron plus
//! a `manifest.txt`. Blob layout (all little-endian):
//!
//! ```text
//! offset  size       field
//! 0       2          magic 0x4E 0x42
//! 2       1          version 0x01
//! 3       1          activation (0 relu, 1 sigmoid, 2 linear)
//! 4       2          fan_in, u16
//! 6       4          bias, f32
//! 10      4*fan_in   weights, f32 each
//! 10+4n   4          CRC32 over bytes 0..10+4n
//! ```
//!
//! The manifest records layer sizes, activation kinds, the node-to-blob map,
//! and each blob's CRC as `key=value` lines. Weights are quantized to `f32`
//! at write time.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::crc::crc32;
use crate::config::{KvError, KvMap};
use crate::nn::{Activation, NetworkSpec, Parameters};
use crate::Scalar;

pub const BUNDLE_MAGIC: [u8; 2] = [0x4E, 0x42];
pub const BUNDLE_VERSION: u8 = 0x01;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("manifest error: {0}")]
    Kv(#[from] KvError),
    #[error("bad blob magic")]
    Magic,
    #[error("unknown blob version {0:#04X}")]
    Version(u8),
    #[error("blob truncated: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },
    #[error("unknown activation code {0}")]
    ActivationCode(u8),
    #[error("corrupt bundle blob: crc computed {computed:#010X}, stored {stored:#010X}")]
    CrcMismatch { computed: u32, stored: u32 },
    #[error("blob crc does not match manifest entry for node ({0}, {1})")]
    ManifestCrc(u8, u8),
    #[error("unknown node id ({0}, {1})")]
    UnknownNode(u8, u8),
    #[error("network too large to deploy: {0}")]
    TooLarge(String),
    #[error("cannot deploy: {0}")]
    Unsupported(String),
    #[error("manifest inconsistent: {0}")]
    Inconsistent(String),
}

/// A deployed neuron's parameters as read back from a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub weights: Vec<f32>,
    pub bias: f32,
    pub activation: Activation,
}

fn activation_code(a: Activation) -> Result<u8, BundleError> {
    match a {
        Activation::Relu => Ok(0),
        Activation::Sigmoid => Ok(1),
        Activation::Linear => Ok(2),
        Activation::Softmax => Err(BundleError::Unsupported(
            "softmax is a whole-layer operation; deploy softmax networks with a linear output \
             layer and normalize at the collector"
                .into(),
        )),
    }
}

fn activation_from_code(code: u8) -> Result<Activation, BundleError> {
    match code {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Sigmoid),
        2 => Ok(Activation::Linear),
        other => Err(BundleError::ActivationCode(other)),
    }
}

/// Serializes one neuron blob.
pub fn encode_bundle_blob(neuron: &NeuronParams) -> Result<Vec<u8>, BundleError> {
    if neuron.weights.len() > u16::MAX as usize {
        return Err(BundleError::TooLarge(format!(
            "fan-in {} exceeds 65535",
            neuron.weights.len()
        )));
    }
    let mut out = Vec::with_capacity(14 + 4 * neuron.weights.len());
    out.extend_from_slice(&BUNDLE_MAGIC);
    out.push(BUNDLE_VERSION);
    out.push(activation_code(neuron.activation)?);
    out.extend_from_slice(&(neuron.weights.len() as u16).to_le_bytes());
    out.extend_from_slice(&neuron.bias.to_le_bytes());
    for w in &neuron.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses one neuron blob. Total on arbitrary bytes.
pub fn read_bundle_blob(bytes: &[u8]) -> Result<NeuronParams, BundleError> {
    if bytes.len() < 14 {
        return Err(BundleError::Truncated {
            got: bytes.len(),
            need: 14,
        });
    }
    if bytes[0..2] != BUNDLE_MAGIC {
        return Err(BundleError::Magic);
    }
    if bytes[2] != BUNDLE_VERSION {
        return Err(BundleError::Version(bytes[2]));
    }
    let fan_in = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let need = 14 + 4 * fan_in;
    if bytes.len() != need {
        return Err(BundleError::Truncated {
            got: bytes.len(),
            need,
        });
    }
    let body_end = need - 4;
    let computed = crc32(&bytes[..body_end]);
    let stored = u32::from_le_bytes([
        bytes[body_end],
        bytes[body_end + 1],
        bytes[body_end + 2],
        bytes[body_end + 3],
    ]);
    if computed != stored {
        return Err(BundleError::CrcMismatch { computed, stored });
    }
    let activation = activation_from_code(bytes[3])?;
    let bias = f32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]);
    let weights = bytes[10..body_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(NeuronParams {
        weights,
        bias,
        activation,
    })
}

/// Parsed bundle manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleManifest {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// node id -> (blob file name, blob crc).
    pub blobs: BTreeMap<(u8, u8), (String, u32)>,
}

impl BundleManifest {
    pub fn spec(&self) -> Result<NetworkSpec, BundleError> {
        NetworkSpec::new(
            self.layer_sizes.clone(),
            self.hidden_activation,
            self.output_activation,
        )
        .map_err(|e| BundleError::Inconsistent(e.to_string()))
    }

    pub fn render(&self) -> String {
        let mut kv = KvMap::new();
        kv.set("version", BUNDLE_VERSION);
        kv.set(
            "layers",
            self.layer_sizes
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.set("hidden_activation", self.hidden_activation.name());
        kv.set("output_activation", self.output_activation.name());
        for (&(l, n), (file, crc)) in &self.blobs {
            kv.set(&format!("blob.{l}.{n}"), file);
            kv.set(&format!("crc.{l}.{n}"), format!("{crc:08X}"));
        }
        kv.render()
    }

    pub fn parse(text: &str) -> Result<Self, BundleError> {
        let kv = KvMap::parse(text)?;
        let layer_sizes = kv
            .get_usize_list("layers")?
            .ok_or_else(|| KvError::Missing("layers".into()))?;
        let hidden_activation = Activation::from_name(kv.require("hidden_activation")?)
            .ok_or_else(|| BundleError::Inconsistent("bad hidden_activation".into()))?;
        let output_activation = Activation::from_name(kv.require("output_activation")?)
            .ok_or_else(|| BundleError::Inconsistent("bad output_activation".into()))?;
        let mut blobs = BTreeMap::new();
        for (rest, file) in kv.with_prefix("blob") {
            let mut parts = rest.splitn(2, '.');
            let (Some(l), Some(n)) = (parts.next(), parts.next()) else {
                return Err(BundleError::Inconsistent(format!("bad blob key {rest:?}")));
            };
            let (Ok(l), Ok(n)) = (l.parse::<u8>(), n.parse::<u8>()) else {
                return Err(BundleError::Inconsistent(format!("bad blob key {rest:?}")));
            };
            let crc_text = kv
                .get(&format!("crc.{l}.{n}"))
                .ok_or_else(|| BundleError::Inconsistent(format!("missing crc.{l}.{n}")))?;
            let crc = u32::from_str_radix(crc_text, 16)
                .map_err(|_| BundleError::Inconsistent(format!("bad crc.{l}.{n}")))?;
            blobs.insert((l, n), (file.to_string(), crc));
        }
        let manifest = Self {
            layer_sizes,
            hidden_activation,
            output_activation,
            blobs,
        };
        manifest.check_consistent()?;
        Ok(manifest)
    }

    fn check_consistent(&self) -> Result<(), BundleError> {
        if self.layer_sizes.len() < 2 {
            return Err(BundleError::Inconsistent("fewer than two layers".into()));
        }
        let expected: usize = self.layer_sizes[1..].iter().sum();
        if self.blobs.len() != expected {
            return Err(BundleError::Inconsistent(format!(
                "{} blobs for {expected} non-input neurons",
                self.blobs.len()
            )));
        }
        for &(l, n) in self.blobs.keys() {
            let l = l as usize;
            if l == 0 || l >= self.layer_sizes.len() {
                return Err(BundleError::Inconsistent(format!("blob layer {l} out of range")));
            }
            if n as usize >= self.layer_sizes[l] {
                return Err(BundleError::Inconsistent(format!(
                    "blob neuron {n} out of range for layer {l}"
                )));
            }
        }
        Ok(())
    }
}

/// Writes one blob per non-input neuron plus `manifest.txt` into `dir`,
/// quantizing weights to `f32`.
pub fn write_bundle<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    dir: &Path,
) -> Result<BundleManifest, BundleError> {
    params
        .check_shape(spec)
        .map_err(|e| BundleError::Inconsistent(e.to_string()))?;
    if spec.layer_sizes().iter().any(|&n| n > u8::MAX as usize) {
        return Err(BundleError::TooLarge("layer size exceeds 255".into()));
    }
    if spec.depth() >= COORDINATOR_LAYER_USIZE {
        return Err(BundleError::TooLarge("more than 254 layers".into()));
    }
    // Reject softmax up front rather than deploying half a bundle.
    activation_code(spec.output_activation())?;

    let quantized: Parameters<f32> = params.convert();
    fs::create_dir_all(dir)?;
    let mut blobs = BTreeMap::new();
    for l in 1..=spec.depth() {
        let kind = spec.activation_for_layer(l);
        for n in 0..spec.layer_sizes()[l] {
            let neuron = NeuronParams {
                weights: quantized.layers[l - 1].weights[n].clone(),
                bias: quantized.layers[l - 1].bias[n],
                activation: kind,
            };
            let bytes = encode_bundle_blob(&neuron)?;
            let crc = crc32(&bytes[..bytes.len() - 4]);
            let file = format!("n{l}_{n}.bin");
            fs::write(dir.join(&file), &bytes)?;
            blobs.insert((l as u8, n as u8), (file, crc));
        }
    }
    let manifest = BundleManifest {
        layer_sizes: spec.layer_sizes().to_vec(),
        hidden_activation: spec.hidden_activation(),
        output_activation: spec.output_activation(),
        blobs,
    };
    fs::write(dir.join("manifest.txt"), manifest.render())?;
    Ok(manifest)
}

const COORDINATOR_LAYER_USIZE: usize = 0xFF;

/// Reads and validates `manifest.txt` from a bundle directory.
pub fn read_bundle_manifest(dir: &Path) -> Result<BundleManifest, BundleError> {
    let text = fs::read_to_string(dir.join("manifest.txt"))?;
    BundleManifest::parse(&text)
}

/// Reads one neuron's parameters from a bundle, validating both the blob CRC
/// and its manifest entry.
pub fn read_neuron(
    dir: &Path,
    manifest: &BundleManifest,
    layer: u8,
    neuron: u8,
) -> Result<NeuronParams, BundleError> {
    let (file, manifest_crc) = manifest
        .blobs
        .get(&(layer, neuron))
        .ok_or(BundleError::UnknownNode(layer, neuron))?;
    let bytes = fs::read(dir.join(file))?;
    let params = read_bundle_blob(&bytes)?;
    let crc = crc32(&bytes[..bytes.len() - 4]);
    if crc != *manifest_crc {
        return Err(BundleError::ManifestCrc(layer, neuron));
    }
    let expected_fan_in = manifest.layer_sizes[layer as usize - 1];
    if params.weights.len() != expected_fan_in {
        return Err(BundleError::Inconsistent(format!(
            "node ({layer}, {neuron}): blob fan-in {} != manifest layer size {expected_fan_in}",
            params.weights.len()
        )));
    }
    Ok(params)
}


/// Loads the whole network back out of a bundle as `f32` parameters.
pub fn read_bundle_params(dir: &Path) -> Result<(NetworkSpec, Parameters<f32>), BundleError> {
    let manifest = read_bundle_manifest(dir)?;
    let spec = manifest.spec()?;
    let sizes = spec.layer_sizes();
    let mut layers = Vec::with_capacity(spec.depth());
    for l in 1..=spec.depth() {
        let mut weights = Vec::with_capacity(sizes[l]);
        let mut bias = Vec::with_capacity(sizes[l]);
        for n in 0..sizes[l] {
            let neuron = read_neuron(dir, &manifest, l as u8, n as u8)?;
            weights.push(neuron.weights);
            bias.push(neuron.bias);
        }
        layers.push(crate::nn::LayerParams { weights, bias });
    }
    Ok((spec, Parameters { layers }))
}
