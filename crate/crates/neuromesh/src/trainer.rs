//! Mini-batch Adam training with inverted dropout.
//!
//! Dropout here is the inverted variant: kept units are scaled by
//! `1/keep_prob` during training so the learned weights are inference-ready
//! with no output rescaling. Masks are resampled per sample, matching the
//! per-example loss in the mini-batch mean. All randomness (shuffles, masks)
//! derives from the configured seed, so a training run reproduces
//! bit-for-bit.

use std::time::Instant;

use thiserror::Error;

use crate::datagen::Dataset;
use crate::nn::{
    backward, forward_scaled, init_params, loss, Gradient, InitScheme, LossKind, NetworkSpec,
    NnError, Parameters,
};
use crate::rng::Rng;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("dataset feature dim {got} != network input dim {expected}")]
    FeatureDim { got: usize, expected: usize },
}

/// Training hyperparameters. Defaults are the experimental reference values:
/// eta 0.001, beta1 0.9, beta2 0.999, eps 1e-8, batch 64, 200 epochs,
/// drop probability 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Probability that a hidden unit is dropped during training.
    pub dropout_drop_prob: f64,
    pub dropout_enabled: bool,
    pub init_scheme: InitScheme,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 200,
            dropout_drop_prob: 0.5,
            dropout_enabled: true,
            init_scheme: InitScheme::He,
            seed: 1,
        }
    }
}

impl TrainConfig {
    /// Probability that a hidden unit is kept; the complement of
    /// `dropout_drop_prob`. Both names exist so call sites always say which
    /// probability they mean.
    pub fn dropout_keep_prob(&self) -> f64 {
        1.0 - self.dropout_drop_prob
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.eta > 0.0) {
            return Err(TrainError::Config("eta must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::Config("beta1/beta2 must be in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(TrainError::Config("epsilon must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::Config("batch_size and epochs must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout_drop_prob) {
            return Err(TrainError::Config("dropout_drop_prob must be in [0, 1]".into()));
        }
        if self.dropout_enabled && self.dropout_keep_prob() == 0.0 {
            return Err(TrainError::Config(
                "keep probability 0 with dropout enabled would train a constant network".into(),
            ));
        }
        Ok(())
    }
}

/// Adam moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(spec: &NetworkSpec) -> Self {
        Self {
            m: Parameters::zeros(spec),
            v: Parameters::zeros(spec),
            t: 0,
        }
    }
}

/// One sample's dropout masks: a scale vector per weight layer, hidden layers
/// carrying `0` (dropped) or `1/keep_prob` (kept), the output layer all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    pub scales: Vec<Vec<T>>,
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Full log of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub config: TrainConfig,
}

impl TrainingLog {
    /// CSV with the effective config echoed as `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# eta={}\n", self.config.eta));
        out.push_str(&format!("# beta1={}\n", self.config.beta1));
        out.push_str(&format!("# beta2={}\n", self.config.beta2));
        out.push_str(&format!("# epsilon={}\n", self.config.epsilon));
        out.push_str(&format!("# batch_size={}\n", self.config.batch_size));
        out.push_str(&format!("# epochs={}\n", self.config.epochs));
        out.push_str(&format!("# dropout_drop_prob={}\n", self.config.dropout_drop_prob));
        out.push_str(&format!("# dropout_enabled={}\n", self.config.dropout_enabled));
        out.push_str(&format!("# init_scheme={}\n", self.config.init_scheme.name()));
        out.push_str(&format!("# seed={}\n", self.seed));
        out.push_str("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            match e.val_loss {
                Some(v) => out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, v)),
                None => out.push_str(&format!("{},{},\n", e.epoch, e.train_loss)),
            }
        }
        out
    }
}

/// Samples one set of per-hidden-layer inverted-dropout masks.
///
/// Each hidden unit is kept independently with probability `keep_prob`; kept
/// entries carry `1/keep_prob`, dropped entries are exactly 0. The output
/// layer is never masked.
pub fn sample_masks<T: Scalar>(
    spec: &NetworkSpec,
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<DropoutMasks<T>, TrainError> {
    if !(0.0..=1.0).contains(&keep_prob) {
        return Err(TrainError::Config("keep_prob must be in [0, 1]".into()));
    }
    if keep_prob == 0.0 {
        return Err(TrainError::Config(
            "keep_prob 0 would zero every hidden unit".into(),
        ));
    }
    let depth = spec.depth();
    let inv = T::from_f64(1.0 / keep_prob);
    let scales = (1..=depth)
        .map(|l| {
            let n = spec.layer_sizes()[l];
            if l == depth {
                vec![T::ONE; n]
            } else if keep_prob == 1.0 {
                vec![T::ONE; n]
            } else {
                (0..n)
                    .map(|_| {
                        if rng.unit_f64() < keep_prob {
                            inv
                        } else {
                            T::ZERO
                        }
                    })
                    .collect()
            }
        })
        .collect();
    Ok(DropoutMasks { scales })
}

/// One Adam update. `state.t` counts completed steps; the update uses `t + 1`
/// for bias correction and increments the counter.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &Gradient<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    for (l, layer) in grads.layers.iter().enumerate() {
        let finite = layer.bias.iter().all(|g| g.is_finite())
            && layer.weights.iter().flatten().all(|g| g.is_finite());
        if !finite {
            return Err(TrainError::NonFiniteGradient {
                tensor: format!("layer {} gradient", l + 1),
            });
        }
    }

    let t = state.t + 1;
    let beta1 = T::from_f64(config.beta1);
    let beta2 = T::from_f64(config.beta2);
    let one_minus_beta1 = T::from_f64(1.0 - config.beta1);
    let one_minus_beta2 = T::from_f64(1.0 - config.beta2);
    let bias1 = T::from_f64(1.0 - config.beta1.powi(t as i32));
    let bias2 = T::from_f64(1.0 - config.beta2.powi(t as i32));
    let eta = T::from_f64(config.eta);
    let eps = T::from_f64(config.epsilon);

    for l in 0..params.layers.len() {
        for j in 0..params.layers[l].weights.len() {
            for i in 0..params.layers[l].weights[j].len() {
                let g = grads.layers[l].weights[j][i];
                let m = &mut state.m.layers[l].weights[j][i];
                *m = beta1 * *m + one_minus_beta1 * g;
                let v = &mut state.v.layers[l].weights[j][i];
                *v = beta2 * *v + one_minus_beta2 * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                params.layers[l].weights[j][i] -= eta * m_hat / (v_hat.sqrt() + eps);
            }
            let g = grads.layers[l].bias[j];
            let m = &mut state.m.layers[l].bias[j];
            *m = beta1 * *m + one_minus_beta1 * g;
            let v = &mut state.v.layers[l].bias[j];
            *v = beta2 * *v + one_minus_beta2 * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            params.layers[l].bias[j] -= eta * m_hat / (v_hat.sqrt() + eps);
        }
    }
    state.t = t;
    Ok(())
}

/// Mean of per-sample gradients, each computed under that sample's masks.
/// Reduction runs in ascending sample order.
pub fn minibatch_gradient<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    batch: &[(&[T], &[T])],
    masks: Option<&[DropoutMasks<T>]>,
    loss_kind: LossKind,
) -> Result<Gradient<T>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if let Some(masks) = masks {
        if masks.len() != batch.len() {
            return Err(TrainError::Config(format!(
                "{} masks for {} samples",
                masks.len(),
                batch.len()
            )));
        }
    }
    let mut total = Parameters::<T>::zeros(spec);
    for (idx, (x, y)) in batch.iter().enumerate() {
        let scales = masks.map(|m| m[idx].scales.as_slice());
        let g = backward(spec, params, x, y, loss_kind, scales)?;
        for (tl, gl) in total.layers.iter_mut().zip(&g.layers) {
            for (trow, grow) in tl.weights.iter_mut().zip(&gl.weights) {
                for (t, &g) in trow.iter_mut().zip(grow) {
                    *t += g;
                }
            }
            for (t, &g) in tl.bias.iter_mut().zip(&gl.bias) {
                *t += g;
            }
        }
    }
    let scale = T::from_f64(1.0 / batch.len() as f64);
    for layer in &mut total.layers {
        for row in &mut layer.weights {
            for w in row.iter_mut() {
                *w = *w * scale;
            }
        }
        for b in &mut layer.bias {
            *b = *b * scale;
        }
    }
    Ok(total)
}

/// Trains a network on `train` with MSE loss.
///
/// Each epoch shuffles sample order with a seeded Fisher-Yates pass (the last
/// short batch is kept), resamples dropout masks per sample when enabled, and
/// takes one Adam step per batch. The returned parameters are inference-ready
/// with no dropout scaling. `val` is evaluated unmasked after each epoch.
pub fn train(
    train: &Dataset,
    val: Option<&Dataset>,
    spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<(Parameters<f64>, TrainingLog), TrainError> {
    config.validate()?;
    if train.feature_dim() != spec.input_dim() {
        return Err(TrainError::FeatureDim {
            got: train.feature_dim(),
            expected: spec.input_dim(),
        });
    }
    let started = Instant::now();
    let mut init_rng = Rng::from_seed_stream(config.seed, 0);
    let mut mask_rng = Rng::from_seed_stream(config.seed, 1);
    let mut shuffle_rng = Rng::from_seed_stream(config.seed, 2);

    let mut params = init_params::<f64>(spec, config.init_scheme, &mut init_rng);
    let mut state = AdamState::<f64>::new(spec);
    let keep_prob = config.dropout_keep_prob();

    let n = train.len();
    let targets: Vec<[f64; 1]> = train.targets.iter().map(|&y| [y]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss_sum = 0.0;
        let mut epoch_samples = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[f64], &[f64])> = chunk
                .iter()
                .map(|&i| (train.features[i].as_slice(), targets[i].as_slice()))
                .collect();
            let masks: Option<Vec<DropoutMasks<f64>>> = if config.dropout_enabled {
                let mut ms = Vec::with_capacity(batch.len());
                for _ in 0..batch.len() {
                    ms.push(sample_masks(spec, keep_prob, &mut mask_rng)?);
                }
                Some(ms)
            } else {
                None
            };

            // Training loss under the same masks the gradient uses.
            let mut batch_loss = 0.0;
            for (idx, (x, y)) in batch.iter().enumerate() {
                let scales = masks.as_ref().map(|m| m[idx].scales.as_slice());
                let rec = forward_scaled(spec, &params, x, scales)?;
                batch_loss += loss(LossKind::Mse, rec.output(), y)?;
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(TrainError::NanLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss_sum += batch_loss * batch.len() as f64;
            epoch_samples += batch.len();

            let grad = minibatch_gradient(
                spec,
                &params,
                &batch,
                masks.as_deref(),
                LossKind::Mse,
            )?;
            adam_step(&mut params, &grad, &mut state, config)?;
        }

        let val_loss = match val {
            Some(v) => Some(dataset_mse(spec, &params, v)?),
            None => None,
        };
        epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss_sum / epoch_samples as f64,
            val_loss,
        });
    }

    let log = TrainingLog {
        epochs,
        wall_time_secs: started.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.clone(),
    };
    Ok((params, log))
}

/// Unmasked MSE of `params` over a dataset.
pub fn dataset_mse(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    data: &Dataset,
) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    for (x, &y) in data.features.iter().zip(&data.targets) {
        let rec = forward_scaled(spec, params, x, None)?;
        let d = rec.output()[0] - y;
        sum += d * d;
    }
    Ok(sum / data.len() as f64)
}
