//! Analytic failure evaluation: masked test-set MSE, degradation sweeps,
//! critical-threshold estimation, and the dropout-vs-plain comparison.
//!
//! Nothing here is distributed — a failure set is applied directly to the
//! forward pass by zeroing activations. The simulated cluster is required to
//! agree with [`evaluate`] bit-for-bit at `f32`, which makes this module the
//! oracle for the runtime.

use std::fmt::Write as _;

use thiserror::Error;

use crate::datagen::Dataset;
use crate::nn::{forward, FailureMask, NetworkSpec, NnError, Parameters};
use crate::rng::Rng;
use crate::trainer::{self, TrainConfig, TrainError, TrainingLog};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum FaultError {
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("training error: {0}")]
    Train(#[from] TrainError),
    #[error("cannot disable {requested} of {available} hidden neurons")]
    KTooLarge { requested: usize, available: usize },
    #[error("no degradation rows supplied")]
    EmptyRows,
    #[error("empty sample passed to significance test")]
    EmptySample,
}

/// One row of a degradation table: statistics of `trials` random failure
/// sets of size `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRow {
    pub k: usize,
    pub mean_mse: f64,
    pub degradation_pct: f64,
    pub std_mse: f64,
    pub trials: usize,
    pub p_value: f64,
}

/// Estimated critical failure fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate {
    /// Fraction of hidden neurons at which the acceptability criterion is
    /// first violated (linearly interpolated between tested k values).
    pub p_c: f64,
    /// Multiple of the baseline MSE used as the acceptability criterion.
    pub criterion_factor: f64,
    /// True when no tested k crossed the criterion; `p_c` then reports the
    /// largest tested fraction.
    pub censored: bool,
}

/// Paired sweep of two networks differing only in dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutComparison {
    pub dropout_baseline: f64,
    pub plain_baseline: f64,
    pub dropout_rows: Vec<DegradationRow>,
    pub plain_rows: Vec<DegradationRow>,
    pub dropout_threshold: ThresholdEstimate,
    pub plain_threshold: ThresholdEstimate,
    pub dropout_log: TrainingLog,
    pub plain_log: TrainingLog,
}

/// Predictions of the masked network over a dataset's features.
pub fn predict_masked<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    features: &[Vec<T>],
    mask: &FailureMask,
) -> Result<Vec<Vec<T>>, FaultError> {
    let mut out = Vec::with_capacity(features.len());
    for x in features {
        let rec = forward(spec, params, x, mask)?;
        out.push(rec.output().to_vec());
    }
    Ok(out)
}

/// MSE over `dataset` with the failure set applied to every forward pass.
pub fn evaluate(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    dataset: &Dataset,
    failure_set: &FailureMask,
) -> Result<f64, FaultError> {
    failure_set.validate(spec, true)?;
    let mut sum = 0.0;
    for (x, &y) in dataset.features.iter().zip(&dataset.targets) {
        let rec = forward(spec, params, x, failure_set)?;
        let d = rec.output()[0] - y;
        sum += d * d;
    }
    Ok(sum / dataset.len() as f64)
}

/// Draws a uniform random failure set of `k` hidden neurons.
pub fn random_failure_set(
    spec: &NetworkSpec,
    k: usize,
    rng: &mut Rng,
) -> Result<FailureMask, FaultError> {
    let hidden = spec.hidden_neurons();
    if k > hidden.len() {
        return Err(FaultError::KTooLarge {
            requested: k,
            available: hidden.len(),
        });
    }
    let picks = rng.sample_indices(hidden.len(), k);
    Ok(FailureMask::from_pairs(picks.into_iter().map(|i| hidden[i])))
}

/// For each `k`, evaluates `trials` random failure sets and aggregates mean,
/// standard deviation, relative degradation, and a permutation p-value
/// against the unmasked baseline.
pub fn degradation_sweep(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    testset: &Dataset,
    k_values: &[usize],
    trials: usize,
    rng: &mut Rng,
) -> Result<Vec<DegradationRow>, FaultError> {
    assert!(trials >= 1, "trials must be >= 1");
    let baseline = evaluate(spec, params, testset, &FailureMask::empty())?;
    let baseline_sample = vec![baseline; trials];
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut mses = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mask = random_failure_set(spec, k, rng)?;
            mses.push(evaluate(spec, params, testset, &mask)?);
        }
        // Exact mean for identical samples, so the k=0 row reports exactly
        // the baseline and 0% degradation.
        let mean = if mses.iter().all(|&m| m == mses[0]) {
            mses[0]
        } else {
            mses.iter().sum::<f64>() / trials as f64
        };
        let std = if trials > 1 {
            (mses.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (trials - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        let p_value = significance_test(&baseline_sample, &mses, rng)?;
        rows.push(DegradationRow {
            k,
            mean_mse: mean,
            degradation_pct: 100.0 * (mean - baseline) / baseline,
            std_mse: std,
            trials,
            p_value,
        });
    }
    Ok(rows)
}

/// Two-sided seeded permutation test on the difference of sample means,
/// 10,000 permutations. Returns 1 when both samples are a single repeated
/// value. Deterministic for a given generator state.
pub fn significance_test(
    baseline: &[f64],
    failed: &[f64],
    rng: &mut Rng,
) -> Result<f64, FaultError> {
    if baseline.is_empty() || failed.is_empty() {
        return Err(FaultError::EmptySample);
    }
    let first = baseline[0];
    if baseline.iter().chain(failed).all(|&v| v == first) {
        return Ok(1.0);
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let observed = (mean(baseline) - mean(failed)).abs();
    let mut pooled: Vec<f64> = baseline.iter().chain(failed).copied().collect();
    let n_a = baseline.len();
    let permutations = 10_000;
    let mut at_least = 0usize;
    for _ in 0..permutations {
        // Partial Fisher-Yates: the first n_a entries become group A.
        for i in 0..n_a {
            let j = i + rng.next_below((pooled.len() - i) as u64) as usize;
            pooled.swap(i, j);
        }
        let m_a = mean(&pooled[..n_a]);
        let m_b = mean(&pooled[n_a..]);
        if (m_a - m_b).abs() >= observed {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (1 + permutations) as f64)
}

/// Interpolates the failed-neuron fraction at which `mean_mse` first exceeds
/// `criterion_factor * baseline`. Rows must be sorted by ascending `k`.
pub fn estimate_critical_threshold(
    rows: &[DegradationRow],
    baseline: f64,
    criterion_factor: f64,
    hidden_total: usize,
) -> Result<ThresholdEstimate, FaultError> {
    if rows.is_empty() {
        return Err(FaultError::EmptyRows);
    }
    let limit = criterion_factor * baseline;
    let mut prev: Option<&DegradationRow> = None;
    for row in rows {
        if row.mean_mse > limit {
            let k_star = match prev {
                Some(p) => {
                    p.k as f64
                        + (limit - p.mean_mse) / (row.mean_mse - p.mean_mse)
                            * (row.k as f64 - p.k as f64)
                }
                // Violated already at the smallest tested k.
                None => row.k as f64,
            };
            return Ok(ThresholdEstimate {
                p_c: k_star / hidden_total as f64,
                criterion_factor,
                censored: false,
            });
        }
        prev = Some(row);
    }
    Ok(ThresholdEstimate {
        p_c: rows.last().expect("non-empty").k as f64 / hidden_total as f64,
        criterion_factor,
        censored: true,
    })
}

/// Trains two networks differing only in `dropout_enabled` on the same data
/// and seed, sweeps both, and estimates both critical thresholds.
pub fn compare_dropout_vs_plain(
    train_data: &Dataset,
    test_data: &Dataset,
    spec: &NetworkSpec,
    config: &TrainConfig,
    k_values: &[usize],
    trials: usize,
    criterion_factor: f64,
    sweep_seed: u64,
) -> Result<DropoutComparison, FaultError> {
    let dropout_config = TrainConfig {
        dropout_enabled: true,
        ..config.clone()
    };
    let plain_config = TrainConfig {
        dropout_enabled: false,
        ..config.clone()
    };
    let (dropout_params, dropout_log) = trainer::train(train_data, None, spec, &dropout_config)?;
    let (plain_params, plain_log) = trainer::train(train_data, None, spec, &plain_config)?;

    let mut rng_a = Rng::from_seed_stream(sweep_seed, 0);
    let mut rng_b = Rng::from_seed_stream(sweep_seed, 0);
    let dropout_rows =
        degradation_sweep(spec, &dropout_params, test_data, k_values, trials, &mut rng_a)?;
    let plain_rows =
        degradation_sweep(spec, &plain_params, test_data, k_values, trials, &mut rng_b)?;

    let dropout_baseline = evaluate(spec, &dropout_params, test_data, &FailureMask::empty())?;
    let plain_baseline = evaluate(spec, &plain_params, test_data, &FailureMask::empty())?;
    let hidden_total = spec.hidden_neuron_count();
    let dropout_threshold = estimate_critical_threshold(
        &dropout_rows,
        dropout_baseline,
        criterion_factor,
        hidden_total,
    )?;
    let plain_threshold =
        estimate_critical_threshold(&plain_rows, plain_baseline, criterion_factor, hidden_total)?;

    Ok(DropoutComparison {
        dropout_baseline,
        plain_baseline,
        dropout_rows,
        plain_rows,
        dropout_threshold,
        plain_threshold,
        dropout_log,
        plain_log,
    })
}

/// Renders degradation rows as CSV.
pub fn rows_to_csv(rows: &[DegradationRow]) -> String {
    let mut out = String::from("k,mean_mse,degradation_pct,std_mse,trials,p_value\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k, r.mean_mse, r.degradation_pct, r.std_mse, r.trials, r.p_value
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{self, DataGenConfig};
    use crate::nn::{init_params, Activation, InitScheme};

    fn small_net() -> (NetworkSpec, Parameters<f64>, Dataset) {
        let spec = NetworkSpec::new(vec![4, 6, 6, 1], Activation::Relu, Activation::Linear)
            .unwrap();
        let params = init_params::<f64>(&spec, InitScheme::He, &mut Rng::new(2));
        let (_, test) = datagen::generate(&DataGenConfig {
            n_train: 1,
            n_test: 200,
            feature_dim: 4,
            ..DataGenConfig::default()
        })
        .unwrap();
        (spec, params, test)
    }

    #[test]
    fn empty_failure_set_equals_baseline() {
        let (spec, params, test) = small_net();
        let a = evaluate(&spec, &params, &test, &FailureMask::empty()).unwrap();
        let b = evaluate(&spec, &params, &test, &FailureMask::empty()).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
    }

    #[test]
    fn all_hidden_failed_is_the_constant_bias_chain_predictor() {
        let (spec, params, test) = small_net();
        let mask = FailureMask::from_pairs(spec.hidden_neurons());
        let got = evaluate(&spec, &params, &test, &mask).unwrap();
        // Constant-predictor oracle: with every hidden neuron silent the
        // output is exactly the output bias, so the MSE is the mean squared
        // distance of the targets from that constant.
        let constant = params.layers[2].bias[0];
        let expected = test
            .targets
            .iter()
            .map(|&y| (constant - y) * (constant - y))
            .sum::<f64>()
            / test.len() as f64;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn single_failure_matches_bruteforce_reimplementation() {
        let (spec, params, test) = small_net();
        // Independent forward pass that zeroes activation (l, k) by hand.
        let eval_single = |l: usize, k: usize| -> f64 {
            let mut sum = 0.0;
            for (x, &y) in test.features.iter().zip(&test.targets) {
                let mut prev = x.clone();
                for layer in 1..=spec.depth() {
                    let kind = spec.activation_for_layer(layer);
                    let mut acts = Vec::new();
                    for j in 0..spec.layer_sizes()[layer] {
                        let mut s = params.layers[layer - 1].bias[j];
                        for (i, &p) in prev.iter().enumerate() {
                            s += params.layers[layer - 1].weights[j][i] * p;
                        }
                        let mut a = kind.apply_scalar(s);
                        if layer == l && j == k {
                            a = 0.0;
                        }
                        acts.push(a);
                    }
                    prev = acts;
                }
                let d = prev[0] - y;
                sum += d * d;
            }
            sum / test.len() as f64
        };
        for (l, k) in [(1usize, 0usize), (1, 5), (2, 3)] {
            let mask = FailureMask::from_pairs([(l, k)]);
            let got = evaluate(&spec, &params, &test, &mask).unwrap();
            assert_eq!(got, eval_single(l, k), "failure ({l},{k})");
        }
    }

    #[test]
    fn evaluate_ignores_failure_set_iteration_order() {
        let (spec, params, test) = small_net();
        let a = FailureMask::from_pairs([(1, 2), (2, 4), (1, 0)]);
        let b = FailureMask::from_pairs([(2, 4), (1, 0), (1, 2)]);
        assert_eq!(
            evaluate(&spec, &params, &test, &a).unwrap(),
            evaluate(&spec, &params, &test, &b).unwrap()
        );
    }

    #[test]
    fn sweep_row_zero_is_baseline_with_unit_p() {
        let (spec, params, test) = small_net();
        let mut rng = Rng::new(6);
        let rows = degradation_sweep(&spec, &params, &test, &[0, 1, 2], 10, &mut rng).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].k, 0);
        assert_eq!(rows[0].degradation_pct, 0.0);
        assert_eq!(rows[0].p_value, 1.0);
        assert!(rows.iter().all(|r| r.trials == 10));
    }

    #[test]
    fn sweep_rejects_k_beyond_hidden_population() {
        let (spec, params, test) = small_net();
        let mut rng = Rng::new(6);
        assert!(matches!(
            degradation_sweep(&spec, &params, &test, &[13], 2, &mut rng),
            Err(FaultError::KTooLarge { requested: 13, available: 12 })
        ));
    }

    #[test]
    fn identical_samples_give_p_one() {
        let s = vec![0.5; 20];
        let p = significance_test(&s, &s, &mut Rng::new(1)).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn well_separated_samples_give_tiny_p() {
        let mut rng = Rng::new(9);
        let a: Vec<f64> = (0..30).map(|_| rng.gaussian() * 0.1).collect();
        let b: Vec<f64> = (0..30).map(|_| 10.0 + rng.gaussian() * 0.1).collect();
        let p = significance_test(&a, &b, &mut Rng::new(10)).unwrap();
        assert!(p < 0.001, "p = {p}");
    }

    #[test]
    fn permutation_test_is_deterministic_per_seed() {
        let mut rng = Rng::new(9);
        let a: Vec<f64> = (0..15).map(|_| rng.gaussian()).collect();
        let b: Vec<f64> = (0..15).map(|_| rng.gaussian() + 0.3).collect();
        let p1 = significance_test(&a, &b, &mut Rng::new(77)).unwrap();
        let p2 = significance_test(&a, &b, &mut Rng::new(77)).unwrap();
        assert_eq!(p1, p2);
        assert!((0.0..=1.0).contains(&p1));
    }

    #[test]
    fn threshold_interpolation_matches_hand_arithmetic() {
        // baseline 0.01, factor 2 => limit 0.02; crossing between k=4 (0.018)
        // and k=5 (0.026) interpolates to k* = 4.25, p_c = 0.2125 of 20.
        let mk = |k: usize, mean: f64| DegradationRow {
            k,
            mean_mse: mean,
            degradation_pct: 0.0,
            std_mse: 0.0,
            trials: 1,
            p_value: 1.0,
        };
        let rows = vec![mk(0, 0.01), mk(4, 0.018), mk(5, 0.026)];
        let est = estimate_critical_threshold(&rows, 0.01, 2.0, 20).unwrap();
        assert!(!est.censored);
        assert!((est.p_c - 0.2125).abs() < 1e-12, "p_c {}", est.p_c);
    }

    #[test]
    fn flat_curve_is_censored_at_max_tested_fraction() {
        let mk = |k: usize, mean: f64| DegradationRow {
            k,
            mean_mse: mean,
            degradation_pct: 0.0,
            std_mse: 0.0,
            trials: 1,
            p_value: 1.0,
        };
        let rows = vec![mk(0, 0.01), mk(3, 0.011), mk(7, 0.012)];
        let est = estimate_critical_threshold(&rows, 0.01, 2.0, 20).unwrap();
        assert!(est.censored);
        assert_eq!(est.p_c, 7.0 / 20.0);
    }

    #[test]
    fn empty_rows_are_rejected() {
        assert!(matches!(
            estimate_critical_threshold(&[], 0.01, 2.0, 20),
            Err(FaultError::EmptyRows)
        ));
    }

    #[test]
    fn rows_csv_has_header_and_row_per_k() {
        let mk = |k: usize| DegradationRow {
            k,
            mean_mse: 0.01,
            degradation_pct: 1.0,
            std_mse: 0.0,
            trials: 5,
            p_value: 0.5,
        };
        let csv = rows_to_csv(&[mk(0), mk(1)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "k,mean_mse,degradation_pct,std_mse,trials,p_value");
    }
}
