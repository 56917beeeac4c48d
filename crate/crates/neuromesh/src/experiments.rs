//! Experiment orchestration: the degradation table, the dropout-vs-plain
//! comparison, the five mid-run disconnection studies, and the recovery-time
//! table, each emitted as CSV plus a markdown summary.
//!
//! Every number is a pure function of the embedded configuration and seeds:
//! rerunning a suite with the same config reproduces its CSV files byte for
//! byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{KvError, KvMap};
use crate::datagen::{self, DataGenConfig, Dataset};
use crate::faults::{self, FaultError};
use crate::nn::{Activation, InitScheme, NetworkSpec, NnError, Parameters};
use crate::rng::Rng;
use crate::runtime::{
    measure_recovery, run_simulation, Addr, FaultEvent, RuntimeError, SimConfig, SimResult,
    TraceKind,
};
use crate::trainer::{self, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("kv error: {0}")]
    Kv(#[from] KvError),
    #[error("data error: {0}")]
    Data(#[from] datagen::DataError),
    #[error("training error: {0}")]
    Train(#[from] TrainError),
    #[error("fault-model error: {0}")]
    Fault(#[from] FaultError),
    #[error("runtime error: {0}")]
    Runtime(#[from] RuntimeError),
    #[error("network error: {0}")]
    Nn(#[from] NnError),
}

/// Which experiment suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Degradation,
    DropoutVsPlain,
    Disconnect,
    Recovery,
    All,
}

impl Suite {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "degradation" => Some(Suite::Degradation),
            "dropout-vs-plain" => Some(Suite::DropoutVsPlain),
            "disconnect" => Some(Suite::Disconnect),
            "recovery" => Some(Suite::Recovery),
            "all" => Some(Suite::All),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Degradation => "degradation",
            Suite::DropoutVsPlain => "dropout-vs-plain",
            Suite::Disconnect => "disconnect",
            Suite::Recovery => "recovery",
            Suite::All => "all",
        }
    }
}

/// Full experiment configuration. Defaults reproduce the reference protocol:
/// the 10-10-10-1 network, the frozen synthetic dataset, the reference
/// training hyperparameters, k = 0..7 with 100 trials each, and a 2x-baseline
/// acceptability criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: NetworkSpec,
    pub seeds: Vec<u64>,
    pub data: DataGenConfig,
    pub train: TrainConfig,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub criterion_factor: f64,
    pub sim: SimConfig,
    /// Inputs per simulated run in the disconnect/recovery studies.
    pub workload_len: usize,
    /// Seed for sweep/simulation randomness (distinct from training seeds).
    pub experiment_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spec: NetworkSpec::reference(),
            seeds: vec![1, 2, 3],
            data: DataGenConfig::default(),
            train: TrainConfig::default(),
            k_values: (0..=7).collect(),
            trials: 100,
            criterion_factor: 2.0,
            sim: SimConfig::default(),
            workload_len: 100,
            experiment_seed: 9000,
        }
    }
}

impl ExperimentConfig {
    /// Applies `key=value` overrides (dotted keys) on top of `self`.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<(), ExperimentError> {
        if let Some(layers) = kv.get_usize_list("spec.layers")? {
            let hidden = kv.get("spec.hidden_activation").unwrap_or("relu");
            let output = kv.get("spec.output_activation").unwrap_or("linear");
            self.spec = NetworkSpec::new(
                layers,
                Activation::from_name(hidden)
                    .ok_or_else(|| ExperimentError::Config(format!("bad activation {hidden}")))?,
                Activation::from_name(output)
                    .ok_or_else(|| ExperimentError::Config(format!("bad activation {output}")))?,
            )?;
        }
        if let Some(text) = kv.get("experiment.seeds") {
            self.seeds = text
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ExperimentError::Config(format!("bad seeds {text:?}")))?;
        }
        if let Some(text) = kv.get("experiment.k_values") {
            self.k_values = text
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| ExperimentError::Config(format!("bad k_values {text:?}")))?;
        }
        if let Some(v) = kv.get_usize("experiment.trials")? {
            self.trials = v;
        }
        if let Some(v) = kv.get_f64("experiment.criterion_factor")? {
            self.criterion_factor = v;
        }
        if let Some(v) = kv.get_usize("experiment.workload_len")? {
            self.workload_len = v;
        }
        if let Some(v) = kv.get_u64("experiment.seed")? {
            self.experiment_seed = v;
        }
        if let Some(v) = kv.get_u64("data.seed")? {
            self.data.seed = v;
        }
        if let Some(v) = kv.get_usize("data.n_train")? {
            self.data.n_train = v;
        }
        if let Some(v) = kv.get_usize("data.n_test")? {
            self.data.n_test = v;
        }
        if let Some(v) = kv.get_usize("data.feature_dim")? {
            self.data.feature_dim = v;
        }
        if let Some(v) = kv.get_f64("data.noise_sigma")? {
            self.data.noise_sigma = v;
        }
        if let Some(v) = kv.get_f64("train.eta")? {
            self.train.eta = v;
        }
        if let Some(v) = kv.get_f64("train.beta1")? {
            self.train.beta1 = v;
        }
        if let Some(v) = kv.get_f64("train.beta2")? {
            self.train.beta2 = v;
        }
        if let Some(v) = kv.get_f64("train.epsilon")? {
            self.train.epsilon = v;
        }
        if let Some(v) = kv.get_usize("train.batch_size")? {
            self.train.batch_size = v;
        }
        if let Some(v) = kv.get_usize("train.epochs")? {
            self.train.epochs = v;
        }
        if let Some(v) = kv.get_f64("train.dropout_drop_prob")? {
            self.train.dropout_drop_prob = v;
        }
        if let Some(v) = kv.get_bool("train.dropout_enabled")? {
            self.train.dropout_enabled = v;
        }
        if let Some(name) = kv.get("train.init_scheme") {
            self.train.init_scheme = InitScheme::from_name(name)
                .ok_or_else(|| ExperimentError::Config(format!("bad init_scheme {name}")))?;
        }
        if let Some(v) = kv.get_u64("sim.latency_min_us")? {
            self.sim.latency_min_us = v;
        }
        if let Some(v) = kv.get_u64("sim.latency_max_us")? {
            self.sim.latency_max_us = v;
        }
        if let Some(v) = kv.get_f64("sim.loss_probability")? {
            self.sim.loss_probability = v;
        }
        if let Some(v) = kv.get_bool("sim.standby_coordinator")? {
            self.sim.standby_coordinator = v;
        }
        if let Some(v) = kv.get_u64("sim.layer_timeout_ms")? {
            self.sim.timing.layer_timeout_us = v * 1000;
        }
        if let Some(v) = kv.get_u64("sim.heartbeat_interval_ms")? {
            self.sim.timing.heartbeat_interval_us = v * 1000;
        }
        if let Some(v) = kv.get_u64("sim.heartbeat_miss_threshold")? {
            self.sim.timing.heartbeat_miss_threshold = v as u32;
        }
        if let Some(v) = kv.get_u64("sim.coordinator_handover_timeout_ms")? {
            self.sim.timing.handover_timeout_us = v * 1000;
        }
        if let Some(v) = kv.get_u64("sim.inference_deadline_ms")? {
            self.sim.timing.inference_deadline_us = v * 1000;
        }
        if let Some(v) = kv.get_u64("sim.inference_interval_ms")? {
            self.sim.timing.inference_interval_us = v * 1000;
        }
        if let Some(v) = kv.get_u64("sim.warmup_timeout_ms")? {
            self.sim.timing.warmup_timeout_us = v * 1000;
        }
        Ok(())
    }

    /// The full effective configuration as `key=value` text; parsing it back
    /// with [`Self::apply_kv`] reproduces this config exactly.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set(
            "spec.layers",
            self.spec
                .layer_sizes()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.set("spec.hidden_activation", self.spec.hidden_activation().name());
        kv.set("spec.output_activation", self.spec.output_activation().name());
        kv.set(
            "experiment.seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        kv.set(
            "experiment.k_values",
            self.k_values
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.set("experiment.trials", self.trials);
        kv.set("experiment.criterion_factor", self.criterion_factor);
        kv.set("experiment.workload_len", self.workload_len);
        kv.set("experiment.seed", self.experiment_seed);
        kv.set("data.seed", self.data.seed);
        kv.set("data.n_train", self.data.n_train);
        kv.set("data.n_test", self.data.n_test);
        kv.set("data.feature_dim", self.data.feature_dim);
        kv.set("data.noise_sigma", self.data.noise_sigma);
        kv.set("train.eta", self.train.eta);
        kv.set("train.beta1", self.train.beta1);
        kv.set("train.beta2", self.train.beta2);
        kv.set("train.epsilon", self.train.epsilon);
        kv.set("train.batch_size", self.train.batch_size);
        kv.set("train.epochs", self.train.epochs);
        kv.set("train.dropout_drop_prob", self.train.dropout_drop_prob);
        kv.set("train.dropout_enabled", self.train.dropout_enabled);
        kv.set("train.init_scheme", self.train.init_scheme.name());
        kv.set("sim.latency_min_us", self.sim.latency_min_us);
        kv.set("sim.latency_max_us", self.sim.latency_max_us);
        kv.set("sim.loss_probability", self.sim.loss_probability);
        kv.set("sim.standby_coordinator", self.sim.standby_coordinator);
        kv.set("sim.layer_timeout_ms", self.sim.timing.layer_timeout_us / 1000);
        kv.set(
            "sim.heartbeat_interval_ms",
            self.sim.timing.heartbeat_interval_us / 1000,
        );
        kv.set(
            "sim.heartbeat_miss_threshold",
            self.sim.timing.heartbeat_miss_threshold,
        );
        kv.set(
            "sim.coordinator_handover_timeout_ms",
            self.sim.timing.handover_timeout_us / 1000,
        );
        kv.set(
            "sim.inference_deadline_ms",
            self.sim.timing.inference_deadline_us / 1000,
        );
        kv.set(
            "sim.inference_interval_ms",
            self.sim.timing.inference_interval_us / 1000,
        );
        kv.set("sim.warmup_timeout_ms", self.sim.timing.warmup_timeout_us / 1000);
        kv
    }
}

/// CSV tables plus a markdown summary. File contents are deterministic per
/// config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub files: BTreeMap<String, String>,
    pub markdown: String,
}

/// Trains on the frozen dataset with the given seed, returning `f64` params.
fn train_net(
    config: &ExperimentConfig,
    seed: u64,
    dropout: bool,
    train_data: &Dataset,
) -> Result<Parameters<f64>, ExperimentError> {
    let train_config = TrainConfig {
        seed,
        dropout_enabled: dropout,
        ..config.train.clone()
    };
    let (params, _) = trainer::train(train_data, None, &config.spec, &train_config)?;
    Ok(params)
}

fn f32_workload(test: &Dataset, len: usize) -> (Vec<Vec<f32>>, Vec<f64>) {
    let take = len.min(test.len());
    let inputs = test.features[..take]
        .iter()
        .map(|row| row.iter().map(|&v| v as f32).collect())
        .collect();
    let targets = test.targets[..take].to_vec();
    (inputs, targets)
}

/// Mean squared error of completed predictions against targets, restricted to
/// the given workload indices.
fn outcome_mse(result: &SimResult, targets: &[f64], indices: &[usize]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &i in indices {
        if let Some(outcome) = &result.outcomes[i] {
            if let Some(values) = outcome.completed() {
                let d = values[0] as f64 - targets[i];
                sum += d * d;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Issue/completion times per workload index, from the trace.
fn issue_completion_times(result: &SimResult, len: usize) -> (Vec<Option<u64>>, Vec<Option<u64>>) {
    let mut issued = vec![None; len];
    let mut completed = vec![None; len];
    for event in result.trace.iter() {
        match event.kind {
            TraceKind::InferenceIssued { workload_index, .. } => {
                let slot = &mut issued[workload_index as usize];
                if slot.is_none() {
                    *slot = Some(event.time_us);
                }
            }
            TraceKind::InferenceCompleted { workload_index, .. } => {
                let slot = &mut completed[workload_index as usize];
                if slot.is_none() {
                    *slot = Some(event.time_us);
                }
            }
            _ => {}
        }
    }
    (issued, completed)
}

/// Degradation tables, one per training seed.
pub fn run_degradation(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let (train_data, test_data) = datagen::generate(&config.data)?;
    let mut files = BTreeMap::new();
    for &seed in &config.seeds {
        let params = train_net(config, seed, true, &train_data)?;
        let mut rng = Rng::from_seed_stream(config.experiment_seed, seed);
        let rows = faults::degradation_sweep(
            &config.spec,
            &params,
            &test_data,
            &config.k_values,
            config.trials,
            &mut rng,
        )?;
        files.insert(format!("degradation_seed{seed}.csv"), faults::rows_to_csv(&rows));
    }
    finish_report(config, files)
}

/// Dropout-vs-plain paired sweeps and thresholds for every seed.
pub fn run_dropout_vs_plain(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let (train_data, test_data) = datagen::generate(&config.data)?;
    let mut pair_csv = String::from(
        "seed,k,dropout_mean_mse,dropout_degradation_pct,plain_mean_mse,plain_degradation_pct\n",
    );
    let mut threshold_csv = String::from(
        "seed,dropout_baseline,plain_baseline,dropout_p_c,plain_p_c,dropout_censored,plain_censored\n",
    );
    for &seed in &config.seeds {
        let train_config = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let comparison = faults::compare_dropout_vs_plain(
            &train_data,
            &test_data,
            &config.spec,
            &train_config,
            &config.k_values,
            config.trials,
            config.criterion_factor,
            config.experiment_seed.wrapping_add(seed),
        )?;
        for (d, p) in comparison.dropout_rows.iter().zip(&comparison.plain_rows) {
            let _ = writeln!(
                pair_csv,
                "{},{},{},{},{},{}",
                seed, d.k, d.mean_mse, d.degradation_pct, p.mean_mse, p.degradation_pct
            );
        }
        let _ = writeln!(
            threshold_csv,
            "{},{},{},{},{},{},{}",
            seed,
            comparison.dropout_baseline,
            comparison.plain_baseline,
            comparison.dropout_threshold.p_c,
            comparison.plain_threshold.p_c,
            comparison.dropout_threshold.censored,
            comparison.plain_threshold.censored
        );
    }
    let mut files = BTreeMap::new();
    files.insert("dropout_vs_plain.csv".into(), pair_csv);
    files.insert("thresholds.csv".into(), threshold_csv);
    finish_report(config, files)
}

struct DisconnectSpec {
    name: &'static str,
    kills: Vec<(u8, u8)>,
    workload_multiplier: usize,
}

/// Picks the five disconnection studies' kill sets for this network shape.
fn disconnect_specs(spec: &NetworkSpec, rng: &mut Rng) -> Vec<DisconnectSpec> {
    let pick = |rng: &mut Rng, layer: usize, count: usize, spec: &NetworkSpec| -> Vec<(u8, u8)> {
        let size = spec.layer_sizes()[layer];
        rng.sample_indices(size, count)
            .into_iter()
            .map(|n| (layer as u8, n as u8))
            .collect()
    };
    let pick_hidden = |rng: &mut Rng, count: usize, spec: &NetworkSpec| -> Vec<(u8, u8)> {
        let hidden = spec.hidden_neurons();
        rng.sample_indices(hidden.len(), count)
            .into_iter()
            .map(|i| (hidden[i].0 as u8, hidden[i].1 as u8))
            .collect()
    };
    vec![
        DisconnectSpec {
            name: "disconnect_1_layer1",
            kills: pick(rng, 1, 1, spec),
            workload_multiplier: 1,
        },
        DisconnectSpec {
            name: "disconnect_2_layer2",
            kills: pick(rng, 2, 2, spec),
            workload_multiplier: 1,
        },
        DisconnectSpec {
            name: "disconnect_3_mixed_extended",
            kills: {
                let mut kills = pick(rng, 1, 2, spec);
                kills.extend(pick(rng, 2, 1, spec));
                kills
            },
            workload_multiplier: 10,
        },
        DisconnectSpec {
            name: "disconnect_5_quarter",
            kills: pick_hidden(rng, 5, spec),
            workload_multiplier: 1,
        },
        DisconnectSpec {
            name: "disconnect_7_third",
            kills: pick_hidden(rng, 7, spec),
            workload_multiplier: 1,
        },
    ]
}

/// The five mid-run disconnection studies on a dropout-trained network.
pub fn run_disconnect(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let (train_data, test_data) = datagen::generate(&config.data)?;
    let seed = *config.seeds.first().ok_or_else(|| {
        ExperimentError::Config("at least one seed required".into())
    })?;
    let params64 = train_net(config, seed, true, &train_data)?;
    let params32: Parameters<f32> = params64.convert();

    let mut rng = Rng::from_seed_stream(config.experiment_seed, 100);
    let specs = disconnect_specs(&config.spec, &mut rng);

    let mut csv = String::from(
        "experiment,killed,workload,answered,failed,baseline_mse,pre_kill_mse,post_kill_mse,post_inflation_pct\n",
    );
    for study in specs {
        let workload_len = config.workload_len * study.workload_multiplier;
        let (inputs, targets) = f32_workload(&test_data, workload_len);
        let workload_len = inputs.len();
        let timing = &config.sim.timing;
        // The workload starts once every node has been heard, a few ms in;
        // 100 ms of margin plus half the issue span lands the kill mid-run.
        let kill_at = 100_000 + (workload_len as u64 / 2) * timing.inference_interval_us;
        let faults: Vec<FaultEvent> = study
            .kills
            .iter()
            .map(|&(l, n)| FaultEvent {
                at_us: kill_at,
                target: Addr::node(l, n),
            })
            .collect();
        let sim_seed = config.experiment_seed.wrapping_add(study.kills.len() as u64);
        let baseline_run =
            run_simulation(&config.spec, &params32, &inputs, &[], &config.sim, sim_seed)?;
        let faulted_run =
            run_simulation(&config.spec, &params32, &inputs, &faults, &config.sim, sim_seed)?;

        let all: Vec<usize> = (0..workload_len).collect();
        let baseline_mse = outcome_mse(&baseline_run, &targets, &all).unwrap_or(f64::NAN);
        let (issued, completed) = issue_completion_times(&faulted_run, workload_len);
        let pre: Vec<usize> = (0..workload_len)
            .filter(|&i| completed[i].is_some_and(|t| t < kill_at))
            .collect();
        let post: Vec<usize> = (0..workload_len)
            .filter(|&i| issued[i].is_some_and(|t| t > kill_at))
            .collect();
        let pre_mse = outcome_mse(&faulted_run, &targets, &pre).unwrap_or(f64::NAN);
        let post_mse = outcome_mse(&faulted_run, &targets, &post).unwrap_or(f64::NAN);
        let answered = faulted_run.outcomes.iter().filter(|o| o.is_some()).count();
        let failed = faulted_run
            .outcomes
            .iter()
            .filter(|o| {
                matches!(
                    o,
                    Some(crate::runtime::InferenceOutcome::DeadlineExceeded)
                )
            })
            .count();
        let inflation = 100.0 * (post_mse - baseline_mse) / baseline_mse;
        let killed = study
            .kills
            .iter()
            .map(|(l, n)| format!("{l}:{n}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            study.name,
            killed,
            workload_len,
            answered,
            failed,
            baseline_mse,
            pre_mse,
            post_mse,
            inflation
        );
    }
    let mut files = BTreeMap::new();
    files.insert("disconnect.csv".into(), csv);
    finish_report(config, files)
}

/// Recovery-time table: single node kill, simultaneous multi-node kill, and
/// coordinator handover, measured on the simulated cluster.
pub fn run_recovery(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let (_, test_data) = datagen::generate(&config.data)?;
    // Recovery timing does not depend on trained weights.
    let params32: Parameters<f32> = crate::nn::init_params::<f64>(
        &config.spec,
        config.train.init_scheme,
        &mut Rng::new(config.experiment_seed),
    )
    .convert();
    let (inputs, _) = f32_workload(&test_data, config.workload_len.max(60));
    let timing = &config.sim.timing;
    let kill_at = 100_000 + (inputs.len() as u64 / 2) * timing.inference_interval_us;

    let hidden = config.spec.hidden_neurons();
    let single = vec![FaultEvent {
        at_us: kill_at,
        target: Addr::node(hidden[0].0 as u8, hidden[0].1 as u8),
    }];
    let multiple: Vec<FaultEvent> = hidden
        .iter()
        .take(3)
        .map(|&(l, n)| FaultEvent {
            at_us: kill_at,
            target: Addr::node(l as u8, n as u8),
        })
        .collect();
    let coordinator = vec![FaultEvent {
        at_us: kill_at,
        target: Addr::Coordinator(0),
    }];

    let mut csv =
        String::from("event,detection_ms,stabilization_ms,total_ms,complete_records\n");
    let studies: [(&str, Vec<FaultEvent>); 3] = [
        ("single_neuron_failure", single),
        ("multiple_neuron_failures", multiple),
        ("coordinator_handover", coordinator),
    ];
    for (name, faults) in studies {
        let result = run_simulation(
            &config.spec,
            &params32,
            &inputs,
            &faults,
            &config.sim,
            config.experiment_seed,
        )?;
        let records = measure_recovery(&result.trace);
        debug_assert!(!records.is_empty(), "{name}: no fault events surfaced");
        let detection = records
            .iter()
            .filter_map(|r| r.detection_us)
            .max()
            .map(|v| v as f64 / 1000.0);
        let declared_last = records
            .iter()
            .filter_map(|r| r.detection_us.map(|d| r.fault_at_us + d))
            .max();
        let stabilization = declared_last.and_then(|declared| {
            result
                .trace
                .iter()
                .find(|e| {
                    e.time_us > declared
                        && matches!(e.kind, TraceKind::InferenceCompleted { .. })
                })
                .map(|e| (e.time_us - declared) as f64 / 1000.0)
        });
        let total = match (detection, stabilization) {
            (Some(d), Some(s)) => Some(d + s),
            _ => None,
        };
        let complete = records.iter().filter(|r| !r.censored).count();
        let fmt = |v: Option<f64>| v.map_or(String::from("censored"), |v| format!("{v}"));
        let _ = writeln!(
            csv,
            "{},{},{},{},{}/{}",
            name,
            fmt(detection),
            fmt(stabilization),
            fmt(total),
            complete,
            records.len()
        );
    }
    let mut files = BTreeMap::new();
    files.insert("recovery.csv".into(), csv);
    finish_report(config, files)
}

/// Runs the selected suite(s).
pub fn run_suite(suite: Suite, config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    match suite {
        Suite::Degradation => run_degradation(config),
        Suite::DropoutVsPlain => run_dropout_vs_plain(config),
        Suite::Disconnect => run_disconnect(config),
        Suite::Recovery => run_recovery(config),
        Suite::All => {
            let mut files = BTreeMap::new();
            for s in [
                Suite::Degradation,
                Suite::DropoutVsPlain,
                Suite::Disconnect,
                Suite::Recovery,
            ] {
                let report = run_suite(s, config)?;
                files.extend(report.files);
            }
            finish_report(config, files)
        }
    }
}

fn finish_report(
    config: &ExperimentConfig,
    mut files: BTreeMap<String, String>,
) -> Result<ExperimentReport, ExperimentError> {
    files.insert("effective_config.txt".into(), config.to_kv().render());
    let markdown = render_report(&files);
    Ok(ExperimentReport { files, markdown })
}

/// Renders CSV tables into a markdown summary. Pure function of its inputs.
pub fn render_report(files: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Experiment report");
    let _ = writeln!(out);
    let _ = writeln!(out, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out);
    if let Some(config) = files.get("effective_config.txt") {
        let _ = writeln!(out, "## Effective configuration");
        let _ = writeln!(out);
        let _ = writeln!(out, "```");
        out.push_str(config);
        let _ = writeln!(out, "```");
        let _ = writeln!(out);
    }
    for (name, content) in files {
        if !name.ends_with(".csv") {
            continue;
        }
        let _ = writeln!(out, "## {name}");
        let _ = writeln!(out);
        let _ = writeln!(out, "source: `{name}`");
        let _ = writeln!(out);
        let mut lines = content.lines();
        if let Some(header) = lines.next() {
            let cols = header.split(',').count();
            let _ = writeln!(out, "| {} |", header.split(',').collect::<Vec<_>>().join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(cols));
            for line in lines {
                let _ = writeln!(out, "| {} |", line.split(',').collect::<Vec<_>>().join(" | "));
            }
        }
        let _ = writeln!(out);
    }
    out
}
