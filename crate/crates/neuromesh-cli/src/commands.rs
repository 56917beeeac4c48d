use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context};

use neuromesh::config::KvMap;
use neuromesh::datagen::{self, DataGenConfig, Split};
use neuromesh::experiments::{self, ExperimentConfig, Suite};
use neuromesh::faults;
use neuromesh::model_io;
use neuromesh::nn::{InitScheme, NetworkSpec};
use neuromesh::rng::Rng;
use neuromesh::runtime::{self, measure_recovery, ClusterFile, SimConfig};
use neuromesh::trainer::{self, TrainConfig};
use neuromesh::wire;

use crate::faultspec;
use crate::CommonArgs;

fn load_config(common: &CommonArgs) -> anyhow::Result<KvMap> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            Ok(KvMap::parse(&text)?)
        }
        None => Ok(KvMap::new()),
    }
}

fn ensure_out(common: &CommonArgs) -> anyhow::Result<&Path> {
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;
    Ok(&common.out)
}

fn data_config(kv: &KvMap, seed: Option<u64>) -> anyhow::Result<DataGenConfig> {
    let mut config = DataGenConfig::default();
    if let Some(v) = kv.get_u64("data.seed")? {
        config.seed = v;
    }
    if let Some(v) = kv.get_usize("data.n_train")? {
        config.n_train = v;
    }
    if let Some(v) = kv.get_usize("data.n_test")? {
        config.n_test = v;
    }
    if let Some(v) = kv.get_usize("data.feature_dim")? {
        config.feature_dim = v;
    }
    if let Some(v) = kv.get_f64("data.noise_sigma")? {
        config.noise_sigma = v;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn train_config(kv: &KvMap, seed: Option<u64>) -> anyhow::Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(v) = kv.get_f64("train.eta")? {
        config.eta = v;
    }
    if let Some(v) = kv.get_f64("train.beta1")? {
        config.beta1 = v;
    }
    if let Some(v) = kv.get_f64("train.beta2")? {
        config.beta2 = v;
    }
    if let Some(v) = kv.get_f64("train.epsilon")? {
        config.epsilon = v;
    }
    if let Some(v) = kv.get_usize("train.batch_size")? {
        config.batch_size = v;
    }
    if let Some(v) = kv.get_usize("train.epochs")? {
        config.epochs = v;
    }
    if let Some(v) = kv.get_f64("train.dropout_drop_prob")? {
        config.dropout_drop_prob = v;
    }
    if let Some(v) = kv.get_bool("train.dropout_enabled")? {
        config.dropout_enabled = v;
    }
    if let Some(name) = kv.get("train.init_scheme") {
        config.init_scheme =
            InitScheme::from_name(name).with_context(|| format!("bad init_scheme {name:?}"))?;
    }
    if let Some(v) = kv.get_u64("train.seed")? {
        config.seed = v;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn spec_from_kv(kv: &KvMap) -> anyhow::Result<NetworkSpec> {
    match kv.get_usize_list("spec.layers")? {
        None => Ok(NetworkSpec::reference()),
        Some(layers) => {
            let hidden = kv.get("spec.hidden_activation").unwrap_or("relu");
            let output = kv.get("spec.output_activation").unwrap_or("linear");
            Ok(NetworkSpec::new(
                layers,
                neuromesh::nn::Activation::from_name(hidden)
                    .with_context(|| format!("bad hidden_activation {hidden:?}"))?,
                neuromesh::nn::Activation::from_name(output)
                    .with_context(|| format!("bad output_activation {output:?}"))?,
            )?)
        }
    }
}

pub fn gen_data(common: &CommonArgs) -> anyhow::Result<()> {
    let kv = load_config(common)?;
    let config = data_config(&kv, common.seed)?;
    let out = ensure_out(common)?;
    let (train, test) = datagen::generate(&config)?;
    datagen::write_csv(&train, &out.join("train.csv"))?;
    datagen::write_csv(&test, &out.join("test.csv"))?;
    fs::write(out.join("dataset.meta"), datagen::metadata(&config).render())?;
    println!(
        "wrote {} train rows and {} test rows to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

pub fn train(common: &CommonArgs, data: Option<&Path>, no_dropout: bool) -> anyhow::Result<()> {
    let kv = load_config(common)?;
    let spec = spec_from_kv(&kv)?;
    let mut config = train_config(&kv, common.seed)?;
    if no_dropout {
        config.dropout_enabled = false;
    }
    let (train_set, test_set) = match data {
        Some(dir) => (
            datagen::read_csv(&dir.join("train.csv"), Split::Train)?,
            datagen::read_csv(&dir.join("test.csv"), Split::Test)?,
        ),
        None => datagen::generate(&data_config(&kv, None)?)?,
    };
    let out = ensure_out(common)?;
    let (params, log) = trainer::train(&train_set, Some(&test_set), &spec, &config)?;
    model_io::write_params(&spec, &params, &out.join("params.txt"))?;
    fs::write(out.join("training_log.csv"), log.to_csv())?;
    let final_loss = log.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN);
    let test_mse = trainer::dataset_mse(&spec, &params, &test_set)?;
    println!(
        "trained {} epochs (dropout {}): final train loss {final_loss:.6}, test mse {test_mse:.6}",
        log.epochs.len(),
        if config.dropout_enabled { "on" } else { "off" },
    );
    Ok(())
}

pub fn deploy(common: &CommonArgs, params_path: &Path) -> anyhow::Result<()> {
    let (spec, params) = model_io::read_params(params_path)?;
    let out = ensure_out(common)?;
    let manifest = wire::write_bundle(&spec, &params, out)?;
    println!(
        "wrote {} neuron blobs and manifest.txt to {}",
        manifest.blobs.len(),
        out.display()
    );
    Ok(())
}

pub fn simulate(
    common: &CommonArgs,
    bundle: &Path,
    workload_path: &Path,
    faults_text: &str,
    limit: Option<usize>,
) -> anyhow::Result<()> {
    let kv = load_config(common)?;
    let (spec, params) = wire::read_bundle_params(bundle)?;
    let workload_set = datagen::read_csv(workload_path, Split::Test)?;
    let take = limit.unwrap_or(workload_set.len()).min(workload_set.len());
    let inputs: Vec<Vec<f32>> = workload_set.features[..take]
        .iter()
        .map(|row| row.iter().map(|&v| v as f32).collect())
        .collect();
    let targets = &workload_set.targets[..take];
    let faults = faultspec::parse_schedule(faults_text)?;

    let mut sim = SimConfig::default();
    let mut experiment = ExperimentConfig {
        sim,
        ..ExperimentConfig::default()
    };
    experiment.apply_kv(&kv)?;
    sim = experiment.sim;
    let seed = common.seed.unwrap_or(0);

    let result = runtime::run_simulation(&spec, &params, &inputs, &faults, &sim, seed)?;

    let out = ensure_out(common)?;
    let mut predictions = String::from("workload_index,status,y_pred,y_true\n");
    let mut completed = 0usize;
    let mut mse_sum = 0.0;
    for (i, outcome) in result.outcomes.iter().enumerate() {
        match outcome {
            Some(o) => match o.completed() {
                Some(values) => {
                    completed += 1;
                    let d = values[0] as f64 - targets[i];
                    mse_sum += d * d;
                    let _ = writeln!(predictions, "{i},ok,{},{}", values[0], targets[i]);
                }
                None => {
                    let _ = writeln!(predictions, "{i},failed,,{}", targets[i]);
                }
            },
            None => {
                let _ = writeln!(predictions, "{i},undecided,,{}", targets[i]);
            }
        }
    }
    fs::write(out.join("predictions.csv"), predictions)?;
    fs::write(out.join("trace.csv"), result.trace.to_csv())?;
    let records = measure_recovery(&result.trace);
    let mut recovery = String::from("target,fault_at_us,detection_us,stabilization_us,total_us,censored\n");
    for r in &records {
        let fmt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            recovery,
            "{},{},{},{},{},{}",
            r.target,
            r.fault_at_us,
            fmt(r.detection_us),
            fmt(r.stabilization_us),
            fmt(r.total_us),
            r.censored
        );
    }
    fs::write(out.join("recovery.csv"), recovery)?;
    let mse = if completed > 0 {
        mse_sum / completed as f64
    } else {
        f64::NAN
    };
    println!(
        "simulated {take} inferences: {completed} completed, mse {mse:.6}, {} fault(s), outputs in {}",
        faults.len(),
        out.display()
    );
    Ok(())
}

pub fn sweep(
    common: &CommonArgs,
    params_path: &Path,
    data: &Path,
    k_text: &str,
    trials: usize,
) -> anyhow::Result<()> {
    let (spec, params) = model_io::read_params(params_path)?;
    let testset = datagen::read_csv(data, Split::Test)?;
    let k_values: Vec<usize> = k_text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad k list {k_text:?}"))?;
    let mut rng = Rng::new(common.seed.unwrap_or(0));
    let rows = faults::degradation_sweep(&spec, &params, &testset, &k_values, trials, &mut rng)?;
    let out = ensure_out(common)?;
    fs::write(out.join("degradation.csv"), faults::rows_to_csv(&rows))?;
    for row in &rows {
        println!(
            "k={}: mean mse {:.6} ({:+.1}%), p={:.4}",
            row.k, row.mean_mse, row.degradation_pct, row.p_value
        );
    }
    Ok(())
}

pub fn experiment(common: &CommonArgs, name: &str) -> anyhow::Result<()> {
    let suite = Suite::from_name(name)
        .with_context(|| format!("unknown experiment {name:?}; expected degradation, dropout-vs-plain, disconnect, recovery, or all"))?;
    let kv = load_config(common)?;
    let mut config = ExperimentConfig::default();
    config.apply_kv(&kv)?;
    if let Some(seed) = common.seed {
        config.experiment_seed = seed;
    }
    let out = ensure_out(common)?;
    let report = experiments::run_suite(suite, &config)?;
    for (name, content) in &report.files {
        fs::write(out.join(name), content)?;
    }
    fs::write(out.join("report.md"), &report.markdown)?;
    println!(
        "experiment {} wrote {} files to {}",
        suite.name(),
        report.files.len() + 1,
        out.display()
    );
    Ok(())
}

pub fn report(common: &CommonArgs, input: Option<&Path>) -> anyhow::Result<()> {
    let dir = input.unwrap_or(&common.out);
    let mut files = std::collections::BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") || name == "effective_config.txt" {
            files.insert(name, fs::read_to_string(entry.path())?);
        }
    }
    if files.is_empty() {
        bail!("no CSV files found in {}", dir.display());
    }
    let out = ensure_out(common)?;
    fs::write(out.join("report.md"), experiments::render_report(&files))?;
    println!("rendered {} tables into {}", files.len(), out.join("report.md").display());
    Ok(())
}

pub fn node(
    common: &CommonArgs,
    cluster_path: &Path,
    bundle: &Path,
    id_text: &str,
    run_for: Option<f64>,
) -> anyhow::Result<()> {
    let cluster = ClusterFile::load(cluster_path)?;
    let target = faultspec::parse_target(id_text)?;
    let runtime::Addr::Node { layer, neuron } = target else {
        bail!("--id must name a neuron node (layer:neuron)");
    };
    let trace = runtime::run_node(
        &cluster,
        bundle,
        (layer, neuron),
        run_for.map(Duration::from_secs_f64),
    )?;
    if common.out.exists() || run_for.is_some() {
        let out = ensure_out(common)?;
        fs::write(out.join(format!("node_{layer}_{neuron}_trace.csv")), trace.to_csv())?;
    }
    Ok(())
}

pub fn coordinator(
    common: &CommonArgs,
    cluster_path: &Path,
    id: u8,
    workload_path: &Path,
    limit: Option<usize>,
    run_for: Option<f64>,
) -> anyhow::Result<()> {
    let cluster = ClusterFile::load(cluster_path)?;
    let workload_set = datagen::read_csv(workload_path, Split::Test)?;
    let take = limit.unwrap_or(workload_set.len()).min(workload_set.len());
    let inputs: Vec<Vec<f32>> = workload_set.features[..take]
        .iter()
        .map(|row| row.iter().map(|&v| v as f32).collect())
        .collect();
    let targets = &workload_set.targets[..take];
    let result = runtime::run_coordinator(
        &cluster,
        id,
        inputs,
        run_for.map(Duration::from_secs_f64),
    )?;
    let out = ensure_out(common)?;
    let mut predictions = String::from("workload_index,status,y_pred,y_true\n");
    let mut completed = 0usize;
    for (i, outcome) in result.outcomes.iter().enumerate() {
        match outcome.as_ref().and_then(|o| o.completed()) {
            Some(values) => {
                completed += 1;
                let _ = writeln!(predictions, "{i},ok,{},{}", values[0], targets[i]);
            }
            None => {
                let status = if outcome.is_some() { "failed" } else { "undecided" };
                let _ = writeln!(predictions, "{i},{status},,{}", targets[i]);
            }
        }
    }
    fs::write(out.join(format!("coordinator_{id}_predictions.csv")), predictions)?;
    fs::write(out.join(format!("coordinator_{id}_trace.csv")), result.trace.to_csv())?;
    println!("coordinator {id}: {completed}/{take} completed");
    Ok(())
}

pub fn inject(common: &CommonArgs, cluster_path: &Path, target_text: &str) -> anyhow::Result<()> {
    let _ = common;
    let cluster = ClusterFile::load(cluster_path)?;
    let target = faultspec::parse_target(target_text)?;
    runtime::send_fault_inject(&cluster, target)?;
    println!("sent fault injection to {target}");
    Ok(())
}
