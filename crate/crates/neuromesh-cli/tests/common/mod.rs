//! Shared helpers for tests that drive a live loopback cluster.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use neuromesh::datagen::{self, DataGenConfig};
use neuromesh::nn::{init_params, InitScheme, NetworkSpec, Parameters};
use neuromesh::rng::Rng;
use neuromesh::runtime::{ClusterFile, ClusterTiming};
use neuromesh::wire;

pub struct KillOnDrop(pub Vec<Child>);

impl Drop for KillOnDrop {
    fn drop(&mut self) {
        for child in &mut self.0 {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

pub struct TestCluster {
    pub dir: tempfile::TempDir,
    pub spec: NetworkSpec,
    pub params: Parameters<f32>,
    pub nodes: KillOnDrop,
}

impl TestCluster {
    /// Index of a node's child process; children are spawned in ascending
    /// (layer, neuron) order.
    pub fn node_child_index(&self, layer: u8, neuron: u8) -> usize {
        let mut idx = 0;
        for l in 1..=self.spec.depth() {
            for n in 0..self.spec.layer_sizes()[l] {
                if (l as u8, n as u8) == (layer, neuron) {
                    return idx;
                }
                idx += 1;
            }
        }
        panic!("unknown node ({layer}, {neuron})");
    }
}

fn neuromesh_quiet() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_neuromesh"));
    cmd.stdout(Stdio::null()).stderr(Stdio::null());
    cmd
}

/// Builds a bundle + cluster file on `base_port` and spawns every node
/// process with a 60 s self-destruct.
pub fn start_cluster(base_port: u16, seed: u64) -> TestCluster {
    let dir = tempfile::tempdir().unwrap();
    let spec = NetworkSpec::reference();
    let params64 = init_params::<f64>(&spec, InitScheme::He, &mut Rng::new(seed));
    let params: Parameters<f32> = params64.convert();
    wire::write_bundle(&spec, &params, &dir.path().join("bundle")).unwrap();

    let timing = ClusterTiming {
        inference_interval_us: 5_000,
        warmup_timeout_us: 3_000_000,
        ..ClusterTiming::default()
    };
    let text = ClusterFile::render_loopback(&spec, &timing, base_port, false);
    fs::write(dir.path().join("cluster.cfg"), &text).unwrap();

    let mut children = Vec::new();
    for l in 1..=spec.depth() {
        for n in 0..spec.layer_sizes()[l] {
            let child = neuromesh_quiet()
                .current_dir(dir.path())
                .args([
                    "node",
                    "--cluster",
                    "cluster.cfg",
                    "--bundle",
                    "bundle",
                    "--id",
                    &format!("{l}:{n}"),
                    "--run-for",
                    "60",
                ])
                .spawn()
                .expect("spawn node");
            children.push(child);
        }
    }
    TestCluster {
        dir,
        spec,
        params,
        nodes: KillOnDrop(children),
    }
}

/// Writes an `n`-row workload CSV drawn from the frozen test distribution.
pub fn write_workload(dir: &Path, n: usize) -> PathBuf {
    let (_, test) = datagen::generate(&DataGenConfig {
        n_train: 1,
        n_test: n,
        ..DataGenConfig::default()
    })
    .unwrap();
    let path = dir.join("workload.csv");
    datagen::write_csv(&test, &path).unwrap();
    path
}

/// Runs coordinator 0 over the workload until every outcome is decided,
/// returning the predictions CSV.
pub fn run_coordinator_to_completion(
    cluster: &TestCluster,
    workload: &Path,
    limit: usize,
) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_neuromesh"))
        .current_dir(cluster.dir.path())
        .stdout(Stdio::null())
        .args([
            "coordinator",
            "--cluster",
            "cluster.cfg",
            "--id",
            "0",
            "--workload",
            workload.to_str().unwrap(),
            "--limit",
            &limit.to_string(),
            "--run-for",
            "45",
            "--out",
            "out",
        ])
        .status()
        .expect("spawn coordinator");
    assert!(status.success(), "coordinator exited with {status}");
    fs::read_to_string(cluster.dir.path().join("out/coordinator_0_predictions.csv")).unwrap()
}
