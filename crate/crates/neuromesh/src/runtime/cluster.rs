use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;

use super::RuntimeError;
use crate::config::KvMap;
use crate::nn::{Activation, NetworkSpec};
use crate::wire::CoordinatorRole;

/// Timeouts and intervals governing the cluster, in microseconds.
///
/// The failure-detection budget is `heartbeat_interval * miss_threshold`
/// (50 ms at the defaults); coordinator handover uses its own 200 ms budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterTiming {
    /// How long a neuron waits for its fan-in before computing with zeros.
    pub layer_timeout_us: u64,
    pub heartbeat_interval_us: u64,
    pub heartbeat_miss_threshold: u32,
    /// Standby promotes itself after this much primary silence.
    pub handover_timeout_us: u64,
    /// An inference with no answer by then is marked failed.
    pub inference_deadline_us: u64,
    /// Spacing between workload inputs.
    pub inference_interval_us: u64,
    /// The coordinator starts the workload once every node has been heard
    /// from, or at this deadline, whichever comes first.
    pub warmup_timeout_us: u64,
}

impl Default for ClusterTiming {
    fn default() -> Self {
        Self {
            layer_timeout_us: 50_000,
            heartbeat_interval_us: 25_000,
            heartbeat_miss_threshold: 2,
            handover_timeout_us: 200_000,
            inference_deadline_us: 500_000,
            inference_interval_us: 20_000,
            warmup_timeout_us: 1_000_000,
        }
    }
}

impl ClusterTiming {
    /// Heartbeat silence after which a node is declared failed.
    pub fn detection_budget_us(&self) -> u64 {
        self.heartbeat_interval_us * self.heartbeat_miss_threshold as u64
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.heartbeat_interval_us == 0
            || self.heartbeat_miss_threshold == 0
            || self.layer_timeout_us == 0
            || self.inference_deadline_us == 0
        {
            return Err(RuntimeError::Config(
                "timeouts and intervals must be positive".into(),
            ));
        }
        Ok(())
    }

    fn apply_kv(&mut self, kv: &KvMap) -> Result<(), RuntimeError> {
        let ms = |v: u64| v * 1000;
        if let Some(v) = kv.get_u64("layer_timeout_ms")? {
            self.layer_timeout_us = ms(v);
        }
        if let Some(v) = kv.get_u64("heartbeat_interval_ms")? {
            self.heartbeat_interval_us = ms(v);
        }
        if let Some(v) = kv.get_u64("heartbeat_miss_threshold")? {
            self.heartbeat_miss_threshold = v as u32;
        }
        if let Some(v) = kv.get_u64("coordinator_handover_timeout_ms")? {
            self.handover_timeout_us = ms(v);
        }
        if let Some(v) = kv.get_u64("inference_deadline_ms")? {
            self.inference_deadline_us = ms(v);
        }
        if let Some(v) = kv.get_u64("inference_interval_ms")? {
            self.inference_interval_us = ms(v);
        }
        if let Some(v) = kv.get_u64("warmup_timeout_ms")? {
            self.warmup_timeout_us = ms(v);
        }
        Ok(())
    }
}

/// One coordinator endpoint entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinatorEntry {
    pub index: u8,
    pub addr: SocketAddr,
    pub role: CoordinatorRole,
}

/// Parsed cluster file: network shape, timing, and every actor's endpoint.
///
/// The format is `key=value` lines:
///
/// ```text
/// layers=10,10,10,1
/// hidden_activation=relu
/// output_activation=linear
/// heartbeat_interval_ms=25
/// node.1.0=127.0.0.1:7100
/// coordinator.0=127.0.0.1:7000
/// coordinator.0.role=primary
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFile {
    pub spec: NetworkSpec,
    pub timing: ClusterTiming,
    pub nodes: BTreeMap<(u8, u8), SocketAddr>,
    pub coordinators: Vec<CoordinatorEntry>,
}

impl ClusterFile {
    pub fn parse(text: &str) -> Result<Self, RuntimeError> {
        let kv = KvMap::parse(text)?;
        let layer_sizes = kv
            .get_usize_list("layers")?
            .ok_or_else(|| RuntimeError::Config("missing layers".into()))?;
        let hidden = kv.get("hidden_activation").unwrap_or("relu");
        let output = kv.get("output_activation").unwrap_or("linear");
        let spec = NetworkSpec::new(
            layer_sizes,
            Activation::from_name(hidden)
                .ok_or_else(|| RuntimeError::Config(format!("bad hidden_activation {hidden:?}")))?,
            Activation::from_name(output)
                .ok_or_else(|| RuntimeError::Config(format!("bad output_activation {output:?}")))?,
        )
        .map_err(|e| RuntimeError::Config(e.to_string()))?;

        let mut timing = ClusterTiming::default();
        timing.apply_kv(&kv)?;
        timing.validate()?;

        let mut nodes = BTreeMap::new();
        for (rest, value) in kv.with_prefix("node") {
            let mut parts = rest.splitn(2, '.');
            let (Some(l), Some(n)) = (parts.next(), parts.next()) else {
                return Err(RuntimeError::Config(format!("bad node key node.{rest}")));
            };
            let (Ok(l), Ok(n)) = (l.parse::<u8>(), n.parse::<u8>()) else {
                return Err(RuntimeError::Config(format!("bad node key node.{rest}")));
            };
            let addr: SocketAddr = value
                .parse()
                .map_err(|_| RuntimeError::Config(format!("bad endpoint {value:?}")))?;
            nodes.insert((l, n), addr);
        }

        let mut coordinators = Vec::new();
        for (rest, value) in kv.with_prefix("coordinator") {
            if rest.contains('.') {
                continue; // role keys handled below
            }
            let index: u8 = rest
                .parse()
                .map_err(|_| RuntimeError::Config(format!("bad coordinator key {rest:?}")))?;
            let addr: SocketAddr = value
                .parse()
                .map_err(|_| RuntimeError::Config(format!("bad endpoint {value:?}")))?;
            let role_name = kv
                .get(&format!("coordinator.{index}.role"))
                .unwrap_or(if index == 0 { "primary" } else { "standby" });
            let role = CoordinatorRole::from_name(role_name)
                .ok_or_else(|| RuntimeError::Config(format!("bad role {role_name:?}")))?;
            coordinators.push(CoordinatorEntry { index, addr, role });
        }
        coordinators.sort_by_key(|c| c.index);

        let file = Self {
            spec,
            timing,
            nodes,
            coordinators,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), RuntimeError> {
        let sizes = self.spec.layer_sizes();
        if sizes.iter().any(|&n| n > u8::MAX as usize) || self.spec.depth() >= 0xFF {
            return Err(RuntimeError::Config(
                "layer sizes must fit in a byte and depth below 255".into(),
            ));
        }
        for l in 1..=self.spec.depth() {
            for n in 0..sizes[l] {
                if !self.nodes.contains_key(&(l as u8, n as u8)) {
                    return Err(RuntimeError::Config(format!(
                        "missing endpoint for node.{l}.{n}"
                    )));
                }
            }
        }
        for &(l, n) in self.nodes.keys() {
            let l = l as usize;
            if l == 0 || l > self.spec.depth() || n as usize >= sizes[l] {
                return Err(RuntimeError::Config(format!(
                    "endpoint for unknown node ({l}, {n})"
                )));
            }
        }
        if self.coordinators.is_empty() {
            return Err(RuntimeError::Config("no coordinator configured".into()));
        }
        let primaries = self
            .coordinators
            .iter()
            .filter(|c| c.role == CoordinatorRole::Primary)
            .count();
        if primaries != 1 {
            return Err(RuntimeError::Config(format!(
                "exactly one primary coordinator required, found {primaries}"
            )));
        }
        Ok(())
    }

    /// Layer sizes as bytes (validated to fit).
    pub fn layer_sizes_u8(&self) -> Vec<u8> {
        self.spec.layer_sizes().iter().map(|&n| n as u8).collect()
    }

    pub fn coordinator_indices(&self) -> Vec<u8> {
        self.coordinators.iter().map(|c| c.index).collect()
    }

    /// Renders a loopback cluster file for the given spec with sequential
    /// ports, useful for tests and local runs.
    pub fn render_loopback(spec: &NetworkSpec, timing: &ClusterTiming, base_port: u16, standby: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "layers={}\n",
            spec.layer_sizes()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!("hidden_activation={}\n", spec.hidden_activation().name()));
        out.push_str(&format!("output_activation={}\n", spec.output_activation().name()));
        out.push_str(&format!("layer_timeout_ms={}\n", timing.layer_timeout_us / 1000));
        out.push_str(&format!(
            "heartbeat_interval_ms={}\n",
            timing.heartbeat_interval_us / 1000
        ));
        out.push_str(&format!(
            "heartbeat_miss_threshold={}\n",
            timing.heartbeat_miss_threshold
        ));
        out.push_str(&format!(
            "coordinator_handover_timeout_ms={}\n",
            timing.handover_timeout_us / 1000
        ));
        out.push_str(&format!(
            "inference_deadline_ms={}\n",
            timing.inference_deadline_us / 1000
        ));
        out.push_str(&format!(
            "inference_interval_ms={}\n",
            timing.inference_interval_us / 1000
        ));
        out.push_str(&format!("warmup_timeout_ms={}\n", timing.warmup_timeout_us / 1000));
        let mut port = base_port;
        out.push_str(&format!("coordinator.0=127.0.0.1:{port}\n"));
        out.push_str("coordinator.0.role=primary\n");
        port += 1;
        if standby {
            out.push_str(&format!("coordinator.1=127.0.0.1:{port}\n"));
            out.push_str("coordinator.1.role=standby\n");
            port += 1;
        }
        for l in 1..=spec.depth() {
            for n in 0..spec.layer_sizes()[l] {
                out.push_str(&format!("node.{l}.{n}=127.0.0.1:{port}\n"));
                port += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_render_parses_back() {
        let spec = NetworkSpec::reference();
        let text = ClusterFile::render_loopback(&spec, &ClusterTiming::default(), 7000, true);
        let parsed = ClusterFile::parse(&text).unwrap();
        assert_eq!(parsed.spec, spec);
        assert_eq!(parsed.nodes.len(), 21);
        assert_eq!(parsed.coordinators.len(), 2);
        assert_eq!(parsed.coordinators[0].role, CoordinatorRole::Primary);
        assert_eq!(parsed.timing, ClusterTiming::default());
    }

    #[test]
    fn missing_node_endpoint_is_rejected() {
        let spec = NetworkSpec::new(
            vec![2, 2, 1],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        let mut text = ClusterFile::render_loopback(&spec, &ClusterTiming::default(), 7100, false);
        text = text.replace("node.1.1=127.0.0.1:7102\n", "");
        assert!(matches!(
            ClusterFile::parse(&text),
            Err(RuntimeError::Config(_))
        ));
    }

    #[test]
    fn two_primaries_are_rejected() {
        let spec = NetworkSpec::new(vec![1, 1], Activation::Relu, Activation::Linear).unwrap();
        let mut text = ClusterFile::render_loopback(&spec, &ClusterTiming::default(), 7200, true);
        text = text.replace("coordinator.1.role=standby", "coordinator.1.role=primary");
        assert!(matches!(
            ClusterFile::parse(&text),
            Err(RuntimeError::Config(_))
        ));
    }

    #[test]
    fn timing_overrides_apply() {
        let spec = NetworkSpec::new(vec![1, 1], Activation::Relu, Activation::Linear).unwrap();
        let timing = ClusterTiming {
            heartbeat_interval_us: 10_000,
            ..ClusterTiming::default()
        };
        let text = ClusterFile::render_loopback(&spec, &timing, 7300, false);
        let parsed = ClusterFile::parse(&text).unwrap();
        assert_eq!(parsed.timing.heartbeat_interval_us, 10_000);
        assert_eq!(parsed.timing.detection_budget_us(), 20_000);
    }
}
