//! The distributed system: per-neuron state machines, a coordinator with
//! heartbeat failure detection and primary/standby handover, and two
//! transports driving the same state machines — a deterministic
//! discrete-event simulation and a UDP loop.
//!
//! State machines are pure event handlers: `(state, event, now) ->
//! emissions`. They never read a clock or a socket; the transport feeds them
//! delivered frames and fired timers and carries out their emissions. A node
//! computes its activation through [`crate::nn::neuron_preactivation`] on
//! `f32` slices, so a cluster's predictions are bit-identical to the
//! in-memory forward pass under the same failure set.
//!
//! Failure semantics: a fault-injected or killed node emits nothing ever
//! again. Downstream neurons wait for their fan-in behind a per-inference
//! barrier timer and, on timeout, treat missing activations as exactly zero —
//! the same model the analytic fault evaluation uses.

mod cluster;
mod coordinator;
mod node;
mod recovery;
mod sim;
mod socket;
mod trace;

pub use cluster::{ClusterFile, ClusterTiming, CoordinatorEntry};
pub use coordinator::{Coordinator, CoordinatorOptions, NodeHealth};
pub use node::NeuronNode;
pub use recovery::{measure_recovery, RecoveryRecord};
pub use sim::{run_simulation, FaultEvent, SimConfig, SimResult};
pub use socket::{run_node, run_coordinator, send_fault_inject, SocketRunResult};
pub use trace::{Trace, TraceEvent, TraceKind};

use thiserror::Error;

use crate::nn::NnError;
use crate::wire::{BundleError, DecodeError, Frame};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid cluster config: {0}")]
    Config(String),
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("bundle error: {0}")]
    Bundle(#[from] BundleError),
    #[error("config parse error: {0}")]
    Kv(#[from] crate::config::KvError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame decode error: {0}")]
    Decode(#[from] DecodeError),
    #[error("unknown endpoint for {0}")]
    UnknownEndpoint(String),
}

/// Address of one actor in the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    Node { layer: u8, neuron: u8 },
    Coordinator(u8),
}

impl Addr {
    pub fn node(layer: u8, neuron: u8) -> Self {
        Addr::Node { layer, neuron }
    }
}

impl std::fmt::Display for Addr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Addr::Node { layer, neuron } => write!(f, "node-{layer}-{neuron}"),
            Addr::Coordinator(i) => write!(f, "coord-{i}"),
        }
    }
}

/// Event fed to a state machine by its transport.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Frame(Frame),
    Timer(Timer),
}

/// Timer kinds. `armed_at` stamps let handlers ignore stale timers instead of
/// cancelling them. The ordering exists only so timers can live in priority
/// queues keyed primarily by deadline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timer {
    /// Periodic heartbeat emission (nodes and coordinators).
    HeartbeatTick,
    /// A neuron's per-inference barrier deadline.
    Barrier { inference_id: u32 },
    /// Coordinator: node missed one heartbeat interval.
    SuspectCheck { node: (u8, u8), armed_at_us: u64 },
    /// Coordinator: node missed the full detection budget.
    FailCheck { node: (u8, u8), armed_at_us: u64 },
    /// Standby: primary silent for the handover budget.
    PrimaryWatch { armed_at_us: u64 },
    /// Coordinator: inference answer overdue.
    InferenceDeadline { inference_id: u32 },
    /// Coordinator: time to issue the next workload input.
    IssueNext,
    /// Coordinator: stop waiting for unheard nodes and start the workload.
    WarmupDeadline,
}

/// Final disposition of one workload input.
#[derive(Debug, Clone, PartialEq)]
pub enum InferenceOutcome {
    Completed { values: Vec<f32> },
    DeadlineExceeded,
}

impl InferenceOutcome {
    pub fn completed(&self) -> Option<&[f32]> {
        match self {
            InferenceOutcome::Completed { values } => Some(values),
            InferenceOutcome::DeadlineExceeded => None,
        }
    }
}

/// What a state machine asks its transport to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// Broadcast a frame to its subscribers (the transport routes it).
    Send(Frame),
    /// Arm a timer `delay_us` from now.
    TimerAfter { delay_us: u64, timer: Timer },
    /// Append a semantic trace event.
    Trace(TraceKind),
    /// Record the final outcome of a workload input.
    Outcome {
        workload_index: u16,
        outcome: InferenceOutcome,
    },
}

/// Broadcast routing: which actors subscribe to a frame from `from`.
///
/// Addressing lives here, not in the frame. Destinations are produced in
/// ascending address order so transports iterate deterministically.
pub fn route(from: Addr, frame: &Frame, layer_count: u8, layer_sizes: &[u8], coordinators: &[u8]) -> Vec<Addr> {
    use crate::wire::Message;
    let nodes_of_layer = |l: u8| -> Vec<Addr> {
        (0..layer_sizes[l as usize])
            .map(|n| Addr::node(l, n))
            .collect()
    };
    let other_coordinators = || -> Vec<Addr> {
        coordinators
            .iter()
            .filter(|&&c| Addr::Coordinator(c) != from)
            .map(|&c| Addr::Coordinator(c))
            .collect()
    };
    let all_coordinators = || -> Vec<Addr> {
        coordinators.iter().map(|&c| Addr::Coordinator(c)).collect()
    };
    match &frame.message {
        Message::Activation { .. } => match from {
            Addr::Node { layer, .. } if layer < layer_count => nodes_of_layer(layer + 1),
            Addr::Node { .. } => all_coordinators(),
            Addr::Coordinator(_) => Vec::new(),
        },
        Message::InputVector { .. } => {
            let mut dests = nodes_of_layer(1);
            dests.extend(other_coordinators());
            dests
        }
        Message::Result { .. } => other_coordinators(),
        Message::Heartbeat { .. } => match from {
            Addr::Node { .. } => all_coordinators(),
            Addr::Coordinator(_) => other_coordinators(),
        },
        Message::FaultInject {
            target_layer,
            target_neuron,
        } => {
            if *target_layer == crate::wire::COORDINATOR_LAYER {
                vec![Addr::Coordinator(*target_neuron)]
            } else {
                vec![Addr::node(*target_layer, *target_neuron)]
            }
        }
        Message::WeightChunk { .. } => vec![Addr::node(frame.layer, frame.neuron)],
        Message::Ack { .. } => all_coordinators(),
        Message::Roster { .. } => {
            let mut dests: Vec<Addr> = (1..=layer_count).flat_map(nodes_of_layer).collect();
            dests.extend(other_coordinators());
            dests
        }
    }
}
