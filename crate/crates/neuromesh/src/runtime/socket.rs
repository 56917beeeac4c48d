//! UDP transport: the same state machines as the simulation, driven by
//! wall-clock timers and real datagram sockets.
//!
//! Each process owns exactly one state machine. Broadcast is realized as
//! iterated unicast to the routed subscriber list from the cluster file.
//! Trace timestamps are microseconds since the Unix epoch so traces from
//! different processes on one host line up.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::net::UdpSocket;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{
    route, Addr, ClusterFile, Coordinator, CoordinatorOptions, Emission, Event, InferenceOutcome,
    NeuronNode, RuntimeError, Timer, Trace, TraceKind,
};
use crate::wire::{decode_frame, encode_frame, read_bundle_manifest, read_neuron, Frame};

/// Result of a socket-mode coordinator run.
#[derive(Debug, Clone)]
pub struct SocketRunResult {
    pub outcomes: Vec<Option<InferenceOutcome>>,
    pub trace: Trace,
}

/// Maximum socket read timeout so shutdown and timer checks stay responsive.
const POLL_CAP: Duration = Duration::from_millis(5);

struct Loop {
    socket: UdpSocket,
    cluster: ClusterFile,
    addr: Addr,
    timers: BinaryHeap<Reverse<(u64, u64, Timer)>>,
    timer_seq: u64,
    started: Instant,
    epoch_base_us: u64,
    trace: Trace,
    outcomes: Vec<Option<InferenceOutcome>>,
    undecided: usize,
}

impl Loop {
    fn new(cluster: ClusterFile, addr: Addr, workload_len: usize) -> Result<Self, RuntimeError> {
        let bind = match addr {
            Addr::Node { layer, neuron } => cluster
                .nodes
                .get(&(layer, neuron))
                .copied()
                .ok_or_else(|| RuntimeError::UnknownEndpoint(addr.to_string()))?,
            Addr::Coordinator(i) => cluster
                .coordinators
                .iter()
                .find(|c| c.index == i)
                .map(|c| c.addr)
                .ok_or_else(|| RuntimeError::UnknownEndpoint(addr.to_string()))?,
        };
        let socket = UdpSocket::bind(bind)?;
        let epoch_base_us = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as u64)
            .unwrap_or(0);
        Ok(Self {
            socket,
            cluster,
            addr,
            timers: BinaryHeap::new(),
            timer_seq: 0,
            started: Instant::now(),
            epoch_base_us,
            trace: Trace::new(),
            outcomes: vec![None; workload_len],
            undecided: workload_len,
        })
    }

    fn now_us(&self) -> u64 {
        self.started.elapsed().as_micros() as u64
    }

    fn trace_now_us(&self) -> u64 {
        self.epoch_base_us + self.now_us()
    }

    fn process_emissions(&mut self, emissions: Vec<Emission>, now_us: u64) {
        for emission in emissions {
            match emission {
                Emission::Send(frame) => {
                    let Ok(bytes) = encode_frame(&frame) else {
                        self.trace.push(
                            self.trace_now_us(),
                            TraceKind::FrameDropped {
                                reason: "encode failure".into(),
                            },
                        );
                        continue;
                    };
                    let dests = route(
                        self.addr,
                        &frame,
                        self.cluster.spec.depth() as u8,
                        &self.cluster.layer_sizes_u8(),
                        &self.cluster.coordinator_indices(),
                    );
                    for dest in dests {
                        let endpoint = match dest {
                            Addr::Node { layer, neuron } => {
                                self.cluster.nodes.get(&(layer, neuron)).copied()
                            }
                            Addr::Coordinator(i) => self
                                .cluster
                                .coordinators
                                .iter()
                                .find(|c| c.index == i)
                                .map(|c| c.addr),
                        };
                        if let Some(endpoint) = endpoint {
                            // Send failures are datagram semantics: drop.
                            let _ = self.socket.send_to(&bytes, endpoint);
                        }
                    }
                    self.trace.push(
                        self.trace_now_us(),
                        TraceKind::FrameSent {
                            from: self.addr,
                            msg: frame.message.msg_type().name(),
                            inference_id: frame.inference_id,
                        },
                    );
                }
                Emission::TimerAfter { delay_us, timer } => {
                    let due = now_us + delay_us;
                    self.timers.push(Reverse((due, self.timer_seq, timer)));
                    self.timer_seq += 1;
                }
                Emission::Trace(kind) => {
                    self.trace.push(self.trace_now_us(), kind);
                }
                Emission::Outcome {
                    workload_index,
                    outcome,
                } => {
                    let slot = &mut self.outcomes[workload_index as usize];
                    if slot.is_none() {
                        *slot = Some(outcome);
                        self.undecided -= 1;
                    }
                }
            }
        }
    }

    /// Runs the event loop until `run_for` elapses or (for coordinators with
    /// a workload) every outcome is decided.
    fn run<F>(&mut self, mut handle: F, run_for: Option<Duration>, stop_when_decided: bool)
    where
        F: FnMut(Event, u64) -> Vec<Emission>,
    {
        let mut buf = [0u8; 512];
        loop {
            if stop_when_decided && self.undecided == 0 {
                // Give the final RESULT frames a moment on the wire.
                std::thread::sleep(Duration::from_millis(20));
                break;
            }
            if let Some(run_for) = run_for {
                if self.started.elapsed() >= run_for {
                    break;
                }
            }
            // Fire due timers.
            loop {
                let now = self.now_us();
                match self.timers.peek() {
                    Some(Reverse((due, _, _))) if *due <= now => {
                        let Reverse((_, _, timer)) = self.timers.pop().expect("peeked");
                        let emissions = handle(Event::Timer(timer), now);
                        self.process_emissions(emissions, now);
                    }
                    _ => break,
                }
            }
            // Wait for the next frame or the next timer, whichever is sooner.
            let now = self.now_us();
            let until_timer = self
                .timers
                .peek()
                .map(|Reverse((due, _, _))| Duration::from_micros(due.saturating_sub(now)))
                .unwrap_or(POLL_CAP);
            let timeout = until_timer.min(POLL_CAP).max(Duration::from_micros(500));
            let _ = self.socket.set_read_timeout(Some(timeout));
            match self.socket.recv_from(&mut buf) {
                Ok((len, _)) => match decode_frame(&buf[..len]) {
                    Ok(frame) => {
                        let now = self.now_us();
                        let msg = frame.message.msg_type().name();
                        let inference_id = frame.inference_id;
                        self.trace.push(
                            self.trace_now_us(),
                            TraceKind::FrameDelivered {
                                from: self.addr, // source endpoint is transport detail
                                to: self.addr,
                                msg,
                                inference_id,
                            },
                        );
                        let emissions = handle(Event::Frame(frame), now);
                        self.process_emissions(emissions, now);
                    }
                    Err(e) => {
                        self.trace.push(
                            self.trace_now_us(),
                            TraceKind::FrameDropped {
                                reason: format!("decode: {e}"),
                            },
                        );
                    }
                },
                Err(ref e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                Err(_) => {
                    // Transient socket errors are datagram losses here.
                }
            }
        }
    }
}

/// Runs one neuron process until `run_for` elapses (or forever).
///
/// The node's parameters come from its blob in the deployment bundle; the
/// endpoint set and timing come from the cluster file.
pub fn run_node(
    cluster: &ClusterFile,
    bundle_dir: &Path,
    id: (u8, u8),
    run_for: Option<Duration>,
) -> Result<Trace, RuntimeError> {
    let manifest = read_bundle_manifest(bundle_dir)?;
    let params = read_neuron(bundle_dir, &manifest, id.0, id.1)?;
    let mut node = NeuronNode::new(id.0, id.1, params, cluster.timing);
    let mut inner = Loop::new(cluster.clone(), Addr::node(id.0, id.1), 0)?;
    let start = node.on_start(0);
    inner.process_emissions(start, 0);
    inner.run(|event, now| node.handle(event, now), run_for, false);
    Ok(inner.trace)
}

/// Runs a coordinator process over the given workload. Primaries return once
/// every workload input is decided (or `run_for` elapses); standbys run for
/// `run_for`.
pub fn run_coordinator(
    cluster: &ClusterFile,
    index: u8,
    workload: Vec<Vec<f32>>,
    run_for: Option<Duration>,
) -> Result<SocketRunResult, RuntimeError> {
    let entry = cluster
        .coordinators
        .iter()
        .find(|c| c.index == index)
        .ok_or_else(|| RuntimeError::UnknownEndpoint(format!("coord-{index}")))?;
    let primary_index = cluster
        .coordinators
        .iter()
        .find(|c| c.role == crate::wire::CoordinatorRole::Primary)
        .map(|c| c.index)
        .unwrap_or(0);
    for (i, x) in workload.iter().enumerate() {
        if x.len() != cluster.spec.input_dim() {
            return Err(RuntimeError::Config(format!(
                "workload input {i} has dimension {}, expected {}",
                x.len(),
                cluster.spec.input_dim()
            )));
        }
    }
    let workload_len = workload.len();
    let mut coordinator = Coordinator::new(CoordinatorOptions {
        index,
        role: entry.role,
        primary_index,
        layer_sizes: cluster.layer_sizes_u8(),
        timing: cluster.timing,
        workload,
    });
    let mut inner = Loop::new(cluster.clone(), Addr::Coordinator(index), workload_len)?;
    let start = coordinator.on_start(0);
    inner.process_emissions(start, 0);
    let stop_when_decided = entry.role == crate::wire::CoordinatorRole::Primary;
    inner.run(
        |event, now| coordinator.handle(event, now),
        run_for,
        stop_when_decided,
    );
    Ok(SocketRunResult {
        outcomes: inner.outcomes,
        trace: inner.trace,
    })
}

/// Sends one FAULT_INJECT frame to the targeted actor's endpoint.
pub fn send_fault_inject(cluster: &ClusterFile, target: Addr) -> Result<(), RuntimeError> {
    let (target_layer, target_neuron, endpoint) = match target {
        Addr::Node { layer, neuron } => (
            layer,
            neuron,
            cluster
                .nodes
                .get(&(layer, neuron))
                .copied()
                .ok_or_else(|| RuntimeError::UnknownEndpoint(target.to_string()))?,
        ),
        Addr::Coordinator(i) => (
            crate::wire::COORDINATOR_LAYER,
            i,
            cluster
                .coordinators
                .iter()
                .find(|c| c.index == i)
                .map(|c| c.addr)
                .ok_or_else(|| RuntimeError::UnknownEndpoint(target.to_string()))?,
        ),
    };
    let frame = Frame::new(
        0,
        crate::wire::COORDINATOR_LAYER,
        0,
        crate::wire::Message::FaultInject {
            target_layer,
            target_neuron,
        },
    );
    let bytes = encode_frame(&frame).expect("fault frame fits");
    let socket = UdpSocket::bind("127.0.0.1:0")?;
    socket.send_to(&bytes, endpoint)?;
    Ok(())
}
