use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::{
    route, Addr, ClusterTiming, Coordinator, CoordinatorOptions, Emission, Event,
    InferenceOutcome, NeuronNode, RuntimeError, Timer, Trace, TraceKind,
};
use crate::nn::{NetworkSpec, Parameters};
use crate::rng::Rng;
use crate::wire::{CoordinatorRole, Frame, NeuronParams};

/// Simulation knobs. Latencies are drawn per delivery from a seeded uniform
/// distribution; datagram loss is off by default.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub timing: ClusterTiming,
    pub latency_min_us: u64,
    pub latency_max_us: u64,
    pub loss_probability: f64,
    /// Run a standby coordinator alongside the primary.
    pub standby_coordinator: bool,
    /// Hard stop in simulated time; `None` sizes it from the workload.
    pub horizon_us: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timing: ClusterTiming::default(),
            latency_min_us: 1_000,
            latency_max_us: 5_000,
            loss_probability: 0.0,
            standby_coordinator: true,
            horizon_us: None,
        }
    }
}

/// A scheduled kill: at `at_us`, the target stops — it receives nothing and
/// emits nothing from then on, modeling physical disconnection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub at_us: u64,
    pub target: Addr,
}

/// Outcome of a simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// One slot per workload input; `None` only if the run hit its horizon
    /// before the outcome was decided (which the deadlines should prevent).
    pub outcomes: Vec<Option<InferenceOutcome>>,
    pub trace: Trace,
}

impl SimResult {
    /// Predictions for completed inferences, `None` for failed/undecided.
    pub fn predictions(&self) -> Vec<Option<&[f32]>> {
        self.outcomes
            .iter()
            .map(|o| o.as_ref().and_then(InferenceOutcome::completed))
            .collect()
    }
}

#[derive(Debug)]
enum Dispatch {
    Deliver { from: Addr, frame: Frame },
    Timer(Timer),
    Kill,
}

struct Scheduled {
    at_us: u64,
    seq: u64,
    target: Addr,
    what: Dispatch,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at_us == other.at_us && self.seq == other.seq
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at_us, self.seq).cmp(&(other.at_us, other.seq))
    }
}

enum Actor {
    Node(NeuronNode),
    Coordinator(Coordinator),
}

impl Actor {
    fn handle(&mut self, event: Event, now_us: u64) -> Vec<Emission> {
        match self {
            Actor::Node(n) => n.handle(event, now_us),
            Actor::Coordinator(c) => c.handle(event, now_us),
        }
    }
}

/// Runs a fully deterministic discrete-event simulation of the cluster.
///
/// Events are processed in `(time, insertion sequence)` order; all latencies
/// and losses come from `seed`. Identical `(spec, params, workload, faults,
/// config, seed)` produce an identical trace, bit for bit.
pub fn run_simulation(
    spec: &NetworkSpec,
    params: &Parameters<f32>,
    workload: &[Vec<f32>],
    faults: &[FaultEvent],
    config: &SimConfig,
    seed: u64,
) -> Result<SimResult, RuntimeError> {
    params.check_shape(spec)?;
    config.timing.validate()?;
    let sizes = spec.layer_sizes();
    if sizes.iter().any(|&n| n > u8::MAX as usize) || spec.depth() >= 0xFF {
        return Err(RuntimeError::Config(
            "layer sizes must fit in a byte and depth below 255".into(),
        ));
    }
    if spec.input_dim() > crate::wire::MAX_PAYLOAD_LEN / 4 {
        return Err(RuntimeError::Config(format!(
            "input dimension {} does not fit one input frame",
            spec.input_dim()
        )));
    }
    if workload.len() > u16::MAX as usize {
        return Err(RuntimeError::Config("workload exceeds 65535 inputs".into()));
    }
    for (i, x) in workload.iter().enumerate() {
        if x.len() != spec.input_dim() {
            return Err(RuntimeError::Config(format!(
                "workload input {i} has dimension {}, expected {}",
                x.len(),
                spec.input_dim()
            )));
        }
    }
    if config.latency_min_us == 0 || config.latency_max_us < config.latency_min_us {
        return Err(RuntimeError::Config("bad latency range".into()));
    }

    let layer_sizes_u8: Vec<u8> = sizes.iter().map(|&n| n as u8).collect();
    let coordinator_indices: Vec<u8> = if config.standby_coordinator {
        vec![0, 1]
    } else {
        vec![0]
    };

    // Validate the fault schedule against the actor set before starting.
    for fault in faults {
        match fault.target {
            Addr::Node { layer, neuron } => {
                let l = layer as usize;
                if l == 0 || l > spec.depth() || neuron as usize >= sizes[l] {
                    return Err(RuntimeError::Config(format!(
                        "fault schedule kills unknown node ({layer}, {neuron})"
                    )));
                }
            }
            Addr::Coordinator(i) => {
                if !coordinator_indices.contains(&i) {
                    return Err(RuntimeError::Config(format!(
                        "fault schedule kills unknown coordinator {i}"
                    )));
                }
            }
        }
    }

    let mut actors: BTreeMap<Addr, Actor> = BTreeMap::new();
    for l in 1..=spec.depth() {
        let kind = spec.activation_for_layer(l);
        for n in 0..sizes[l] {
            let neuron = NeuronParams {
                weights: params.layers[l - 1].weights[n].clone(),
                bias: params.layers[l - 1].bias[n],
                activation: kind,
            };
            actors.insert(
                Addr::node(l as u8, n as u8),
                Actor::Node(NeuronNode::new(l as u8, n as u8, neuron, config.timing)),
            );
        }
    }
    for &index in &coordinator_indices {
        let role = if index == 0 {
            CoordinatorRole::Primary
        } else {
            CoordinatorRole::Standby
        };
        actors.insert(
            Addr::Coordinator(index),
            Actor::Coordinator(Coordinator::new(CoordinatorOptions {
                index,
                role,
                primary_index: 0,
                layer_sizes: layer_sizes_u8.clone(),
                timing: config.timing,
                workload: workload.to_vec(),
            })),
        );
    }

    let horizon_us = config.horizon_us.unwrap_or_else(|| {
        config.timing.warmup_timeout_us
            + workload.len() as u64 * config.timing.inference_interval_us
            + config.timing.inference_deadline_us * 4
            + config.timing.handover_timeout_us
            + 1_000_000
    });

    let mut sim = Sim {
        queue: BinaryHeap::new(),
        next_seq: 0,
        now_us: 0,
        rng: Rng::new(seed),
        trace: Trace::new(),
        dead: BTreeSet::new(),
        outcomes: vec![None; workload.len()],
        undecided: workload.len(),
        layer_count: spec.depth() as u8,
        layer_sizes_u8,
        coordinator_indices,
        latency_min_us: config.latency_min_us,
        latency_max_us: config.latency_max_us,
        loss_probability: config.loss_probability,
    };

    // Start every actor at t = 0 in address order, then schedule the kills.
    let addrs: Vec<Addr> = actors.keys().copied().collect();
    for addr in &addrs {
        let emissions = match actors.get_mut(addr).expect("listed") {
            Actor::Node(n) => n.on_start(0),
            Actor::Coordinator(c) => c.on_start(0),
        };
        sim.process_emissions(*addr, emissions);
    }
    for fault in faults {
        sim.schedule(fault.at_us, fault.target, Dispatch::Kill);
    }

    while let Some(Reverse(event)) = sim.queue.pop() {
        if sim.undecided == 0 {
            break;
        }
        if event.at_us > horizon_us {
            break;
        }
        debug_assert!(event.at_us >= sim.now_us);
        sim.now_us = event.at_us;
        match event.what {
            Dispatch::Kill => {
                sim.dead.insert(event.target);
                sim.trace
                    .push(sim.now_us, TraceKind::FaultInjected { target: event.target });
            }
            Dispatch::Deliver { from, frame } => {
                if sim.dead.contains(&event.target) {
                    continue;
                }
                sim.trace.push(
                    sim.now_us,
                    TraceKind::FrameDelivered {
                        from,
                        to: event.target,
                        msg: frame.message.msg_type().name(),
                        inference_id: frame.inference_id,
                    },
                );
                let now = sim.now_us;
                if let Some(actor) = actors.get_mut(&event.target) {
                    let emissions = actor.handle(Event::Frame(frame), now);
                    sim.process_emissions(event.target, emissions);
                }
            }
            Dispatch::Timer(timer) => {
                if sim.dead.contains(&event.target) {
                    continue;
                }
                let now = sim.now_us;
                if let Some(actor) = actors.get_mut(&event.target) {
                    let emissions = actor.handle(Event::Timer(timer), now);
                    sim.process_emissions(event.target, emissions);
                }
            }
        }
    }

    Ok(SimResult {
        outcomes: sim.outcomes,
        trace: sim.trace,
    })
}

struct Sim {
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    now_us: u64,
    rng: Rng,
    trace: Trace,
    dead: BTreeSet<Addr>,
    outcomes: Vec<Option<InferenceOutcome>>,
    undecided: usize,
    layer_count: u8,
    layer_sizes_u8: Vec<u8>,
    coordinator_indices: Vec<u8>,
    latency_min_us: u64,
    latency_max_us: u64,
    loss_probability: f64,
}

impl Sim {
    fn schedule(&mut self, at_us: u64, target: Addr, what: Dispatch) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled {
            at_us,
            seq,
            target,
            what,
        }));
    }

    fn process_emissions(&mut self, from: Addr, emissions: Vec<Emission>) {
        for emission in emissions {
            match emission {
                Emission::Send(frame) => {
                    // A dead actor's in-flight emissions are suppressed; the
                    // kill takes effect atomically at its timestamp.
                    if self.dead.contains(&from) {
                        continue;
                    }
                    self.trace.push(
                        self.now_us,
                        TraceKind::FrameSent {
                            from,
                            msg: frame.message.msg_type().name(),
                            inference_id: frame.inference_id,
                        },
                    );
                    let dests = route(
                        from,
                        &frame,
                        self.layer_count,
                        &self.layer_sizes_u8,
                        &self.coordinator_indices,
                    );
                    for dest in dests {
                        if self.loss_probability > 0.0
                            && self.rng.unit_f64() < self.loss_probability
                        {
                            self.trace.push(
                                self.now_us,
                                TraceKind::FrameDropped {
                                    reason: format!("loss to {dest}"),
                                },
                            );
                            continue;
                        }
                        let latency = if self.latency_max_us == self.latency_min_us {
                            self.latency_min_us
                        } else {
                            self.latency_min_us
                                + self
                                    .rng
                                    .next_below(self.latency_max_us - self.latency_min_us + 1)
                        };
                        self.schedule(
                            self.now_us + latency,
                            dest,
                            Dispatch::Deliver {
                                from,
                                frame: frame.clone(),
                            },
                        );
                    }
                }
                Emission::TimerAfter { delay_us, timer } => {
                    self.schedule(self.now_us + delay_us, from, Dispatch::Timer(timer));
                }
                Emission::Trace(kind) => {
                    self.trace.push(self.now_us, kind);
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
}
