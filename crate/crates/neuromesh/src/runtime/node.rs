use std::collections::{BTreeMap, BTreeSet};

use super::{ClusterTiming, Emission, Event, Timer, TraceKind};
use crate::nn::neuron_preactivation;
use crate::wire::{Frame, Message, NeuronParams, Reassembler};

/// Per-inference input buffer.
#[derive(Debug, Clone)]
struct PendingInference {
    values: Vec<f32>,
    received: Vec<bool>,
    received_count: usize,
    /// Workload index echoed from the frame that opened this inference.
    seq: u16,
}

/// One neuron as an independent message-passing state machine.
///
/// Layer-1 nodes compute as soon as the input vector arrives; deeper nodes
/// collect fan-in activations behind a barrier timer armed at first arrival
/// and, on timeout, compute with missing sources as exactly zero. Every
/// computation runs through [`neuron_preactivation`] on `f32`, the same code
/// path as the in-memory forward pass.
///
/// Once `alive` is false — after a FAULT_INJECT — the node emits nothing ever
/// again, heartbeats included.
#[derive(Debug, Clone)]
pub struct NeuronNode {
    layer: u8,
    neuron: u8,
    params: NeuronParams,
    fan_in: usize,
    timing: ClusterTiming,
    alive: bool,
    heartbeat_counter: u32,
    pending: BTreeMap<u32, PendingInference>,
    completed: BTreeSet<u32>,
    chunk_buffer: Option<Reassembler>,
}

impl NeuronNode {
    pub fn new(layer: u8, neuron: u8, params: NeuronParams, timing: ClusterTiming) -> Self {
        let fan_in = params.weights.len();
        Self {
            layer,
            neuron,
            params,
            fan_in,
            timing,
            alive: true,
            heartbeat_counter: 0,
            pending: BTreeMap::new(),
            completed: BTreeSet::new(),
            chunk_buffer: None,
        }
    }

    pub fn alive(&self) -> bool {
        self.alive
    }

    pub fn id(&self) -> (u8, u8) {
        (self.layer, self.neuron)
    }

    /// First emissions when the node comes up: an immediate heartbeat and the
    /// periodic tick behind it.
    pub fn on_start(&mut self, _now_us: u64) -> Vec<Emission> {
        let mut out = Vec::new();
        self.emit_heartbeat(&mut out);
        out.push(Emission::TimerAfter {
            delay_us: self.timing.heartbeat_interval_us,
            timer: Timer::HeartbeatTick,
        });
        out
    }

    pub fn handle(&mut self, event: Event, _now_us: u64) -> Vec<Emission> {
        if !self.alive {
            return Vec::new();
        }
        match event {
            Event::Frame(frame) => self.handle_frame(frame),
            Event::Timer(timer) => self.handle_timer(timer),
        }
    }

    fn handle_frame(&mut self, frame: Frame) -> Vec<Emission> {
        let mut out = Vec::new();
        match &frame.message {
            Message::Activation { value } => {
                // Only the previous layer feeds this node.
                if self.layer < 2 || frame.layer != self.layer - 1 {
                    return out;
                }
                let source = frame.neuron as usize;
                if source >= self.fan_in {
                    return out;
                }
                if self.completed.contains(&frame.inference_id) {
                    out.push(Emission::Trace(TraceKind::LateFrameDropped {
                        node: self.id(),
                        inference_id: frame.inference_id,
                    }));
                    return out;
                }
                let fan_in = self.fan_in;
                let timeout = self.timing.layer_timeout_us;
                let mut newly_opened = false;
                let entry = self.pending.entry(frame.inference_id).or_insert_with(|| {
                    newly_opened = true;
                    PendingInference {
                        values: vec![0.0; fan_in],
                        received: vec![false; fan_in],
                        received_count: 0,
                        seq: frame.seq,
                    }
                });
                if newly_opened {
                    out.push(Emission::TimerAfter {
                        delay_us: timeout,
                        timer: Timer::Barrier {
                            inference_id: frame.inference_id,
                        },
                    });
                }
                if entry.received[source] {
                    // Duplicate (inference, source) delivery: idempotent.
                    return out;
                }
                entry.values[source] = *value;
                entry.received[source] = true;
                entry.received_count += 1;
                if entry.received_count == fan_in {
                    self.fire(frame.inference_id, &mut out);
                }
            }
            Message::InputVector { values } => {
                if self.layer != 1 {
                    return out;
                }
                if self.completed.contains(&frame.inference_id) {
                    out.push(Emission::Trace(TraceKind::LateFrameDropped {
                        node: self.id(),
                        inference_id: frame.inference_id,
                    }));
                    return out;
                }
                if values.len() != self.fan_in {
                    out.push(Emission::Trace(TraceKind::FrameDropped {
                        reason: format!(
                            "input vector of {} values at node with fan-in {}",
                            values.len(),
                            self.fan_in
                        ),
                    }));
                    return out;
                }
                // The full input arrives in one frame; no barrier needed.
                self.pending.insert(
                    frame.inference_id,
                    PendingInference {
                        values: values.clone(),
                        received: vec![true; self.fan_in],
                        received_count: self.fan_in,
                        seq: frame.seq,
                    },
                );
                self.fire(frame.inference_id, &mut out);
            }
            Message::FaultInject {
                target_layer,
                target_neuron,
            } => {
                if (*target_layer, *target_neuron) == self.id() {
                    out.push(Emission::Trace(TraceKind::FaultInjected {
                        target: super::Addr::node(self.layer, self.neuron),
                    }));
                    self.alive = false;
                }
            }
            Message::WeightChunk { .. } => {
                let buffer = self.chunk_buffer.get_or_insert_with(Reassembler::new);
                if buffer.insert(0, &frame).is_ok() {
                    out.push(Emission::Send(Frame::new(
                        frame.inference_id,
                        self.layer,
                        self.neuron,
                        Message::Ack {
                            acked_type: crate::wire::MsgType::WeightChunk as u8,
                            seq: frame.seq,
                        },
                    )));
                    if buffer.complete() {
                        let full = self.chunk_buffer.take().expect("buffer present");
                        if let Ok((bias, weights)) = full.finish() {
                            if weights.len() == self.fan_in {
                                self.params.bias = bias;
                                self.params.weights = weights;
                            } else {
                                out.push(Emission::Trace(TraceKind::FrameDropped {
                                    reason: format!(
                                        "weight load of fan-in {} at node with fan-in {}",
                                        weights.len(),
                                        self.fan_in
                                    ),
                                }));
                            }
                        }
                    }
                } else {
                    self.chunk_buffer = None;
                }
            }
            // Roster, results, acks, and foreign heartbeats carry nothing a
            // neuron acts on.
            _ => {}
        }
        out
    }

    fn handle_timer(&mut self, timer: Timer) -> Vec<Emission> {
        let mut out = Vec::new();
        match timer {
            Timer::HeartbeatTick => {
                self.emit_heartbeat(&mut out);
                out.push(Emission::TimerAfter {
                    delay_us: self.timing.heartbeat_interval_us,
                    timer: Timer::HeartbeatTick,
                });
            }
            Timer::Barrier { inference_id } => {
                if self.pending.contains_key(&inference_id)
                    && !self.completed.contains(&inference_id)
                {
                    let missing = self.fan_in
                        - self
                            .pending
                            .get(&inference_id)
                            .map(|p| p.received_count)
                            .unwrap_or(0);
                    out.push(Emission::Trace(TraceKind::BarrierTimeout {
                        node: self.id(),
                        inference_id,
                        missing,
                    }));
                    self.fire(inference_id, &mut out);
                }
            }
            _ => {}
        }
        out
    }

    /// Computes and broadcasts this neuron's activation for `inference_id`,
    /// then drops the buffer. Missing inputs are already exactly 0.0.
    fn fire(&mut self, inference_id: u32, out: &mut Vec<Emission>) {
        let Some(pending) = self.pending.remove(&inference_id) else {
            return;
        };
        let z = neuron_preactivation(&self.params.weights, self.params.bias, &pending.values);
        let value = self.params.activation.apply_scalar(z);
        self.completed.insert(inference_id);
        out.push(Emission::Send(Frame {
            flags: 0,
            inference_id,
            layer: self.layer,
            neuron: self.neuron,
            seq: pending.seq,
            message: Message::Activation { value },
        }));
    }

    fn emit_heartbeat(&mut self, out: &mut Vec<Emission>) {
        out.push(Emission::Send(Frame::new(
            0,
            self.layer,
            self.neuron,
            Message::Heartbeat {
                is_coordinator: false,
                layer: self.layer,
                neuron: self.neuron,
                counter: self.heartbeat_counter,
            },
        )));
        self.heartbeat_counter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng::Rng;

    fn test_node() -> NeuronNode {
        let mut rng = Rng::new(3);
        let weights: Vec<f32> = (0..10).map(|_| rng.uniform(-0.5, 0.5) as f32).collect();
        NeuronNode::new(
            2,
            4,
            NeuronParams {
                weights,
                bias: 0.25,
                activation: Activation::Relu,
            },
            ClusterTiming::default(),
        )
    }

    fn activation_frame(inference_id: u32, source: u8, value: f32) -> Frame {
        Frame {
            flags: 0,
            inference_id,
            layer: 1,
            neuron: source,
            seq: 9,
            message: Message::Activation { value },
        }
    }

    fn sent_activation(emissions: &[Emission]) -> Option<(u32, f32, u16)> {
        emissions.iter().find_map(|e| match e {
            Emission::Send(Frame {
                inference_id,
                seq,
                message: Message::Activation { value },
                ..
            }) => Some((*inference_id, *value, *seq)),
            _ => None,
        })
    }

    #[test]
    fn full_fan_in_fires_exact_neuron_computation() {
        let mut node = test_node();
        let inputs: Vec<f32> = (0..10).map(|i| 0.1 * i as f32 - 0.4).collect();
        let mut emitted = None;
        for (i, &v) in inputs.iter().enumerate() {
            let out = node.handle(Event::Frame(activation_frame(7, i as u8, v)), 0);
            if let Some(e) = sent_activation(&out) {
                emitted = Some(e);
            }
        }
        let (inf, value, seq) = emitted.expect("node fired after full fan-in");
        assert_eq!(inf, 7);
        assert_eq!(seq, 9);
        let expected = {
            let z = neuron_preactivation(&node.params.weights, node.params.bias, &inputs);
            Activation::Relu.apply_scalar(z)
        };
        assert_eq!(value.to_bits(), expected.to_bits());
    }

    #[test]
    fn barrier_timeout_fills_missing_with_zero() {
        let mut node = test_node();
        // Sources 0..9 except 4.
        for i in (0..10).filter(|&i| i != 4) {
            let out = node.handle(Event::Frame(activation_frame(1, i as u8, 0.5)), 0);
            assert!(sent_activation(&out).is_none());
        }
        let out = node.handle(Event::Timer(Timer::Barrier { inference_id: 1 }), 50_000);
        let (_, value, _) = sent_activation(&out).expect("barrier fires");
        let mut inputs = vec![0.5_f32; 10];
        inputs[4] = 0.0;
        let z = neuron_preactivation(&node.params.weights, node.params.bias, &inputs);
        assert_eq!(value.to_bits(), Activation::Relu.apply_scalar(z).to_bits());
        assert!(out
            .iter()
            .any(|e| matches!(e, Emission::Trace(TraceKind::BarrierTimeout { missing: 1, .. }))));
    }

    #[test]
    fn first_arrival_arms_exactly_one_barrier() {
        let mut node = test_node();
        let count_barriers = |out: &[Emission]| {
            out.iter()
                .filter(|e| matches!(e, Emission::TimerAfter { timer: Timer::Barrier { .. }, .. }))
                .count()
        };
        let out = node.handle(Event::Frame(activation_frame(3, 0, 1.0)), 0);
        assert_eq!(count_barriers(&out), 1);
        let out = node.handle(Event::Frame(activation_frame(3, 1, 1.0)), 10);
        assert_eq!(count_barriers(&out), 0);
    }

    #[test]
    fn duplicate_source_is_idempotent() {
        let mut node = test_node();
        node.handle(Event::Frame(activation_frame(2, 0, 1.0)), 0);
        node.handle(Event::Frame(activation_frame(2, 0, 99.0)), 1);
        let p = node.pending.get(&2).unwrap();
        assert_eq!(p.received_count, 1);
        assert_eq!(p.values[0], 1.0);
    }

    #[test]
    fn fault_injected_node_never_emits_again() {
        let mut node = test_node();
        let out = node.handle(
            Event::Frame(Frame::new(0, 0xFF, 0, Message::FaultInject {
                target_layer: 2,
                target_neuron: 4,
            })),
            0,
        );
        // The fault itself is traced but nothing is sent.
        assert!(out.iter().all(|e| !matches!(e, Emission::Send(_))));
        assert!(!node.alive());
        for i in 0..10 {
            let out = node.handle(Event::Frame(activation_frame(5, i, 1.0)), 10);
            assert!(out.is_empty());
        }
        let out = node.handle(Event::Timer(Timer::HeartbeatTick), 25_000);
        assert!(out.is_empty());
    }

    #[test]
    fn fault_inject_for_other_node_is_ignored() {
        let mut node = test_node();
        node.handle(
            Event::Frame(Frame::new(0, 0xFF, 0, Message::FaultInject {
                target_layer: 2,
                target_neuron: 5,
            })),
            0,
        );
        assert!(node.alive());
    }

    #[test]
    fn late_frames_after_completion_are_dropped_and_logged() {
        let mut node = test_node();
        for i in 0..10 {
            node.handle(Event::Frame(activation_frame(8, i, 0.1)), 0);
        }
        let out = node.handle(Event::Frame(activation_frame(8, 3, 0.1)), 100);
        assert!(sent_activation(&out).is_none());
        assert!(out
            .iter()
            .any(|e| matches!(e, Emission::Trace(TraceKind::LateFrameDropped { .. }))));
    }

    #[test]
    fn input_layer_node_fires_immediately_on_input_vector() {
        let mut rng = Rng::new(4);
        let weights: Vec<f32> = (0..10).map(|_| rng.uniform(-0.5, 0.5) as f32).collect();
        let mut node = NeuronNode::new(
            1,
            0,
            NeuronParams {
                weights: weights.clone(),
                bias: -0.1,
                activation: Activation::Relu,
            },
            ClusterTiming::default(),
        );
        let x: Vec<f32> = (0..10).map(|i| i as f32 * 0.05).collect();
        let out = node.handle(
            Event::Frame(Frame {
                flags: 0,
                inference_id: 11,
                layer: 0xFF,
                neuron: 0,
                seq: 2,
                message: Message::InputVector { values: x.clone() },
            }),
            0,
        );
        let (inf, value, seq) = sent_activation(&out).expect("fires immediately");
        assert_eq!((inf, seq), (11, 2));
        let z = neuron_preactivation(&weights, -0.1, &x);
        assert_eq!(value.to_bits(), Activation::Relu.apply_scalar(z).to_bits());
    }

    #[test]
    fn heartbeats_carry_increasing_counters() {
        let mut node = test_node();
        let first = node.on_start(0);
        let second = node.handle(Event::Timer(Timer::HeartbeatTick), 25_000);
        let counter_of = |emissions: &[Emission]| {
            emissions.iter().find_map(|e| match e {
                Emission::Send(Frame {
                    message: Message::Heartbeat { counter, .. },
                    ..
                }) => Some(*counter),
                _ => None,
            })
        };
        assert_eq!(counter_of(&first), Some(0));
        assert_eq!(counter_of(&second), Some(1));
        // The tick rearms itself.
        assert!(second.iter().any(|e| matches!(
            e,
            Emission::TimerAfter {
                timer: Timer::HeartbeatTick,
                ..
            }
        )));
    }

    #[test]
    fn weight_chunks_install_new_params_and_ack() {
        let mut node = test_node();
        let new_weights: Vec<f32> = (0..10).map(|i| i as f32).collect();
        let frames = crate::wire::chunk_weight_load(2, 4, 9.0, &new_weights).unwrap();
        let mut acks = 0;
        for f in frames {
            let out = node.handle(Event::Frame(f), 0);
            acks += out
                .iter()
                .filter(|e| matches!(e, Emission::Send(Frame { message: Message::Ack { .. }, .. })))
                .count();
        }
        assert!(acks >= 1);
        assert_eq!(node.params.bias, 9.0);
        assert_eq!(node.params.weights, new_weights);
    }
}
