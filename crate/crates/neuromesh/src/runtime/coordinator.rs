use std::collections::{BTreeMap, BTreeSet};

use super::{Addr, ClusterTiming, Emission, Event, InferenceOutcome, Timer, TraceKind};
use crate::wire::{CoordinatorRole, Frame, Message, COORDINATOR_LAYER};

/// Health of a neuron node as seen by a coordinator. `Failed` is monotonic:
/// a node never rejoins within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeHealth {
    Alive,
    Suspected,
    Failed,
}

#[derive(Debug, Clone)]
struct NodeStatus {
    last_heartbeat_us: u64,
    heard_once: bool,
    health: NodeHealth,
}

#[derive(Debug, Clone)]
struct PendingInference {
    workload_index: u16,
    input: Vec<f32>,
    collected: Vec<Option<f32>>,
    received: usize,
}

/// Coordinator construction options.
#[derive(Debug, Clone)]
pub struct CoordinatorOptions {
    pub index: u8,
    pub role: CoordinatorRole,
    /// Index of the primary this standby watches (ignored for primaries).
    pub primary_index: u8,
    pub layer_sizes: Vec<u8>,
    pub timing: ClusterTiming,
    pub workload: Vec<Vec<f32>>,
}

/// The coordinator state machine.
///
/// The primary issues workload inputs, collects output-layer activations,
/// and tracks node liveness from heartbeats: one silent interval marks a
/// node suspected, the full budget marks it failed. A standby mirrors the
/// primary's pending inferences from the broadcasts it overhears and, after
/// `handover_timeout` of primary silence, promotes itself: it finalizes
/// whatever it already collected, reissues the rest under fresh inference
/// ids, and continues the remaining workload.
#[derive(Debug, Clone)]
pub struct Coordinator {
    index: u8,
    role: CoordinatorRole,
    primary_index: u8,
    layer_sizes: Vec<u8>,
    timing: ClusterTiming,
    workload: Vec<Vec<f32>>,
    alive: bool,
    heartbeat_counter: u32,
    roster: BTreeMap<(u8, u8), NodeStatus>,
    pending: BTreeMap<u32, PendingInference>,
    resolved_workload: BTreeSet<u16>,
    next_workload: usize,
    next_inference_id: u32,
    workload_started: bool,
    issue_armed: bool,
    primary_last_heartbeat_us: u64,
}

impl Coordinator {
    pub fn new(options: CoordinatorOptions) -> Self {
        let mut roster = BTreeMap::new();
        for l in 1..options.layer_sizes.len() {
            for n in 0..options.layer_sizes[l] {
                roster.insert(
                    (l as u8, n),
                    NodeStatus {
                        last_heartbeat_us: 0,
                        heard_once: false,
                        health: NodeHealth::Alive,
                    },
                );
            }
        }
        Self {
            index: options.index,
            role: options.role,
            primary_index: options.primary_index,
            layer_sizes: options.layer_sizes,
            timing: options.timing,
            workload: options.workload,
            alive: true,
            heartbeat_counter: 0,
            roster,
            pending: BTreeMap::new(),
            resolved_workload: BTreeSet::new(),
            next_workload: 0,
            next_inference_id: 0,
            workload_started: false,
            issue_armed: false,
            primary_last_heartbeat_us: 0,
        }
    }

    pub fn addr(&self) -> Addr {
        Addr::Coordinator(self.index)
    }

    pub fn role(&self) -> CoordinatorRole {
        self.role
    }

    pub fn node_health(&self, node: (u8, u8)) -> Option<NodeHealth> {
        self.roster.get(&node).map(|s| s.health)
    }

    fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated") as usize
    }

    fn output_layer(&self) -> u8 {
        (self.layer_sizes.len() - 1) as u8
    }

    pub fn on_start(&mut self, now_us: u64) -> Vec<Emission> {
        let mut out = Vec::new();
        self.emit_heartbeat(&mut out);
        out.push(Emission::TimerAfter {
            delay_us: self.timing.heartbeat_interval_us,
            timer: Timer::HeartbeatTick,
        });
        // Arm liveness checks as if every node had just been heard, so a node
        // that never comes up at all is still detected on the normal budget.
        let nodes: Vec<(u8, u8)> = self.roster.keys().copied().collect();
        for node in nodes {
            if let Some(status) = self.roster.get_mut(&node) {
                status.last_heartbeat_us = now_us;
            }
            self.arm_node_checks(node, now_us, &mut out);
        }
        match self.role {
            CoordinatorRole::Primary => {
                out.push(Emission::Send(self.roster_frame()));
                out.push(Emission::TimerAfter {
                    delay_us: self.timing.warmup_timeout_us,
                    timer: Timer::WarmupDeadline,
                });
            }
            CoordinatorRole::Standby => {
                self.primary_last_heartbeat_us = now_us;
                out.push(Emission::TimerAfter {
                    delay_us: self.timing.handover_timeout_us,
                    timer: Timer::PrimaryWatch { armed_at_us: now_us },
                });
            }
        }
        out
    }

    pub fn handle(&mut self, event: Event, now_us: u64) -> Vec<Emission> {
        if !self.alive {
            return Vec::new();
        }
        match event {
            Event::Frame(frame) => self.handle_frame(frame, now_us),
            Event::Timer(timer) => self.handle_timer(timer, now_us),
        }
    }

    fn handle_frame(&mut self, frame: Frame, now_us: u64) -> Vec<Emission> {
        let mut out = Vec::new();
        match &frame.message {
            Message::Heartbeat {
                is_coordinator: false,
                layer,
                neuron,
                ..
            } => {
                let node = (*layer, *neuron);
                if let Some(status) = self.roster.get_mut(&node) {
                    if status.health != NodeHealth::Failed {
                        status.last_heartbeat_us = now_us;
                        status.heard_once = true;
                        status.health = NodeHealth::Alive;
                        self.arm_node_checks(node, now_us, &mut out);
                        self.maybe_start_workload(false, &mut out);
                    }
                }
            }
            Message::Heartbeat {
                is_coordinator: true,
                neuron,
                ..
            } => {
                if self.role == CoordinatorRole::Standby && *neuron == self.primary_index {
                    self.primary_last_heartbeat_us = now_us;
                    out.push(Emission::TimerAfter {
                        delay_us: self.timing.handover_timeout_us,
                        timer: Timer::PrimaryWatch { armed_at_us: now_us },
                    });
                }
            }
            Message::Activation { value } => {
                if frame.layer != self.output_layer() {
                    return out;
                }
                let neuron = frame.neuron as usize;
                if neuron >= self.output_dim() {
                    return out;
                }
                if let Some(pending) = self.pending.get_mut(&frame.inference_id) {
                    if pending.collected[neuron].is_none() {
                        pending.collected[neuron] = Some(*value);
                        pending.received += 1;
                    }
                    if pending.received == self.output_dim()
                        && self.role == CoordinatorRole::Primary
                    {
                        self.finalize(frame.inference_id, &mut out);
                    }
                }
            }
            Message::InputVector { values } => {
                // Overheard primary issue: mirror it.
                if self.role == CoordinatorRole::Standby {
                    let output_dim = self.output_dim();
                    self.pending.entry(frame.inference_id).or_insert(PendingInference {
                        workload_index: frame.seq,
                        input: values.clone(),
                        collected: vec![None; output_dim],
                        received: 0,
                    });
                    self.next_workload = self.next_workload.max(frame.seq as usize + 1);
                    self.next_inference_id = self.next_inference_id.max(frame.inference_id + 1);
                }
            }
            Message::Result { .. } => {
                // The other coordinator answered this inference.
                if let Some(p) = self.pending.remove(&frame.inference_id) {
                    self.resolved_workload.insert(p.workload_index);
                } else {
                    self.resolved_workload.insert(frame.seq);
                }
            }
            Message::FaultInject {
                target_layer,
                target_neuron,
            } => {
                if *target_layer == COORDINATOR_LAYER && *target_neuron == self.index {
                    out.push(Emission::Trace(TraceKind::FaultInjected {
                        target: self.addr(),
                    }));
                    self.alive = false;
                }
            }
            _ => {}
        }
        out
    }

    fn handle_timer(&mut self, timer: Timer, now_us: u64) -> Vec<Emission> {
        let mut out = Vec::new();
        match timer {
            Timer::HeartbeatTick => {
                self.emit_heartbeat(&mut out);
                out.push(Emission::TimerAfter {
                    delay_us: self.timing.heartbeat_interval_us,
                    timer: Timer::HeartbeatTick,
                });
            }
            Timer::SuspectCheck { node, armed_at_us } => {
                if let Some(status) = self.roster.get_mut(&node) {
                    if status.last_heartbeat_us == armed_at_us && status.health == NodeHealth::Alive
                    {
                        status.health = NodeHealth::Suspected;
                        out.push(Emission::Trace(TraceKind::NodeSuspected { node }));
                    }
                }
            }
            Timer::FailCheck { node, armed_at_us } => {
                if let Some(status) = self.roster.get_mut(&node) {
                    if status.last_heartbeat_us == armed_at_us
                        && status.health != NodeHealth::Failed
                    {
                        status.health = NodeHealth::Failed;
                        out.push(Emission::Trace(TraceKind::NodeFailed {
                            node,
                            last_heartbeat_us: status.last_heartbeat_us,
                        }));
                        self.maybe_start_workload(false, &mut out);
                    }
                }
            }
            Timer::PrimaryWatch { armed_at_us } => {
                if self.role == CoordinatorRole::Standby
                    && self.primary_last_heartbeat_us == armed_at_us
                {
                    self.promote(now_us, &mut out);
                }
            }
            Timer::InferenceDeadline { inference_id } => {
                if self.role == CoordinatorRole::Primary {
                    if let Some(p) = self.pending.remove(&inference_id) {
                        out.push(Emission::Trace(TraceKind::InferenceFailed {
                            inference_id,
                            workload_index: p.workload_index,
                            reason: "deadline",
                        }));
                        if self.resolved_workload.insert(p.workload_index) {
                            out.push(Emission::Outcome {
                                workload_index: p.workload_index,
                                outcome: InferenceOutcome::DeadlineExceeded,
                            });
                        }
                    }
                }
            }
            Timer::IssueNext => {
                self.issue_armed = false;
                self.issue_next(&mut out);
            }
            Timer::WarmupDeadline => {
                self.maybe_start_workload(true, &mut out);
            }
            Timer::Barrier { .. } => {}
        }
        out
    }

    /// Starts issuing once every node is heard (or failed), or unconditionally
    /// at the warmup deadline.
    fn maybe_start_workload(&mut self, deadline: bool, out: &mut Vec<Emission>) {
        if self.role != CoordinatorRole::Primary || self.workload_started {
            return;
        }
        let all_accounted = self
            .roster
            .values()
            .all(|s| s.heard_once || s.health == NodeHealth::Failed);
        if deadline || all_accounted {
            self.workload_started = true;
            out.push(Emission::Trace(TraceKind::WorkloadStarted));
            self.arm_issue(0, out);
        }
    }

    fn arm_issue(&mut self, delay_us: u64, out: &mut Vec<Emission>) {
        if !self.issue_armed && self.next_workload < self.workload.len() {
            self.issue_armed = true;
            out.push(Emission::TimerAfter {
                delay_us,
                timer: Timer::IssueNext,
            });
        }
    }

    fn issue_next(&mut self, out: &mut Vec<Emission>) {
        if self.role != CoordinatorRole::Primary || !self.workload_started {
            return;
        }
        if self.next_workload >= self.workload.len() {
            return;
        }
        let workload_index = self.next_workload as u16;
        let input = self.workload[self.next_workload].clone();
        self.next_workload += 1;
        let inference_id = self.next_inference_id;
        self.next_inference_id += 1;
        self.issue(inference_id, workload_index, input, out);
        self.arm_issue(self.timing.inference_interval_us, out);
    }

    fn issue(
        &mut self,
        inference_id: u32,
        workload_index: u16,
        input: Vec<f32>,
        out: &mut Vec<Emission>,
    ) {
        self.pending.insert(
            inference_id,
            PendingInference {
                workload_index,
                input: input.clone(),
                collected: vec![None; self.output_dim()],
                received: 0,
            },
        );
        out.push(Emission::Trace(TraceKind::InferenceIssued {
            inference_id,
            workload_index,
        }));
        out.push(Emission::Send(Frame {
            flags: 0,
            inference_id,
            layer: COORDINATOR_LAYER,
            neuron: self.index,
            seq: workload_index,
            message: Message::InputVector { values: input },
        }));
        out.push(Emission::TimerAfter {
            delay_us: self.timing.inference_deadline_us,
            timer: Timer::InferenceDeadline { inference_id },
        });
    }

    fn finalize(&mut self, inference_id: u32, out: &mut Vec<Emission>) {
        let Some(pending) = self.pending.remove(&inference_id) else {
            return;
        };
        let values: Vec<f32> = pending
            .collected
            .iter()
            .map(|v| v.expect("finalize requires a full collection"))
            .collect();
        out.push(Emission::Trace(TraceKind::InferenceCompleted {
            inference_id,
            workload_index: pending.workload_index,
        }));
        out.push(Emission::Send(Frame {
            flags: 0,
            inference_id,
            layer: COORDINATOR_LAYER,
            neuron: self.index,
            seq: pending.workload_index,
            message: Message::Result {
                values: values.clone(),
            },
        }));
        if self.resolved_workload.insert(pending.workload_index) {
            out.push(Emission::Outcome {
                workload_index: pending.workload_index,
                outcome: InferenceOutcome::Completed { values },
            });
        }
    }

    /// Standby takes over: finalize what is already complete, reissue the
    /// rest under fresh inference ids, resume the remaining workload.
    fn promote(&mut self, _now_us: u64, out: &mut Vec<Emission>) {
        out.push(Emission::Trace(TraceKind::HandoverStarted {
            coordinator: self.index,
        }));
        self.role = CoordinatorRole::Primary;
        self.workload_started = true;
        out.push(Emission::Send(self.roster_frame()));

        let pending_ids: Vec<u32> = self.pending.keys().copied().collect();
        let mut reissued = 0usize;
        for id in pending_ids {
            let entry = self.pending.get(&id).expect("listed above");
            if self.resolved_workload.contains(&entry.workload_index) {
                self.pending.remove(&id);
                continue;
            }
            if entry.received == self.output_dim() {
                self.finalize(id, out);
            } else {
                let entry = self.pending.remove(&id).expect("listed above");
                let fresh_id = self.next_inference_id;
                self.next_inference_id += 1;
                self.issue(fresh_id, entry.workload_index, entry.input, out);
                reissued += 1;
            }
        }
        out.push(Emission::Trace(TraceKind::HandoverFinished {
            coordinator: self.index,
            reissued,
        }));
        self.arm_issue(0, out);
    }

    fn roster_frame(&self) -> Frame {
        let mut nodes = Vec::new();
        for l in 1..self.layer_sizes.len() {
            for n in 0..self.layer_sizes[l] {
                nodes.push((l as u8, n));
            }
        }
        Frame::new(
            0,
            COORDINATOR_LAYER,
            self.index,
            Message::Roster {
                layer_sizes: self.layer_sizes.clone(),
                nodes,
            },
        )
    }

    fn arm_node_checks(&self, node: (u8, u8), armed_at_us: u64, out: &mut Vec<Emission>) {
        out.push(Emission::TimerAfter {
            delay_us: self.timing.heartbeat_interval_us,
            timer: Timer::SuspectCheck {
                node,
                armed_at_us,
            },
        });
        out.push(Emission::TimerAfter {
            delay_us: self.timing.detection_budget_us(),
            timer: Timer::FailCheck {
                node,
                armed_at_us,
            },
        });
    }

    fn emit_heartbeat(&mut self, out: &mut Vec<Emission>) {
        out.push(Emission::Send(Frame::new(
            0,
            COORDINATOR_LAYER,
            self.index,
            Message::Heartbeat {
                is_coordinator: true,
                layer: COORDINATOR_LAYER,
                neuron: self.index,
                counter: self.heartbeat_counter,
            },
        )));
        self.heartbeat_counter += 1;
    }
}
