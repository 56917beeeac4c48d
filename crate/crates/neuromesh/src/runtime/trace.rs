use std::fmt::Write as _;

use super::Addr;

/// Semantic trace vocabulary. Frame-level send/deliver/drop events come from
/// the transport; the rest are emitted by the state machines.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceKind {
    FrameSent {
        from: Addr,
        msg: &'static str,
        inference_id: u32,
    },
    FrameDelivered {
        from: Addr,
        to: Addr,
        msg: &'static str,
        inference_id: u32,
    },
    FrameDropped {
        reason: String,
    },
    FaultInjected {
        target: Addr,
    },
    NodeSuspected {
        node: (u8, u8),
    },
    NodeFailed {
        node: (u8, u8),
        last_heartbeat_us: u64,
    },
    BarrierTimeout {
        node: (u8, u8),
        inference_id: u32,
        missing: usize,
    },
    LateFrameDropped {
        node: (u8, u8),
        inference_id: u32,
    },
    InferenceIssued {
        inference_id: u32,
        workload_index: u16,
    },
    InferenceCompleted {
        inference_id: u32,
        workload_index: u16,
    },
    InferenceFailed {
        inference_id: u32,
        workload_index: u16,
        reason: &'static str,
    },
    HandoverStarted {
        coordinator: u8,
    },
    HandoverFinished {
        coordinator: u8,
        reissued: usize,
    },
    WorkloadStarted,
}

impl TraceKind {
    /// `(event, subject, detail)` columns for the CSV rendering.
    pub fn csv_fields(&self) -> (String, String, String) {
        match self {
            TraceKind::FrameSent {
                from,
                msg,
                inference_id,
            } => ("frame_sent".into(), from.to_string(), format!("{msg} inf={inference_id}")),
            TraceKind::FrameDelivered {
                from,
                to,
                msg,
                inference_id,
            } => (
                "frame_delivered".into(),
                to.to_string(),
                format!("{msg} inf={inference_id} from={from}"),
            ),
            TraceKind::FrameDropped { reason } => {
                ("frame_dropped".into(), String::new(), reason.clone())
            }
            TraceKind::FaultInjected { target } => {
                ("fault_injected".into(), target.to_string(), String::new())
            }
            TraceKind::NodeSuspected { node } => (
                "node_suspected".into(),
                Addr::node(node.0, node.1).to_string(),
                String::new(),
            ),
            TraceKind::NodeFailed {
                node,
                last_heartbeat_us,
            } => (
                "node_failed".into(),
                Addr::node(node.0, node.1).to_string(),
                format!("last_heartbeat_us={last_heartbeat_us}"),
            ),
            TraceKind::BarrierTimeout {
                node,
                inference_id,
                missing,
            } => (
                "barrier_timeout".into(),
                Addr::node(node.0, node.1).to_string(),
                format!("inf={inference_id} missing={missing}"),
            ),
            TraceKind::LateFrameDropped { node, inference_id } => (
                "late_frame_dropped".into(),
                Addr::node(node.0, node.1).to_string(),
                format!("inf={inference_id}"),
            ),
            TraceKind::InferenceIssued {
                inference_id,
                workload_index,
            } => (
                "inference_issued".into(),
                format!("inf-{inference_id}"),
                format!("workload={workload_index}"),
            ),
            TraceKind::InferenceCompleted {
                inference_id,
                workload_index,
            } => (
                "inference_completed".into(),
                format!("inf-{inference_id}"),
                format!("workload={workload_index}"),
            ),
            TraceKind::InferenceFailed {
                inference_id,
                workload_index,
                reason,
            } => (
                "inference_failed".into(),
                format!("inf-{inference_id}"),
                format!("workload={workload_index} reason={reason}"),
            ),
            TraceKind::HandoverStarted { coordinator } => (
                "handover_started".into(),
                Addr::Coordinator(*coordinator).to_string(),
                String::new(),
            ),
            TraceKind::HandoverFinished {
                coordinator,
                reissued,
            } => (
                "handover_finished".into(),
                Addr::Coordinator(*coordinator).to_string(),
                format!("reissued={reissued}"),
            ),
            TraceKind::WorkloadStarted => ("workload_started".into(), String::new(), String::new()),
        }
    }
}

/// One timestamped trace entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time_us: u64,
    pub kind: TraceKind,
}

/// Append-only, time-ordered event log of a run. The CSV rendering is
/// `time_us,event,subject,detail`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time_us: u64, kind: TraceKind) {
        debug_assert!(
            self.events.last().map_or(true, |e| e.time_us <= time_us),
            "trace timestamps must be non-decreasing"
        );
        self.events.push(TraceEvent { time_us, kind });
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_us,event,subject,detail\n");
        for e in &self.events {
            let (event, subject, detail) = e.kind.csv_fields();
            let _ = writeln!(out, "{},{},{},{}", e.time_us, event, subject, detail);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_ordered_rows() {
        let mut trace = Trace::new();
        trace.push(5, TraceKind::WorkloadStarted);
        trace.push(
            10,
            TraceKind::NodeFailed {
                node: (1, 3),
                last_heartbeat_us: 2,
            },
        );
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "time_us,event,subject,detail");
        assert!(lines[1].starts_with("5,workload_started"));
        assert!(lines[2].starts_with("10,node_failed,node-1-3,last_heartbeat_us=2"));
    }

    #[test]
    #[should_panic(expected = "non-decreasing")]
    fn out_of_order_push_is_rejected_in_debug() {
        let mut trace = Trace::new();
        trace.push(10, TraceKind::WorkloadStarted);
        trace.push(5, TraceKind::WorkloadStarted);
    }
}
