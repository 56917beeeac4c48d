use super::{Addr, Trace, TraceKind};

/// Recovery metrics for one fault event, all in microseconds of trace time.
///
/// - `detection_us`: fault injection to the failure declaration (a
///   `node_failed` entry for nodes, `handover_started` for coordinators).
/// - `stabilization_us`: declaration to the first inference completed after
///   it.
/// - `total_us`: the sum.
///
/// A record is censored when the trace never contains the corresponding
/// declaration (or no inference completes afterwards).
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRecord {
    pub target: Addr,
    pub fault_at_us: u64,
    pub detection_us: Option<u64>,
    pub stabilization_us: Option<u64>,
    pub total_us: Option<u64>,
    pub censored: bool,
}

/// Extracts one recovery record per fault event in the trace.
pub fn measure_recovery(trace: &Trace) -> Vec<RecoveryRecord> {
    let mut records = Vec::new();
    for (idx, event) in trace.events.iter().enumerate() {
        let TraceKind::FaultInjected { target } = event.kind else {
            continue;
        };
        let fault_at_us = event.time_us;
        let declared_at = trace.events[idx..].iter().find_map(|e| match (&e.kind, target) {
            (TraceKind::NodeFailed { node, .. }, Addr::Node { layer, neuron })
                if *node == (layer, neuron) =>
            {
                Some(e.time_us)
            }
            (TraceKind::HandoverStarted { .. }, Addr::Coordinator(_)) => Some(e.time_us),
            _ => None,
        });
        let Some(declared_at) = declared_at else {
            records.push(RecoveryRecord {
                target,
                fault_at_us,
                detection_us: None,
                stabilization_us: None,
                total_us: None,
                censored: true,
            });
            continue;
        };
        let first_completion = trace
            .events
            .iter()
            .find(|e| {
                e.time_us > declared_at
                    && matches!(e.kind, TraceKind::InferenceCompleted { .. })
            })
            .map(|e| e.time_us);
        let detection_us = declared_at - fault_at_us;
        match first_completion {
            Some(t) => {
                let stabilization_us = t - declared_at;
                records.push(RecoveryRecord {
                    target,
                    fault_at_us,
                    detection_us: Some(detection_us),
                    stabilization_us: Some(stabilization_us),
                    total_us: Some(detection_us + stabilization_us),
                    censored: false,
                });
            }
            None => records.push(RecoveryRecord {
                target,
                fault_at_us,
                detection_us: Some(detection_us),
                stabilization_us: None,
                total_us: None,
                censored: true,
            }),
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_yields_no_records() {
        assert!(measure_recovery(&Trace::new()).is_empty());
    }

    #[test]
    fn node_fault_record_sums_detection_and_stabilization() {
        let mut trace = Trace::new();
        trace.push(100_000, TraceKind::FaultInjected { target: Addr::node(1, 3) });
        trace.push(
            155_000,
            TraceKind::NodeFailed {
                node: (1, 3),
                last_heartbeat_us: 95_000,
            },
        );
        trace.push(
            170_000,
            TraceKind::InferenceCompleted {
                inference_id: 9,
                workload_index: 4,
            },
        );
        let records = measure_recovery(&trace);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.detection_us, Some(55_000));
        assert_eq!(r.stabilization_us, Some(15_000));
        assert_eq!(r.total_us, Some(70_000));
        assert!(!r.censored);
    }

    #[test]
    fn coordinator_fault_uses_handover_start() {
        let mut trace = Trace::new();
        trace.push(50_000, TraceKind::FaultInjected { target: Addr::Coordinator(0) });
        trace.push(252_000, TraceKind::HandoverStarted { coordinator: 1 });
        trace.push(
            300_000,
            TraceKind::InferenceCompleted {
                inference_id: 1,
                workload_index: 0,
            },
        );
        let records = measure_recovery(&trace);
        assert_eq!(records[0].detection_us, Some(202_000));
        assert_eq!(records[0].stabilization_us, Some(48_000));
    }

    #[test]
    fn fault_without_detection_is_censored() {
        let mut trace = Trace::new();
        trace.push(10, TraceKind::FaultInjected { target: Addr::node(2, 2) });
        let records = measure_recovery(&trace);
        assert!(records[0].censored);
        assert_eq!(records[0].detection_us, None);
    }

    #[test]
    fn completions_before_detection_do_not_count() {
        let mut trace = Trace::new();
        trace.push(0, TraceKind::FaultInjected { target: Addr::node(1, 0) });
        trace.push(
            10,
            TraceKind::InferenceCompleted {
                inference_id: 0,
                workload_index: 0,
            },
        );
        trace.push(
            50,
            TraceKind::NodeFailed {
                node: (1, 0),
                last_heartbeat_us: 0,
            },
        );
        let records = measure_recovery(&trace);
        assert_eq!(records[0].detection_us, Some(50));
        assert!(records[0].censored);
        assert_eq!(records[0].stabilization_us, None);
    }
}
