//! Behavior of the deterministic simulated cluster: oracle equivalence with
//! the in-memory forward pass, failure detection timing, handover, liveness,
//! and trace invariants.

use neuromesh::nn::{forward, FailureMask, InitScheme, NetworkSpec, Parameters};
use neuromesh::rng::Rng;
use neuromesh::runtime::{
    measure_recovery, run_simulation, Addr, FaultEvent, SimConfig, SimResult,
    TraceKind,
};

fn reference_net(seed: u64) -> (NetworkSpec, Parameters<f32>) {
    let spec = NetworkSpec::reference();
    let params = neuromesh::nn::init_params::<f64>(&spec, InitScheme::He, &mut Rng::new(seed));
    (spec, params.convert())
}

fn random_workload(spec: &NetworkSpec, n: usize, rng: &mut Rng) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            (0..spec.input_dim())
                .map(|_| rng.uniform(-1.0, 1.0) as f32)
                .collect()
        })
        .collect()
}

fn completed_values(result: &SimResult) -> Vec<Vec<f32>> {
    result
        .outcomes
        .iter()
        .map(|o| {
            o.as_ref()
                .expect("outcome decided")
                .completed()
                .expect("completed")
                .to_vec()
        })
        .collect()
}

#[test]
fn faultless_run_matches_forward_pass_bitwise() {
    let (spec, params) = reference_net(11);
    let mut rng = Rng::new(100);
    let workload = random_workload(&spec, 20, &mut rng);
    let result = run_simulation(&spec, &params, &workload, &[], &SimConfig::default(), 5).unwrap();
    let values = completed_values(&result);
    for (x, got) in workload.iter().zip(&values) {
        let rec = forward(&spec, &params, x, &FailureMask::empty()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].to_bits(), rec.output()[0].to_bits());
    }
}

#[test]
fn pre_run_kill_matches_masked_forward_bitwise() {
    let (spec, params) = reference_net(12);
    let mut rng = Rng::new(200);
    let workload = random_workload(&spec, 10, &mut rng);
    let faults = vec![FaultEvent {
        at_us: 0,
        target: Addr::node(1, 3),
    }];
    let result = run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), 6).unwrap();
    let mask = FailureMask::from_pairs([(1usize, 3usize)]);
    for (x, got) in workload.iter().zip(&completed_values(&result)) {
        let rec = forward(&spec, &params, x, &mask).unwrap();
        assert_eq!(got[0].to_bits(), rec.output()[0].to_bits());
    }
}

#[test]
fn randomized_failure_sets_match_oracle_bitwise() {
    // A smaller version of the acceptance sweep: random nets, inputs, and
    // pre-run hidden failure sets must agree with the analytic evaluation
    // exactly at f32.
    let mut meta_rng = Rng::new(321);
    for case in 0..10 {
        let (spec, params) = reference_net(1000 + case);
        let hidden = spec.hidden_neurons();
        let k = (meta_rng.next_below(8)) as usize;
        let picks = meta_rng.sample_indices(hidden.len(), k);
        let mask = FailureMask::from_pairs(picks.iter().map(|&i| hidden[i]));
        let faults: Vec<FaultEvent> = mask
            .iter()
            .map(|(l, n)| FaultEvent {
                at_us: 0,
                target: Addr::node(l as u8, n as u8),
            })
            .collect();
        let workload = random_workload(&spec, 3, &mut meta_rng);
        let result =
            run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), case).unwrap();
        for (x, got) in workload.iter().zip(&completed_values(&result)) {
            let rec = forward(&spec, &params, x, &mask).unwrap();
            assert_eq!(
                got[0].to_bits(),
                rec.output()[0].to_bits(),
                "case {case}, mask {mask:?}"
            );
        }
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let (spec, params) = reference_net(13);
    let mut rng = Rng::new(300);
    let workload = random_workload(&spec, 5, &mut rng);
    let faults = vec![FaultEvent {
        at_us: 1_200_000,
        target: Addr::node(2, 1),
    }];
    let a = run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), 42).unwrap();
    let b = run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), 42).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.outcomes, b.outcomes);
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
}

#[test]
fn node_kill_is_detected_within_one_heartbeat_phase_of_the_budget() {
    let (spec, params) = reference_net(14);
    let mut rng = Rng::new(400);
    // Long enough workload that inferences continue after the kill.
    let workload = random_workload(&spec, 40, &mut rng);
    let kill_at = 434_567;
    let faults = vec![FaultEvent {
        at_us: kill_at,
        target: Addr::node(1, 5),
    }];
    let config = SimConfig::default();
    let result = run_simulation(&spec, &params, &workload, &faults, &config, 31).unwrap();
    let records = measure_recovery(&result.trace);
    assert_eq!(records.len(), 1);
    let record = &records[0];
    assert!(!record.censored, "record censored: {record:?}");
    let detection = record.detection_us.unwrap();
    let budget = config.timing.detection_budget_us();
    let phase = config.timing.heartbeat_interval_us;
    assert!(
        detection > budget - phase && detection < budget + phase,
        "detection {detection}us outside ({}, {})",
        budget - phase,
        budget + phase
    );
    // The declaration instant is exactly the last heartbeat arrival at the
    // declaring coordinator plus the detection budget; both coordinators
    // monitor, so the first declaration matches one of their views.
    let declared_at = record.fault_at_us + detection;
    let last_arrival_at = |coordinator: Addr| {
        result
            .trace
            .iter()
            .filter(|e| {
                matches!(
                    &e.kind,
                    TraceKind::FrameDelivered { from: Addr::Node { layer: 1, neuron: 5 }, to, msg, .. }
                    if *msg == "heartbeat" && *to == coordinator
                ) && e.time_us < declared_at
            })
            .map(|e| e.time_us)
            .last()
    };
    let candidates: Vec<u64> = [Addr::Coordinator(0), Addr::Coordinator(1)]
        .into_iter()
        .filter_map(last_arrival_at)
        .map(|arrival| arrival + budget)
        .collect();
    assert!(
        candidates.contains(&declared_at),
        "declaration at {declared_at} not any last-arrival + budget of {candidates:?}"
    );
}

#[test]
fn coordinator_kill_hands_over_within_budget() {
    let (spec, params) = reference_net(15);
    let mut rng = Rng::new(500);
    let workload = random_workload(&spec, 60, &mut rng);
    let kill_at = 800_000;
    let faults = vec![FaultEvent {
        at_us: kill_at,
        target: Addr::Coordinator(0),
    }];
    let config = SimConfig::default();
    let result = run_simulation(&spec, &params, &workload, &faults, &config, 77).unwrap();
    // Every input still gets an outcome (the standby finishes the workload).
    assert!(result.outcomes.iter().all(Option::is_some));
    let records = measure_recovery(&result.trace);
    assert_eq!(records.len(), 1);
    let record = &records[0];
    let detection = record.detection_us.expect("handover detected");
    let budget = config.timing.handover_timeout_us;
    let phase = config.timing.heartbeat_interval_us;
    assert!(
        detection > budget - phase && detection < budget + phase,
        "handover detection {detection}us outside ({}, {})",
        budget - phase,
        budget + phase
    );
    assert!(record.total_us.is_some(), "complete recovery record");
    let handover_finished = result
        .trace
        .iter()
        .any(|e| matches!(e.kind, TraceKind::HandoverFinished { .. }));
    assert!(handover_finished);
}

#[test]
fn killed_node_emits_no_frames_after_its_kill_time() {
    let (spec, params) = reference_net(16);
    let mut rng = Rng::new(600);
    let workload = random_workload(&spec, 30, &mut rng);
    let kill_at = 300_000;
    let target = Addr::node(2, 7);
    let faults = vec![FaultEvent {
        at_us: kill_at,
        target,
    }];
    let result = run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), 8).unwrap();
    for event in result.trace.iter() {
        if let TraceKind::FrameSent { from, .. } = &event.kind {
            if *from == target {
                assert!(
                    event.time_us < kill_at,
                    "dead node sent a frame at {}us",
                    event.time_us
                );
            }
        }
    }
}

#[test]
fn every_delivered_frame_has_a_prior_send() {
    let (spec, params) = reference_net(17);
    let mut rng = Rng::new(700);
    let workload = random_workload(&spec, 5, &mut rng);
    let result = run_simulation(&spec, &params, &workload, &[], &SimConfig::default(), 9).unwrap();
    use std::collections::BTreeMap;
    let mut sends: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
    for event in result.trace.iter() {
        match &event.kind {
            TraceKind::FrameSent {
                from,
                msg,
                inference_id,
            } => {
                *sends
                    .entry((from.to_string(), msg.to_string(), *inference_id))
                    .or_default() += 1;
            }
            TraceKind::FrameDelivered {
                from,
                msg,
                inference_id,
                ..
            } => {
                let key = (from.to_string(), msg.to_string(), *inference_id);
                assert!(
                    sends.get(&key).copied().unwrap_or(0) > 0,
                    "delivery without a matching send: {key:?}"
                );
            }
            _ => {}
        }
    }
}

#[test]
fn killing_all_but_one_neuron_per_layer_still_answers_everything() {
    let (spec, params) = reference_net(18);
    let mut rng = Rng::new(800);
    let workload = random_workload(&spec, 5, &mut rng);
    // Kill neurons 1..10 of both hidden layers, keeping neuron 0 of each.
    let mut faults = Vec::new();
    for layer in [1u8, 2] {
        for neuron in 1..10u8 {
            faults.push(FaultEvent {
                at_us: 0,
                target: Addr::node(layer, neuron),
            });
        }
    }
    let result = run_simulation(&spec, &params, &workload, &faults, &SimConfig::default(), 10).unwrap();
    assert!(result.outcomes.iter().all(Option::is_some));
    let mask = FailureMask::from_pairs(
        faults
            .iter()
            .map(|f| match f.target {
                Addr::Node { layer, neuron } => (layer as usize, neuron as usize),
                _ => unreachable!(),
            }),
    );
    for (x, outcome) in workload.iter().zip(&result.outcomes) {
        let got = outcome.as_ref().unwrap().completed().expect("completed");
        let rec = forward(&spec, &params, x, &mask).unwrap();
        assert_eq!(got[0].to_bits(), rec.output()[0].to_bits());
    }
}

#[test]
fn unknown_fault_target_is_a_config_error_before_start() {
    let (spec, params) = reference_net(19);
    let faults = vec![FaultEvent {
        at_us: 0,
        target: Addr::node(9, 9),
    }];
    let err = run_simulation(&spec, &params, &[vec![0.0; 10]], &faults, &SimConfig::default(), 1)
        .unwrap_err();
    assert!(err.to_string().contains("unknown node"));
}

#[test]
fn trace_timestamps_are_non_decreasing() {
    let (spec, params) = reference_net(20);
    let mut rng = Rng::new(900);
    let workload = random_workload(&spec, 10, &mut rng);
    let result = run_simulation(&spec, &params, &workload, &[], &SimConfig::default(), 2).unwrap();
    let mut prev = 0;
    for event in result.trace.iter() {
        assert!(event.time_us >= prev);
        prev = event.time_us;
    }
}
