use proptest::prelude::*;
use soliton_core::analysis::{detect_pulses_at, DEFAULT_THRESHOLD_MV};
use soliton_core::engine::node_capacitance;
use soliton_core::*;

fn params() -> MembraneParams {
    MembraneParams::default()
}

fn cfg(t_end: f64) -> SimConfig {
    SimConfig {
        t_end,
        ..Default::default()
    }
}

fn topology(kind: usize) -> Topology {
    let spec = SegmentSpec::default();
    match kind {
        0 => build_chain(10, spec, 0.0),
        1 => build_chain(10, spec, 60e-12),
        2 => build_junction(5, 5, spec, 1.0),
        3 => build_junction(5, 5, spec, 0.67),
        4 => build_and_gate(spec),
        _ => build_taper(10, 1e-4, 0.5e-4, spec),
    }
    .unwrap()
}

fn inputs(kind: usize) -> &'static [&'static str] {
    if (2..=4).contains(&kind) {
        &["A", "B"]
    } else {
        &["A"]
    }
}

fn pulse_count(w: &Waveform, label: &str) -> usize {
    detect_pulses_at(w, label, DEFAULT_THRESHOLD_MV).unwrap().len()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    // Membrane nodes stay between K cutoff and Na cutoff with a one-step
    // overshoot margin. Open ends carry no capacitance and are excluded.
    #[test]
    fn membrane_voltages_stay_in_switching_band(
        kind in 0usize..6,
        amp_na in 3.0f64..14.0,
        t0 in 0.0f64..2e-3,
        both in any::<bool>(),
    ) {
        let p = params();
        let topo = topology(kind);
        let labels = inputs(kind);
        let used = if both { labels.len() } else { 1 };
        let stimuli: Vec<_> = labels[..used]
            .iter()
            .map(|l| Stimulus::at(&topo, l, amp_na * 1e-9, t0, 0.2e-3).unwrap())
            .collect();
        let w = simulate(&topo, &p, &stimuli, &cfg(30e-3)).unwrap();
        let caps = node_capacitance(&topo, &p).unwrap();
        for (node, c) in caps.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for &v in w.voltage(NodeId(node)).unwrap() {
                prop_assert!(v >= p.v_k_cutoff - 10.0 && v <= p.v_na_cutoff + 10.0,
                    "node {} reached {} mV", topo.node_name(NodeId(node)), v);
            }
        }
    }

    // With every source removed, stored energy relative to rest never grows
    // once the stimuli have ended.
    #[test]
    fn passive_network_dissipates(
        n in 2usize..9,
        stims in proptest::collection::vec((0usize..9, -5.0f64..5.0, 0.0f64..2e-3, 0.05e-3f64..1e-3), 1..4),
        load_pf in 0.0f64..100.0,
        backward in any::<bool>(),
    ) {
        let p = params();
        let topo = build_chain(n, SegmentSpec::default().passive(), load_pf * 1e-12).unwrap();
        let stimuli: Vec<_> = stims
            .iter()
            .map(|&(k, a, t0, d)| Stimulus::new(NodeId(k % (n + 1)), a * 1e-9, t0, d))
            .collect();
        let t_quiet = stimuli.iter().map(|s| s.t_start + s.duration).fold(0.0, f64::max);
        let config = SimConfig {
            t_end: 10e-3,
            record_stride: 5,
            integrator: if backward { Integrator::BackwardEuler } else { Integrator::Trapezoidal },
            ..Default::default()
        };
        let w = simulate(&topo, &p, &stimuli, &config).unwrap();
        let caps = node_capacitance(&topo, &p).unwrap();
        let energy = |i: usize| -> f64 {
            caps.iter()
                .enumerate()
                .map(|(k, c)| {
                    let u = (w.voltage(NodeId(k)).unwrap()[i] - p.v_rest) * 1e-3;
                    0.5 * c * u * u
                })
                .sum()
        };
        let mut prev = f64::INFINITY;
        for (i, &t) in w.times().iter().enumerate() {
            // One sample of slack for the step-gridded stimulus edge.
            if t < t_quiet + 2.0 * config.dt * config.record_stride as f64 {
                continue;
            }
            let e = energy(i);
            prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-30, "energy rose at t={}: {} > {}", t, e, prev);
            prev = e;
        }
    }

    // Translating the stimulus in time translates the whole response.
    #[test]
    fn response_is_time_translation_invariant(kind in 0usize..6, shift_samples in 1usize..200) {
        let p = params();
        let topo = topology(kind);
        let config = cfg(30e-3);
        let shift = shift_samples as f64 * config.dt * config.record_stride as f64;
        let at = |t0: f64| -> Vec<Stimulus> {
            inputs(kind).iter().map(|l| Stimulus::at(&topo, l, 10e-9, t0, 0.2e-3).unwrap()).collect()
        };
        let base = simulate(&topo, &p, &at(0.0), &config).unwrap();
        let late = simulate(&topo, &p, &at(shift), &SimConfig { t_end: config.t_end + shift, ..config }).unwrap();
        for label in topo.labels().keys() {
            let a = detect_pulses_at(&base, label, DEFAULT_THRESHOLD_MV).unwrap();
            let b = detect_pulses_at(&late, label, DEFAULT_THRESHOLD_MV).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y.t_peak - x.t_peak - shift).abs() < 1e-12);
            }
            let va = base.voltage_of(label).unwrap();
            let vb = late.voltage_of(label).unwrap();
            prop_assert!(vb[..shift_samples].iter().all(|&v| v == p.v_rest));
            prop_assert_eq!(&vb[shift_samples..], va);
        }
    }
}

#[test]
fn gates_leave_rest_only_on_an_upward_trigger_crossing() {
    let p = params();
    for kind in [0, 2, 4] {
        let topo = topology(kind);
        let stimuli: Vec<_> = inputs(kind)
            .iter()
            .map(|l| Stimulus::standard(&topo, l).unwrap())
            .collect();
        let config = SimConfig {
            t_end: 30e-3,
            record_stride: 1,
            ..Default::default()
        };
        let w = simulate(&topo, &p, &stimuli, &config).unwrap();
        let mut fired = 0;
        for seg in topo.segments() {
            let v = w.voltage(seg.shunt_node()).unwrap();
            let codes = w.phase_codes(seg.number).unwrap();
            for s in 1..codes.len() {
                if codes[s - 1] == GatePhase::Rest.code() && codes[s] != GatePhase::Rest.code() {
                    assert!(v[s - 1] < p.v_trigger && v[s] >= p.v_trigger, "segment {} at sample {s}", seg.number);
                    fired += 1;
                }
            }
        }
        assert!(fired > 0);
        // Every logged transition agrees with the sampled phase series.
        for t in w.transitions() {
            let codes = w.phase_codes(t.segment).unwrap();
            assert_eq!(codes[t.step], t.to.code());
            assert_eq!(codes[t.step - 1], t.from.code());
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let p = params();
    for kind in 0..6 {
        let topo = topology(kind);
        let stimuli: Vec<_> = inputs(kind)
            .iter()
            .map(|l| Stimulus::standard(&topo, l).unwrap())
            .collect();
        let a = simulate(&topo, &p, &stimuli, &cfg(25e-3)).unwrap();
        let b = simulate(&topo, &p, &stimuli, &cfg(25e-3)).unwrap();
        assert_eq!(a, b);
    }
    let topo = topology(3);
    let req = TruthTableRequest::default();
    let a = truth_table(&topo, &req, &p, &cfg(30e-3)).unwrap();
    let b = truth_table(&topo, &req, &p, &cfg(30e-3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn swapping_gate_inputs_gives_the_same_output() {
    let p = params();
    let spec = SegmentSpec::default();
    for topo in [
        build_junction(5, 5, spec, 1.0).unwrap(),
        build_junction(5, 5, spec, 0.67).unwrap(),
        build_junction(5, 5, spec, 0.5).unwrap(),
        build_and_gate(spec).unwrap(),
    ] {
        let t = truth_table(&topo, &TruthTableRequest::default(), &p, &cfg(30e-3)).unwrap();
        let a = &t.rows[1];
        let b = &t.rows[2];
        assert_eq!(a.output, b.output);
        assert_eq!(a.pulses, b.pulses);
    }
}

/// Amplitudes for which the OR input segment fires exactly once.
fn single_firing_window(topo: &Topology, amps_na: &[f64]) -> Vec<(f64, bool)> {
    let p = params();
    let input = topo.node("A").unwrap();
    let seg = topo.segments().iter().find(|s| s.shunt_node() == input).unwrap().number;
    amps_na
        .iter()
        .filter_map(|&a| {
            let w = simulate(topo, &p, &[Stimulus::at(topo, "A", a * 1e-9, 0.0, 0.2e-3).unwrap()], &cfg(30e-3)).unwrap();
            let firings = w
                .transitions_of(seg)
                .filter(|t| t.from == GatePhase::Rest && t.to == GatePhase::Firing)
                .count();
            (firings == 1).then(|| (a, pulse_count(&w, "Z") > 0))
        })
        .collect()
}

#[test]
fn or_output_is_monotone_in_stimulus_amplitude() {
    let topo = topology(2);
    let amps: Vec<f64> = (1..=40).map(f64::from).collect();
    let rows = single_firing_window(&topo, &amps);
    let first_true = rows.iter().position(|r| r.1).expect("some amplitude propagates");
    let broken: Vec<f64> = rows[first_true..].iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(
        broken.is_empty(),
        "OR output true at {} nA but false at larger amplitudes {broken:?} nA",
        rows[first_true].0
    );
}

#[test]
fn head_on_pulses_annihilate_in_a_chain() {
    let p = params();
    let topo = topology(0);
    let stimuli = [Stimulus::standard(&topo, "A").unwrap(), Stimulus::standard(&topo, "Z").unwrap()];
    let w = simulate(&topo, &p, &stimuli, &cfg(40e-3)).unwrap();
    let onset = |l: &str| detect_pulses_at(&w, l, DEFAULT_THRESHOLD_MV).unwrap()[0].t_onset;
    let t_collision = onset("v(5)").max(onset("v(6)"));
    for label in topo.labels().keys() {
        let pulses = detect_pulses_at(&w, label, DEFAULT_THRESHOLD_MV).unwrap();
        assert_eq!(pulses.len(), 1, "{label}");
        assert!(pulses[0].t_onset <= t_collision, "{label} fires after the collision");
    }
}

#[test]
fn head_on_pulses_annihilate_at_a_narrowed_junction() {
    let p = params();
    let topo = build_junction(5, 5, SegmentSpec::default(), 0.5).unwrap();
    let stimuli = [Stimulus::standard(&topo, "A").unwrap(), Stimulus::standard(&topo, "B").unwrap()];
    let w = simulate(&topo, &p, &stimuli, &cfg(40e-3)).unwrap();
    assert_eq!(pulse_count(&w, "Z"), 0);
    let a = w.node("v(2)").unwrap();
    let z = w.node("Z").unwrap();
    assert!(matches!(dispersion_metric(&w, a, z), Err(Error::NotApplicable(_))));
}
