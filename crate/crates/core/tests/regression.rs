//! Values measured on this model and pinned.

use soliton_core::analysis::{detect_pulses_at, DEFAULT_THRESHOLD_MV};
use soliton_core::*;

fn cfg(t_end: f64) -> SimConfig {
    SimConfig {
        t_end,
        ..Default::default()
    }
}

fn fwhm_ms(w: &Waveform, label: &str) -> f64 {
    let p = detect_pulses_at(w, label, DEFAULT_THRESHOLD_MV).unwrap();
    assert_eq!(p.len(), 1, "{label}");
    p[0].fwhm * 1e3
}

#[test]
fn chain_pulse_width_alternates_with_period_two() {
    let p = MembraneParams::default();
    let topo = build_chain(20, SegmentSpec::default(), 0.0).unwrap();
    let w = simulate(&topo, &p, &[Stimulus::standard(&topo, "A").unwrap()], &cfg(50e-3)).unwrap();
    // Away from both ends, same-parity nodes carry the same width.
    for k in (5..=15).step_by(2) {
        let a = fwhm_ms(&w, &format!("v({k})"));
        let b = fwhm_ms(&w, &format!("v({})", k + 2));
        assert!((a - b).abs() / a < 0.02, "v({k}) {a} vs {b}");
        assert!((a - 2.63).abs() < 0.05, "v({k}) {a}");
        let even = fwhm_ms(&w, &format!("v({})", k + 1));
        assert!((even - 3.32).abs() < 0.05, "v({}) {even}", k + 1);
    }
    // The open-ended last segment is narrower still.
    assert!((fwhm_ms(&w, "v(20)") - 2.05).abs() < 0.05);
}

#[test]
fn and_gate_truth_table_depends_on_input_amplitude() {
    let p = MembraneParams::default();
    let topo = build_and_gate(SegmentSpec::default()).unwrap();
    let table = |amp_na: f64| {
        let req = TruthTableRequest {
            amplitude: amp_na * 1e-9,
            ..Default::default()
        };
        truth_table(&topo, &req, &p, &cfg(40e-3)).unwrap().outputs()
    };
    // Single inputs never get through the inhibited head.
    assert_eq!(table(10.0), [false, false, false, false]);
    assert_eq!(table(40.0), [false, false, false, false]);
    assert_eq!(table(45.0), [false, false, false, true]);
    assert_eq!(table(100.0), [false, false, false, true]);
    assert_eq!(table(215.0), [false, false, false, true]);
    assert_eq!(table(220.0), [false, false, false, false]);
}

#[test]
fn and_gate_coincidence_falls_just_short_of_trigger() {
    let p = MembraneParams::default();
    let topo = build_and_gate(SegmentSpec::default()).unwrap();
    let s = [Stimulus::standard(&topo, "A").unwrap(), Stimulus::standard(&topo, "B").unwrap()];
    let w = simulate(&topo, &p, &s, &cfg(40e-3)).unwrap();
    let peak = w.voltage_of("v(7)").unwrap().iter().cloned().fold(f64::MIN, f64::max);
    assert!((peak - -55.52).abs() < 0.02, "{peak}");
}

#[test]
fn xor_window_of_junction_capacitance() {
    let p = MembraneParams::default();
    let req = TruthTableRequest::default();
    let ab = |scale: f64| {
        let topo = build_junction(5, 5, SegmentSpec::default(), scale).unwrap();
        let t = truth_table(&topo, &req, &p, &cfg(40e-3)).unwrap();
        (t.output(&["A"]).unwrap(), t.output(&["A", "B"]).unwrap())
    };
    assert_eq!(ab(0.3), (true, false));
    assert_eq!(ab(0.5), (true, false));
    assert_eq!(ab(0.57), (true, true));
    assert_eq!(ab(0.67), (true, true));
    assert_eq!(ab(1.0), (true, true));
}
