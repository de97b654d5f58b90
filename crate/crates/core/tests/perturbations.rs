//! Deliberate parameter changes that must break the nominal behaviour.

use soliton_core::analysis::{detect_pulses_at, DEFAULT_THRESHOLD_MV};
use soliton_core::*;

#[test]
fn raised_trigger_stops_chain_propagation() {
    let p = MembraneParams {
        v_trigger: -30.0,
        ..Default::default()
    };
    let topo = build_chain(10, SegmentSpec::default(), 0.0).unwrap();
    let cfg = SimConfig {
        t_end: 40e-3,
        ..Default::default()
    };
    let w = simulate(&topo, &p, &[Stimulus::standard(&topo, "A").unwrap()], &cfg).unwrap();
    // The driven segment still fires; nothing reaches the far end.
    assert_eq!(detect_pulses_at(&w, "A", DEFAULT_THRESHOLD_MV).unwrap().len(), 1);
    for k in 2..=11 {
        let label = format!("v({k})");
        assert!(detect_pulses_at(&w, &label, DEFAULT_THRESHOLD_MV).unwrap().is_empty(), "{label}");
    }
}

#[test]
fn balanced_sources_never_reach_na_cutoff() {
    let base = MembraneParams::default();
    let p = MembraneParams {
        j_k: base.j_na,
        ..base
    };
    let topo = build_chain(1, SegmentSpec::default(), 0.0).unwrap();
    let cfg = SimConfig {
        t_end: 20e-3,
        ..Default::default()
    };
    let w = simulate(&topo, &p, &[Stimulus::standard(&topo, "A").unwrap()], &cfg).unwrap();
    let peak = w.voltage_of("A").unwrap().iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak < p.v_na_cutoff, "{peak}");
    assert!(w.transitions().iter().any(|t| t.to == GatePhase::Firing));
    assert!(!w.transitions().iter().any(|t| t.to == GatePhase::Falling));
}

#[test]
fn overdriven_input_exceeds_switching_band() {
    // The voltage band holds for switched sources only; a strong external
    // stimulus can push the driven node past it.
    let p = MembraneParams::default();
    let topo = build_chain(10, SegmentSpec::default(), 0.0).unwrap();
    let cfg = SimConfig {
        t_end: 5e-3,
        ..Default::default()
    };
    let w = simulate(&topo, &p, &[Stimulus::at(&topo, "A", 40e-9, 0.0, 0.2e-3).unwrap()], &cfg).unwrap();
    let peak = w.voltage_of("A").unwrap().iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak > p.v_na_cutoff + 10.0);
}
