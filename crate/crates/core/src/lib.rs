//! Electrical soliton simulator for segmented active-membrane neural paths.
//!
//! A neural path (axon or dendrite) is modelled as a series of lumped
//! segments. Each segment carries an axial resistance, a membrane
//! capacitance, a leakage conductance to the rest potential, and two
//! switched current sources (sodium inward, potassium outward) driven by a
//! small hysteresis state machine. Chains of such segments carry
//! non-dispersing pulses that reflect off capacitive loads, annihilate on
//! collision, and combine at junctions into Boolean logic.
//!
//! Modules:
//!
//! - [`membrane`]: electrical constants, geometry to element derivation, gate state machine.
//! - [`network`]: chain / junction / AND-gate / taper topologies and stimuli.
//! - [`engine`]: fixed-step implicit nodal transient solver.
//! - [`analysis`]: pulse detection, dispersion, logic classification, truth tables.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod membrane;
pub mod network;

pub use analysis::{
    detect_pulses, dispersion_metric, logic_output, truth_table, PulseEvent, TruthRow, TruthTable,
    TruthTableRequest, DEFAULT_THRESHOLD_MV,
};
pub use engine::{
    refine_check, simulate, ConvergenceReport, Integrator, PhaseTransition, SimConfig, Waveform,
};
pub use error::{Error, Result};
pub use membrane::{
    derive_elements, source_current, step_gate, GatePhase, MembraneParams, SegmentElements,
    SegmentSpec,
};
pub use network::{
    build_and_gate, build_chain, build_junction, build_taper, NodeId, Segment, Stimulus, Topology,
};
