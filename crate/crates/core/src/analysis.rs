//! Pulse features and experiment classification on recorded waveforms.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{simulate, SimConfig, Waveform};
use crate::error::{Error, Result};
use crate::membrane::MembraneParams;
use crate::network::{NodeId, Stimulus, Topology};

/// Detection threshold, mV. Sits between rest and Na cutoff with margin
/// for attenuated passive transmission.
pub const DEFAULT_THRESHOLD_MV: f64 = -20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseEvent {
    pub node: NodeId,
    /// First upward crossing of the detection threshold, s.
    pub t_onset: f64,
    pub t_peak: f64,
    /// mV
    pub v_peak: f64,
    /// Full width at (v_peak + v_rest) / 2, s.
    pub fwhm: f64,
    /// Steepest sample-to-sample rise on the leading edge, V/s.
    pub max_rise_rate: f64,
}

fn crossing_time(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        t1
    } else {
        t0 + (level - v0) * (t1 - t0) / (v1 - v0)
    }
}

/// Splits a node's trace into pulses: one per maximal run above `threshold`.
pub fn detect_pulses(waveform: &Waveform, node: NodeId, threshold: f64) -> Result<Vec<PulseEvent>> {
    if threshold <= waveform.v_rest() {
        return Err(Error::NotApplicable(format!(
            "detection threshold {threshold} mV must lie above rest {} mV",
            waveform.v_rest()
        )));
    }
    let v = waveform.voltage(node)?;
    let t = waveform.times();
    let n = v.len();
    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        if v[i] <= threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && v[i] > threshold {
            i += 1;
        }
        let end = i;

        let t_onset = if start == 0 {
            t[0]
        } else {
            crossing_time(t[start - 1], v[start - 1], t[start], v[start], threshold)
        };
        let peak = (start..end).fold(start, |best, j| if v[j] > v[best] { j } else { best });
        let v_peak = v[peak];
        let half = 0.5 * (v_peak + waveform.v_rest());

        let mut l = peak;
        while l > 0 && v[l] > half {
            l -= 1;
        }
        let left = if v[l] > half {
            t[l]
        } else {
            crossing_time(t[l], v[l], t[l + 1], v[l + 1], half)
        };
        let mut r = peak;
        while r + 1 < n && v[r] > half {
            r += 1;
        }
        let right = if v[r] > half {
            t[r]
        } else {
            crossing_time(t[r - 1], v[r - 1], t[r], v[r], half)
        };

        let mut rise_start = start;
        while rise_start > 0 && v[rise_start - 1] < v[rise_start] {
            rise_start -= 1;
        }
        let max_rise_rate = (rise_start..peak)
            .map(|j| (v[j + 1] - v[j]) / (t[j + 1] - t[j]) * 1e-3)
            .fold(0.0, f64::max);

        events.push(PulseEvent {
            node,
            t_onset,
            t_peak: t[peak],
            v_peak,
            fwhm: right - left,
            max_rise_rate,
        });
    }
    Ok(events)
}

pub fn detect_pulses_at(waveform: &Waveform, label: &str, threshold: f64) -> Result<Vec<PulseEvent>> {
    detect_pulses(waveform, waveform.node(label)?, threshold)
}

/// True iff the output node carries at least one pulse.
pub fn logic_output(waveform: &Waveform, output_node: NodeId) -> Result<bool> {
    logic_output_with(waveform, output_node, DEFAULT_THRESHOLD_MV)
}

pub fn logic_output_with(waveform: &Waveform, output_node: NodeId, threshold: f64) -> Result<bool> {
    Ok(!detect_pulses(waveform, output_node, threshold)?.is_empty())
}

/// An interior node that sees a second pulse after the incident one has
/// passed is carrying a reflection.
pub fn is_reflected(waveform: &Waveform, node: NodeId, threshold: f64) -> Result<bool> {
    Ok(detect_pulses(waveform, node, threshold)?.len() >= 2)
}

fn single_pulse(waveform: &Waveform, node: NodeId) -> Result<PulseEvent> {
    let pulses = detect_pulses(waveform, node, DEFAULT_THRESHOLD_MV)?;
    match pulses.as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::NotApplicable(format!(
            "expected exactly one pulse at node {}, found {}",
            node.0,
            pulses.len()
        ))),
    }
}

/// Relative change in pulse width between two nodes.
pub fn dispersion_metric(waveform: &Waveform, early_node: NodeId, late_node: NodeId) -> Result<f64> {
    let early = single_pulse(waveform, early_node)?;
    let late = single_pulse(waveform, late_node)?;
    Ok((late.fwhm - early.fwhm).abs() / early.fwhm)
}

/// Stimulus pattern applied to each selected gate input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthTableRequest {
    pub inputs: Vec<String>,
    pub output: String,
    /// A
    pub amplitude: f64,
    /// s
    pub duration: f64,
    /// s
    pub t_start: f64,
    /// Extra delay applied to the i-th input, times i, s.
    pub skew: f64,
    /// mV
    pub threshold: f64,
}

impl Default for TruthTableRequest {
    fn default() -> Self {
        Self {
            inputs: vec!["A".into(), "B".into()],
            output: "Z".into(),
            amplitude: 10e-9,
            duration: 0.2e-3,
            t_start: 0.0,
            skew: 0.0,
            threshold: DEFAULT_THRESHOLD_MV,
        }
    }
}

impl TruthTableRequest {
    /// Every subset of the inputs, ordered by bitmask (none, A, B, AB, ...).
    pub fn combinations(&self) -> Vec<Vec<String>> {
        let n = self.inputs.len();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| self.inputs[i].clone())
                    .collect()
            })
            .collect()
    }

    pub fn stimuli(&self, topology: &Topology, selected: &[String]) -> Result<Vec<Stimulus>> {
        selected
            .iter()
            .map(|label| {
                let idx = self.inputs.iter().position(|l| l == label).unwrap_or(0);
                Stimulus::at(
                    topology,
                    label,
                    self.amplitude,
                    self.t_start + idx as f64 * self.skew,
                    self.duration,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub inputs: Vec<String>,
    pub output: bool,
    /// Pulses seen at the output node.
    pub pulses: usize,
}

impl TruthRow {
    /// Row key such as `AB`, or `none` for the empty input set.
    pub fn key(&self) -> String {
        if self.inputs.is_empty() {
            "none".into()
        } else {
            self.inputs.concat()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthTable {
    pub rows: Vec<TruthRow>,
}

impl TruthTable {
    pub fn output(&self, inputs: &[&str]) -> Option<bool> {
        self.rows
            .iter()
            .find(|r| {
                r.inputs.len() == inputs.len() && inputs.iter().all(|i| r.inputs.iter().any(|x| x == i))
            })
            .map(|r| r.output)
    }

    /// Outputs in bitmask order.
    pub fn outputs(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.output).collect()
    }
}

/// Simulates every input combination (in parallel) and classifies the output.
pub fn truth_table(
    topology: &Topology,
    request: &TruthTableRequest,
    params: &MembraneParams,
    config: &SimConfig,
) -> Result<TruthTable> {
    let output = topology.node(&request.output)?;
    for label in &request.inputs {
        topology.node(label)?;
    }
    let rows = request
        .combinations()
        .into_par_iter()
        .map(|selected| {
            let stimuli = request.stimuli(topology, &selected)?;
            let w = simulate(topology, params, &stimuli, config)?;
            let pulses = detect_pulses(&w, output, request.threshold)?.len();
            Ok(TruthRow {
                inputs: selected,
                output: pulses > 0,
                pulses,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TruthTable { rows })
}
