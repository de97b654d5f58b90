//! Scenario files: a TOML document naming a topology builder, stimuli,
//! probes and analysis requests. Every numeric field is SI except the
//! `[segment]` (cm) and `[membrane]` (mV, mA/cm², µF/cm², S/cm², Ω·cm)
//! tables, which keep the units of the membrane constants.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use soliton_core::{
    build_and_gate, build_chain, build_junction, build_taper, MembraneParams, NodeId,
    SegmentSpec, SimConfig, Stimulus, Topology, TruthTableRequest, DEFAULT_THRESHOLD_MV,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Chain {
        segments: usize,
        /// Extra capacitance on the last segment, F.
        #[serde(default)]
        terminal_load: f64,
    },
    Junction {
        #[serde(default = "five")]
        branch_len: usize,
        #[serde(default = "five")]
        trunk_len: usize,
        #[serde(default = "one")]
        junction_c_scale: f64,
    },
    AndGate {},
    Taper {
        segments: usize,
        /// cm
        d_start: f64,
        /// cm
        d_end: f64,
    },
}

fn five() -> usize {
    5
}

fn one() -> f64 {
    1.0
}

fn ten_na() -> f64 {
    10e-9
}

fn standard_duration() -> f64 {
    0.2e-3
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_MV
}

fn default_inputs() -> Vec<String> {
    vec!["A".into(), "B".into()]
}

fn default_output() -> String {
    "Z".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub node: String,
    /// A
    #[serde(default = "ten_na")]
    pub amplitude: f64,
    /// s
    #[serde(default)]
    pub t_start: f64,
    /// s
    #[serde(default = "standard_duration")]
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    pub early: String,
    pub late: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTableSpec {
    #[serde(default = "default_inputs")]
    pub inputs: Vec<String>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "ten_na")]
    pub amplitude: f64,
    #[serde(default = "standard_duration")]
    pub duration: f64,
    #[serde(default)]
    pub t_start: f64,
    /// Delay of each later input relative to the previous one, s.
    #[serde(default)]
    pub skew: f64,
}

impl Default for TruthTableSpec {
    fn default() -> Self {
        Self {
            inputs: default_inputs(),
            output: default_output(),
            amplitude: ten_na(),
            duration: standard_duration(),
            t_start: 0.0,
            skew: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Pulse detection threshold, mV.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub dispersion: Option<DispersionSpec>,
    /// Nodes checked for a reflected (second) pulse.
    #[serde(default)]
    pub reflection: Vec<String>,
    #[serde(default)]
    pub truth_table: Option<TruthTableSpec>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD_MV,
            dispersion: None,
            reflection: Vec::new(),
            truth_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub segment: SegmentSpec,
    #[serde(default)]
    pub membrane: MembraneParams,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, rename = "stimulus")]
    pub stimuli: Vec<StimulusSpec>,
    /// Labels written to the CSV; empty means every node.
    #[serde(default)]
    pub probes: Vec<String>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

/// A scenario with its topology built and every label resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub topology: Topology,
    pub stimuli: Vec<Stimulus>,
    pub probes: Vec<(String, NodeId)>,
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| CliError::Schema(format!("{origin}: {e}")))?;
        s.check_name()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn check_name(&self) -> CliResult<()> {
        let ok = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if ok {
            Ok(())
        } else {
            Err(CliError::Schema(format!(
                "name: {:?} must be non-empty and use only letters, digits, '_', '-' or '.'",
                self.name
            )))
        }
    }

    pub fn build_topology(&self) -> CliResult<Topology> {
        let spec = self.segment;
        let topo = match self.topology {
            TopologySpec::Chain {
                segments,
                terminal_load,
            } => build_chain(segments, spec, terminal_load),
            TopologySpec::Junction {
                branch_len,
                trunk_len,
                junction_c_scale,
            } => build_junction(branch_len, trunk_len, spec, junction_c_scale),
            TopologySpec::AndGate {} => build_and_gate(spec),
            TopologySpec::Taper {
                segments,
                d_start,
                d_end,
            } => build_taper(segments, d_start, d_end, spec),
        };
        topo.map_err(|e| CliError::Schema(format!("topology: {e}")))
    }

    /// Builds the topology and resolves every label the scenario mentions.
    pub fn resolve(&self) -> CliResult<Resolved> {
        self.check_name()?;
        self.membrane
            .validate()
            .map_err(|e| CliError::Schema(format!("membrane: {e}")))?;
        self.sim
            .validate()
            .map_err(|e| CliError::Schema(format!("sim: {e}")))?;
        let topology = self.build_topology()?;
        let lookup = |field: &str, label: &str| {
            topology
                .node(label)
                .map_err(|_| CliError::Schema(format!("{field}: unknown node label {label:?}")))
        };

        let mut stimuli = Vec::with_capacity(self.stimuli.len());
        for (i, s) in self.stimuli.iter().enumerate() {
            let node = lookup(&format!("stimulus[{i}].node"), &s.node)?;
            let stim = Stimulus::new(node, s.amplitude, s.t_start, s.duration);
            stim.validate(&topology)
                .map_err(|e| CliError::Schema(format!("stimulus[{i}]: {e}")))?;
            stimuli.push(stim);
        }

        let probes = if self.probes.is_empty() {
            (0..topology.node_count())
                .map(|k| (topology.node_name(NodeId(k)), NodeId(k)))
                .collect()
        } else {
            self.probes
                .iter()
                .enumerate()
                .map(|(i, l)| Ok((l.clone(), lookup(&format!("probes[{i}]"), l)?)))
                .collect::<CliResult<Vec<_>>>()?
        };

        let a = &self.analysis;
        if !(a.threshold.is_finite() && a.threshold > self.membrane.v_rest) {
            return Err(CliError::Schema(format!(
                "analysis.threshold: {} mV must lie above v_rest",
                a.threshold
            )));
        }
        if let Some(d) = &a.dispersion {
            lookup("analysis.dispersion.early", &d.early)?;
            lookup("analysis.dispersion.late", &d.late)?;
        }
        for (i, l) in a.reflection.iter().enumerate() {
            lookup(&format!("analysis.reflection[{i}]"), l)?;
        }
        if let Some(t) = &a.truth_table {
            if t.inputs.is_empty() || t.inputs.len() > 2 {
                return Err(CliError::Schema(
                    "analysis.truth_table.inputs: expected one or two input labels".into(),
                ));
            }
            for (i, l) in t.inputs.iter().enumerate() {
                lookup(&format!("analysis.truth_table.inputs[{i}]"), l)?;
            }
            lookup("analysis.truth_table.output", &t.output)?;
        }

        Ok(Resolved {
            scenario: self.clone(),
            topology,
            stimuli,
            probes,
        })
    }

    /// SHA-256 of the canonical JSON form, defaults included.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn truth_table_request(&self) -> Option<TruthTableRequest> {
        self.analysis.truth_table.as_ref().map(|t| TruthTableRequest {
            inputs: t.inputs.clone(),
            output: t.output.clone(),
            amplitude: t.amplitude,
            duration: t.duration,
            t_start: t.t_start,
            skew: t.skew,
            threshold: self.analysis.threshold,
        })
    }
}
