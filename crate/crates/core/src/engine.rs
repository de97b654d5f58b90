//! Fixed-step transient nodal solver for the switched RC network.
//!
//! Unknowns are node voltages measured from the rest potential, so the
//! quiescent network is exactly the zero vector. Each step:
//!
//! 1. solve the implicit update with all source states frozen,
//! 2. advance every segment's gate with (previous, new) node voltage,
//! 3. rebuild the source currents for the next step.
//!
//! The nodal matrix depends only on the topology, `dt` and the integrator,
//! so it is factored once per run. Nodes without membrane (open resistor
//! ends) carry no capacitance and are solved as algebraic constraints.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Factorization};
use crate::membrane::{
    derive_elements, source_current, step_gate, GatePhase, MembraneParams, SegmentElements,
};
use crate::network::{NodeId, Stimulus, Topology};

/// Node voltages beyond this magnitude (volts) count as a blown-up solve.
const BLOWUP_VOLTS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    BackwardEuler,
    #[default]
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Time step, s.
    pub dt: f64,
    /// End time, s.
    pub t_end: f64,
    /// Record every n-th step.
    pub record_stride: usize,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_end: 20e-3,
            record_stride: 10,
            integrator: Integrator::Trapezoidal,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end must exceed dt, got {} <= {}",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn step_index(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// One gate transition, stamped with the step at which it was detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTransition {
    pub step: usize,
    pub time: f64,
    /// Figure number of the segment.
    pub segment: usize,
    pub from: GatePhase,
    pub to: GatePhase,
}

/// Sampled node voltages (mV) and gate phases over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    times: Vec<f64>,
    voltages: Vec<Vec<f64>>,
    phases: Vec<Vec<u8>>,
    segment_numbers: Vec<usize>,
    labels: BTreeMap<String, NodeId>,
    transitions: Vec<PhaseTransition>,
    v_rest: f64,
    dt: f64,
}

impl Waveform {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.voltages.len()
    }

    /// Rest potential of the run, mV.
    pub fn v_rest(&self) -> f64 {
        self.v_rest
    }

    /// Integration step of the run, s.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn labels(&self) -> &BTreeMap<String, NodeId> {
        &self.labels
    }

    pub fn node(&self, label: &str) -> Result<NodeId> {
        self.labels
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Voltage series of a node, mV.
    pub fn voltage(&self, node: NodeId) -> Result<&[f64]> {
        self.voltages
            .get(node.0)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownNode(node.0))
    }

    pub fn voltage_of(&self, label: &str) -> Result<&[f64]> {
        self.voltage(self.node(label)?)
    }

    pub fn segment_numbers(&self) -> &[usize] {
        &self.segment_numbers
    }

    /// Phase series of a segment (by figure number).
    pub fn phases(&self, segment: usize) -> Option<impl Iterator<Item = GatePhase> + '_> {
        let idx = self.segment_numbers.iter().position(|&n| n == segment)?;
        Some(
            self.phases[idx]
                .iter()
                .map(|&c| GatePhase::from_code(c).unwrap_or_default()),
        )
    }

    pub fn phase_codes(&self, segment: usize) -> Option<&[u8]> {
        let idx = self.segment_numbers.iter().position(|&n| n == segment)?;
        Some(&self.phases[idx])
    }

    /// Every gate transition at full step resolution, in time order.
    pub fn transitions(&self) -> &[PhaseTransition] {
        &self.transitions
    }

    pub fn transitions_of(&self, segment: usize) -> impl Iterator<Item = &PhaseTransition> + '_ {
        self.transitions.iter().filter(move |t| t.segment == segment)
    }
}

struct Assembled {
    elements: Vec<SegmentElements>,
    shunt_nodes: Vec<usize>,
    capacitance: Vec<f64>,
    leak: Vec<f64>,
    axial: Vec<(usize, usize, f64)>,
}

fn assemble(topology: &Topology, params: &MembraneParams) -> Result<Assembled> {
    topology.validate()?;
    params.validate()?;
    let n = topology.node_count();
    let mut membrane_c = vec![0.0; n];
    let mut leak = vec![0.0; n];
    let mut elements = Vec::with_capacity(topology.segments().len());
    let mut shunt_nodes = Vec::with_capacity(topology.segments().len());
    let mut axial = Vec::with_capacity(topology.segments().len());
    for seg in topology.segments() {
        let el = derive_elements(&seg.spec, params)?;
        let k = seg.shunt_node().0;
        membrane_c[k] += el.c_shunt;
        leak[k] += el.g_loss();
        axial.push((seg.from.0, seg.to.0, el.g_axial()));
        shunt_nodes.push(k);
        elements.push(el);
    }
    let capacitance = topology
        .nodes()
        .iter()
        .zip(&membrane_c)
        .map(|(node, c)| node.c_scale * c + node.extra_c)
        .collect();
    Ok(Assembled {
        elements,
        shunt_nodes,
        capacitance,
        leak,
        axial,
    })
}

/// Total shunt capacitance per node (F) as seen by the solver.
pub fn node_capacitance(topology: &Topology, params: &MembraneParams) -> Result<Vec<f64>> {
    Ok(assemble(topology, params)?.capacitance)
}

/// Runs a transient simulation from the all-rest initial state.
pub fn simulate(
    topology: &Topology,
    params: &MembraneParams,
    stimuli: &[Stimulus],
    config: &SimConfig,
) -> Result<Waveform> {
    config.validate()?;
    for s in stimuli {
        s.validate(topology)?;
    }
    let asm = assemble(topology, params)?;
    let n = topology.node_count();
    let dt = config.dt;

    // Row i: (alpha C_i / dt + G) u_{n+1} = (alpha C_i / dt) u_n - beta (G u_n)_i + (1 + beta) I_i
    // Trapezoidal is scaled by two (alpha = 2, beta = 1); backward Euler has alpha = 1, beta = 0.
    // Rows without capacitance are pure constraints G u_{n+1} = I.
    let (alpha, beta) = match config.integrator {
        Integrator::Trapezoidal => (2.0, 1.0),
        Integrator::BackwardEuler => (1.0, 0.0),
    };
    let diff_row: Vec<bool> = asm.capacitance.iter().map(|&c| c > 0.0).collect();
    let row_beta: Vec<f64> = diff_row.iter().map(|&d| if d { beta } else { 0.0 }).collect();
    let cap_term: Vec<f64> = asm.capacitance.iter().map(|c| alpha * c / dt).collect();

    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        m.add(i, i, cap_term[i] + asm.leak[i]);
    }
    for &(a, b, g) in &asm.axial {
        m.add(a, a, g);
        m.add(b, b, g);
        m.add(a, b, -g);
        m.add(b, a, -g);
    }
    let lu = Factorization::new(&m)?;

    let stim_windows: Vec<(usize, usize, usize, f64)> = stimuli
        .iter()
        .map(|s| {
            let start = config.step_index(s.t_start);
            let end = config.step_index(s.t_start + s.duration).max(start + 1);
            (s.node.0, start, end, s.amplitude)
        })
        .collect();

    let n_steps = config.steps();
    let stride = config.record_stride;
    let n_samples = n_steps / stride + 1;
    let n_seg = asm.elements.len();
    let to_mv = |u: f64| params.v_rest + u * 1e3;

    let mut times = Vec::with_capacity(n_samples);
    let mut voltages = vec![Vec::with_capacity(n_samples); n];
    let mut phase_series = vec![Vec::with_capacity(n_samples); n_seg];
    let mut transitions = Vec::new();

    let mut u = vec![0.0; n];
    let mut gates = vec![GatePhase::Rest; n_seg];
    let mut current = vec![0.0; n];
    let mut g_u = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    let record = |times: &mut Vec<f64>,
                  voltages: &mut [Vec<f64>],
                  phase_series: &mut [Vec<u8>],
                  step: usize,
                  u: &[f64],
                  gates: &[GatePhase]| {
        times.push(step as f64 * dt);
        for (series, &ui) in voltages.iter_mut().zip(u) {
            series.push(to_mv(ui));
        }
        for (series, g) in phase_series.iter_mut().zip(gates) {
            series.push(g.code());
        }
    };
    record(&mut times, &mut voltages, &mut phase_series, 0, &u, &gates);

    for step in 0..n_steps {
        current.iter_mut().for_each(|c| *c = 0.0);
        for ((gate, el), &k) in gates.iter().zip(&asm.elements).zip(&asm.shunt_nodes) {
            current[k] += source_current(*gate, el);
        }
        for &(k, start, end, amp) in &stim_windows {
            if (start..end).contains(&step) {
                current[k] += amp;
            }
        }

        for i in 0..n {
            g_u[i] = asm.leak[i] * u[i];
        }
        for &(a, b, g) in &asm.axial {
            let flow = g * (u[a] - u[b]);
            g_u[a] += flow;
            g_u[b] -= flow;
        }
        for i in 0..n {
            rhs[i] = cap_term[i] * u[i] - row_beta[i] * g_u[i] + (1.0 + row_beta[i]) * current[i];
        }
        lu.solve_in_place(&mut rhs);

        if let Some(node) = rhs.iter().position(|v| !v.is_finite() || v.abs() > BLOWUP_VOLTS) {
            return Err(Error::Instability {
                step: step + 1,
                node,
            });
        }

        for (s, gate) in gates.iter_mut().enumerate() {
            let k = asm.shunt_nodes[s];
            let next = step_gate(*gate, to_mv(u[k]), to_mv(rhs[k]), params);
            if next != *gate {
                transitions.push(PhaseTransition {
                    step: step + 1,
                    time: (step + 1) as f64 * dt,
                    segment: topology.segments()[s].number,
                    from: *gate,
                    to: next,
                });
                *gate = next;
            }
        }
        std::mem::swap(&mut u, &mut rhs);

        if (step + 1) % stride == 0 {
            record(&mut times, &mut voltages, &mut phase_series, step + 1, &u, &gates);
        }
    }

    Ok(Waveform {
        times,
        voltages,
        phases: phase_series,
        segment_numbers: topology.segments().iter().map(|s| s.number).collect(),
        labels: topology.labels().clone(),
        transitions,
        v_rest: params.v_rest,
        dt,
    })
}

/// Result of comparing a run against the same run at half the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    /// Largest |v_coarse - v_fine| over shared sample times and all nodes, mV.
    pub max_discrepancy_mv: f64,
    pub worst_node: usize,
    pub worst_time: f64,
    /// Whether both runs fire the gates in the same (segment, phase) order.
    pub event_order_matches: bool,
    pub coarse_events: usize,
    pub fine_events: usize,
}

impl ConvergenceReport {
    pub fn converged(&self, tolerance_mv: f64) -> bool {
        self.event_order_matches && self.max_discrepancy_mv < tolerance_mv
    }
}

/// Runs at `dt` and `dt / 2` and reports the largest voltage discrepancy.
pub fn refine_check(
    topology: &Topology,
    params: &MembraneParams,
    stimuli: &[Stimulus],
    config: &SimConfig,
) -> Result<ConvergenceReport> {
    let fine_config = SimConfig {
        dt: config.dt / 2.0,
        record_stride: config.record_stride * 2,
        ..*config
    };
    let coarse = simulate(topology, params, stimuli, config)?;
    let fine = simulate(topology, params, stimuli, &fine_config)?;

    let mut worst = (0.0f64, 0usize, 0.0f64);
    let samples = coarse.len().min(fine.len());
    for node in 0..coarse.node_count() {
        let a = &coarse.voltages[node];
        let b = &fine.voltages[node];
        for i in 0..samples {
            let d = (a[i] - b[i]).abs();
            if d > worst.0 {
                worst = (d, node, coarse.times[i]);
            }
        }
    }
    let order = |w: &Waveform| -> Vec<(usize, GatePhase)> {
        w.transitions.iter().map(|t| (t.segment, t.to)).collect()
    };
    Ok(ConvergenceReport {
        dt_coarse: config.dt,
        dt_fine: fine_config.dt,
        max_discrepancy_mv: worst.0,
        worst_node: worst.1,
        worst_time: worst.2,
        event_order_matches: order(&coarse) == order(&fine),
        coarse_events: coarse.transitions.len(),
        fine_events: fine.transitions.len(),
    })
}
