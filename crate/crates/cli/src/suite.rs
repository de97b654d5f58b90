//! The bundled scenarios and the pass/fail criteria evaluated on them.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use soliton_core::membrane::derive_elements;
use soliton_core::network::AND_GATE_HEAD_LENGTH;
use soliton_core::{refine_check, GatePhase, MembraneParams, SegmentSpec};

use crate::error::{CliError, CliResult};
use crate::run::{execute, RunOutput};
use crate::scenario::{Scenario, TopologySpec};
use crate::sweep::{self, Metric, Param};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../scenarios/", $name, ".toml")))),*]
    };
}

/// Scenario files shipped with the binary, by name.
pub const BUNDLED: &[(&str, &str)] = bundled!(
    "fig1_patch",
    "fig7_chain",
    "fig8_reflection",
    "fig9_collision",
    "fig9_collision_junction",
    "fig11_12_or",
    "fig13_xor",
    "fig14_15_and",
    "fig16_taper",
    "fig16_taper_reverse",
    "quiet_chain",
);

/// Stimulus amplitudes (nA) tried on both taper directions.
pub const TAPER_AMPLITUDES_NA: &[f64] = &[2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0];

pub const CRITERIA: &[(u8, &str)] = &[
    (1, "element derivation"),
    (2, "isolated patch timing"),
    (3, "chain propagation"),
    (4, "reflection from a capacitive load"),
    (5, "head-on annihilation"),
    (6, "gate truth tables"),
    (7, "OR split into both branches"),
    (8, "taper asymmetry"),
    (9, "numerics"),
];

pub fn bundled(name: &str) -> CliResult<Scenario> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Schema(format!("no bundled scenario {name:?}")))?;
    Scenario::parse(text, name)
}

/// Overrides membrane constants by field name.
pub fn override_membrane(base: &MembraneParams, overrides: &[(String, f64)]) -> CliResult<MembraneParams> {
    let mut value = serde_json::to_value(base).expect("params serialize");
    for (key, v) in overrides {
        let slot = value
            .get_mut(key)
            .ok_or_else(|| CliError::Schema(format!("unknown membrane parameter {key:?}")))?;
        *slot = serde_json::json!(v);
    }
    let params: MembraneParams =
        serde_json::from_value(value).map_err(|e| CliError::Schema(e.to_string()))?;
    params
        .validate()
        .map_err(|e| CliError::Schema(format!("membrane: {e}")))?;
    Ok(params)
}

/// Input labels making up a truth-table row key, if the row exists.
pub fn row_labels(row: &str, inputs: &[String]) -> Option<Vec<String>> {
    if row == "none" {
        return Some(Vec::new());
    }
    (1usize..1 << inputs.len()).find_map(|mask| {
        let pick: Vec<String> = (0..inputs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| inputs[i].clone())
            .collect();
        (pick.concat() == row).then_some(pick)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.id, self.title, self.detail)
    }
}

/// Bundled scenarios (with overrides applied) and their runs.
pub struct SuiteContext {
    pub params: MembraneParams,
    pub scenarios: BTreeMap<String, Scenario>,
    pub runs: BTreeMap<String, Result<RunOutput, String>>,
}

impl SuiteContext {
    pub fn new(overrides: &[(String, f64)]) -> CliResult<Self> {
        let params = override_membrane(&MembraneParams::default(), overrides)?;
        let mut scenarios = BTreeMap::new();
        for (name, _) in BUNDLED {
            let mut s = bundled(name)?;
            s.membrane = override_membrane(&s.membrane, overrides)?;
            scenarios.insert(name.to_string(), s);
        }
        let runs = scenarios
            .par_iter()
            .map(|(name, s)| (name.clone(), execute(s).map_err(|e| e.to_string())))
            .collect();
        Ok(Self {
            params,
            scenarios,
            runs,
        })
    }

    fn scenario(&self, name: &str) -> CliResult<&Scenario> {
        self.scenarios
            .get(name)
            .ok_or_else(|| CliError::Failed(format!("scenario {name} missing")))
    }

    fn run(&self, name: &str) -> CliResult<&RunOutput> {
        match self.runs.get(name) {
            Some(Ok(r)) => Ok(r),
            Some(Err(e)) => Err(CliError::Failed(format!("{name}: {e}"))),
            None => Err(CliError::Failed(format!("scenario {name} missing"))),
        }
    }

    pub fn evaluate(&self, id: u8) -> CriterionResult {
        let title = CRITERIA
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, t)| *t)
            .unwrap_or("unknown criterion");
        let outcome = match id {
            1 => self.elements(),
            2 => self.patch(),
            3 => self.propagation(),
            4 => self.reflection(),
            5 => self.annihilation(),
            6 => self.truth_tables(),
            7 => self.or_split(),
            8 => self.taper(),
            9 => self.numerics(),
            _ => Err(CliError::Failed(format!("no criterion {id}"))),
        };
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
        CriterionResult {
            id,
            title,
            passed,
            detail,
        }
    }

    pub fn evaluate_all(&self) -> Vec<CriterionResult> {
        CRITERIA.par_iter().map(|(id, _)| self.evaluate(*id)).collect()
    }

    fn elements(&self) -> CliResult<(bool, String)> {
        let within = |got: f64, want: f64, tol: f64| ((got - want) / want).abs() <= tol;
        let base = derive_elements(&SegmentSpec::default(), &self.params)?;
        let head = derive_elements(
            &SegmentSpec::default().with_length(AND_GATE_HEAD_LENGTH),
            &self.params,
        )?;
        let checks = [
            ("C", base.c_shunt, 31.4e-12, 0.01),
            ("R", base.r_axial, 200e6, 0.01),
            ("R_loss", base.r_loss, 106e6, 0.01),
            ("C_and", head.c_shunt, 15.7e-12, 0.05),
            ("R_and", head.r_axial, 100e6, 0.05),
            ("R_loss_and", head.r_loss, 212e6, 0.05),
        ];
        let passed = checks.iter().all(|&(_, g, w, t)| within(g, w, t));
        let detail = format!(
            "C={:.2} pF R={:.1} MOhm R_loss={:.1} MOhm; AND head C={:.2} pF R={:.1} MOhm R_loss={:.1} MOhm",
            base.c_shunt * 1e12,
            base.r_axial * 1e-6,
            base.r_loss * 1e-6,
            head.c_shunt * 1e12,
            head.r_axial * 1e-6,
            head.r_loss * 1e-6
        );
        Ok((passed, detail))
    }

    fn patch(&self) -> CliResult<(bool, String)> {
        let run = self.run("fig1_patch")?;
        let tr = run.waveform.transitions();
        let first = |phase: GatePhase, after: f64| {
            tr.iter()
                .find(|t| t.segment == 1 && t.to == phase && t.time >= after)
                .map(|t| t.time)
        };
        let Some(t_trig) = first(GatePhase::Firing, 0.0) else {
            return Ok((false, "patch never triggered".into()));
        };
        let Some(t_na) = first(GatePhase::Falling, t_trig) else {
            return Ok((false, "Na never cut off (no +50 mV crossing)".into()));
        };
        let Some(t_k) = first(GatePhase::Rest, t_na) else {
            return Ok((false, "K never cut off".into()));
        };
        let na_ms = (t_na - t_trig) * 1e3;
        let k_ms = (t_k - t_trig) * 1e3;
        let v_end = *run.waveform.voltage_of("A")?.last().expect("samples");
        let passed = (1.2..=1.8).contains(&na_ms)
            && (3.0..=4.2).contains(&k_ms)
            && (v_end - -70.0).abs() <= 0.5;
        Ok((
            passed,
            format!("trigger->Na cutoff {na_ms:.3} ms, trigger->K cutoff {k_ms:.3} ms, final {v_end:.2} mV"),
        ))
    }

    fn propagation(&self) -> CliResult<(bool, String)> {
        let run = self.run("fig7_chain")?;
        let mut onsets = Vec::new();
        let mut counts = Vec::new();
        for p in &run.summary.probes {
            counts.push(format!("{}:{}", p.label, p.pulses.len()));
            if p.pulses.len() == 1 {
                onsets.push(p.pulses[0].t_onset);
            }
        }
        let one_each = onsets.len() == run.summary.probes.len();
        let increasing = one_each && onsets.windows(2).all(|w| w[1] > w[0]);
        let d = run
            .summary
            .dispersion
            .as_ref()
            .ok_or_else(|| CliError::Failed("fig7_chain has no dispersion request".into()))?;
        let dispersion_ok = d.value.is_some_and(|v| v < 0.2);
        let onsets_ms: Vec<String> = onsets.iter().map(|t| format!("{:.3}", t * 1e3)).collect();
        let disp = match (d.value, &d.error) {
            (Some(v), _) => format!("{v:.3}"),
            (None, Some(e)) => e.clone(),
            _ => "n/a".into(),
        };
        Ok((
            one_each && increasing && dispersion_ok,
            format!(
                "pulses [{}], onsets [{}] ms, dispersion({}, {}) = {} (< 0.2 required)",
                counts.join(" "),
                onsets_ms.join(", "),
                d.early,
                d.late,
                disp
            ),
        ))
    }

    fn reflection(&self) -> CliResult<(bool, String)> {
        let loaded = self.run("fig8_reflection")?;
        let r = loaded
            .summary
            .reflection
            .first()
            .ok_or_else(|| CliError::Failed("fig8_reflection has no reflection request".into()))?;
        let mut bare = self.scenario("fig8_reflection")?.clone();
        bare.name = "fig8_reflection_unloaded".into();
        if let TopologySpec::Chain { terminal_load, .. } = &mut bare.topology {
            *terminal_load = 0.0;
        }
        let bare_run = execute(&bare)?;
        let bare_pulses = bare_run.pulses(&r.node)?.len();
        Ok((
            r.pulses >= 2 && bare_pulses == 1,
            format!("{}: {} pulses with 60 pF, {} without", r.node, r.pulses, bare_pulses),
        ))
    }

    fn annihilation(&self) -> CliResult<(bool, String)> {
        let run = self.run("fig9_collision")?;
        let probes = &run.summary.probes;
        let bad: Vec<String> = probes
            .iter()
            .filter(|p| p.pulses.len() != 1)
            .map(|p| format!("{}:{}", p.label, p.pulses.len()))
            .collect();
        if !bad.is_empty() {
            return Ok((false, format!("nodes without exactly one pulse: {}", bad.join(" "))));
        }
        let onset: Vec<f64> = probes.iter().map(|p| p.pulses[0].t_onset).collect();
        let slope: Vec<f64> = probes.iter().map(|p| p.pulses[0].max_rise_rate).collect();
        let last = probes.len() - 1;
        // The pulses meet between the two adjacent nodes that fire last.
        let c = (0..=last).fold(0, |b, i| if onset[i] > onset[b] { i } else { b });
        let partner = match (c.checked_sub(1), (c < last).then_some(c + 1)) {
            (Some(l), Some(r)) => if onset[l] >= onset[r] { l } else { r },
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => c,
        };
        let (left, right) = (c.min(partner), c.max(partner));
        if left < 2 || right + 2 > last {
            return Ok((false, format!("pulses meet at {} next to an end", probes[c].label)));
        }
        let t_c = onset[c];
        let late: Vec<&str> = probes
            .iter()
            .filter(|p| p.pulses.iter().any(|e| e.t_onset > t_c))
            .map(|p| p.label.as_str())
            .collect();
        let sides = [(left, left - 2), (right, right + 2)];
        let steeper = sides.iter().all(|&(near, far)| slope[near] > slope[far]);
        let slopes: Vec<String> = sides
            .iter()
            .map(|&(near, far)| {
                format!(
                    "{} {:.1} vs {} {:.1} V/s",
                    probes[near].label, slope[near], probes[far].label, slope[far]
                )
            })
            .collect();

        let junction = match self.run("fig9_collision_junction") {
            Ok(j) => format!(
                "; junction reading: Z pulses {}",
                j.summary.probe("Z").map_or(0, |p| p.len())
            ),
            Err(e) => format!("; junction reading failed: {e}"),
        };
        Ok((
            late.is_empty() && steeper,
            format!(
                "one pulse per node, meet between {} and {} ({:.3} ms); rise slope {}{}",
                probes[left].label,
                probes[right].label,
                t_c * 1e3,
                slopes.join(", "),
                junction
            ),
        ))
    }

    fn truth_tables(&self) -> CliResult<(bool, String)> {
        let gates = [
            ("OR", "fig11_12_or", [false, true, true, true]),
            ("XOR", "fig13_xor", [false, true, true, false]),
            ("AND", "fig14_15_and", [false, false, false, true]),
        ];
        let mut passed = true;
        let mut parts = Vec::new();
        for (gate, name, want) in gates {
            let run = self.run(name)?;
            let table = run
                .summary
                .truth_table
                .as_ref()
                .ok_or_else(|| CliError::Failed(format!("{name} has no truth table")))?;
            let got = table.outputs();
            let rows: Vec<String> = table
                .rows
                .iter()
                .zip(want)
                .map(|(r, w)| {
                    let mark = if r.output == w { "" } else { "!" };
                    format!("{}{}:{}", mark, r.key(), u8::from(r.output))
                })
                .collect();
            passed &= got == want;
            parts.push(format!("{gate} {{{}}}", rows.join(" ")));
        }
        Ok((passed, parts.join("; ")))
    }

    fn or_split(&self) -> CliResult<(bool, String)> {
        let run = self.run("fig11_12_or")?;
        let b = run.pulses("B")?.len();
        let z = run.pulses("Z")?.len();
        Ok((b >= 1 && z >= 1, format!("A only: B terminal {b} pulse(s), Z {z} pulse(s)")))
    }

    fn taper(&self) -> CliResult<(bool, String)> {
        let amps: Vec<f64> = TAPER_AMPLITUDES_NA.iter().map(|a| a * 1e-9).collect();
        let propagating = |name: &str| -> CliResult<Vec<f64>> {
            let rows = sweep::sweep(self.scenario(name)?, Param::Amplitude, &amps, &Metric::Output)?;
            Ok(TAPER_AMPLITUDES_NA
                .iter()
                .zip(rows)
                .filter(|(_, r)| r.1 > 0.5)
                .map(|(a, _)| *a)
                .collect())
        };
        let forward = propagating("fig16_taper")?;
        let reverse = propagating("fig16_taper_reverse")?;
        let contains = reverse.iter().all(|a| forward.contains(a));
        let strict = forward.len() > reverse.len();
        let fmt = |v: &[f64]| v.iter().map(|a| format!("{a}")).collect::<Vec<_>>().join(",");
        Ok((
            contains && strict,
            format!("large->small propagates at {{{}}} nA, small->large at {{{}}} nA", fmt(&forward), fmt(&reverse)),
        ))
    }

    fn numerics(&self) -> CliResult<(bool, String)> {
        let fig7 = self.scenario("fig7_chain")?;
        let r = fig7.resolve()?;
        let report = refine_check(&r.topology, &fig7.membrane, &r.stimuli, &fig7.sim)?;

        let quiet = self.run("quiet_chain")?;
        let v_rest = quiet.resolved.scenario.membrane.v_rest;
        let exact = (0..quiet.waveform.node_count()).all(|k| {
            quiet
                .waveform
                .voltage(soliton_core::NodeId(k))
                .is_ok_and(|v| v.iter().all(|&x| x == v_rest))
        });

        let a = self.run("fig7_chain")?;
        let b = execute(fig7)?;
        let same = a.csv_bytes() == b.csv_bytes()
            && a.summary_bytes() == b.summary_bytes()
            && a.waveform == b.waveform;
        Ok((
            report.max_discrepancy_mv < 1.0 && exact && same,
            format!(
                "dt 1 us vs 0.5 us: max {:.3} mV (event order {}); quiet equilibrium exact: {}; repeat run identical: {}",
                report.max_discrepancy_mv,
                if report.event_order_matches { "matches" } else { "differs" },
                exact,
                same
            ),
        ))
    }
}

pub struct SuiteReport {
    pub context: SuiteContext,
    pub criteria: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

pub fn run_suite(overrides: &[(String, f64)]) -> CliResult<SuiteReport> {
    let context = SuiteContext::new(overrides)?;
    let criteria = context.evaluate_all();
    Ok(SuiteReport { context, criteria })
}
