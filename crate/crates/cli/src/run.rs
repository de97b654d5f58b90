//! Executing a resolved scenario and writing its CSV and JSON outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use soliton_core::analysis::{detect_pulses, is_reflected};
use soliton_core::{
    dispersion_metric, simulate, truth_table, Error, PulseEvent, TruthTable, Waveform,
};

use crate::error::{CliError, CliResult};
use crate::scenario::{Resolved, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub label: String,
    pub pulses: Vec<PulseEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub early: String,
    pub late: String,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionReport {
    pub node: String,
    pub pulses: usize,
    pub reflected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub version: &'static str,
    pub scenario_hash: String,
    pub resolved: Scenario,
    pub node_count: usize,
    pub segment_count: usize,
    pub samples: usize,
    pub transitions: usize,
    pub probes: Vec<ProbeReport>,
    pub dispersion: Option<DispersionReport>,
    pub reflection: Vec<ReflectionReport>,
    pub truth_table: Option<TruthTable>,
}

impl Summary {
    pub fn probe(&self, label: &str) -> Option<&[PulseEvent]> {
        self.probes
            .iter()
            .find(|p| p.label == label)
            .map(|p| p.pulses.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub resolved: Resolved,
    pub waveform: Waveform,
    pub summary: Summary,
}

impl RunOutput {
    pub fn name(&self) -> &str {
        &self.resolved.scenario.name
    }

    pub fn pulses(&self, label: &str) -> CliResult<Vec<PulseEvent>> {
        let node = self.waveform.node(label)?;
        Ok(detect_pulses(
            &self.waveform,
            node,
            self.resolved.scenario.analysis.threshold,
        )?)
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_csv(&mut out, &self.waveform, &self.resolved.probes).expect("writing to memory");
        out
    }

    pub fn summary_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.summary).expect("summary serializes");
        out.push(b'\n');
        out
    }

    /// Writes `<name>.csv` and `<name>.summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let csv = dir.join(format!("{}.csv", self.name()));
        let json = dir.join(format!("{}.summary.json", self.name()));
        std::fs::write(&csv, self.csv_bytes()).map_err(|e| CliError::io(&csv, e))?;
        std::fs::write(&json, self.summary_bytes()).map_err(|e| CliError::io(&json, e))?;
        Ok((csv, json))
    }
}

/// Simulates a scenario and runs every requested analysis.
pub fn execute(scenario: &Scenario) -> CliResult<RunOutput> {
    let resolved = scenario.resolve()?;
    let s = &resolved.scenario;
    let topo = &resolved.topology;
    let threshold = s.analysis.threshold;
    let waveform = simulate(topo, &s.membrane, &resolved.stimuli, &s.sim)?;

    let probes = resolved
        .probes
        .iter()
        .map(|(label, node)| {
            Ok(ProbeReport {
                label: label.clone(),
                pulses: detect_pulses(&waveform, *node, threshold)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let dispersion = match &s.analysis.dispersion {
        None => None,
        Some(d) => {
            let early = topo.node(&d.early)?;
            let late = topo.node(&d.late)?;
            let (value, error) = match dispersion_metric(&waveform, early, late) {
                Ok(v) => (Some(v), None),
                Err(e @ Error::NotApplicable(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            Some(DispersionReport {
                early: d.early.clone(),
                late: d.late.clone(),
                value,
                error,
            })
        }
    };

    let reflection = s
        .analysis
        .reflection
        .iter()
        .map(|label| {
            let node = topo.node(label)?;
            Ok(ReflectionReport {
                node: label.clone(),
                pulses: detect_pulses(&waveform, node, threshold)?.len(),
                reflected: is_reflected(&waveform, node, threshold)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let truth_table = match s.truth_table_request() {
        Some(req) => Some(truth_table(topo, &req, &s.membrane, &s.sim)?),
        None => None,
    };

    let summary = Summary {
        scenario: s.name.clone(),
        version: env!("CARGO_PKG_VERSION"),
        scenario_hash: s.hash(),
        resolved: s.clone(),
        node_count: topo.node_count(),
        segment_count: topo.segments().len(),
        samples: waveform.len(),
        transitions: waveform.transitions().len(),
        probes,
        dispersion,
        reflection,
        truth_table,
    };
    Ok(RunOutput {
        resolved,
        waveform,
        summary,
    })
}

/// Decimal text with `digits` significant digits and no exponent.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    // The exponent of the correctly rounded value decides the decimals.
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// Header `t_s,<labels>`, then one row per sample: seconds, then volts.
pub fn write_csv<W: Write>(
    out: &mut W,
    waveform: &Waveform,
    probes: &[(String, soliton_core::NodeId)],
) -> std::io::Result<()> {
    write!(out, "t_s")?;
    for (label, _) in probes {
        write!(out, ",{label}")?;
    }
    writeln!(out)?;
    let series: Vec<&[f64]> = probes
        .iter()
        .map(|(_, node)| waveform.voltage(*node).expect("probe resolved against topology"))
        .collect();
    for (i, t) in waveform.times().iter().enumerate() {
        write!(out, "{}", format_significant(*t, 9))?;
        for s in &series {
            write!(out, ",{}", format_significant(s[i] * 1e-3, 9))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(-0.07, 9), "-0.0700000000");
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(1e-5, 9), "0.0000100000000");
        assert_eq!(format_significant(0.0499999999999, 9), "0.0500000000");
        assert_eq!(format_significant(123.456, 4), "123.5");
        assert_eq!(format_significant(99999.6, 4), "100000");
    }
}
