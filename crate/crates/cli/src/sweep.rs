//! One-parameter sweeps over a scenario.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use soliton_core::refine_check;

use crate::error::{CliError, CliResult};
use crate::run::{execute, format_significant};
use crate::scenario::{Scenario, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    JunctionCScale,
    /// Every stimulus and the truth-table drive, A.
    Amplitude,
    Dt,
    /// d_end / d_start of a taper.
    TaperRatio,
    /// Delay of each later input, s.
    Skew,
}

impl FromStr for Param {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "junction_c_scale" => Param::JunctionCScale,
            "amplitude" => Param::Amplitude,
            "dt" => Param::Dt,
            "taper_ratio" => Param::TaperRatio,
            "skew" => Param::Skew,
            _ => {
                return Err(CliError::Schema(format!(
                    "unknown sweep parameter {s:?}; expected one of junction_c_scale, amplitude, dt, taper_ratio, skew"
                )))
            }
        })
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::JunctionCScale => "junction_c_scale",
            Param::Amplitude => "amplitude",
            Param::Dt => "dt",
            Param::TaperRatio => "taper_ratio",
            Param::Skew => "skew",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Metric {
    /// 1 if the `Z` terminal carries a pulse.
    Output,
    Pulses(String),
    /// First pulse onset at a node, s; NaN if none.
    Onset(String),
    /// The scenario's dispersion request; NaN when not applicable.
    Dispersion,
    /// One truth-table row (`none`, `A`, `B`, `AB`).
    Truth(String),
    /// refine_check discrepancy, mV.
    MaxDiscrepancy,
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let arg = |prefix: &str| s.strip_prefix(prefix).filter(|a| !a.is_empty()).map(String::from);
        if let Some(l) = arg("pulses:") {
            return Ok(Metric::Pulses(l));
        }
        if let Some(l) = arg("onset:") {
            return Ok(Metric::Onset(l));
        }
        if let Some(r) = arg("truth:") {
            return Ok(Metric::Truth(r));
        }
        match s {
            "output" => Ok(Metric::Output),
            "dispersion" => Ok(Metric::Dispersion),
            "max_discrepancy" => Ok(Metric::MaxDiscrepancy),
            _ => Err(CliError::Schema(format!(
                "unknown metric {s:?}; expected output, dispersion, max_discrepancy, pulses:<label>, onset:<label> or truth:<row>"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Output => f.write_str("output"),
            Metric::Pulses(l) => write!(f, "pulses:{l}"),
            Metric::Onset(l) => write!(f, "onset:{l}"),
            Metric::Dispersion => f.write_str("dispersion"),
            Metric::Truth(r) => write!(f, "truth:{r}"),
            Metric::MaxDiscrepancy => f.write_str("max_discrepancy"),
        }
    }
}

/// Returns a copy of `base` with `param` set to `value`.
pub fn apply(base: &Scenario, param: Param, value: f64) -> CliResult<Scenario> {
    let mut s = base.clone();
    match param {
        Param::JunctionCScale => match &mut s.topology {
            TopologySpec::Junction {
                junction_c_scale, ..
            } => *junction_c_scale = value,
            _ => {
                return Err(CliError::Schema(
                    "junction_c_scale needs a junction topology".into(),
                ))
            }
        },
        Param::Amplitude => {
            for st in &mut s.stimuli {
                st.amplitude = value;
            }
            if let Some(t) = &mut s.analysis.truth_table {
                t.amplitude = value;
            }
        }
        Param::Dt => s.sim.dt = value,
        Param::TaperRatio => match &mut s.topology {
            TopologySpec::Taper { d_start, d_end, .. } => *d_end = *d_start * value,
            _ => return Err(CliError::Schema("taper_ratio needs a taper topology".into())),
        },
        Param::Skew => {
            if let Some(first) = s.stimuli.first().map(|st| st.t_start) {
                for (i, st) in s.stimuli.iter_mut().enumerate() {
                    st.t_start = first + i as f64 * value;
                }
            }
            if let Some(t) = &mut s.analysis.truth_table {
                t.skew = value;
            }
        }
    }
    Ok(s)
}

fn check_metric(base: &Scenario, metric: &Metric) -> CliResult<()> {
    match metric {
        Metric::Dispersion if base.analysis.dispersion.is_none() => Err(CliError::Schema(
            "metric dispersion needs an analysis.dispersion request".into(),
        )),
        Metric::Truth(row) => {
            let t = base.analysis.truth_table.as_ref().ok_or_else(|| {
                CliError::Schema("metric truth:<row> needs an analysis.truth_table request".into())
            })?;
            let known = row == "none"
                || (!row.is_empty()
                    && crate::suite::row_labels(row, &t.inputs).is_some());
            if known {
                Ok(())
            } else {
                Err(CliError::Schema(format!("truth table has no row {row:?}")))
            }
        }
        _ => Ok(()),
    }
}

fn measure(s: &Scenario, metric: &Metric) -> CliResult<f64> {
    let bool_f = |b: bool| if b { 1.0 } else { 0.0 };
    if *metric == Metric::MaxDiscrepancy {
        let r = s.resolve()?;
        let report = refine_check(&r.topology, &s.membrane, &r.stimuli, &s.sim)?;
        return Ok(report.max_discrepancy_mv);
    }
    let out = execute(s)?;
    Ok(match metric {
        Metric::Output => bool_f(!out.pulses("Z")?.is_empty()),
        Metric::Pulses(l) => out.pulses(l)?.len() as f64,
        Metric::Onset(l) => out.pulses(l)?.first().map_or(f64::NAN, |p| p.t_onset),
        Metric::Dispersion => out
            .summary
            .dispersion
            .as_ref()
            .and_then(|d| d.value)
            .unwrap_or(f64::NAN),
        Metric::Truth(row) => {
            let table = out.summary.truth_table.as_ref().expect("checked above");
            let hit = table.rows.iter().find(|r| &r.key() == row).expect("checked above");
            bool_f(hit.output)
        }
        Metric::MaxDiscrepancy => unreachable!(),
    })
}

/// Evenly spaced points from `from` to `to` inclusive.
pub fn points(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Schema("sweep needs finite bounds and --steps >= 1".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    Ok((0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Runs the sweep in parallel; rows come back in parameter order.
pub fn sweep(
    base: &Scenario,
    param: Param,
    values: &[f64],
    metric: &Metric,
) -> CliResult<Vec<(f64, f64)>> {
    check_metric(base, metric)?;
    // Reject bad parameter/topology pairings before spending any time.
    apply(base, param, values.first().copied().unwrap_or(0.0))?;
    values
        .par_iter()
        .map(|&v| Ok((v, measure(&apply(base, param, v)?, metric)?)))
        .collect()
}

pub fn write_table<W: Write>(
    out: &mut W,
    param: Param,
    metric: &Metric,
    rows: &[(f64, f64)],
) -> std::io::Result<()> {
    writeln!(out, "{param},{metric}")?;
    for (x, y) in rows {
        writeln!(out, "{},{}", format_significant(*x, 9), format_significant(*y, 9))?;
    }
    Ok(())
}
