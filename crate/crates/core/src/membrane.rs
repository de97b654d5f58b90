//! Membrane constants, segment element derivation and the Na/K switching
//! state machine.
//!
//! Parameters are expressed in the customary physiological units
//! (millivolts, mA/cm², µF/cm², Ω·cm, cm). Everything leaving
//! [`derive_elements`] is SI: ohms, farads, amperes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Global electrical constants of the active membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembraneParams {
    /// Rest (Nernst) potential, mV.
    pub v_rest: f64,
    /// Upward crossing that switches both sources on, mV.
    pub v_trigger: f64,
    /// Voltage at which the Na source is cut off, mV.
    pub v_na_cutoff: f64,
    /// Undershoot voltage at which the K source is cut off, mV.
    pub v_k_cutoff: f64,
    /// Sodium current density, mA/cm².
    pub j_na: f64,
    /// Potassium current density, mA/cm².
    pub j_k: f64,
    /// Membrane capacitance, µF/cm².
    pub c_mem: f64,
    /// Membrane leakage conductance, S/cm².
    pub g_mem: f64,
    /// Internal (axial) resistivity, Ω·cm.
    pub rho_internal: f64,
}

impl Default for MembraneParams {
    fn default() -> Self {
        Self {
            v_rest: -70.0,
            v_trigger: -55.0,
            v_na_cutoff: 50.0,
            v_k_cutoff: -95.0,
            j_na: 0.1345,
            j_k: 0.0608,
            c_mem: 1.0,
            g_mem: 0.3e-3,
            rho_internal: 15.7,
        }
    }
}

impl MembraneParams {
    /// Checks the ordering of the thresholds and the sign of every density.
    ///
    /// `j_na > j_k` is not enforced here: a balanced or inverted pair is a
    /// legitimate what-if (the patch then simply never reaches Na cutoff).
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v_rest,
            self.v_trigger,
            self.v_na_cutoff,
            self.v_k_cutoff,
            self.j_na,
            self.j_k,
            self.c_mem,
            self.g_mem,
            self.rho_internal,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if !(self.v_k_cutoff < self.v_rest
            && self.v_rest < self.v_trigger
            && self.v_trigger < self.v_na_cutoff)
        {
            return Err(Error::InvalidParams(format!(
                "thresholds must satisfy v_k_cutoff < v_rest < v_trigger < v_na_cutoff, got {} / {} / {} / {}",
                self.v_k_cutoff, self.v_rest, self.v_trigger, self.v_na_cutoff
            )));
        }
        for (name, v) in [
            ("j_na", self.j_na),
            ("j_k", self.j_k),
            ("c_mem", self.c_mem),
            ("g_mem", self.g_mem),
            ("rho_internal", self.rho_internal),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Geometry of one segment of the neural path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSpec {
    /// Segment length, cm.
    pub length: f64,
    /// Tube diameter, cm.
    pub diameter: f64,
    /// Whether the Na/K sources exist. Inhibited (passive) segments set this false.
    pub active: bool,
    /// Multiplier on the derived shunt capacitance.
    pub c_scale: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self {
            length: 0.1,
            diameter: 1.0e-4,
            active: true,
            c_scale: 1.0,
        }
    }
}

impl SegmentSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("diameter", self.diameter),
            ("c_scale", self.c_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_length(self, length: f64) -> Self {
        Self { length, ..self }
    }

    pub fn with_diameter(self, diameter: f64) -> Self {
        Self { diameter, ..self }
    }

    pub fn passive(self) -> Self {
        Self {
            active: false,
            ..self
        }
    }
}

/// Lumped SI elements of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentElements {
    /// Axial resistance, Ω.
    pub r_axial: f64,
    /// Shunt membrane capacitance, F.
    pub c_shunt: f64,
    /// Leakage resistance to the rest battery, Ω.
    pub r_loss: f64,
    /// Sodium source magnitude, A.
    pub i_na: f64,
    /// Potassium source magnitude, A.
    pub i_k: f64,
}

impl SegmentElements {
    pub fn g_loss(&self) -> f64 {
        1.0 / self.r_loss
    }

    pub fn g_axial(&self) -> f64 {
        1.0 / self.r_axial
    }
}

/// Derives the lumped elements of a segment from its geometry.
pub fn derive_elements(spec: &SegmentSpec, params: &MembraneParams) -> Result<SegmentElements> {
    spec.validate()?;
    params.validate()?;
    let area_cross = PI * (spec.diameter / 2.0).powi(2);
    let area_side = PI * spec.diameter * spec.length;
    let (i_na, i_k) = if spec.active {
        // mA -> A
        (params.j_na * area_side * 1e-3, params.j_k * area_side * 1e-3)
    } else {
        (0.0, 0.0)
    };
    Ok(SegmentElements {
        r_axial: params.rho_internal * spec.length / area_cross,
        // µF -> F
        c_shunt: spec.c_scale * params.c_mem * area_side * 1e-6,
        r_loss: 1.0 / (params.g_mem * area_side),
        i_na,
        i_k,
    })
}

/// Switching phase of one segment's current sources.
///
/// `Firing`: Na and K on. `Falling`: Na cut off, K on, re-trigger locked out.
/// `FallingArmed`: K still on, voltage has dropped below the trigger level
/// so an upward re-crossing fires again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum GatePhase {
    #[default]
    Rest,
    Firing,
    Falling,
    FallingArmed,
}

impl GatePhase {
    pub fn code(self) -> u8 {
        match self {
            GatePhase::Rest => 0,
            GatePhase::Firing => 1,
            GatePhase::Falling => 2,
            GatePhase::FallingArmed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GatePhase::Rest),
            1 => Some(GatePhase::Firing),
            2 => Some(GatePhase::Falling),
            3 => Some(GatePhase::FallingArmed),
            _ => None,
        }
    }

    pub fn na_on(self) -> bool {
        self == GatePhase::Firing
    }

    pub fn k_on(self) -> bool {
        self != GatePhase::Rest
    }
}

/// Advances the hysteresis state machine by one accepted step.
///
/// At most one transition happens per call. A trigger out of `Rest` needs an
/// upward crossing between `v_prev` and `v_now`; `FallingArmed` is already
/// below the trigger level, so any return to it counts as a crossing.
pub fn step_gate(state: GatePhase, v_prev: f64, v_now: f64, params: &MembraneParams) -> GatePhase {
    use GatePhase::*;
    match state {
        Rest => {
            if v_now >= params.v_trigger && v_prev < params.v_trigger {
                Firing
            } else {
                Rest
            }
        }
        Firing => {
            if v_now >= params.v_na_cutoff {
                Falling
            } else {
                Firing
            }
        }
        Falling => {
            if v_now <= params.v_k_cutoff {
                Rest
            } else if v_now < params.v_trigger {
                FallingArmed
            } else {
                Falling
            }
        }
        FallingArmed => {
            if v_now <= params.v_k_cutoff {
                Rest
            } else if v_now >= params.v_trigger {
                Firing
            } else {
                FallingArmed
            }
        }
    }
}

/// Net membrane source current in amperes; positive depolarizes.
pub fn source_current(state: GatePhase, elements: &SegmentElements) -> f64 {
    match state {
        GatePhase::Rest => 0.0,
        GatePhase::Firing => elements.i_na - elements.i_k,
        GatePhase::Falling | GatePhase::FallingArmed => -elements.i_k,
    }
}
