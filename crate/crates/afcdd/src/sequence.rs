//! Timed dynamical-decoupling schedules: two-pulse echo, XX (Carr-Purcell),
//! XY-4 and XY-8, with per-pulse phases and area errors.
//!
//! Timing follows the CPMG convention: first pulse at tau/2, spacing tau,
//! readout at t_spin = n tau, so static detunings refocus exactly at readout.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoupling family. The repetition unit fixes the pulse count and the
/// phase pattern; XX uses two pulses per repetition so that n_s = 1, 2, 4, 8
/// reproduces the n = 2, 4, 8, 16 series directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Xx,
    Xy4,
    Xy8,
}

impl SequenceKind {
    pub fn pulses_per_rep(self) -> u32 {
        match self {
            SequenceKind::Xx => 2,
            SequenceKind::Xy4 => 4,
            SequenceKind::Xy8 => 8,
        }
    }

    /// Rotation-axis phases of one repetition (X = 0, Y = pi/2).
    pub fn phases(self) -> &'static [f64] {
        const XX: [f64; 2] = [0.0, 0.0];
        const XY4: [f64; 4] = [0.0, FRAC_PI_2, 0.0, FRAC_PI_2];
        const XY8: [f64; 8] = [
            0.0, FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0,
        ];
        match self {
            SequenceKind::Xx => &XX,
            SequenceKind::Xy4 => &XY4,
            SequenceKind::Xy8 => &XY8,
        }
    }
}

impl std::fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SequenceKind::Xx => write!(f, "xx"),
            SequenceKind::Xy4 => write!(f, "xy4"),
            SequenceKind::Xy8 => write!(f, "xy8"),
        }
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xx" | "cpmg" => Ok(SequenceKind::Xx),
            "xy4" | "xy-4" => Ok(SequenceKind::Xy4),
            "xy8" | "xy-8" => Ok(SequenceKind::Xy8),
            other => Err(Error::Parse(format!("unknown sequence kind '{other}'"))),
        }
    }
}

/// One instantaneous pi-pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    /// Pulse center, seconds from the start of spin storage.
    pub time_s: f64,
    /// Rotation axis in the equatorial plane, radians (X = 0, Y = pi/2).
    pub phase_rad: f64,
    /// Rotation angle pi + epsilon, radians.
    pub area_rad: f64,
}

/// Ordered pi-pulse schedule over a spin storage window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdSequence {
    pub kind: SequenceKind,
    /// Number of repetitions of the kind's phase unit.
    pub n_s: u32,
    /// Pulses per repetition.
    pub n_p: u32,
    /// Inter-pulse delay, seconds.
    pub tau_s: f64,
    pub pulses: Vec<PulseEvent>,
    /// Total spin storage time n_s * n_p * tau, seconds.
    pub t_spin_s: f64,
}

impl DdSequence {
    pub fn pulse_count(&self) -> u32 {
        self.pulses.len() as u32
    }

    /// True when every pulse area is exactly pi.
    pub fn is_ideal(&self) -> bool {
        self.pulses.iter().all(|p| p.area_rad == PI)
    }

    /// Pulse-free evolution over the given window (no refocusing at all).
    pub fn free_evolution(t_spin_s: f64) -> Result<Self> {
        if t_spin_s < 0.0 || !t_spin_s.is_finite() {
            return Err(Error::InvalidInput("t_spin must be >= 0".into()));
        }
        Ok(Self {
            kind: SequenceKind::Xx,
            n_s: 0,
            n_p: 2,
            tau_s: 0.0,
            pulses: Vec::new(),
            t_spin_s,
        })
    }

    /// Durations of the n + 1 pulse-free windows: tau/2, tau, ..., tau, tau/2.
    pub fn segment_durations(&self) -> Vec<f64> {
        if self.pulses.is_empty() {
            return vec![self.t_spin_s];
        }
        let mut out = Vec::with_capacity(self.pulses.len() + 1);
        let mut prev = 0.0;
        for p in &self.pulses {
            out.push(p.time_s - prev);
            prev = p.time_s;
        }
        out.push(self.t_spin_s - prev);
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_spin_s.is_finite() || self.t_spin_s < 0.0 {
            return Err(Error::InvalidInput("t_spin must be >= 0".into()));
        }
        let mut prev: Option<f64> = None;
        for p in &self.pulses {
            let increasing = match prev {
                None => p.time_s >= 0.0,
                Some(t) => p.time_s > t,
            };
            if !increasing {
                return Err(Error::InvalidInput(
                    "pulse times must be strictly increasing".into(),
                ));
            }
            if p.time_s > self.t_spin_s {
                return Err(Error::InvalidInput("pulse beyond readout time".into()));
            }
            if p.area_rad <= 0.0 {
                return Err(Error::InvalidInput("pulse area must be > 0".into()));
            }
            prev = Some(p.time_s);
        }
        Ok(())
    }
}

/// Builds an n_s-fold repetition of the kind's phase unit with CPMG timing
/// and uniform pulse area pi + epsilon.
pub fn build_sequence(
    kind: SequenceKind,
    n_s: u32,
    tau_s: f64,
    epsilon_rad: f64,
) -> Result<DdSequence> {
    if n_s < 1 {
        return Err(Error::InvalidInput("n_s must be >= 1".into()));
    }
    if tau_s <= 0.0 || !tau_s.is_finite() {
        return Err(Error::InvalidInput("tau must be > 0".into()));
    }
    let area = PI + epsilon_rad;
    if area <= 0.0 || area.is_nan() {
        return Err(Error::InvalidInput(
            "pulse area pi + epsilon must be > 0".into(),
        ));
    }
    let n_p = kind.pulses_per_rep();
    let n = n_s * n_p;
    let phases = kind.phases();
    let pulses = (0..n)
        .map(|k| PulseEvent {
            time_s: tau_s * (0.5 + k as f64),
            phase_rad: phases[(k % n_p) as usize],
            area_rad: area,
        })
        .collect();
    Ok(DdSequence {
        kind,
        n_s,
        n_p,
        tau_s,
        pulses,
        t_spin_s: n as f64 * tau_s,
    })
}

/// Classic two-pulse echo: one XX repetition.
pub fn two_pulse_echo(tau_s: f64, epsilon_rad: f64) -> Result<DdSequence> {
    build_sequence(SequenceKind::Xx, 1, tau_s, epsilon_rad)
}
