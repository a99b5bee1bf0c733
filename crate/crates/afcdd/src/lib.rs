//! Laboratory for spin-wave atomic-frequency-comb optical memories under
//! radio-frequency dynamical decoupling: configuration checks, Monte-Carlo
//! storage simulation with Ornstein-Uhlenbeck spectral diffusion and
//! imperfect pi pulses, adiabatic-pulse Bloch dynamics, hole-burning side
//! effects, and decay-curve fitting for every model used in the analysis.
//!
//! The analytic kernels (`physics`, `coherence`, `ou`, `pulse`) are generic
//! over the scalar type via [`scalar::Real`]; the `*64` aliases at the crate
//! root pin the f64 instantiations used by the simulation engine, the
//! fitting stack, and the CLI.

pub mod coherence;
pub mod curve;
mod error;
pub mod fit;
pub mod holeburn;
pub mod ou;
pub mod physics;
pub mod pulse;
pub mod scalar;
pub mod sequence;
pub mod sim;

pub use curve::{CurveMeta, CurvePoint, DecayCurve, FixedVar};
pub use error::{Error, Result};
pub use sequence::{build_sequence, two_pulse_echo, DdSequence, PulseEvent, SequenceKind};
pub use sim::{
    simulate, simulate_decay_fixed_n, simulate_decay_fixed_tau, EnsembleConfig, SimResult,
};

/// f64 instantiations of the scalar-generic core types.
pub type FieldConfig64 = physics::FieldConfig<f64>;
pub type Splittings64 = physics::Splittings<f64>;
pub type OperatingEnvelope64 = physics::OperatingEnvelope<f64>;
pub type ConstraintReport64 = physics::ConstraintReport<f64>;
pub type EfficiencyBudget64 = physics::EfficiencyBudget<f64>;
pub type CombSpec64 = physics::CombSpec<f64>;
pub type OuParams64 = ou::OuParams<f64>;
pub type PowerLawParams64 = coherence::PowerLawParams<f64>;
pub type HsPulse64 = pulse::HsPulse<f64>;
