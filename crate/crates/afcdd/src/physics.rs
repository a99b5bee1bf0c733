//! Physical configuration of the memory: bias field, Zeeman splittings,
//! operating constraints, efficiency budget and AFC rephasing primitives.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Conversion between a Gaussian FWHM and its standard deviation.
pub fn fwhm_to_sigma<R: Real>(fwhm: R) -> R {
    // FWHM = 2 sqrt(2 ln 2) sigma
    fwhm / R::of(2.354_820_045_030_949_3)
}

/// Static magnetic bias field and the linear Zeeman gradients of the
/// relevant transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig<R> {
    /// Field magnitude in tesla.
    pub magnitude_t: R,
    /// Angle relative to D1 in the D1-D2 plane, degrees.
    pub angle_deg: R,
    /// Ground/storage splitting gradient, Hz/T.
    pub ground_gradient_hz_per_t: R,
    /// Excited-state splitting gradient, Hz/T.
    pub excited_gradient_hz_per_t: R,
    /// Spin-frequency sensitivity S1, Hz/T.
    pub s1_gradient_hz_per_t: R,
}

impl<R: Real> FieldConfig<R> {
    pub fn new(
        magnitude_t: R,
        angle_deg: R,
        ground_gradient_hz_per_t: R,
        excited_gradient_hz_per_t: R,
        s1_gradient_hz_per_t: R,
    ) -> Result<Self> {
        let cfg = Self {
            magnitude_t,
            angle_deg,
            ground_gradient_hz_per_t,
            excited_gradient_hz_per_t,
            s1_gradient_hz_per_t,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 15 mT at 65 degrees; gradients back-computed from the 15 mT splittings.
    pub fn reference() -> Self {
        Self {
            magnitude_t: R::of(15e-3),
            angle_deg: R::of(65.0),
            ground_gradient_hz_per_t: R::of(14e6),
            excited_gradient_hz_per_t: R::of(20e6),
            s1_gradient_hz_per_t: R::of(17e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitude_t < R::zero() || !self.magnitude_t.is_finite() {
            return Err(Error::InvalidInput("field magnitude must be >= 0".into()));
        }
        if self.angle_deg < R::zero() || self.angle_deg >= R::of(360.0) {
            return Err(Error::InvalidInput(
                "field angle must be in [0, 360)".into(),
            ));
        }
        for (name, g) in [
            ("ground", self.ground_gradient_hz_per_t),
            ("excited", self.excited_gradient_hz_per_t),
            ("s1", self.s1_gradient_hz_per_t),
        ] {
            if g <= R::zero() || !g.is_finite() {
                return Err(Error::InvalidInput(format!("{name} gradient must be > 0")));
            }
        }
        Ok(())
    }
}

/// Zeeman splittings of the ground/storage doublets and of the excited state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splittings<R> {
    /// Ground and storage splitting (equal at the chosen field angle), Hz.
    pub delta_hz: R,
    /// Excited-state splitting, Hz.
    pub delta_e_hz: R,
}

impl<R: Real> Splittings<R> {
    pub fn new(delta_hz: R, delta_e_hz: R) -> Result<Self> {
        if delta_hz < R::zero() || delta_e_hz < R::zero() {
            return Err(Error::InvalidInput("splittings must be >= 0".into()));
        }
        Ok(Self {
            delta_hz,
            delta_e_hz,
        })
    }
}

/// Linewidths and drive strength that the field configuration must beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingEnvelope<R> {
    /// Spin inhomogeneous FWHM, Hz.
    pub gamma_inh_hz: R,
    /// RF Rabi frequency Omega/2pi, Hz.
    pub rabi_hz: R,
    /// AFC bandwidth, Hz.
    pub gamma_afc_hz: R,
}

impl<R: Real> OperatingEnvelope<R> {
    pub fn new(gamma_inh_hz: R, rabi_hz: R, gamma_afc_hz: R) -> Result<Self> {
        for (name, v) in [
            ("gamma_inh_hz", gamma_inh_hz),
            ("rabi_hz", rabi_hz),
            ("gamma_afc_hz", gamma_afc_hz),
        ] {
            if v <= R::zero() || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be > 0")));
            }
        }
        Ok(Self {
            gamma_inh_hz,
            rabi_hz,
            gamma_afc_hz,
        })
    }

    pub fn reference() -> Self {
        Self {
            gamma_inh_hz: R::of(30e3),
            rabi_hz: R::of(23e3),
            gamma_afc_hz: R::of(160e3),
        }
    }
}

/// One operating-constraint check: strict inequality plus the lhs/rhs margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck<R> {
    pub pass: bool,
    pub margin: R,
}

/// Pass/fail flags with margins for the three operating constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport<R> {
    /// delta > Gamma_inh: RF addresses only the intended transitions.
    pub spin_selectivity: ConstraintCheck<R>,
    /// delta > Omega_RF/2pi: no off-resonant drive of the crossed transitions.
    pub drive_selectivity: ConstraintCheck<R>,
    /// delta_e > Gamma_AFC: comb preparation keeps side-holes out of band.
    pub afc_bandwidth: ConstraintCheck<R>,
}

impl<R: Real> ConstraintReport<R> {
    pub fn all_pass(&self) -> bool {
        self.spin_selectivity.pass && self.drive_selectivity.pass && self.afc_bandwidth.pass
    }
}

/// Multiplicative efficiency budget of the full storage process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyBudget<R> {
    pub eta_afc: R,
    pub eta_ctrl: R,
    pub eta_spin: R,
}

impl<R: Real> EfficiencyBudget<R> {
    pub fn new(eta_afc: R, eta_ctrl: R, eta_spin: R) -> Result<Self> {
        for (name, v) in [
            ("eta_afc", eta_afc),
            ("eta_ctrl", eta_ctrl),
            ("eta_spin", eta_spin),
        ] {
            if v < R::zero() || v > R::one() || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(Self {
            eta_afc,
            eta_ctrl,
            eta_spin,
        })
    }
}

/// Atomic frequency comb geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombSpec<R> {
    /// Tooth spacing, Hz.
    pub period_hz: R,
    /// Comb bandwidth, Hz.
    pub bandwidth_hz: R,
    pub tooth_count: u32,
    /// Tooth FWHM, Hz.
    pub tooth_width_hz: R,
}

impl<R: Real> CombSpec<R> {
    pub fn new(period_hz: R, bandwidth_hz: R, tooth_count: u32, tooth_width_hz: R) -> Result<Self> {
        if period_hz <= R::zero() {
            return Err(Error::InvalidInput("comb period must be > 0".into()));
        }
        if tooth_count < 2 {
            return Err(Error::InvalidInput("comb needs at least 2 teeth".into()));
        }
        if tooth_width_hz <= R::zero() || tooth_width_hz >= period_hz {
            return Err(Error::InvalidInput(
                "tooth width must be in (0, period)".into(),
            ));
        }
        let nominal = R::of(tooth_count as f64) * period_hz;
        if (bandwidth_hz - nominal).abs() > period_hz / R::of(2.0) {
            return Err(Error::InvalidInput(
                "bandwidth must be within half a period of tooth_count * period".into(),
            ));
        }
        Ok(Self {
            period_hz,
            bandwidth_hz,
            tooth_count,
            tooth_width_hz,
        })
    }

    /// Echo delay 1/Delta, seconds.
    pub fn rephasing_time_s(&self) -> R {
        self.period_hz.recip()
    }
}

/// Linear Zeeman model: splittings proportional to |B|.
pub fn compute_splittings<R: Real>(field: &FieldConfig<R>) -> Splittings<R> {
    Splittings {
        delta_hz: field.ground_gradient_hz_per_t * field.magnitude_t,
        delta_e_hz: field.excited_gradient_hz_per_t * field.magnitude_t,
    }
}

/// Evaluates the three field/bandwidth constraints with strict inequalities.
pub fn check_constraints<R: Real>(
    s: &Splittings<R>,
    env: &OperatingEnvelope<R>,
) -> ConstraintReport<R> {
    let check = |lhs: R, rhs: R| ConstraintCheck {
        pass: lhs > rhs,
        margin: lhs / rhs,
    };
    ConstraintReport {
        spin_selectivity: check(s.delta_hz, env.gamma_inh_hz),
        drive_selectivity: check(s.delta_hz, env.rabi_hz),
        afc_bandwidth: check(s.delta_e_hz, env.gamma_afc_hz),
    }
}

/// Total storage efficiency eta_AFC * eta_ctrl^2 * eta_spin.
pub fn total_efficiency<R: Real>(b: &EfficiencyBudget<R>) -> R {
    b.eta_afc * b.eta_ctrl * b.eta_ctrl * b.eta_spin
}

/// Weighted rephasing amplitude sum w_j exp(-i 2 pi f_j t) of an ensemble of
/// comb teeth. For an ideal equal-weight integer comb the magnitude peaks at
/// one whenever t is a multiple of 1/Delta.
pub fn afc_rephasing_amplitude<R: Real>(
    tooth_detunings_hz: &[R],
    weights: &[R],
    t_s: R,
) -> Result<Complex<R>> {
    if tooth_detunings_hz.is_empty() {
        return Err(Error::InvalidInput("empty tooth set".into()));
    }
    if tooth_detunings_hz.len() != weights.len() {
        return Err(Error::InvalidInput(
            "detuning/weight length mismatch".into(),
        ));
    }
    let mut total = R::zero();
    for &w in weights {
        if w < R::zero() {
            return Err(Error::InvalidInput("weights must be >= 0".into()));
        }
        total += w;
    }
    if (total - R::one()).abs() > R::of(1e-6) {
        return Err(Error::InvalidInput("weights must sum to 1".into()));
    }
    let two_pi = R::of(std::f64::consts::TAU);
    let mut acc = Complex::new(R::zero(), R::zero());
    for (&f, &w) in tooth_detunings_hz.iter().zip(weights) {
        acc += Complex::from_polar(w, -two_pi * f * t_s);
    }
    Ok(acc)
}

/// Magnetic-field fluctuation equivalent to a spectral width: sigma / S1.
pub fn field_fluctuation_equivalent<R: Real>(sigma_hz: R, s1_hz_per_t: R) -> Result<R> {
    if s1_hz_per_t <= R::zero() {
        return Err(Error::InvalidInput("S1 gradient must be > 0".into()));
    }
    Ok(sigma_hz / s1_hz_per_t)
}
