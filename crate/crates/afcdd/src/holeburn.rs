//! Rate-equation model of optical pumping with a split excited state:
//! pumping at f also burns transparency at f +/- delta_e (side-holes),
//! degrading the comb unless bandwidth or periodicity constraints hold.

use std::io::Write;

use crate::error::{Error, Result};
use crate::physics::CombSpec;

/// Optical-depth profile on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile {
    /// Frequency of grid point 0, Hz.
    pub freq_start_hz: f64,
    /// Grid spacing, Hz.
    pub freq_step_hz: f64,
    /// Optical depth per grid point.
    pub od: Vec<f64>,
}

impl AbsorptionProfile {
    pub fn uniform(freq_start_hz: f64, freq_step_hz: f64, len: usize, od: f64) -> Result<Self> {
        if freq_step_hz <= 0.0 {
            return Err(Error::InvalidInput("grid step must be > 0".into()));
        }
        if od < 0.0 {
            return Err(Error::InvalidInput("optical depth must be >= 0".into()));
        }
        Ok(Self {
            freq_start_hz,
            freq_step_hz,
            od: vec![od; len],
        })
    }

    pub fn freq_hz(&self, idx: usize) -> f64 {
        self.freq_start_hz + idx as f64 * self.freq_step_hz
    }

    /// Two-column CSV export (freq_hz, od).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_hz,od")?;
        for (i, od) in self.od.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.freq_hz(i), od)?;
        }
        Ok(())
    }
}

/// Pump weights plus the side-hole channel strength and per-cycle removal
/// fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpPattern {
    /// Per-grid-point pump weight in [0, 1].
    pub pump: Vec<f64>,
    /// Relative pumping strength via the weak transition, in [0, 1].
    pub side_hole_weight: f64,
    /// Fraction of the pumped population removed per cycle, in (0, 1].
    pub removal_rate: f64,
}

impl PumpPattern {
    pub fn validate(&self) -> Result<()> {
        if self.pump.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidInput("pump weights must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.side_hole_weight) {
            return Err(Error::InvalidInput(
                "side-hole weight must be in [0, 1]".into(),
            ));
        }
        if !(self.removal_rate > 0.0 && self.removal_rate <= 1.0) {
            return Err(Error::InvalidInput("removal rate must be in (0, 1]".into()));
        }
        Ok(())
    }
}

fn grid_shift(value_hz: f64, step_hz: f64) -> Result<usize> {
    let ratio = value_hz / step_hz;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 * ratio.abs().max(1.0) || rounded < 0.0 {
        return Err(Error::MisalignedFrequency {
            value_hz,
            grid_hz: step_hz,
        });
    }
    Ok(rounded as usize)
}

/// Applies `cycles` rounds of optical pumping. Each cycle multiplies the OD
/// at f by 1 - r [pump(f) + w pump(f - delta_e) + w pump(f + delta_e)],
/// clamped at zero; out-of-grid contributions are zero.
pub fn apply_pumping(
    profile: &AbsorptionProfile,
    pattern: &PumpPattern,
    delta_e_hz: f64,
    cycles: u32,
) -> Result<AbsorptionProfile> {
    pattern.validate()?;
    if pattern.pump.len() != profile.od.len() {
        return Err(Error::InvalidInput("pump mask length mismatch".into()));
    }
    let shift = grid_shift(delta_e_hz, profile.freq_step_hz)?;
    let n = profile.od.len();
    let w = pattern.side_hole_weight;
    let r = pattern.removal_rate;

    // the removal factor per point is cycle-independent; compute once
    let factors: Vec<f64> = (0..n)
        .map(|i| {
            let direct = pattern.pump[i];
            let below = if i >= shift {
                pattern.pump[i - shift]
            } else {
                0.0
            };
            let above = pattern.pump.get(i + shift).copied().unwrap_or(0.0);
            (1.0 - r * (direct + w * (below + above))).max(0.0)
        })
        .collect();

    let mut out = profile.clone();
    for _ in 0..cycles {
        for (od, f) in out.od.iter_mut().zip(&factors) {
            *od *= f;
        }
    }
    Ok(out)
}

/// Comb-preparation pump pattern on a grid: ones on the in-band anti-teeth,
/// zero on teeth and out of band.
fn comb_preparation_pump(comb: &CombSpec<f64>, profile: &AbsorptionProfile) -> Vec<f64> {
    let half_band = comb.bandwidth_hz / 2.0;
    let half_tooth = comb.tooth_width_hz / 2.0;
    // tooth centers on multiples of the period for odd counts, offset by a
    // half period for even counts; band centered on zero
    let center_offset = if comb.tooth_count % 2 == 1 {
        0.0
    } else {
        comb.period_hz / 2.0
    };
    (0..profile.od.len())
        .map(|i| {
            let f = profile.freq_hz(i);
            if f.abs() > half_band {
                return 0.0;
            }
            let nearest =
                ((f - center_offset) / comb.period_hz).round() * comb.period_hz + center_offset;
            if (f - nearest).abs() <= half_tooth {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

fn in_tooth(comb: &CombSpec<f64>, f: f64) -> bool {
    let half_band = comb.bandwidth_hz / 2.0;
    let half_tooth = comb.tooth_width_hz / 2.0;
    let center_offset = if comb.tooth_count % 2 == 1 {
        0.0
    } else {
        comb.period_hz / 2.0
    };
    if f.abs() > half_band {
        return false;
    }
    let nearest = ((f - center_offset) / comb.period_hz).round() * comb.period_hz + center_offset;
    (f - nearest).abs() <= half_tooth
}

/// Fraction of in-tooth optical depth destroyed by the side-hole channel
/// during ideal comb preparation: 1 - (tooth OD with side-holes) / (tooth OD
/// without). Exactly zero when delta_e is an on-grid multiple of the period
/// or when the side-holes fall outside the pumped band.
pub fn comb_od_loss(comb: &CombSpec<f64>, delta_e_hz: f64, w: f64, cycles: u32) -> Result<f64> {
    if delta_e_hz <= 0.0 {
        return Err(Error::InvalidInput("delta_e must be > 0".into()));
    }
    // grid step: divides both the period and delta_e, at least period/50
    let period = comb.period_hz;
    let g = gcd_hz(period, delta_e_hz)?;
    let refine = (50.0 * g / period).ceil().max(1.0);
    let step = g / refine;

    let half_band = comb.bandwidth_hz / 2.0;
    let extent = half_band + delta_e_hz + period;
    let n_side = (extent / step).ceil() as usize;
    let n = 2 * n_side + 1;
    let profile = AbsorptionProfile::uniform(-(n_side as f64) * step, step, n, 1.0)?;

    let pump = comb_preparation_pump(comb, &profile);
    let with_side = PumpPattern {
        pump: pump.clone(),
        side_hole_weight: w,
        removal_rate: 0.1,
    };
    let without = PumpPattern {
        pump,
        side_hole_weight: 0.0,
        removal_rate: 0.1,
    };
    let burned = apply_pumping(&profile, &with_side, delta_e_hz, cycles)?;
    let baseline = apply_pumping(&profile, &without, delta_e_hz, cycles)?;

    let tooth_sum = |p: &AbsorptionProfile| -> f64 {
        p.od.iter()
            .enumerate()
            .filter(|(i, _)| in_tooth(comb, p.freq_hz(*i)))
            .map(|(_, od)| od)
            .sum()
    };
    let kept = tooth_sum(&burned);
    let reference = tooth_sum(&baseline);
    if reference <= 0.0 {
        return Err(Error::InvalidInput(
            "comb has no in-tooth grid points".into(),
        ));
    }
    Ok(1.0 - kept / reference)
}

/// Greatest common divisor of two frequencies expressed on a 1 Hz lattice.
fn gcd_hz(a_hz: f64, b_hz: f64) -> Result<f64> {
    let to_int = |x: f64| -> Result<u64> {
        let r = x.round();
        if (x - r).abs() > 1e-6 || r <= 0.0 {
            return Err(Error::MisalignedFrequency {
                value_hz: x,
                grid_hz: 1.0,
            });
        }
        Ok(r as u64)
    };
    let (mut a, mut b) = (to_int(a_hz)?, to_int(b_hz)?);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    Ok(a as f64)
}
