//! Monte-Carlo spin-storage engine: evolves an ensemble of two-level spins
//! with static inhomogeneous detuning plus OU spectral diffusion through a
//! DD schedule and returns the spin-wave storage efficiency.
//!
//! Each trajectory owns the counter-based substream (master_seed,
//! stream_base + trajectory_index), so results are bit-identical for any
//! thread count. The ensemble reduction collects per-trajectory coherences
//! in index order and sums pairwise.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveMeta, CurvePoint, DecayCurve, FixedVar};
use crate::error::{Error, Result};
use crate::ou::{OuParams, RngStream, SegmentMoments};
use crate::physics::fwhm_to_sigma;
use crate::sequence::{build_sequence, DdSequence, SequenceKind};

/// Smallest reported standard error; keeps exactly-determined points usable
/// as fit weights.
pub const SIGMA_ETA_FLOOR: f64 = 1e-12;

/// Azimuth of the equatorial starting coherence.
///
/// `Aligned` starts every trajectory at the same phase; once the static
/// detuning randomizes the inter-pulse phases, the area errors of
/// same-phase pulse trains then self-compensate and produce almost no
/// decay. `Scrambled` draws a uniform azimuth per trajectory, uncorrelated
/// with the detuning, and references the readout to it (the ensemble mean
/// of c exp(-i theta0)); this realizes the pulse-area-error ensemble
/// behind the sqrt(2/alpha) n_p tau coherence times. For ideal pulses the
/// two modes agree exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialPhase {
    #[default]
    Aligned,
    Scrambled,
}

/// Ensemble size, static linewidth and RNG seeding for one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// FWHM of the static Gaussian detuning distribution, Hz.
    pub gamma_inh_hz: f64,
    pub seed: u64,
    /// Contiguous-batch size for the batch-means standard error.
    pub batch_size: usize,
    #[serde(default)]
    pub initial_phase: InitialPhase,
}

impl EnsembleConfig {
    /// Picks a batch size giving 20 batches when the trajectory count allows.
    pub fn new(n_traj: usize, gamma_inh_hz: f64, seed: u64) -> Self {
        let batch_size = if n_traj >= 20 && n_traj.is_multiple_of(20) {
            n_traj / 20
        } else {
            1
        };
        Self {
            n_traj,
            gamma_inh_hz,
            seed,
            batch_size,
            initial_phase: InitialPhase::Aligned,
        }
    }

    pub fn scrambled(mut self) -> Self {
        self.initial_phase = InitialPhase::Scrambled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::InvalidInput("n_traj must be >= 1".into()));
        }
        if self.n_traj >= (1usize << 32) {
            return Err(Error::InvalidInput("n_traj must be < 2^32".into()));
        }
        if self.gamma_inh_hz < 0.0 || !self.gamma_inh_hz.is_finite() {
            return Err(Error::InvalidInput("gamma_inh must be >= 0".into()));
        }
        if self.batch_size == 0 || !self.n_traj.is_multiple_of(self.batch_size) {
            return Err(Error::InvalidInput("batch_size must divide n_traj".into()));
        }
        if self.n_traj >= 20 && self.n_traj / self.batch_size < 20 {
            return Err(Error::InvalidInput(
                "need at least 20 batches for the batch-means error".into(),
            ));
        }
        Ok(())
    }
}

/// Ensemble-averaged storage result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// |ensemble-mean coherence|^2.
    pub eta_spin: f64,
    /// Batch-means standard error of eta_spin.
    pub std_err: f64,
    /// Ensemble-mean complex coherence.
    pub amplitude: Complex64,
    pub n_traj: usize,
}

/// Precomputed per-pulse rotation.
#[derive(Debug, Clone, Copy)]
struct Rotor {
    axis_x: f64,
    axis_y: f64,
    cos_area: f64,
    sin_area: f64,
    /// exp(2 i phase): the ideal-pi action c -> rot2 * conj(c).
    rot2: Complex64,
}

impl Rotor {
    fn new(phase_rad: f64, area_rad: f64) -> Self {
        Self {
            axis_x: phase_rad.cos(),
            axis_y: phase_rad.sin(),
            cos_area: area_rad.cos(),
            sin_area: area_rad.sin(),
            rot2: Complex64::from_polar(1.0, 2.0 * phase_rad),
        }
    }

    /// Rodrigues rotation of a Bloch vector about the equatorial axis.
    #[inline]
    fn apply(&self, u: f64, v: f64, w: f64) -> (f64, f64, f64) {
        let k_dot_r = self.axis_x * u + self.axis_y * v;
        let proj = k_dot_r * (1.0 - self.cos_area);
        (
            u * self.cos_area + self.axis_y * w * self.sin_area + self.axis_x * proj,
            v * self.cos_area - self.axis_x * w * self.sin_area + self.axis_y * proj,
            w * self.cos_area + (self.axis_x * v - self.axis_y * u) * self.sin_area,
        )
    }
}

struct Engine {
    durations: Vec<f64>,
    moments: Vec<SegmentMoments<f64>>,
    rotors: Vec<Rotor>,
    sigma_static_rad_s: f64,
    sigma_ou_rad_s: f64,
    ideal: bool,
    initial_phase: InitialPhase,
}

impl Engine {
    fn new(seq: &DdSequence, ou: &OuParams<f64>, ens: &EnsembleConfig) -> Result<Self> {
        seq.validate()?;
        let durations = seq.segment_durations();
        let moments = durations
            .iter()
            .map(|&d| SegmentMoments::new(ou, d))
            .collect::<Result<Vec<_>>>()?;
        let rotors = seq
            .pulses
            .iter()
            .map(|p| Rotor::new(p.phase_rad, p.area_rad))
            .collect();
        Ok(Self {
            durations,
            moments,
            rotors,
            sigma_static_rad_s: std::f64::consts::TAU * fwhm_to_sigma(ens.gamma_inh_hz),
            sigma_ou_rad_s: ou.sigma_rad_s,
            ideal: seq.is_ideal(),
            initial_phase: ens.initial_phase,
        })
    }

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    /// Per-trajectory start azimuth. The draw is consumed in both modes so
    /// the substream layout does not depend on the mode.
    fn azimuth(&self, rng: &mut ChaCha8Rng) -> f64 {
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        match self.initial_phase {
            InitialPhase::Aligned => 0.0,
            InitialPhase::Scrambled => theta,
        }
    }

    /// Full SU(2) trajectory via Bloch-vector rotations; returns the final
    /// coherence referenced to the start azimuth.
    fn trajectory_full(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        let theta = self.azimuth(rng);
        let d0 = self.sigma_static_rad_s * Self::normal(rng);
        let mut x = self.sigma_ou_rad_s * Self::normal(rng);
        let (mut u, mut v, mut w) = (theta.cos(), theta.sin(), 0.0f64);
        for (k, m) in self.moments.iter().enumerate() {
            let (x_end, integral) = m.sample(x, rng);
            x = x_end;
            let phase = d0 * self.durations[k] + integral;
            let (s, c) = phase.sin_cos();
            let (u1, v1) = (u * c - v * s, u * s + v * c);
            u = u1;
            v = v1;
            if let Some(rot) = self.rotors.get(k) {
                let (u2, v2, w2) = rot.apply(u, v, w);
                u = u2;
                v = v2;
                w = w2;
            }
        }
        Complex64::new(u, v) * Complex64::from_polar(1.0, -theta)
    }

    /// Phase-toggling path, valid only for exact pi pulses: free evolution
    /// multiplies by exp(i phase), each pulse maps c -> exp(2 i phi) conj(c).
    fn trajectory_fast(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        let theta = self.azimuth(rng);
        let d0 = self.sigma_static_rad_s * Self::normal(rng);
        let mut x = self.sigma_ou_rad_s * Self::normal(rng);
        let mut c = Complex64::from_polar(1.0, theta);
        for (k, m) in self.moments.iter().enumerate() {
            let (x_end, integral) = m.sample(x, rng);
            x = x_end;
            let phase = d0 * self.durations[k] + integral;
            c *= Complex64::from_polar(1.0, phase);
            if let Some(rot) = self.rotors.get(k) {
                c = rot.rot2 * c.conj();
            }
        }
        c * Complex64::from_polar(1.0, -theta)
    }

    fn trajectory(&self, stream: RngStream) -> Complex64 {
        let mut rng = stream.rng();
        if self.ideal {
            self.trajectory_fast(&mut rng)
        } else {
            self.trajectory_full(&mut rng)
        }
    }
}

/// Deterministic single-spin evolution with a fixed static detuning and no
/// spectral diffusion; the full-rotation counterpart of a density-matrix
/// product, usable as one side of an oracle check.
pub fn evolve_static(seq: &DdSequence, d0_rad_s: f64) -> Result<Complex64> {
    seq.validate()?;
    let durations = seq.segment_durations();
    let rotors: Vec<Rotor> = seq
        .pulses
        .iter()
        .map(|p| Rotor::new(p.phase_rad, p.area_rad))
        .collect();
    let (mut u, mut v, mut w) = (1.0f64, 0.0f64, 0.0f64);
    for (k, &dur) in durations.iter().enumerate() {
        let phase = d0_rad_s * dur;
        let (s, c) = phase.sin_cos();
        let (u1, v1) = (u * c - v * s, u * s + v * c);
        u = u1;
        v = v1;
        if let Some(rot) = rotors.get(k) {
            let (u2, v2, w2) = rot.apply(u, v, w);
            u = u2;
            v = v2;
            w = w2;
        }
    }
    Ok(Complex64::new(u, v))
}

fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 32 {
        let mut acc = Complex64::new(0.0, 0.0);
        for x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Runs the ensemble with trajectory substreams offset by `stream_base`;
/// sweeps use distinct bases per point so points are statistically
/// independent while remaining reproducible.
pub fn simulate_streamed(
    seq: &DdSequence,
    ou: &OuParams<f64>,
    ens: &EnsembleConfig,
    stream_base: u64,
) -> Result<SimResult> {
    ens.validate()?;
    let engine = Engine::new(seq, ou, ens)?;
    let seed = ens.seed;
    let coherences: Vec<Complex64> = (0..ens.n_traj)
        .into_par_iter()
        .map(|i| engine.trajectory(RngStream::new(seed, stream_base + i as u64)))
        .collect();

    let n = ens.n_traj as f64;
    let mean = pairwise_sum(&coherences) / n;
    let eta = mean.norm_sqr();

    // batch means -> delta-method standard error of |mean|^2
    let n_batches = ens.n_traj / ens.batch_size;
    let std_err = if n_batches >= 2 {
        let means: Vec<Complex64> = coherences
            .chunks_exact(ens.batch_size)
            .map(|chunk| pairwise_sum(chunk) / ens.batch_size as f64)
            .collect();
        let b = n_batches as f64;
        let (mut var_re, mut var_im, mut cov) = (0.0, 0.0, 0.0);
        for m in &means {
            let dr = m.re - mean.re;
            let di = m.im - mean.im;
            var_re += dr * dr;
            var_im += di * di;
            cov += dr * di;
        }
        // variance of the overall mean = batch scatter / (B (B - 1))
        let scale = 1.0 / (b * (b - 1.0));
        var_re *= scale;
        var_im *= scale;
        cov *= scale;
        let g = 4.0
            * (mean.re * mean.re * var_re
                + mean.im * mean.im * var_im
                + 2.0 * mean.re * mean.im * cov);
        g.max(0.0).sqrt()
    } else {
        0.0
    };

    Ok(SimResult {
        eta_spin: eta,
        std_err,
        amplitude: mean,
        n_traj: ens.n_traj,
    })
}

/// Monte-Carlo storage efficiency for one schedule.
pub fn simulate(seq: &DdSequence, ou: &OuParams<f64>, ens: &EnsembleConfig) -> Result<SimResult> {
    simulate_streamed(seq, ou, ens, 0)
}

fn check_n_for_kind(kind: SequenceKind, n: u32) -> Result<u32> {
    let rep = kind.pulses_per_rep();
    if n == 0 || !n.is_multiple_of(2) || !n.is_multiple_of(rep) {
        return Err(Error::InvalidInput(format!(
            "pulse count {n} incompatible with {kind} (multiple of {rep} required)"
        )));
    }
    Ok(n / rep)
}

/// Decay curve at fixed pulse count n (ideal pulses), sweeping the pulse
/// separation; the curve is indexed by t_spin = n tau.
pub fn simulate_decay_fixed_n(
    kind: SequenceKind,
    n: u32,
    tau_grid_s: &[f64],
    ou: &OuParams<f64>,
    ens: &EnsembleConfig,
) -> Result<DecayCurve> {
    let n_s = check_n_for_kind(kind, n)?;
    if tau_grid_s.is_empty() {
        return Err(Error::InvalidInput("empty tau grid".into()));
    }
    let mut points = Vec::with_capacity(tau_grid_s.len());
    for (j, &tau) in tau_grid_s.iter().enumerate() {
        let seq = build_sequence(kind, n_s, tau, 0.0)?;
        let r = simulate_streamed(&seq, ou, ens, (j as u64) << 32)?;
        points.push(CurvePoint {
            t_spin_s: seq.t_spin_s,
            eta: r.eta_spin,
            sigma_eta: r.std_err.max(SIGMA_ETA_FLOOR),
        });
    }
    DecayCurve::new(
        points,
        CurveMeta {
            kind: Some(kind),
            fixed: FixedVar::PulseCount(n),
            sigma_hz: Some(ou.sigma_hz()),
            tau_c_s: Some(ou.tau_c_s),
            epsilon_rad: Some(0.0),
            weights_supplied: true,
        },
    )
}

/// Decay curve at fixed pulse separation tau, sweeping the pulse count
/// (even, kind-compatible; n = 0 contributes the trivial eta = 1 point).
pub fn simulate_decay_fixed_tau(
    kind: SequenceKind,
    tau_s: f64,
    n_grid: &[u32],
    ou: &OuParams<f64>,
    ens: &EnsembleConfig,
    epsilon_rad: f64,
) -> Result<DecayCurve> {
    if n_grid.is_empty() {
        return Err(Error::InvalidInput("empty n grid".into()));
    }
    if tau_s <= 0.0 || tau_s.is_nan() {
        return Err(Error::InvalidInput("tau must be > 0".into()));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (j, &n) in n_grid.iter().enumerate() {
        if n == 0 {
            points.push(CurvePoint {
                t_spin_s: 0.0,
                eta: 1.0,
                sigma_eta: SIGMA_ETA_FLOOR,
            });
            continue;
        }
        let n_s = check_n_for_kind(kind, n)?;
        let seq = build_sequence(kind, n_s, tau_s, epsilon_rad)?;
        let r = simulate_streamed(&seq, ou, ens, (j as u64) << 32)?;
        points.push(CurvePoint {
            t_spin_s: seq.t_spin_s,
            eta: r.eta_spin,
            sigma_eta: r.std_err.max(SIGMA_ETA_FLOOR),
        });
    }
    DecayCurve::new(
        points,
        CurveMeta {
            kind: Some(kind),
            fixed: FixedVar::PulseSpacing(tau_s),
            sigma_hz: Some(ou.sigma_hz()),
            tau_c_s: Some(ou.tau_c_s),
            epsilon_rad: Some(epsilon_rad),
            weights_supplied: true,
        },
    )
}
