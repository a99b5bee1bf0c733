//! Closed-form coherence and efficiency models for DD storage under OU
//! spectral diffusion and imperfect pi pulses, with their asymptotic
//! coherence-time formulas.

use crate::error::{Error, Result};
use crate::ou::OuParams;
use crate::scalar::Real;
use crate::sequence::SequenceKind;

/// Pulse-area-error decay coefficient: eps^2 (XX), eps^4/2 (XY-4),
/// eps^6/4 (XY-8).
pub fn error_alpha<R: Real>(kind: SequenceKind, epsilon_rad: R) -> R {
    let e2 = epsilon_rad * epsilon_rad;
    match kind {
        SequenceKind::Xx => e2,
        SequenceKind::Xy4 => e2 * e2 / R::of(2.0),
        SequenceKind::Xy8 => e2 * e2 * e2 / R::of(4.0),
    }
}

/// Power-law scaling T2(n) = T2(1) n^gamma of the coherence time with the
/// pulse count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawParams<R> {
    pub t2_1_s: R,
    pub gamma: R,
}

/// Dephasing exponent Gamma(n, tau) of the OU spectral-diffusion model for
/// n equidistant pi pulses (eta = exp(-2 Gamma)):
///
/// Gamma = (sigma tau_c)^2 ([1/tau_c - (2/tau) tanh(tau/2tau_c)] n tau
///         - [1 - sech(tau/2tau_c)]^2)
pub fn gamma_ou<R: Real>(n: u32, tau_s: R, ou: &OuParams<R>) -> R {
    debug_assert!(n >= 1 && tau_s > R::zero());
    let tc = ou.tau_c_s;
    let st = ou.sigma_rad_s * tc;
    let half = tau_s / (tc + tc);
    let extensive = (tc.recip() - R::of(2.0) / tau_s * half.tanh()) * R::of(n as f64) * tau_s;
    let edge = R::one() - half.cosh().recip();
    st * st * (extensive - edge * edge)
}

/// Short-delay limit tau << tau_c: eta = exp(-sigma^2 tau^3 n / (6 tau_c)).
pub fn eta_ou_simplified<R: Real>(n: u32, tau_s: R, ou: &OuParams<R>) -> R {
    let s2 = ou.sigma_rad_s * ou.sigma_rad_s;
    (-(s2 * tau_s * tau_s * tau_s * R::of(n as f64)) / (R::of(6.0) * ou.tau_c_s)).exp()
}

/// Stretched-exponential efficiency exp[-2 (t / T2)^alpha].
pub fn eta_stretched<R: Real>(t_s: R, t2_s: R, alpha: R) -> R {
    debug_assert!(t2_s > R::zero() && alpha > R::zero());
    (-(R::of(2.0)) * (t_s / t2_s).powf(alpha)).exp()
}

/// T2(n) under the power law.
pub fn t2_power_law<R: Real>(n: u32, p: &PowerLawParams<R>) -> R {
    debug_assert!(n >= 1);
    p.t2_1_s * R::of(n as f64).powf(p.gamma)
}

/// Theoretical single-pulse coherence time cbrt(12 tau_c / sigma^2) implied
/// by the short-delay OU limit.
pub fn t2_1_from_ou<R: Real>(ou: &OuParams<R>) -> Result<R> {
    if ou.sigma_rad_s <= R::zero() {
        return Err(Error::Unbounded("T2(1)"));
    }
    Ok((R::of(12.0) * ou.tau_c_s / (ou.sigma_rad_s * ou.sigma_rad_s)).cbrt())
}

/// Pulse-error-limited coherence time sqrt(2/alpha) n_p tau.
pub fn t2_pulse_error<R: Real>(
    kind: SequenceKind,
    epsilon_rad: R,
    n_p: u32,
    tau_s: R,
) -> Result<R> {
    if epsilon_rad == R::zero() {
        return Err(Error::Unbounded("pulse-error coherence time"));
    }
    let alpha = error_alpha(kind, epsilon_rad.abs());
    Ok((R::of(2.0) / alpha).sqrt() * R::of(n_p as f64) * tau_s)
}

/// Spectral-diffusion-limited coherence time 12 tau_c / (sigma^2 tau^2) in
/// the fixed-tau regime.
pub fn t2_ou_limit<R: Real>(tau_s: R, ou: &OuParams<R>) -> Result<R> {
    if ou.sigma_rad_s <= R::zero() {
        return Err(Error::Unbounded("OU-limited coherence time"));
    }
    if tau_s <= R::zero() {
        return Err(Error::InvalidInput("tau must be > 0".into()));
    }
    Ok(R::of(12.0) * ou.tau_c_s / (ou.sigma_rad_s * ou.sigma_rad_s * tau_s * tau_s))
}

/// Harmonic combination of the pulse-error and OU asymptotes; a crossover
/// visualization aid, not an accuracy claim between the regimes.
pub fn t2_combined<R: Real>(
    kind: SequenceKind,
    epsilon_rad: R,
    n_p: u32,
    tau_s: R,
    ou: &OuParams<R>,
) -> Result<R> {
    let inv_pulse = match t2_pulse_error(kind, epsilon_rad, n_p, tau_s) {
        Ok(t) => t.recip(),
        Err(Error::Unbounded(_)) => R::zero(),
        Err(e) => return Err(e),
    };
    let inv_ou = match t2_ou_limit(tau_s, ou) {
        Ok(t) => t.recip(),
        Err(Error::Unbounded(_)) => R::zero(),
        Err(e) => return Err(e),
    };
    let total = inv_pulse + inv_ou;
    if total == R::zero() {
        return Err(Error::Unbounded("combined coherence time"));
    }
    Ok(total.recip())
}
