//! Weighted nonlinear least-squares fitting of decay curves to the decay
//! models in use (exponential, Gaussian, stretched exponential with and
//! without offset), power-law coherence-time scaling, the global OU
//! spectral-diffusion fit, and the pulse-error slope fit.
//!
//! Nonlinear fits run in transformed coordinates (log T2, log sigma, log
//! tau_c, logistic-bounded alpha and offset) from a deterministic multi-start
//! grid; parameter uncertainties come from the local quadratic model at the
//! optimum.

mod lm;

use serde::{Deserialize, Serialize};

use crate::coherence::gamma_ou;
use crate::curve::{DecayCurve, FixedVar};
use crate::error::{Error, Result};
use crate::ou::OuParams;
use crate::sequence::SequenceKind;
use lm::{minimize, LmOptions};

/// Stretched-exponent bounds; keeps sparse tails from driving alpha to
/// degenerate values.
const ALPHA_LO: f64 = 0.3;
const ALPHA_HI: f64 = 3.0;

/// Near-tie cost window and parameter tolerance for the multi-start
/// consistency check.
const TIE_REL_COST: f64 = 1e-3;
const TIE_REL_PARAM: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Exp,
    Gauss,
    Stretched,
    StretchedOffset,
    PowerLaw,
    OuGlobal,
    PulseError,
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ModelId::Exp => "exp",
            ModelId::Gauss => "gauss",
            ModelId::Stretched => "stretched",
            ModelId::StretchedOffset => "stretched_offset",
            ModelId::PowerLaw => "power_law",
            ModelId::OuGlobal => "ou_global",
            ModelId::PulseError => "pulse_error",
        };
        write!(f, "{name}")
    }
}

/// Decay-curve model selector for [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Exp,
    Gauss,
    Stretched,
    StretchedOffset,
}

impl FitModel {
    fn id(self) -> ModelId {
        match self {
            FitModel::Exp => ModelId::Exp,
            FitModel::Gauss => ModelId::Gauss,
            FitModel::Stretched => ModelId::Stretched,
            FitModel::StretchedOffset => ModelId::StretchedOffset,
        }
    }

    fn n_params(self) -> usize {
        match self {
            FitModel::Exp | FitModel::Gauss => 2,
            FitModel::Stretched => 3,
            FitModel::StretchedOffset => 4,
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(FitModel::Exp),
            "gauss" | "gaussian" => Ok(FitModel::Gauss),
            "stretched" => Ok(FitModel::Stretched),
            "stretched_offset" | "stretched-offset" => Ok(FitModel::StretchedOffset),
            other => Err(Error::Parse(format!("unknown fit model '{other}'"))),
        }
    }
}

/// One fitted parameter with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub std_err: f64,
}

/// Fit outcome; `converged == false` flags the parameters as unusable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub params: Vec<FitParam>,
    pub chi2_reduced: f64,
    pub converged: bool,
    /// False when the input carried no uncertainties and the fit ran
    /// unweighted.
    pub weighted: bool,
    pub n_points: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(s: f64) -> f64 {
    let s = s.clamp(1e-9, 1.0 - 1e-9);
    (s / (1.0 - s)).ln()
}

fn alpha_from_z(z: f64) -> f64 {
    ALPHA_LO + (ALPHA_HI - ALPHA_LO) * logistic(z)
}

fn z_from_alpha(alpha: f64) -> f64 {
    logit((alpha - ALPHA_LO) / (ALPHA_HI - ALPHA_LO))
}

struct CurveData {
    t: Vec<f64>,
    y: Vec<f64>,
    inv_sigma: Vec<f64>,
    weighted: bool,
}

impl CurveData {
    fn from_curve(curve: &DecayCurve) -> Self {
        let weighted = curve.meta.weights_supplied;
        Self {
            t: curve.points.iter().map(|p| p.t_spin_s).collect(),
            y: curve.points.iter().map(|p| p.eta).collect(),
            inv_sigma: curve
                .points
                .iter()
                .map(|p| if weighted { 1.0 / p.sigma_eta } else { 1.0 })
                .collect(),
            weighted,
        }
    }

    fn max_y(&self) -> f64 {
        self.y.iter().cloned().fold(f64::MIN, f64::max)
    }

    fn t_span(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

/// Model value in internal (transformed) coordinates.
fn eval_decay(model: FitModel, p: &[f64], t: f64, c_max: f64) -> f64 {
    let amp = p[0];
    let t2 = p[1].exp();
    match model {
        FitModel::Exp => amp * (-2.0 * t / t2).exp(),
        FitModel::Gauss => {
            let x = t / t2;
            amp * (-2.0 * x * x).exp()
        }
        FitModel::Stretched => amp * (-2.0 * (t / t2).powf(alpha_from_z(p[2]))).exp(),
        FitModel::StretchedOffset => {
            let c = c_max * logistic(p[3]);
            amp * (-2.0 * (t / t2).powf(alpha_from_z(p[2]))).exp() + c
        }
    }
}

fn decay_starts(model: FitModel, data: &CurveData) -> Vec<Vec<f64>> {
    let span = data.t_span();
    let amp = data.max_y().max(1e-6);
    let t2s = [span / 4.0, span / 2.0, span, 2.0 * span];
    let mut starts = Vec::new();
    match model {
        FitModel::Exp | FitModel::Gauss => {
            for a in [amp, 1.0] {
                for t2 in t2s {
                    starts.push(vec![a, t2.ln()]);
                }
            }
        }
        FitModel::Stretched => {
            for alpha in [0.7, 1.0, 1.6, 2.6] {
                for t2 in [span / 3.0, span, 3.0 * span] {
                    starts.push(vec![amp, t2.ln(), z_from_alpha(alpha)]);
                }
            }
        }
        FitModel::StretchedOffset => {
            for alpha in [0.8, 1.6, 2.6] {
                for t2 in [span / 3.0, span, 3.0 * span] {
                    for c_frac in [0.02, 0.3] {
                        starts.push(vec![amp, t2.ln(), z_from_alpha(alpha), logit(c_frac)]);
                    }
                }
            }
        }
    }
    starts
}

struct MultiStartFit {
    params: Vec<f64>,
    cost: f64,
    covariance: Vec<Vec<f64>>,
    converged: bool,
}

/// Runs the optimizer from every start and keeps the best minimum; flags
/// non-convergence when no start converges or when two equally good minima
/// disagree beyond tolerance. Agreement is judged on the externalized
/// parameters, so saturated transforms (a logit pinned at a bound) do not
/// trip the check.
fn multi_start<F, E>(
    mut residuals: F,
    n_res: usize,
    starts: &[Vec<f64>],
    externalize: E,
) -> MultiStartFit
where
    F: FnMut(&[f64], &mut [f64]),
    E: Fn(&[f64]) -> Vec<f64>,
{
    let opts = LmOptions::default();
    let mut outcomes = Vec::with_capacity(starts.len());
    for s in starts {
        outcomes.push(minimize(&mut residuals, n_res, s, &opts));
    }
    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (!a.1.converged, a.1.cost)
                .partial_cmp(&(!b.1.converged, b.1.cost))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .expect("at least one start");
    let best = &outcomes[best_idx];
    let best_ext = externalize(&best.params);
    let mut consistent = true;
    for (i, o) in outcomes.iter().enumerate() {
        if i == best_idx || !o.converged {
            continue;
        }
        let near_tie = o.cost <= best.cost * (1.0 + TIE_REL_COST) + 1e-15;
        if near_tie {
            let ext = externalize(&o.params);
            let disagrees = ext
                .iter()
                .zip(&best_ext)
                .any(|(a, b)| (a - b).abs() > TIE_REL_PARAM * b.abs().max(1e-12));
            if disagrees {
                consistent = false;
            }
        }
    }
    MultiStartFit {
        params: best.params.clone(),
        cost: best.cost,
        covariance: best.covariance.clone(),
        converged: best.converged && consistent,
    }
}

/// Fits one decay curve to the selected model by weighted least squares.
pub fn fit_decay(curve: &DecayCurve, model: FitModel) -> Result<FitResult> {
    curve.validate()?;
    let k = model.n_params();
    if curve.len() < k + 2 {
        return Err(Error::InsufficientData {
            needed: k + 2,
            got: curve.len(),
        });
    }
    let data = CurveData::from_curve(curve);
    let c_max = data.max_y().max(1e-12);
    let starts = decay_starts(model, &data);
    let n = data.t.len();
    let fit = multi_start(
        |p, r| {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = (eval_decay(model, p, data.t[i], c_max) - data.y[i]) * data.inv_sigma[i];
            }
        },
        n,
        &starts,
        |p| {
            let mut ext = vec![p[0], p[1].exp()];
            if p.len() > 2 {
                ext.push(alpha_from_z(p[2]));
            }
            if p.len() > 3 {
                ext.push(c_max * logistic(p[3]));
            }
            ext
        },
    );

    let dof = (n - k).max(1) as f64;
    let chi2_reduced = fit.cost / dof;
    let err_scale = if data.weighted {
        1.0
    } else {
        chi2_reduced.max(0.0)
    };
    let sd = |idx: usize| (fit.covariance[idx][idx].max(0.0) * err_scale).sqrt();

    let mut params = vec![
        FitParam {
            name: "amp".into(),
            value: fit.params[0],
            std_err: sd(0),
        },
        FitParam {
            name: "t2_s".into(),
            value: fit.params[1].exp(),
            std_err: fit.params[1].exp() * sd(1),
        },
    ];
    if matches!(model, FitModel::Stretched | FitModel::StretchedOffset) {
        let z = fit.params[2];
        let s = logistic(z);
        let dalpha_dz = (ALPHA_HI - ALPHA_LO) * s * (1.0 - s);
        params.push(FitParam {
            name: "alpha".into(),
            value: alpha_from_z(z),
            std_err: dalpha_dz.abs() * sd(2),
        });
    }
    if matches!(model, FitModel::StretchedOffset) {
        let z = fit.params[3];
        let s = logistic(z);
        params.push(FitParam {
            name: "offset".into(),
            value: c_max * s,
            std_err: (c_max * s * (1.0 - s)).abs() * sd(3),
        });
    }

    Ok(FitResult {
        model: model.id(),
        params,
        chi2_reduced,
        converged: fit.converged,
        weighted: data.weighted,
        n_points: n,
    })
}

/// Weighted power-law fit T2(n) = T2(1) n^gamma, linear in log space.
pub fn fit_power_law(t2_vs_n: &[(u32, f64, f64)]) -> Result<FitResult> {
    if t2_vs_n.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: t2_vs_n.len(),
        });
    }
    for &(n, t2, sigma) in t2_vs_n {
        if n < 1 || t2 <= 0.0 || sigma <= 0.0 {
            return Err(Error::InvalidInput(
                "power-law fit needs n >= 1, T2 > 0, sigma > 0".into(),
            ));
        }
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, t2, sigma) in t2_vs_n {
        let x = (n as f64).ln();
        let y = t2.ln();
        let w = (t2 / sigma).powi(2); // 1 / sigma_lnT2^2
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::InvalidInput("degenerate power-law design".into()));
    }
    let gamma = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let var_gamma = s / det;
    let var_intercept = sxx / det;
    let t2_1 = intercept.exp();

    let chi2: f64 = t2_vs_n
        .iter()
        .map(|&(n, t2, sigma)| {
            let r = (t2.ln() - intercept - gamma * (n as f64).ln()) * t2 / sigma;
            r * r
        })
        .sum();
    Ok(FitResult {
        model: ModelId::PowerLaw,
        params: vec![
            FitParam {
                name: "t2_1_s".into(),
                value: t2_1,
                std_err: t2_1 * var_intercept.sqrt(),
            },
            FitParam {
                name: "gamma".into(),
                value: gamma,
                std_err: var_gamma.sqrt(),
            },
        ],
        chi2_reduced: chi2 / (t2_vs_n.len() - 2).max(1) as f64,
        converged: true,
        weighted: true,
        n_points: t2_vs_n.len(),
    })
}

/// Global OU fit over a family of fixed-n curves: shared (sigma, tau_c),
/// one free amplitude per curve, eta = A_n exp(-2 Gamma(n, tau)).
pub fn fit_ou_global(curves: &[DecayCurve]) -> Result<FitResult> {
    let mut ns = Vec::with_capacity(curves.len());
    for c in curves {
        c.validate()?;
        match c.meta.fixed {
            FixedVar::PulseCount(n) if n >= 1 => ns.push(n),
            _ => {
                return Err(Error::InvalidInput(
                    "OU global fit needs fixed-n curves (meta.fixed = pulse_count)".into(),
                ))
            }
        }
    }
    {
        let mut distinct = ns.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::InvalidInput(
                "OU global fit needs at least 2 curves with distinct n".into(),
            ));
        }
    }
    let n_curves = curves.len();
    let n_res: usize = curves.iter().map(|c| c.len()).sum();
    let k = n_curves + 2;
    if n_res < k + 2 {
        return Err(Error::InsufficientData {
            needed: k + 2,
            got: n_res,
        });
    }
    let weighted = curves.iter().all(|c| c.meta.weights_supplied);

    // internal params: [ln sigma_rad, ln tau_c, amp_1 .. amp_k]
    let residuals = |p: &[f64], r: &mut [f64]| {
        let ou = OuParams {
            sigma_rad_s: p[0].exp(),
            tau_c_s: p[1].exp(),
        };
        let mut idx = 0;
        for (ci, c) in curves.iter().enumerate() {
            let n = ns[ci];
            let amp = p[2 + ci];
            for pt in &c.points {
                let tau = pt.t_spin_s / n as f64;
                let model = amp * (-2.0 * gamma_ou(n, tau, &ou)).exp();
                let w = if weighted { 1.0 / pt.sigma_eta } else { 1.0 };
                r[idx] = (model - pt.eta) * w;
                idx += 1;
            }
        }
    };

    let tau = std::f64::consts::TAU;
    let mut starts = Vec::new();
    for sigma_hz in [5.0, 15.0, 45.0] {
        for tau_c in [3e-3, 9.5e-3, 30e-3] {
            let mut p = vec![(sigma_hz * tau).ln(), f64::ln(tau_c)];
            for c in curves {
                p.push(
                    c.points
                        .iter()
                        .map(|pt| pt.eta)
                        .fold(f64::MIN, f64::max)
                        .max(1e-3),
                );
            }
            starts.push(p);
        }
    }
    let fit = multi_start(residuals, n_res, &starts, |p| {
        let mut ext = vec![p[0].exp(), p[1].exp()];
        ext.extend_from_slice(&p[2..]);
        ext
    });

    let dof = (n_res - k).max(1) as f64;
    let chi2_reduced = fit.cost / dof;
    let err_scale = if weighted { 1.0 } else { chi2_reduced.max(0.0) };
    let sd = |idx: usize| (fit.covariance[idx][idx].max(0.0) * err_scale).sqrt();

    let sigma_hz = fit.params[0].exp() / tau;
    let tau_c_s = fit.params[1].exp();
    let mut params = vec![
        FitParam {
            name: "sigma_hz".into(),
            value: sigma_hz,
            std_err: sigma_hz * sd(0),
        },
        FitParam {
            name: "tau_c_s".into(),
            value: tau_c_s,
            std_err: tau_c_s * sd(1),
        },
    ];
    for (ci, n) in ns.iter().enumerate() {
        // disambiguate repeated pulse counts with the curve index
        let name = if ns.iter().filter(|m| *m == n).count() > 1 {
            format!("amp{ci}_n{n}")
        } else {
            format!("amp_n{n}")
        };
        params.push(FitParam { name, value: fit.params[2 + ci], std_err: sd(2 + ci) });
    }
    Ok(FitResult {
        model: ModelId::OuGlobal,
        params,
        chi2_reduced,
        converged: fit.converged,
        weighted,
        n_points: n_res,
    })
}

/// One-parameter pulse-error fit through the origin: T2 = sqrt(2/alpha(eps))
/// n_p tau, inverted for eps from the weighted slope of T2 versus tau.
pub fn fit_epsilon_from_t2(t2_vs_tau: &[(f64, f64, f64)], kind: SequenceKind) -> Result<FitResult> {
    if t2_vs_tau.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: t2_vs_tau.len(),
        });
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(tau, t2, sigma) in t2_vs_tau {
        if tau <= 0.0 || t2 <= 0.0 || sigma <= 0.0 {
            return Err(Error::InvalidInput(
                "epsilon fit needs tau > 0, T2 > 0, sigma > 0".into(),
            ));
        }
        let w = 1.0 / (sigma * sigma);
        sxx += w * tau * tau;
        sxy += w * tau * t2;
    }
    let slope = sxy / sxx;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(slope > 0.0) {
        return Err(Error::InvalidInput(
            "degenerate input: non-positive slope".into(),
        ));
    }
    let sigma_slope = sxx.powf(-0.5);

    let n_p = kind.pulses_per_rep() as f64;
    // slope = sqrt(2/alpha(eps)) n_p; eps ~ slope^(-1/root)
    let (eps, root) = match kind {
        SequenceKind::Xx => (2.0f64.sqrt() * n_p / slope, 1.0),
        SequenceKind::Xy4 => ((2.0 * n_p / slope).sqrt(), 2.0),
        SequenceKind::Xy8 => ((2.0 * 2.0f64.sqrt() * n_p / slope).cbrt(), 3.0),
    };
    let eps_err = eps * sigma_slope / (root * slope);

    let chi2: f64 = t2_vs_tau
        .iter()
        .map(|&(tau, t2, sigma)| {
            let r = (slope * tau - t2) / sigma;
            r * r
        })
        .sum();
    Ok(FitResult {
        model: ModelId::PulseError,
        params: vec![
            FitParam {
                name: "epsilon_rad".into(),
                value: eps,
                std_err: eps_err,
            },
            FitParam {
                name: "slope".into(),
                value: slope,
                std_err: sigma_slope,
            },
        ],
        chi2_reduced: chi2 / (t2_vs_tau.len() - 1).max(1) as f64,
        converged: true,
        weighted: true,
        n_points: t2_vs_tau.len(),
    })
}

/// Coherence time from one model fit next to its cross-model mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model: ModelId,
    pub t2_s: f64,
    /// (T2 - mean) / mean over the compared models.
    pub rel_deviation: f64,
}

/// Fits the curve to exponential, Gaussian and stretched models and reports
/// the spread of the extracted coherence times.
pub fn compare_models(curve: &DecayCurve) -> Result<Vec<ModelComparison>> {
    let models = [FitModel::Exp, FitModel::Gauss, FitModel::Stretched];
    let mut t2s = Vec::with_capacity(models.len());
    for m in models {
        let fit = fit_decay(curve, m)?;
        if !fit.converged {
            return Err(Error::NonConvergence(format!("{:?} comparison fit", m)));
        }
        t2s.push(fit.value("t2_s").expect("decay fits report t2_s"));
    }
    let mean = t2s.iter().sum::<f64>() / t2s.len() as f64;
    Ok(models
        .iter()
        .zip(t2s)
        .map(|(m, t2)| ModelComparison {
            model: m.id(),
            t2_s: t2,
            rel_deviation: (t2 - mean) / mean,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CurveMeta, CurvePoint};

    fn synth_curve(f: impl Fn(f64) -> f64, ts: &[f64], sigma: f64) -> DecayCurve {
        DecayCurve::new(
            ts.iter()
                .map(|&t| CurvePoint {
                    t_spin_s: t,
                    eta: f(t),
                    sigma_eta: sigma,
                })
                .collect(),
            CurveMeta::default(),
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exp_fit_recovers_noiseless() {
        let t2 = 0.1;
        let c = synth_curve(|t| 0.9 * (-2.0 * t / t2).exp(), &grid(5e-3, 0.25, 20), 1e-3);
        let fit = fit_decay(&c, FitModel::Exp).unwrap();
        assert!(fit.converged);
        assert!((fit.value("t2_s").unwrap() - t2).abs() < 1e-8);
        assert!((fit.value("amp").unwrap() - 0.9).abs() < 1e-8);
        // noiseless residual RMS below 1e-8
        assert!((fit.chi2_reduced * 1e-6).sqrt() < 1e-8);
    }

    #[test]
    fn stretched_fit_identities_on_simplified_ou_curve() {
        // fixed n, sweeping tau: eta = exp(-c t^3) => alpha = 3 (boundary)
        let ou = OuParams::<f64>::reference();
        let n = 4u32;
        let s2 = ou.sigma_rad_s * ou.sigma_rad_s;
        let f = |t: f64| (-(s2 * (t / n as f64).powi(3) * n as f64) / (6.0 * ou.tau_c_s)).exp();
        let ts = grid(10e-3, 80e-3, 12);
        let c = synth_curve(f, &ts, 1e-4);
        let fit = fit_decay(&c, FitModel::Stretched).unwrap();
        let alpha = fit.value("alpha").unwrap();
        assert!((alpha - 3.0).abs() <= 0.01, "alpha {alpha}");

        // fixed tau, sweeping n: eta = exp(-c t) => alpha = 1 exactly
        let tau = 2e-3;
        let f = |t: f64| (-(s2 * tau * tau * t) / (6.0 * ou.tau_c_s)).exp();
        let rate = s2 * tau * tau / (6.0 * ou.tau_c_s);
        let ts = grid(1.0 / rate * 0.1, 1.0 / rate * 2.5, 12);
        let c = synth_curve(f, &ts, 1e-4);
        let fit = fit_decay(&c, FitModel::Stretched).unwrap();
        let alpha = fit.value("alpha").unwrap();
        assert!((alpha - 1.0).abs() <= 1e-6, "alpha {alpha}");
        // and T2 equals the fixed-tau OU limit 12 tau_c / (sigma^2 tau^2)
        let t2 = fit.value("t2_s").unwrap();
        let expect = 12.0 * ou.tau_c_s / (s2 * tau * tau);
        assert!(
            (t2 - expect).abs() < 1e-6 * expect,
            "t2 {t2} expect {expect}"
        );
    }

    #[test]
    fn gauss_identity_recovered() {
        let t2 = 0.05;
        let c = synth_curve(
            |t| 0.8 * (-2.0 * (t / t2) * (t / t2)).exp(),
            &grid(2e-3, 0.11, 15),
            1e-4,
        );
        let fit = fit_decay(&c, FitModel::Gauss).unwrap();
        assert!((fit.value("t2_s").unwrap() - t2).abs() < 1e-9);
        let fit_s = fit_decay(&c, FitModel::Stretched).unwrap();
        assert!((fit_s.value("alpha").unwrap() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn stretched_offset_recovers_noiseless() {
        let (amp, t2, alpha, c0) = (0.85, 0.04, 1.4, 0.05);
        let f = |t: f64| amp * (-2.0 * (t / t2).powf(alpha)).exp() + c0;
        let c = synth_curve(f, &grid(2e-3, 0.12, 18), 1e-4);
        let fit = fit_decay(&c, FitModel::StretchedOffset).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.value("t2_s").unwrap() - t2).abs() < 1e-4);
        assert!((fit.value("alpha").unwrap() - alpha).abs() < 1e-3);
        assert!((fit.value("offset").unwrap() - c0).abs() < 1e-4);
    }

    #[test]
    fn insufficient_points_rejected() {
        let c = synth_curve(|t| (-t).exp(), &grid(0.0, 0.1, 3), 1e-3);
        assert!(matches!(
            fit_decay(&c, FitModel::Exp),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn exp_fit_recovers_within_errors_on_noisy_data() {
        // 1% noise; deterministic pseudo-noise from a hash of the index
        let t2 = 0.1;
        let ts = grid(5e-3, 0.25, 20);
        let noise = |i: usize| {
            let x =
                ((i as u64).wrapping_mul(0x9e3779b97f4a7c15) >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * x - 1.0
        };
        let pts: Vec<CurvePoint> = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let clean = (-2.0 * t / t2).exp();
                CurvePoint {
                    t_spin_s: t,
                    eta: clean * (1.0 + 0.01 * noise(i)),
                    sigma_eta: 0.01 * clean.max(0.05),
                }
            })
            .collect();
        let c = DecayCurve::new(pts, CurveMeta::default()).unwrap();
        let fit = fit_decay(&c, FitModel::Exp).unwrap();
        let t2_hat = fit.param("t2_s").unwrap();
        assert!(
            (t2_hat.value - t2).abs() < 3.0 * t2_hat.std_err.max(1e-4),
            "{} +/- {}",
            t2_hat.value,
            t2_hat.std_err
        );
    }

    #[test]
    fn power_law_exact_recovery() {
        let data: Vec<(u32, f64, f64)> = [2u32, 4, 8, 16]
            .iter()
            .map(|&n| (n, 0.0233 * (n as f64).powf(2.0 / 3.0), 1e-4))
            .collect();
        let fit = fit_power_law(&data).unwrap();
        assert!((fit.value("gamma").unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!((fit.value("t2_1_s").unwrap() - 0.0233).abs() < 1e-9);
        assert!(fit_power_law(&data[..1]).is_err());
        assert!(fit_power_law(&[(2, -1.0, 0.1), (4, 1.0, 0.1), (8, 1.0, 0.1)]).is_err());
    }

    #[test]
    fn power_law_scale_covariant() {
        let base: Vec<(u32, f64, f64)> = vec![
            (2, 0.03, 1e-3),
            (4, 0.05, 1e-3),
            (8, 0.081, 1e-3),
            (16, 0.13, 1e-3),
        ];
        let k = 3.7;
        let scaled: Vec<(u32, f64, f64)> =
            base.iter().map(|&(n, t, s)| (n, k * t, k * s)).collect();
        let f0 = fit_power_law(&base).unwrap();
        let f1 = fit_power_law(&scaled).unwrap();
        assert!((f1.value("t2_1_s").unwrap() - k * f0.value("t2_1_s").unwrap()).abs() < 1e-12 * k);
        assert!((f1.value("gamma").unwrap() - f0.value("gamma").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn epsilon_fit_exact_line() {
        let eps = 0.154;
        let taus = [1.5e-3, 2e-3, 2.5e-3, 3e-3];
        let data: Vec<(f64, f64, f64)> = taus
            .iter()
            .map(|&t| (t, 2.0 * 2.0f64.sqrt() * t / eps, 1e-4))
            .collect();
        let fit = fit_epsilon_from_t2(&data, SequenceKind::Xx).unwrap();
        assert!((fit.value("epsilon_rad").unwrap() - eps).abs() < 1e-9);

        // doubling the slope halves epsilon
        let doubled: Vec<(f64, f64, f64)> = data.iter().map(|&(t, y, s)| (t, 2.0 * y, s)).collect();
        let fit2 = fit_epsilon_from_t2(&doubled, SequenceKind::Xx).unwrap();
        assert!((fit2.value("epsilon_rad").unwrap() - eps / 2.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_fit_other_kinds_invert_correctly() {
        let eps = 0.2;
        for (kind, n_p) in [(SequenceKind::Xy4, 4.0), (SequenceKind::Xy8, 8.0)] {
            let alpha = match kind {
                SequenceKind::Xy4 => eps_powi(eps, 4) / 2.0,
                _ => eps_powi(eps, 6) / 4.0,
            };
            let slope = (2.0 / alpha).sqrt() * n_p;
            let data: Vec<(f64, f64, f64)> = [1e-3, 2e-3, 3e-3]
                .iter()
                .map(|&t| (t, slope * t, 1e-5))
                .collect();
            let fit = fit_epsilon_from_t2(&data, kind).unwrap();
            assert!(
                (fit.value("epsilon_rad").unwrap() - eps).abs() < 1e-9,
                "{kind:?}"
            );
        }
    }

    fn eps_powi(e: f64, k: i32) -> f64 {
        e.powi(k)
    }

    #[test]
    fn epsilon_fit_degenerate_inputs() {
        assert!(fit_epsilon_from_t2(&[(1e-3, 0.01, 1e-4)], SequenceKind::Xx).is_err());
        assert!(
            fit_epsilon_from_t2(&[(1e-3, 0.01, 1e-4), (2e-3, -0.02, 1e-4)], SequenceKind::Xx)
                .is_err()
        );
    }

    #[test]
    fn ou_global_noiseless_recovery() {
        let ou = OuParams::<f64>::reference();
        let mut curves = Vec::new();
        for n in [2u32, 4, 8] {
            let ts = grid(8e-3 * n as f64, 40e-3 * n as f64, 8);
            let pts: Vec<CurvePoint> = ts
                .iter()
                .map(|&t| CurvePoint {
                    t_spin_s: t,
                    eta: (-2.0 * gamma_ou(n, t / n as f64, &ou)).exp(),
                    sigma_eta: 1e-4,
                })
                .collect();
            curves.push(
                DecayCurve::new(
                    pts,
                    CurveMeta {
                        fixed: FixedVar::PulseCount(n),
                        ..Default::default()
                    },
                )
                .unwrap(),
            );
        }
        let fit = fit_ou_global(&curves).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(
            (fit.value("sigma_hz").unwrap() - 15.1).abs() < 1e-3,
            "{fit:?}"
        );
        assert!((fit.value("tau_c_s").unwrap() - 9.5e-3).abs() < 1e-6);
        for n in [2u32, 4, 8] {
            assert!((fit.value(&format!("amp_n{n}")).unwrap() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn ou_global_requires_distinct_n() {
        let ou = OuParams::<f64>::reference();
        let mk = |n: u32| {
            let ts = grid(10e-3, 60e-3, 6);
            DecayCurve::new(
                ts.iter()
                    .map(|&t| CurvePoint {
                        t_spin_s: t,
                        eta: (-2.0 * gamma_ou(n, t / n as f64, &ou)).exp(),
                        sigma_eta: 1e-3,
                    })
                    .collect(),
                CurveMeta {
                    fixed: FixedVar::PulseCount(n),
                    ..Default::default()
                },
            )
            .unwrap()
        };
        assert!(fit_ou_global(&[mk(2), mk(2)]).is_err());
        assert!(fit_ou_global(&[mk(2)]).is_err());
    }

    #[test]
    fn compare_models_on_pure_exponential() {
        let t2 = 0.08;
        let c = synth_curve(|t| (-2.0 * t / t2).exp(), &grid(4e-3, 0.2, 16), 1e-4);
        let table = compare_models(&c).unwrap();
        let get = |id: ModelId| table.iter().find(|r| r.model == id).unwrap();
        let exp = get(ModelId::Exp);
        let stretched = get(ModelId::Stretched);
        let gauss = get(ModelId::Gauss);
        // exponential and stretched agree; Gaussian deviates most
        assert!((exp.t2_s - stretched.t2_s).abs() / exp.t2_s < 0.01);
        assert!(gauss.rel_deviation.abs() > exp.rel_deviation.abs());
        assert!(gauss.rel_deviation.abs() > stretched.rel_deviation.abs());
    }

    #[test]
    fn unweighted_curve_flagged() {
        let mut c = synth_curve(|t| (-2.0 * t / 0.1).exp(), &grid(5e-3, 0.2, 12), 1.0);
        c.meta.weights_supplied = false;
        let fit = fit_decay(&c, FitModel::Exp).unwrap();
        assert!(!fit.weighted);
    }

    #[test]
    fn fit_result_json_round_trip() {
        let c = synth_curve(|t| (-2.0 * t / 0.1).exp(), &grid(5e-3, 0.2, 12), 1e-3);
        let fit = fit_decay(&c, FitModel::Exp).unwrap();
        let json = fit.to_json();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(fit, back);
    }
}
