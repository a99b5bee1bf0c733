//! Ornstein-Uhlenbeck frequency-detuning processes: stationary draws, exact
//! pathwise discretization, and exact joint (endpoint, phase-integral) draws
//! for pulse-free segments.
//!
//! Sigma is stored in angular units (rad/s); user-facing constructors and
//! accessors speak sigma/2pi in Hz.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spectral-diffusion parameters of the OU process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams<R> {
    /// Stationary standard deviation, rad/s.
    pub sigma_rad_s: R,
    /// Correlation time, seconds.
    pub tau_c_s: R,
}

impl<R: Real> OuParams<R> {
    pub fn new(sigma_rad_s: R, tau_c_s: R) -> Result<Self> {
        if sigma_rad_s < R::zero() || !sigma_rad_s.is_finite() {
            return Err(Error::InvalidInput("sigma must be >= 0".into()));
        }
        if tau_c_s <= R::zero() || !tau_c_s.is_finite() {
            return Err(Error::InvalidInput("tau_c must be > 0".into()));
        }
        Ok(Self {
            sigma_rad_s,
            tau_c_s,
        })
    }

    /// Builds from the conventional sigma/2pi in Hz.
    pub fn from_sigma_hz(sigma_hz: R, tau_c_s: R) -> Result<Self> {
        Self::new(sigma_hz * R::of(std::f64::consts::TAU), tau_c_s)
    }

    pub fn sigma_hz(&self) -> R {
        self.sigma_rad_s / R::of(std::f64::consts::TAU)
    }

    /// Fitted parameters reported for the reference system:
    /// sigma/2pi = 15.1 Hz, tau_c = 9.5 ms.
    pub fn reference() -> Self {
        Self::from_sigma_hz(R::of(15.1), R::of(9.5e-3)).unwrap()
    }
}

/// Counter-based substream of a master seed. Distinct stream indices give
/// statistically independent generators, so trajectories can be assigned
/// fixed streams and run in any order or parallelism degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn draw_normal<R: Real>(rng: &mut ChaCha8Rng) -> R
where
    StandardNormal: Distribution<R>,
{
    StandardNormal.sample(rng)
}

/// One draw from the stationary law Normal(0, sigma^2).
pub fn sample_stationary<R: Real>(params: &OuParams<R>, stream: &RngStream) -> R
where
    StandardNormal: Distribution<R>,
{
    params.sigma_rad_s * draw_normal::<R>(&mut stream.rng())
}

/// Exact-discretization sample path x_0..x_steps; distributionally exact for
/// any dt: x_{k+1} = x_k e^{-dt/tau_c} + sigma sqrt(1 - e^{-2 dt/tau_c}) N(0,1).
pub fn ou_path<R: Real>(
    params: &OuParams<R>,
    x0: R,
    dt_s: R,
    steps: usize,
    stream: &RngStream,
) -> Vec<R>
where
    StandardNormal: Distribution<R>,
{
    assert!(dt_s > R::zero(), "ou_path requires dt > 0");
    let mut rng = stream.rng();
    let decay = (-dt_s / params.tau_c_s).exp();
    let kick = params.sigma_rad_s * (R::one() - decay * decay).sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x0);
    let mut x = x0;
    for _ in 0..steps {
        x = x * decay + kick * draw_normal::<R>(&mut rng);
        path.push(x);
    }
    path
}

/// var_I(x)/(sigma^2 tau_c^2) = 2x - 3 + 4 e^-x - e^-2x, series-protected
/// against cancellation for small x = T/tau_c.
fn integral_var_shape<R: Real>(x: R) -> R {
    if x < R::of(0.028) {
        // (2/3)x^3 - (1/2)x^4 + (7/30)x^5 - (1/12)x^6 + (31/1260)x^7
        let x3 = x * x * x;
        x3 * (R::of(2.0 / 3.0)
            + x * (R::of(-0.5)
                + x * (R::of(7.0 / 30.0) + x * (R::of(-1.0 / 12.0) + x * R::of(31.0 / 1260.0)))))
    } else {
        let e1 = (-x).exp();
        let e2 = (-(x + x)).exp();
        R::of(2.0) * x - R::of(3.0) + R::of(4.0) * e1 - e2
    }
}

/// Exact first and second moments of (x_T, integral of x dt) over a
/// pulse-free segment of duration T, conditional on the segment's start
/// value. Precompute once per distinct duration, then draw cheaply.
#[derive(Debug, Clone, Copy)]
pub struct SegmentMoments<R> {
    /// e^{-T/tau_c}: multiplies x0 in the endpoint mean.
    pub decay: R,
    /// tau_c (1 - e^{-T/tau_c}): multiplies x0 in the integral mean.
    pub integral_gain: R,
    /// Std of the endpoint about its mean.
    pub std_x: R,
    /// Regression coefficient of the integral on the endpoint deviation.
    pub slope: R,
    /// Std of the integral residual after conditioning on the endpoint.
    pub resid_std: R,
}

impl<R: Real> SegmentMoments<R> {
    pub fn new(params: &OuParams<R>, duration_s: R) -> Result<Self> {
        if duration_s < R::zero() {
            return Err(Error::InvalidInput("segment duration must be >= 0".into()));
        }
        let tc = params.tau_c_s;
        let sig = params.sigma_rad_s;
        let x = duration_s / tc;
        let one_minus_u = -(-x).exp_m1(); // 1 - e^{-x}, exact at small x
        let decay = R::one() - one_minus_u;
        let integral_gain = tc * one_minus_u;
        let var_x = sig * sig * -(-(x + x)).exp_m1(); // sigma^2 (1 - e^{-2x})
        let var_i = sig * sig * tc * tc * integral_var_shape(x);
        let cov = sig * sig * tc * one_minus_u * one_minus_u;
        if var_x <= R::zero() {
            // sigma == 0 or zero-length segment: fully deterministic
            return Ok(Self {
                decay,
                integral_gain,
                std_x: R::zero(),
                slope: R::zero(),
                resid_std: R::zero(),
            });
        }
        let resid_var = (var_i - cov * cov / var_x).max(R::zero());
        Ok(Self {
            decay,
            integral_gain,
            std_x: var_x.sqrt(),
            slope: cov / var_x,
            resid_std: resid_var.sqrt(),
        })
    }

    /// Maps a start value and two standard normals to the joint draw
    /// (endpoint, phase integral).
    pub fn draw(&self, x0: R, z1: R, z2: R) -> (R, R) {
        let dx = self.std_x * z1;
        let x_end = x0 * self.decay + dx;
        let integral = x0 * self.integral_gain + self.slope * dx + self.resid_std * z2;
        (x_end, integral)
    }

    pub fn sample(&self, x0: R, rng: &mut ChaCha8Rng) -> (R, R)
    where
        StandardNormal: Distribution<R>,
    {
        let z1 = draw_normal::<R>(rng);
        let z2 = draw_normal::<R>(rng);
        self.draw(x0, z1, z2)
    }
}

/// Draws (x_T, integral_0^T x dt) from the exact bivariate Gaussian law
/// conditional on x0.
pub fn segment_joint_sample<R: Real>(
    params: &OuParams<R>,
    x0: R,
    duration_s: R,
    stream: &RngStream,
) -> Result<(R, R)>
where
    StandardNormal: Distribution<R>,
{
    let m = SegmentMoments::new(params, duration_s)?;
    Ok(m.sample(x0, &mut stream.rng()))
}
