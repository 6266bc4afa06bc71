//! Variance-exploding diffusion: noise schedules, the scalar weighting
//! functions, the forward noising process and denoisers.

mod container;
mod toy;
mod train;

use ndarray::Array4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::events::EventVolume;

pub use container::{read_container, write_container, NamedArray};
pub use toy::{event_features, Arch, ToyDenoiser, EVENT_FEATURES};
pub use train::{train_denoiser, TrainConfig, TrainReport, TrainSample};

/// Sampler state and denoiser output: `F x C x H x W`.
pub type Latent = Array4<f64>;

pub const DEFAULT_SIGMA_MIN: f64 = 0.002;
pub const DEFAULT_SIGMA_MAX: f64 = 80.0;
pub const DEFAULT_RHO: f64 = 7.0;
pub const DEFAULT_STEPS: usize = 30;
pub const DEFAULT_SIGMA_DATA: f64 = 0.5;

/// Strictly decreasing noise levels `sigma_T > ... > sigma_1 > 0`, followed
/// by a terminal exact zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    sigma_data: f64,
}

impl NoiseSchedule {
    pub fn from_sigmas(sigmas: Vec<f64>, sigma_data: f64) -> Result<Self> {
        if sigmas.len() < 2 || *sigmas.last().unwrap() != 0.0 {
            return Err(Error::InvalidArgument("schedule must have at least one step and end in 0".into()));
        }
        if sigmas.windows(2).any(|w| !(w[1] < w[0])) || !sigmas[0].is_finite() {
            return Err(Error::InvalidArgument("schedule must be finite and strictly decreasing".into()));
        }
        if !(sigma_data > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma_data {sigma_data} must be > 0")));
        }
        Ok(Self { sigmas, sigma_data })
    }

    pub fn with_sigma_data(mut self, sigma_data: f64) -> Result<Self> {
        if !(sigma_data > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma_data {sigma_data} must be > 0")));
        }
        self.sigma_data = sigma_data;
        Ok(self)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma_data(&self) -> f64 {
        self.sigma_data
    }

    /// Number of reverse steps `T`.
    pub fn steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas[0]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX, DEFAULT_STEPS, DEFAULT_RHO).unwrap()
    }
}

/// Power-law (`rho`-warped) interpolation from `sigma_max` down to
/// `sigma_min` over `steps` levels, then 0.
pub fn make_schedule(sigma_min: f64, sigma_max: f64, steps: usize, rho: f64) -> Result<NoiseSchedule> {
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} must be > 0")));
    }
    let (hi, lo) = (sigma_max.powf(1.0 / rho), sigma_min.powf(1.0 / rho));
    let mut sigmas: Vec<f64> = (0..steps)
        .map(|i| match i {
            0 => sigma_max,
            i if i == steps - 1 => sigma_min,
            i => (hi + i as f64 / (steps - 1) as f64 * (lo - hi)).powf(rho),
        })
        .collect();
    sigmas.push(0.0);
    NoiseSchedule::from_sigmas(sigmas, DEFAULT_SIGMA_DATA)
}

/// `(sigma^2 + sigma_data^2) / (sigma + sigma_data)^2`
pub fn lambda_weight(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma + sigma_data).powi(2)
}

/// `1 - exp(-sigma)`
pub fn alpha_weight(sigma: f64) -> f64 {
    -(-sigma).exp_m1()
}

pub fn forward_noise(x0: &Latent, sigma: f64, seed: u64) -> Latent {
    if sigma == 0.0 {
        return x0.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x0.mapv(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        v + sigma * n
    })
}

/// Posterior mean of `x0 ~ N(mu, s0^2)` given `x = x0 + sigma * n`.
pub fn posterior_mean_gaussian(x: f64, sigma: f64, mu: f64, s0: f64) -> f64 {
    let (v0, v) = (s0 * s0, sigma * sigma);
    (v0 * x + v * mu) / (v0 + v)
}

/// Maps a noisy latent at level `sigma` to an estimate of the clean latent.
pub trait Denoiser {
    fn denoise(&self, noisy: &Latent, condition: &EventVolume, sigma: f64) -> Result<Latent>;
}

/// Exact minimum-MSE denoiser for i.i.d. `N(mu, s0^2)` data; ignores the
/// condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPosteriorDenoiser {
    pub mu: f64,
    pub s0: f64,
}

impl Denoiser for GaussianPosteriorDenoiser {
    fn denoise(&self, noisy: &Latent, _condition: &EventVolume, sigma: f64) -> Result<Latent> {
        Ok(noisy.mapv(|x| posterior_mean_gaussian(x, sigma, self.mu, self.s0)))
    }
}

/// Always predicts the same value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDenoiser(pub f64);

impl Denoiser for ConstantDenoiser {
    fn denoise(&self, noisy: &Latent, _condition: &EventVolume, _sigma: f64) -> Result<Latent> {
        Ok(Array4::from_elem(noisy.raw_dim(), self.0))
    }
}
