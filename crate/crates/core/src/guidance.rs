//! Inter-frame residual guidance: an L1 loss between decoded frame
//! differences and event-predicted residuals, its subgradient through the
//! decoder, and the strength schedules.

use std::borrow::Cow;

use nalgebra::{Matrix3, Vector3};
use ndarray::{s, Array4};

use crate::diffusion::Latent;
use crate::error::{Error, Result};
use crate::events::EventVolume;
use crate::sampler::{Decoder, StepContext, StepHook};
use crate::simulator::{frame_differences, residual_from_volume, ResidualField, SimConfig};

fn aligned<'a>(r: &'a ResidualField, diffs: &ResidualField) -> Result<Cow<'a, ResidualField>> {
    let (k, c, h, w) = diffs.data().dim();
    let r = if r.data().shape()[1] != c { Cow::Owned(r.broadcast_channels(c)?) } else { Cow::Borrowed(r) };
    if r.data().dim() != (k, c, h, w) {
        return Err(Error::Shape(format!("residual {:?} does not match frame differences {:?}", r.data().shape(), diffs.data().shape())));
    }
    Ok(r)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sum |dD(U) - R|` over every element of every gap. A single-channel `R`
/// is broadcast over the decoded channels.
pub fn residual_loss(u: &Latent, r: &ResidualField, decoder: &Decoder) -> Result<f64> {
    let diffs = frame_differences(&decoder.decode(u)?);
    let r = aligned(r, &diffs)?;
    Ok(diffs.data().iter().zip(r.data().iter()).map(|(d, r)| (d - r).abs()).sum())
}

/// Subgradient of [`residual_loss`] with `sign(0) = 0`.
pub fn residual_grad(u: &Latent, r: &ResidualField, decoder: &Decoder) -> Result<Latent> {
    let frames = decoder.decode(u)?;
    let diffs = frame_differences(&frames);
    let r = aligned(r, &diffs)?;
    let signs = Array4::from_shape_fn(diffs.data().raw_dim(), |i| sign(diffs.data()[i] - r.data()[i]));
    let gaps = signs.shape()[0];
    let mut pixel_grad = Array4::zeros(frames.raw_dim());
    if gaps > 0 {
        // frame f gains +S_{f-1} and -S_f
        pixel_grad.slice_mut(s![1.., .., .., ..]).assign(&signs);
        let mut head = pixel_grad.slice_mut(s![..gaps, .., .., ..]);
        head -= &signs;
    }
    decoder.adjoint(&pixel_grad)
}

/// One subgradient step `U - s * grad`.
pub fn guide(u: &Latent, r: &ResidualField, strength: f64, decoder: &Decoder) -> Result<Latent> {
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::InvalidArgument(format!("guidance strength {strength} must be >= 0")));
    }
    if strength == 0.0 {
        return Ok(u.clone());
    }
    let g = residual_grad(u, r, decoder)?;
    Ok(u - &(g * strength))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrengthMode {
    Constant,
    Linear,
    Exponential,
}

impl std::str::FromStr for StrengthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::InvalidArgument(format!("unknown guidance mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for StrengthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Exponential => "exponential",
        })
    }
}

/// Decay rate of the exponential schedule: the last step gets `e^-5` of
/// `s_max`.
pub const EXP_DECAY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceSchedule {
    pub mode: StrengthMode,
    pub s_max: f64,
    /// Guidance runs on the final `window` sampling steps.
    pub window: usize,
}

impl Default for GuidanceSchedule {
    fn default() -> Self {
        Self { mode: StrengthMode::Linear, s_max: 0.1, window: 10 }
    }
}

impl GuidanceSchedule {
    pub fn new(mode: StrengthMode, s_max: f64, window: usize) -> Result<Self> {
        if !(s_max >= 0.0 && s_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("s_max {s_max} must be >= 0")));
        }
        Ok(Self { mode, s_max, window })
    }

    /// Strength at position `k` (0-based) inside the window.
    pub fn strength(&self, k: usize) -> Result<f64> {
        if k >= self.window {
            return Err(Error::InvalidArgument(format!("step {k} outside guidance window of {}", self.window)));
        }
        let frac = if self.window == 1 { 0.0 } else { k as f64 / (self.window - 1) as f64 };
        Ok(match self.mode {
            StrengthMode::Constant => self.s_max,
            StrengthMode::Linear => self.s_max * (1.0 - frac),
            StrengthMode::Exponential => self.s_max * (-EXP_DECAY * frac).exp(),
        })
    }
}

pub fn schedule_strength(schedule: &GuidanceSchedule, k: usize) -> Result<f64> {
    schedule.strength(k)
}

/// Affine map from the positive and negative event channels of a gap to
/// its residual: `R = a * ch1 + b * ch2 + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResidualPredictor {
    pub coefficients: [f64; 3],
}

impl LinearResidualPredictor {
    /// Least-squares fit over `(volume, true frame differences)` pairs.
    pub fn fit(pairs: &[(EventVolume, ResidualField)]) -> Result<Self> {
        let mut gram = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (vol, target) in pairs {
            let f = vol.frames();
            let t = target.data();
            if f < 2 || t.shape()[0] != f - 1 || t.shape()[2] != vol.height() || t.shape()[3] != vol.width() {
                return Err(Error::Shape(format!("residual target {:?} does not match volume of {f} frames", t.shape())));
            }
            for ((k, _, y, x), &r) in t.indexed_iter() {
                let z = Vector3::new(vol.data()[[k + 1, 1, y, x]], vol.data()[[k + 1, 2, y, x]], 1.0);
                gram += z * z.transpose();
                rhs += z * r;
            }
        }
        let smallest = gram.symmetric_eigenvalues().min();
        let chol = gram.cholesky().ok_or(Error::RankDeficient { smallest })?;
        let a = chol.solve(&rhs);
        Ok(Self { coefficients: [a[0], a[1], a[2]] })
    }

    pub fn predict(&self, volume: &EventVolume) -> ResidualField {
        let f = volume.frames();
        let [a, b, c] = self.coefficients;
        if f < 2 {
            return ResidualField::from_array(Array4::zeros((0, 1, volume.height(), volume.width())));
        }
        let d = volume.data();
        let out = Array4::from_shape_fn((f - 1, 1, volume.height(), volume.width()), |(k, _, y, x)| a * d[[k + 1, 1, y, x]] + b * d[[k + 1, 2, y, x]] + c);
        ResidualField::from_array(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualPredictor {
    /// `C * ch0` with the simulator's threshold.
    Oracle(SimConfig),
    Learned(LinearResidualPredictor),
}

impl ResidualPredictor {
    pub fn predict(&self, volume: &EventVolume) -> ResidualField {
        match self {
            Self::Oracle(cfg) => residual_from_volume(volume, cfg),
            Self::Learned(p) => p.predict(volume),
        }
    }
}

/// Sampler hook applying [`guide`] on the last `window` steps.
#[derive(Debug, Clone)]
pub struct GuidanceHook {
    pub residual: ResidualField,
    pub decoder: Decoder,
    pub schedule: GuidanceSchedule,
}

impl StepHook for GuidanceHook {
    fn active(&self, ctx: &StepContext) -> bool {
        ctx.remaining() <= self.schedule.window
    }

    fn apply(&self, estimate: &mut Latent, ctx: &StepContext) -> Result<()> {
        let k = self.schedule.window - ctx.remaining();
        let s = self.schedule.strength(k)?;
        if s > 0.0 {
            *estimate = guide(estimate, &self.residual, s, &self.decoder)?;
        }
        Ok(())
    }

    fn check(&self, steps: usize) -> Result<()> {
        if self.schedule.window > steps {
            return Err(Error::InvalidArgument(format!("guidance window {} exceeds {steps} sampling steps", self.schedule.window)));
        }
        Ok(())
    }
}
