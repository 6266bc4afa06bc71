//! Deterministic reverse diffusion with per-step hooks, plus the decoder
//! between latent and frame space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::Array4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::{Denoiser, Latent, NoiseSchedule};
use crate::error::{Error, Result};
use crate::events::EventVolume;
use crate::simulator::FrameSequence;

/// One Euler step of the variance-exploding probability-flow ODE:
/// `x - (x - u) / sigma * (sigma - sigma_prev)`. Returns `u` exactly when
/// `sigma_prev == 0`.
pub fn reverse_step(x: &Latent, u: &Latent, sigma: f64, sigma_prev: f64) -> Result<Latent> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma {sigma} must be > 0")));
    }
    if !(sigma_prev >= 0.0 && sigma_prev <= sigma) {
        return Err(Error::InvalidArgument(format!("sigma_prev {sigma_prev} must lie in [0, {sigma}]")));
    }
    if x.dim() != u.dim() {
        return Err(Error::Shape(format!("latent {:?} vs estimate {:?}", x.shape(), u.shape())));
    }
    if sigma_prev == 0.0 {
        return Ok(u.clone());
    }
    let ratio = (sigma - sigma_prev) / sigma;
    let mut out = x.clone();
    out.zip_mut_with(u, |xv, &uv| *xv -= (*xv - uv) * ratio);
    Ok(out)
}

/// Where in the schedule a hook is being called.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    /// 0-based step index; step `i` goes from `sigmas[i]` to `sigmas[i + 1]`.
    pub step: usize,
    pub steps: usize,
    pub sigma: f64,
    pub sigma_prev: f64,
}

impl StepContext {
    /// Steps left including this one (`1` on the final step).
    pub fn remaining(&self) -> usize {
        self.steps - self.step
    }
}

/// Adjusts the clean-latent estimate before the reverse step.
pub trait StepHook {
    fn active(&self, _ctx: &StepContext) -> bool {
        true
    }

    fn apply(&self, estimate: &mut Latent, ctx: &StepContext) -> Result<()>;

    /// Called once with the schedule length before sampling starts.
    fn check(&self, _steps: usize) -> Result<()> {
        Ok(())
    }
}

pub struct SamplerConfig<'a> {
    pub schedule: NoiseSchedule,
    /// `(frames, channels, height, width)` of the latent.
    pub latent_shape: (usize, usize, usize, usize),
    /// Applied in order on every step where they are active. Zero-shot
    /// modulation goes before residual guidance.
    pub hooks: Vec<&'a dyn StepHook>,
    pub seed: u64,
    /// Keep a copy of the latent every `k` steps.
    pub trace_every: Option<usize>,
}

impl<'a> SamplerConfig<'a> {
    pub fn new(schedule: NoiseSchedule, latent_shape: (usize, usize, usize, usize), seed: u64) -> Self {
        Self { schedule, latent_shape, hooks: Vec::new(), seed, trace_every: None }
    }

    pub fn with_hook(mut self, hook: &'a dyn StepHook) -> Self {
        self.hooks.push(hook);
        self
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub latent: Latent,
    /// `(steps completed, latent)` snapshots.
    pub trace: Vec<(usize, Latent)>,
}

/// Starts from `N(0, sigma_T^2 I)` and integrates down the schedule. Each
/// step estimates the clean latent, lets the active hooks adjust it and
/// takes one [`reverse_step`].
pub fn sample(denoiser: &dyn Denoiser, condition: &EventVolume, config: &SamplerConfig<'_>) -> Result<SampleOutput> {
    let steps = config.schedule.steps();
    for hook in &config.hooks {
        hook.check(steps)?;
    }
    let sigmas = config.schedule.sigmas();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = Array4::from_shape_simple_fn(config.latent_shape, || {
        let n: f64 = StandardNormal.sample(&mut rng);
        sigmas[0] * n
    });
    let mut trace = Vec::new();
    for step in 0..steps {
        let ctx = StepContext { step, steps, sigma: sigmas[step], sigma_prev: sigmas[step + 1] };
        let mut u = denoiser.denoise(&x, condition, ctx.sigma)?;
        if u.dim() != x.dim() {
            return Err(Error::Shape(format!("denoiser returned {:?} for latent {:?}", u.shape(), x.shape())));
        }
        for hook in &config.hooks {
            if hook.active(&ctx) {
                hook.apply(&mut u, &ctx)?;
            }
        }
        x = reverse_step(&x, &u, ctx.sigma, ctx.sigma_prev)?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteLatent { step });
        }
        if let Some(k) = config.trace_every {
            if k > 0 && (step + 1) % k == 0 {
                trace.push((step + 1, x.clone()));
            }
        }
    }
    Ok(SampleOutput { latent: x, trace })
}

/// Maps latents to frames, one frame at a time.
#[derive(Debug, Clone)]
pub enum Decoder {
    Identity,
    Linear(LinearDecoder),
}

/// A fixed matrix `A` (`frame_dim x latent_dim`, full column rank) applied
/// to each flattened latent frame.
#[derive(Debug, Clone)]
pub struct LinearDecoder {
    matrix: DMatrix<f64>,
    latent_shape: (usize, usize, usize),
    frame_shape: (usize, usize, usize),
    gram: Cholesky<f64, Dyn>,
}

impl LinearDecoder {
    pub fn new(matrix: DMatrix<f64>, latent_shape: (usize, usize, usize), frame_shape: (usize, usize, usize)) -> Result<Self> {
        let n = latent_shape.0 * latent_shape.1 * latent_shape.2;
        let m = frame_shape.0 * frame_shape.1 * frame_shape.2;
        if matrix.shape() != (m, n) {
            return Err(Error::Shape(format!("decoder matrix {:?} does not map {latent_shape:?} to {frame_shape:?}", matrix.shape())));
        }
        let gram = Cholesky::new(matrix.transpose() * &matrix).ok_or(Error::RankDeficient { smallest: 0.0 })?;
        Ok(Self { matrix, latent_shape, frame_shape, gram })
    }

    /// Channel mixing at every pixel: the `c_out x c_in` matrix `mix` is
    /// applied independently to each of the `h x w` positions.
    pub fn channel_mix(mix: &DMatrix<f64>, height: usize, width: usize) -> Result<Self> {
        let (co, ci) = mix.shape();
        let px = height * width;
        let mut a = DMatrix::zeros(co * px, ci * px);
        for o in 0..co {
            for i in 0..ci {
                for p in 0..px {
                    a[(o * px + p, i * px + p)] = mix[(o, i)];
                }
            }
        }
        Self::new(a, (ci, height, width), (co, height, width))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn latent_shape(&self) -> (usize, usize, usize) {
        self.latent_shape
    }

    pub fn frame_shape(&self) -> (usize, usize, usize) {
        self.frame_shape
    }

    fn map_frames(&self, input: &Array4<f64>, from: (usize, usize, usize), to: (usize, usize, usize), f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Array4<f64>> {
        let (frames, c, h, w) = input.dim();
        if (c, h, w) != from {
            return Err(Error::Shape(format!("expected frames of {from:?}, got {:?}", (c, h, w))));
        }
        let mut out = Array4::zeros((frames, to.0, to.1, to.2));
        for fi in 0..frames {
            let v = DVector::from_iterator(c * h * w, input.slice(ndarray::s![fi, .., .., ..]).iter().copied());
            let r = f(&v);
            out.slice_mut(ndarray::s![fi, .., .., ..]).iter_mut().zip(r.iter()).for_each(|(o, x)| *o = *x);
        }
        Ok(out)
    }
}

impl Decoder {
    pub fn decode(&self, latent: &Latent) -> Result<Array4<f64>> {
        match self {
            Decoder::Identity => Ok(latent.clone()),
            Decoder::Linear(d) => d.map_frames(latent, d.latent_shape, d.frame_shape, |v| &d.matrix * v),
        }
    }

    /// `A^T` applied per frame: pulls a frame-space gradient back to the
    /// latent space.
    pub fn adjoint(&self, frame_grad: &Array4<f64>) -> Result<Latent> {
        match self {
            Decoder::Identity => Ok(frame_grad.clone()),
            Decoder::Linear(d) => d.map_frames(frame_grad, d.frame_shape, d.latent_shape, |v| d.matrix.tr_mul(v)),
        }
    }

    /// Least-squares inverse `(A^T A)^{-1} A^T`, used to bring reference
    /// frames into the latent space.
    pub fn encode(&self, frames: &Array4<f64>) -> Result<Latent> {
        match self {
            Decoder::Identity => Ok(frames.clone()),
            Decoder::Linear(d) => d.map_frames(frames, d.frame_shape, d.latent_shape, |v| d.gram.solve(&d.matrix.tr_mul(v))),
        }
    }
}

/// Decodes a latent into a frame sequence on a uniform timeline.
pub fn decode(latent: &Latent, decoder: &Decoder) -> Result<FrameSequence> {
    FrameSequence::uniform(decoder.decode(latent)?)
}
