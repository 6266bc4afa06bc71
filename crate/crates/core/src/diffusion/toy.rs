//! A small per-pixel conditional denoiser.
//!
//! Each pixel is mapped independently (a 1x1 "convolution" shared across
//! frames and positions). The input is the concatenation of the noisy latent
//! channels, the event features of that pixel and two noise-level terms:
//!
//! ```text
//! z = [c_skip*x, c_in*x, e, c_skip*e, 1, c_skip]
//! c_skip = sd^2 / (sigma^2 + sd^2),  c_in = 1 / sqrt(sigma^2 + sd^2)
//! ```
//!
//! The affine architecture outputs `W z`; the MLP adds a one-hidden-layer
//! tanh branch `V tanh(W1 z + b1)` on top of the same affine path. With these
//! features the Gaussian posterior mean around an event-linear prior and the
//! noise-free event-linear map are both exactly representable.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Denoiser, Latent};
use crate::error::{Error, Result};
use crate::events::EventVolume;

/// Event features per pixel: the three stacked channels and the running
/// signed sum of channel 0 up to the current frame.
pub const EVENT_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Affine,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiser {
    arch: Arch,
    channels: usize,
    sigma_data: f64,
    event_scale: f64,
    params: Vec<f64>,
}

/// `F x EVENT_FEATURES x H x W` features of a condition volume, scaled by
/// `scale`.
pub fn event_features(volume: &EventVolume, scale: f64) -> Array4<f64> {
    let (f, _, h, w) = volume.data().dim();
    let mut out = Array4::zeros((f, EVENT_FEATURES, h, w));
    let v = volume.data();
    for y in 0..h {
        for x in 0..w {
            let mut running = 0.0;
            for fi in 0..f {
                running += v[[fi, 0, y, x]];
                for c in 0..3 {
                    out[[fi, c, y, x]] = scale * v[[fi, c, y, x]];
                }
                out[[fi, 3, y, x]] = scale * running;
            }
        }
    }
    out
}

struct Layout {
    dim: usize,
    linear: usize,
    hidden_w: usize,
    hidden_b: usize,
    out_w: usize,
    total: usize,
}

impl ToyDenoiser {
    pub fn new(arch: Arch, channels: usize, sigma_data: f64, event_scale: f64, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("denoiser needs at least one channel".into()));
        }
        if !(sigma_data > 0.0) || !(event_scale.is_finite()) {
            return Err(Error::InvalidArgument("sigma_data must be > 0 and event_scale finite".into()));
        }
        if let Arch::Mlp { hidden: 0 } = arch {
            return Err(Error::InvalidArgument("MLP needs at least one hidden unit".into()));
        }
        let mut model = Self { arch, channels, sigma_data, event_scale, params: Vec::new() };
        let lay = model.layout();
        model.params = vec![0.0; lay.total];
        // Start from the posterior mean of a N(0.5, sd^2) prior:
        // u = c_skip * x + (1 - c_skip) * 0.5
        for c in 0..channels {
            model.params[lay.linear + c * lay.dim + c] = 1.0;
            model.params[lay.linear + c * lay.dim + lay.dim - 2] = 0.5;
            model.params[lay.linear + c * lay.dim + lay.dim - 1] = -0.5;
        }
        if let Arch::Mlp { hidden } = arch {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w1 = Normal::new(0.0, 1.0 / (lay.dim as f64).sqrt()).unwrap();
            for p in &mut model.params[lay.hidden_w..lay.hidden_w + hidden * lay.dim] {
                *p = w1.sample(&mut rng);
            }
            let w2 = Normal::new(0.0, 0.01).unwrap();
            for p in &mut model.params[lay.out_w..lay.total] {
                *p = w2.sample(&mut rng);
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from a flat parameter vector (e.g. read from disk).
    pub fn from_params(arch: Arch, channels: usize, sigma_data: f64, event_scale: f64, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::new(arch, channels, sigma_data, event_scale, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", model.params.len(), params.len())));
        }
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sigma_data(&self) -> f64 {
        self.sigma_data
    }

    pub fn event_scale(&self) -> f64 {
        self.event_scale
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Length of the per-pixel input vector.
    pub fn input_dim(&self) -> usize {
        2 * self.channels + 2 * EVENT_FEATURES + 2
    }

    fn hidden(&self) -> usize {
        match self.arch {
            Arch::Affine => 0,
            Arch::Mlp { hidden } => hidden,
        }
    }

    fn layout(&self) -> Layout {
        let dim = self.input_dim();
        let hidden = self.hidden();
        let linear = 0;
        let hidden_w = linear + self.channels * dim;
        let hidden_b = hidden_w + hidden * dim;
        let out_w = hidden_b + hidden;
        let total = out_w + self.channels * hidden;
        Layout { dim, linear, hidden_w, hidden_b, out_w, total }
    }

    /// Named parameter blocks as `(name, shape, values)`.
    pub fn param_blocks(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let lay = self.layout();
        let h = self.hidden();
        let mut blocks = vec![("linear".to_string(), vec![self.channels, lay.dim], self.params[lay.linear..lay.hidden_w].to_vec())];
        if h > 0 {
            blocks.push(("hidden.weight".into(), vec![h, lay.dim], self.params[lay.hidden_w..lay.hidden_b].to_vec()));
            blocks.push(("hidden.bias".into(), vec![h], self.params[lay.hidden_b..lay.out_w].to_vec()));
            blocks.push(("output.weight".into(), vec![self.channels, h], self.params[lay.out_w..lay.total].to_vec()));
        }
        blocks
    }

    fn preconditioning(&self, sigma: f64) -> (f64, f64) {
        let sd2 = self.sigma_data * self.sigma_data;
        let v = sigma * sigma + sd2;
        (sd2 / v, 1.0 / v.sqrt())
    }

    fn check_shapes(&self, noisy: &Latent, features: &Array4<f64>) -> Result<()> {
        let (f, c, h, w) = noisy.dim();
        let (ef, _, eh, ew) = features.dim();
        if c != self.channels {
            return Err(Error::Shape(format!("model has {} channels, latent has {c}", self.channels)));
        }
        if (f, h, w) != (ef, eh, ew) {
            return Err(Error::Shape(format!("latent {:?} vs condition {:?}", noisy.shape(), features.shape())));
        }
        Ok(())
    }

    fn fill_input(&self, z: &mut [f64], noisy: &Latent, features: &Array4<f64>, idx: (usize, usize, usize), pre: (f64, f64)) {
        let (f, y, x) = idx;
        let (skip, cin) = pre;
        let c = self.channels;
        for ch in 0..c {
            let v = noisy[[f, ch, y, x]];
            z[ch] = skip * v;
            z[c + ch] = cin * v;
        }
        for j in 0..EVENT_FEATURES {
            let e = features[[f, j, y, x]];
            z[2 * c + j] = e;
            z[2 * c + EVENT_FEATURES + j] = skip * e;
        }
        z[2 * c + 2 * EVENT_FEATURES] = 1.0;
        z[2 * c + 2 * EVENT_FEATURES + 1] = skip;
    }

    fn forward_pixel(&self, z: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let lay = self.layout();
        let p = &self.params;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &p[lay.linear + c * lay.dim..lay.linear + (c + 1) * lay.dim];
            *o = dot(row, z);
        }
        for (j, hj) in hidden.iter_mut().enumerate() {
            let row = &p[lay.hidden_w + j * lay.dim..lay.hidden_w + (j + 1) * lay.dim];
            *hj = (dot(row, z) + p[lay.hidden_b + j]).tanh();
        }
        let h = hidden.len();
        for (c, o) in out.iter_mut().enumerate() {
            *o += dot(&p[lay.out_w + c * h..lay.out_w + (c + 1) * h], hidden);
        }
    }

    pub fn denoise_features(&self, noisy: &Latent, features: &Array4<f64>, sigma: f64) -> Result<Latent> {
        self.check_shapes(noisy, features)?;
        let (f, c, h, w) = noisy.dim();
        let pre = self.preconditioning(sigma);
        let mut out = Array4::zeros((f, c, h, w));
        let mut z = vec![0.0; self.input_dim()];
        let mut hid = vec![0.0; self.hidden()];
        let mut o = vec![0.0; c];
        for fi in 0..f {
            for y in 0..h {
                for x in 0..w {
                    self.fill_input(&mut z, noisy, features, (fi, y, x), pre);
                    self.forward_pixel(&z, &mut hid, &mut o);
                    for ch in 0..c {
                        out[[fi, ch, y, x]] = o[ch];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates `weight * mean((clean - u)^2)` into the returned loss and
    /// its gradient into `grad`.
    pub fn loss_and_grad(
        &self,
        noisy: &Latent,
        features: &Array4<f64>,
        clean: &Latent,
        sigma: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_shapes(noisy, features)?;
        if clean.dim() != noisy.dim() {
            return Err(Error::Shape(format!("clean {:?} vs noisy {:?}", clean.shape(), noisy.shape())));
        }
        let lay = self.layout();
        let (f, c, h, w) = noisy.dim();
        let hn = self.hidden();
        let scale = weight / noisy.len() as f64;
        let pre = self.preconditioning(sigma);
        let mut z = vec![0.0; lay.dim];
        let mut hid = vec![0.0; hn];
        let mut o = vec![0.0; c];
        let mut g = vec![0.0; c];
        let mut dh = vec![0.0; hn];
        let mut loss = 0.0;
        for fi in 0..f {
            for y in 0..h {
                for x in 0..w {
                    self.fill_input(&mut z, noisy, features, (fi, y, x), pre);
                    self.forward_pixel(&z, &mut hid, &mut o);
                    for ch in 0..c {
                        let r = o[ch] - clean[[fi, ch, y, x]];
                        loss += scale * r * r;
                        g[ch] = 2.0 * scale * r;
                    }
                    for ch in 0..c {
                        let row = &mut grad[lay.linear + ch * lay.dim..lay.linear + (ch + 1) * lay.dim];
                        axpy(g[ch], &z, row);
                    }
                    if hn > 0 {
                        dh.iter_mut().for_each(|d| *d = 0.0);
                        for ch in 0..c {
                            let wrow = &self.params[lay.out_w + ch * hn..lay.out_w + (ch + 1) * hn];
                            axpy(g[ch], wrow, &mut dh);
                            axpy(g[ch], &hid, &mut grad[lay.out_w + ch * hn..lay.out_w + (ch + 1) * hn]);
                        }
                        for j in 0..hn {
                            let da = dh[j] * (1.0 - hid[j] * hid[j]);
                            grad[lay.hidden_b + j] += da;
                            axpy(da, &z, &mut grad[lay.hidden_w + j * lay.dim..lay.hidden_w + (j + 1) * lay.dim]);
                        }
                    }
                }
            }
        }
        Ok(loss)
    }

    /// The affine weights as a `channels x input_dim` matrix.
    pub fn linear_weights(&self) -> Array2<f64> {
        let lay = self.layout();
        Array2::from_shape_vec((self.channels, lay.dim), self.params[lay.linear..lay.hidden_w].to_vec()).unwrap()
    }
}

impl Denoiser for ToyDenoiser {
    fn denoise(&self, noisy: &Latent, condition: &EventVolume, sigma: f64) -> Result<Latent> {
        self.denoise_features(noisy, &event_features(condition, self.event_scale), sigma)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
