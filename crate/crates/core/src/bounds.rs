//! Numerical check of the reconstruction-error bound
//! `sum_k |F_k - V_k|_1 <= (L kappa / C) L_res + F eps / C`
//! for linear decoders, where the constants are computable.

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::diffusion::Latent;
use crate::error::{Error, Result};
use crate::guidance::{guide, residual_loss};
use crate::sampler::{Decoder, LinearDecoder};
use crate::simulator::{frame_differences, residual_from_volume, simulate_volume, FrameSequence, ResidualField, SimConfig};
use crate::synth::{moving_scene, SceneSpec};

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 200_000;

/// Largest eigenvalue of the operator `apply` (symmetric positive definite)
/// by power iteration, stopping once `|G v - lambda v| <= tol * lambda`.
fn power_iteration(n: usize, apply: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = apply(&v);
        lambda = v.dot(&w);
        let resid = (&w - &v * lambda).norm();
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if resid <= POWER_TOL * lambda.abs() {
            break;
        }
    }
    lambda
}

/// `L` is the largest singular value of `a`, `kappa = L / sigma_min`.
pub fn lipschitz_and_condition(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.ncols() == 0 || a.nrows() < a.ncols() {
        return Err(Error::RankDeficient { smallest: 0.0 });
    }
    let gram = a.transpose() * a;
    let n = gram.nrows();
    let top = power_iteration(n, |v| &gram * v);
    let chol = gram.clone().cholesky().ok_or(Error::RankDeficient { smallest: 0.0 })?;
    let inv_top = power_iteration(n, |v| chol.solve(v));
    let bottom = 1.0 / inv_top;
    if !(bottom > top * 1e-14) {
        return Err(Error::RankDeficient { smallest: bottom.max(0.0).sqrt() });
    }
    let (l, smin) = (top.sqrt(), bottom.sqrt());
    Ok((l, l / smin))
}

#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub decoder: LinearDecoder,
    pub latents: Latent,
    /// Ground-truth frames `V`.
    pub truth: Array4<f64>,
    pub residual: ResidualField,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lipschitz: f64,
    pub kappa: f64,
    pub threshold: f64,
    /// `max_k |R_k - dV_k|_1`
    pub epsilon: f64,
    pub loss: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// How the left side is anchored: reconstructed frame 0 is shifted onto `V_0`
/// and every later frame by the same offset.
pub const ANCHORING: &str = "frame0=V0";

fn l1(a: ndarray::ArrayView3<'_, f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn check_bound(instance: &BoundInstance) -> Result<BoundReport> {
    let c = instance.threshold;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("contrast threshold {c} must be > 0")));
    }
    let (l, kappa) = lipschitz_and_condition(instance.decoder.matrix())?;
    let decoder = Decoder::Linear(instance.decoder.clone());
    let frames = decoder.decode(&instance.latents)?;
    if frames.dim() != instance.truth.dim() {
        return Err(Error::Shape(format!("decoded {:?} vs truth {:?}", frames.shape(), instance.truth.shape())));
    }
    let f = frames.shape()[0];
    let dv = frame_differences(&instance.truth);
    let r = instance.residual.broadcast_channels(frames.shape()[1])?;
    if r.data().dim() != dv.data().dim() {
        return Err(Error::Shape(format!("residual {:?} vs frame differences {:?}", r.data().shape(), dv.data().shape())));
    }
    let epsilon = (0..dv.gaps())
        .map(|k| l1((&r.data().slice(s![k, .., .., ..]) - &dv.data().slice(s![k, .., .., ..])).view()))
        .fold(0.0, f64::max);
    let loss = residual_loss(&instance.latents, &r, &decoder)?;
    // frame 0 contributes nothing once anchored
    let (f0, v0) = (frames.slice(s![0, .., .., ..]), instance.truth.slice(s![0, .., .., ..]));
    let lhs = (1..f)
        .map(|k| l1(((&frames.slice(s![k, .., .., ..]) - &f0) - (&instance.truth.slice(s![k, .., .., ..]) - &v0)).view()))
        .sum();
    let rhs = l * kappa / c * loss + f as f64 * epsilon / c;
    Ok(BoundReport { lipschitz: l, kappa, threshold: c, epsilon, loss, lhs, rhs, holds: lhs <= rhs })
}

/// Applies one guidance step to the instance's latents. Starting from
/// `strength`, the step is halved until the residual loss does not increase
/// (at most 30 times; the step is dropped otherwise). Returns the step
/// actually taken.
pub fn guided_step(instance: &mut BoundInstance, strength: f64) -> Result<f64> {
    let decoder = Decoder::Linear(instance.decoder.clone());
    let before = residual_loss(&instance.latents, &instance.residual, &decoder)?;
    let mut s = strength;
    for _ in 0..30 {
        let next = guide(&instance.latents, &instance.residual, s, &decoder)?;
        if residual_loss(&next, &instance.residual, &decoder)? <= before {
            instance.latents = next;
            return Ok(s);
        }
        s *= 0.5;
    }
    Ok(0.0)
}

pub const BOUND_THRESHOLD: f64 = 0.05;

/// A seeded instance: 2 to 12 frames of 4x4 simulated motion, events at
/// `C = 0.05`, a random `16 x n` Gaussian decoder (`n <= 16`) and latents
/// `A^+ V` plus Gaussian noise.
pub fn random_instance(seed: u64) -> Result<BoundInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = rng.random_range(2..=12);
    let n = rng.random_range(1..=16);
    let mut spec = SceneSpec::new(frames, 1, 4, 4);
    spec.blobs = 2;
    let truth = moving_scene(&spec, rng.random())?;
    let cfg = SimConfig::new(BOUND_THRESHOLD)?;
    let (_, volume) = simulate_volume(&truth, &cfg)?;
    let residual = residual_from_volume(&volume, &cfg);
    let matrix = loop {
        let a = DMatrix::from_fn(16, n, |_, _| StandardNormal.sample(&mut rng));
        if let Ok(d) = LinearDecoder::new(a, (n, 1, 1), (1, 4, 4)) {
            break d;
        }
    };
    let decoder = Decoder::Linear(matrix.clone());
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut latents = decoder.encode(truth.data())?;
    latents.mapv_inplace(|v| v + noise.sample(&mut rng));
    Ok(BoundInstance { decoder: matrix, latents, truth: truth.into_data(), residual, threshold: BOUND_THRESHOLD })
}

pub const CSV_HEADER: &str = "seed,L,kappa,C,epsilon,loss,lhs,rhs,holds,anchoring";

pub fn csv_row(seed: u64, r: &BoundReport) -> String {
    format!(
        "{seed},{},{},{},{},{},{},{},{},{ANCHORING}",
        r.lipschitz, r.kappa, r.threshold, r.epsilon, r.loss, r.lhs, r.rhs, r.holds
    )
}

/// Builds the zero-error instance: `U` decodes exactly to `V` and `R`
/// equals the true differences.
pub fn exact_instance(truth: &FrameSequence, decoder: LinearDecoder) -> Result<BoundInstance> {
    let d = Decoder::Linear(decoder.clone());
    let latents = d.encode(truth.data())?;
    let residual = frame_differences(truth.data());
    Ok(BoundInstance { decoder, latents, truth: truth.data().clone(), residual, threshold: 1.0 })
}
