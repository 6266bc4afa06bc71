//! Browser bindings for the demo page in `www/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use e2f_core::diffusion::{lambda_weight, make_schedule, GaussianPosteriorDenoiser, DEFAULT_SIGMA_DATA};
use e2f_core::events::EventVolume;
use e2f_core::guidance::{GuidanceSchedule, StrengthMode};
use e2f_core::sampler::{sample, SamplerConfig};
use e2f_core::simulator::{frame_differences, residual_from_volume, simulate_volume, SimConfig};
use e2f_core::synth::{moving_scene, SceneSpec};
use e2f_core::zeroshot::WeightSchedule;
use ndarray::s;
use wasm_bindgen::prelude::*;

fn js(e: e2f_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_f32(values: impl IntoIterator<Item = f64>) -> Vec<f32> {
    values.into_iter().map(|v| v as f32).collect()
}

/// A simulated scene: frames, signed event counts and the worst residual error.
#[wasm_bindgen]
pub struct SceneView {
    frames: usize,
    size: usize,
    pixels: Vec<f32>,
    counts: Vec<f32>,
    events: usize,
    max_error: f64,
}

#[wasm_bindgen]
impl SceneView {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    /// `frames x size x size` intensities.
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<f32> {
        self.pixels.clone()
    }

    /// `frames x size x size` signed event counts (stack channel 0).
    #[wasm_bindgen(getter)]
    pub fn counts(&self) -> Vec<f32> {
        self.counts.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn events(&self) -> usize {
        self.events
    }

    /// `max |C * ch0 - dV|` over all pixels and frame gaps.
    #[wasm_bindgen(getter, js_name = maxError)]
    pub fn max_error(&self) -> f64 {
        self.max_error
    }
}

#[wasm_bindgen(js_name = simulateScene)]
pub fn simulate_scene(seed: u64, frames: usize, size: usize, threshold: f64) -> Result<SceneView, JsError> {
    let seq = moving_scene(&SceneSpec::new(frames, 1, size, size), seed).map_err(js)?;
    let cfg = SimConfig::new(threshold).map_err(js)?;
    let (stream, volume) = simulate_volume(&seq, &cfg).map_err(js)?;
    let r = residual_from_volume(&volume, &cfg);
    let dv = frame_differences(seq.data());
    let max_error = r.data().iter().zip(dv.data().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SceneView {
        frames,
        size,
        pixels: to_f32(seq.data().iter().copied()),
        counts: to_f32(volume.data().slice(s![.., 0, .., ..]).iter().copied()),
        events: stream.len(),
        max_error,
    })
}

/// Per-step schedule curves over a noise schedule.
#[wasm_bindgen]
pub struct Curves {
    sigmas: Vec<f64>,
    strength: Vec<f64>,
    alpha: Vec<f64>,
    lambda: Vec<f64>,
}

#[wasm_bindgen]
impl Curves {
    #[wasm_bindgen(getter)]
    pub fn sigmas(&self) -> Vec<f64> {
        self.sigmas.clone()
    }

    /// Guidance strength per step; 0 outside the window.
    #[wasm_bindgen(getter)]
    pub fn strength(&self) -> Vec<f64> {
        self.strength.clone()
    }

    /// Zero-shot weight per step.
    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> Vec<f64> {
        self.lambda.clone()
    }
}

fn weight_schedule(name: &str, value: f64, sigma_scale: f64) -> Result<WeightSchedule, JsError> {
    let w = match name {
        "nonlinear" => WeightSchedule::Nonlinear { sigma_scale },
        "linear-descending" => WeightSchedule::LinearDescending,
        "linear-ascending" => WeightSchedule::LinearAscending,
        "constant" => WeightSchedule::Constant(value),
        other => return Err(JsError::new(&format!("unknown weight schedule {other:?}"))),
    };
    w.validate().map_err(js)?;
    Ok(w)
}

#[wasm_bindgen(js_name = scheduleCurves)]
pub fn schedule_curves(
    steps: usize,
    mode: &str,
    s_max: f64,
    window: usize,
    weight: &str,
    weight_value: f64,
    sigma_scale: f64,
) -> Result<Curves, JsError> {
    let schedule = make_schedule(0.002, 80.0, steps, 7.0).map_err(js)?;
    let mode: StrengthMode = mode.parse().map_err(js)?;
    let guidance = GuidanceSchedule::new(mode, s_max, window.min(steps)).map_err(js)?;
    let weights = weight_schedule(weight, weight_value, sigma_scale)?;
    let sigmas = schedule.sigmas()[..steps].to_vec();
    let mut strength = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    for (step, &sigma) in sigmas.iter().enumerate() {
        let remaining = steps - step;
        strength.push(if remaining <= guidance.window { guidance.strength(guidance.window - remaining).map_err(js)? } else { 0.0 });
        alpha.push(weights.weight(sigma, step, steps).map_err(js)?);
    }
    let lambda = sigmas.iter().map(|&s| lambda_weight(s, DEFAULT_SIGMA_DATA)).collect();
    Ok(Curves { sigmas, strength, alpha, lambda })
}

/// Draws `runs` samples of 1-D Gaussian data `N(mu, s0^2)` through the
/// sampler with the exact posterior-mean denoiser.
#[wasm_bindgen(js_name = sampleGaussian)]
pub fn sample_gaussian(mu: f64, s0: f64, runs: usize, steps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    if !(s0 > 0.0) || runs == 0 {
        return Err(JsError::new("need s0 > 0 and at least one run"));
    }
    let schedule = make_schedule(0.002, 80.0, steps, 7.0).map_err(js)?;
    let cfg = SamplerConfig::new(schedule, (runs, 1, 1, 1), seed);
    let out = sample(&GaussianPosteriorDenoiser { mu, s0 }, &EventVolume::zeros(runs, 1, 1), &cfg).map_err(js)?;
    Ok(out.latent.into_iter().collect())
}
