//! End-to-end runs (reconstruction, interpolation, prediction) and the
//! seeded toy benchmark used for ablation comparisons.

use ndarray::Array3;

use crate::diffusion::{train_denoiser, Arch, Denoiser, Latent, NoiseSchedule, ToyDenoiser, TrainConfig, TrainReport, TrainSample};
use crate::error::Result;
use crate::events::EventVolume;
use crate::guidance::{GuidanceHook, GuidanceSchedule};
use crate::sampler::{sample, Decoder, SampleOutput, SamplerConfig, StepHook};
use crate::simulator::{frame_differences, residual_from_volume, simulate_volume, FrameSequence, ResidualField, SimConfig};
use crate::synth::{moving_scene, SceneSpec};
use crate::zeroshot::{Task, WeightSchedule, ZeroShotHook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Reconstruct,
    ZeroShot(Task),
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub schedule: NoiseSchedule,
    /// `None` disables residual guidance.
    pub guidance: Option<GuidanceSchedule>,
    pub weights: WeightSchedule,
    pub seed: u64,
    pub trace_every: Option<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            schedule: NoiseSchedule::default(),
            guidance: Some(GuidanceSchedule::default()),
            weights: WeightSchedule::default(),
            seed: 0,
            trace_every: None,
        }
    }
}

/// Samples `shape` latents from `denoiser` under `condition`. `refs` are the
/// reference latent frames of the task layout (empty for reconstruction);
/// guidance needs `residual`.
pub fn run(
    denoiser: &dyn Denoiser,
    condition: &EventVolume,
    mode: Mode,
    refs: Vec<Array3<f64>>,
    residual: Option<&ResidualField>,
    shape: (usize, usize, usize, usize),
    settings: &RunSettings,
) -> Result<SampleOutput> {
    let zero_shot = match mode {
        Mode::Reconstruct => None,
        Mode::ZeroShot(task) => Some(ZeroShotHook::new(task, shape.0, refs, settings.weights)?),
    };
    let guidance = match (settings.guidance, residual) {
        (Some(schedule), Some(r)) => Some(GuidanceHook { residual: r.clone(), decoder: Decoder::Identity, schedule }),
        _ => None,
    };
    let mut cfg = SamplerConfig::new(settings.schedule.clone(), shape, settings.seed);
    cfg.trace_every = settings.trace_every;
    if let Some(h) = &zero_shot {
        cfg.hooks.push(h as &dyn StepHook);
    }
    if let Some(h) = &guidance {
        cfg.hooks.push(h as &dyn StepHook);
    }
    sample(denoiser, condition, &cfg)
}

/// One benchmark sequence with its simulated condition.
#[derive(Debug, Clone)]
pub struct BenchSequence {
    pub frames: FrameSequence,
    pub volume: EventVolume,
    /// Oracle residual `C * ch0`.
    pub residual: ResidualField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSpec {
    pub scene: SceneSpec,
    pub threshold: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self { scene: SceneSpec::new(12, 1, 16, 16), threshold: 0.05 }
    }
}

pub fn bench_sequence(spec: &BenchSpec, seed: u64) -> Result<BenchSequence> {
    let frames = moving_scene(&spec.scene, seed)?;
    let cfg = SimConfig::new(spec.threshold)?;
    let (_, volume) = simulate_volume(&frames, &cfg)?;
    let residual = residual_from_volume(&volume, &cfg);
    Ok(BenchSequence { frames, volume, residual })
}

/// `count` sequences from seeds `first_seed, first_seed + 1, ...`.
pub fn bench_sequences(spec: &BenchSpec, first_seed: u64, count: usize) -> Result<Vec<BenchSequence>> {
    (0..count as u64).map(|i| bench_sequence(spec, first_seed + i)).collect()
}

/// Trains a toy denoiser on the sequences; `zero_events` blanks every
/// condition first.
pub fn train_on(sequences: &[BenchSequence], arch: Arch, event_scale: f64, zero_events: bool, config: &TrainConfig) -> Result<(ToyDenoiser, TrainReport)> {
    let channels = sequences.first().map_or(1, |s| s.frames.channels());
    let data: Vec<TrainSample> = sequences
        .iter()
        .map(|s| TrainSample { clean: s.frames.data().clone(), condition: if zero_events { s.volume.zeroed() } else { s.volume.clone() } })
        .collect();
    let model = ToyDenoiser::new(arch, channels, 0.5, event_scale, config.seed)?;
    train_denoiser(&data, model, config)
}

/// Residual of the ground-truth frames, for checks against the oracle.
pub fn true_residual(seq: &BenchSequence) -> ResidualField {
    frame_differences(seq.frames.data())
}

/// Mean squared error over the listed frames only.
pub fn frames_mse(pred: &Latent, truth: &FrameSequence, frames: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for &f in frames {
        let (a, b) = (pred.index_axis(ndarray::Axis(0), f), truth.frame(f));
        total += a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        n += a.len();
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::GaussianPosteriorDenoiser;
    use crate::zeroshot::{take_frames, vfi_layout};

    #[test]
    fn guidance_off_matches_plain_sampler() {
        let seq = bench_sequence(&BenchSpec::default(), 3).unwrap();
        let d = GaussianPosteriorDenoiser { mu: 0.5, s0: 0.2 };
        let shape = seq.frames.dim();
        let off = RunSettings { guidance: None, seed: 5, ..Default::default() };
        let a = run(&d, &seq.volume, Mode::Reconstruct, vec![], Some(&seq.residual), shape, &off).unwrap();
        let plain = sample(&d, &seq.volume, &SamplerConfig::new(NoiseSchedule::default(), shape, 5)).unwrap();
        assert_eq!(a.latent, plain.latent);
        let on = RunSettings { seed: 5, ..Default::default() };
        let b = run(&d, &seq.volume, Mode::Reconstruct, vec![], Some(&seq.residual), shape, &on).unwrap();
        assert_ne!(a.latent, b.latent);
    }

    #[test]
    fn vfp_with_unit_weight_returns_reference() {
        let seq = bench_sequence(&BenchSpec::default(), 8).unwrap();
        let d = GaussianPosteriorDenoiser { mu: 0.5, s0: 0.2 };
        let refs = take_frames(seq.frames.data(), &vfi_layout(Task::Vfp, 12).unwrap().refs);
        let settings = RunSettings { weights: WeightSchedule::Constant(1.0), guidance: None, ..Default::default() };
        let out = run(&d, &seq.volume, Mode::ZeroShot(Task::Vfp), refs.clone(), None, seq.frames.dim(), &settings).unwrap();
        let got = out.latent.index_axis(ndarray::Axis(0), 0);
        assert!(got.iter().zip(refs[0].iter()).all(|(a, b)| (a - b).abs() <= 1e-15));
    }
}
