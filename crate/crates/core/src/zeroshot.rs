//! Zero-shot interpolation and prediction by pulling the clean-latent
//! estimate toward known reference frames.

use ndarray::{s, Array3, ArrayView3, Axis};

use crate::diffusion::{alpha_weight, Latent};
use crate::error::{Error, Result};
use crate::sampler::{StepContext, StepHook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    Interpolation,
    Prediction,
}

/// Clean latents of the first and (for interpolation) last frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    first: Array3<f64>,
    last: Option<Array3<f64>>,
}

impl ReferenceSet {
    pub fn interpolation(first: Array3<f64>, last: Array3<f64>) -> Result<Self> {
        if first.dim() != last.dim() {
            return Err(Error::Shape(format!("reference shapes {:?} and {:?} differ", first.shape(), last.shape())));
        }
        Ok(Self { first, last: Some(last) })
    }

    pub fn prediction(first: Array3<f64>) -> Self {
        Self { first, last: None }
    }

    pub fn mode(&self) -> RefMode {
        if self.last.is_some() {
            RefMode::Interpolation
        } else {
            RefMode::Prediction
        }
    }

    pub fn first(&self) -> &Array3<f64> {
        &self.first
    }

    pub fn last(&self) -> Option<&Array3<f64>> {
        self.last.as_ref()
    }
}

/// `D0 = ref_0 - U_0` and, for interpolation, `DF = ref_last - U_{F-1}`.
pub fn deviations(u: &Latent, refs: &ReferenceSet) -> Result<(Array3<f64>, Option<Array3<f64>>)> {
    let f = u.shape()[0];
    if f == 0 || u.index_axis(Axis(0), 0).dim() != refs.first.dim() {
        return Err(Error::Shape(format!("references {:?} do not match latent {:?}", refs.first.shape(), u.shape())));
    }
    let d0 = &refs.first - &u.index_axis(Axis(0), 0);
    let df = refs.last.as_ref().map(|l| l - &u.index_axis(Axis(0), f - 1));
    Ok((d0, df))
}

/// `U_i + alpha * (D0 + DF) / 2`
pub fn modulate_interp(u: ArrayView3<'_, f64>, d0: &Array3<f64>, df: &Array3<f64>, alpha: f64) -> Array3<f64> {
    let mut out = u.to_owned();
    ndarray::Zip::from(&mut out).and(d0).and(df).for_each(|o, &a, &b| *o += alpha * (a + b) / 2.0);
    out
}

/// `U_i + alpha * D0`
pub fn modulate_predict(u: ArrayView3<'_, f64>, d0: &Array3<f64>, alpha: f64) -> Array3<f64> {
    let mut out = u.to_owned();
    out.zip_mut_with(d0, |o, &d| *o += alpha * d);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSchedule {
    /// `1 - exp(-sigma * sigma_scale)`
    Nonlinear { sigma_scale: f64 },
    /// 1 on the first step down to 0 on the last.
    LinearDescending,
    LinearAscending,
    Constant(f64),
}

impl Default for WeightSchedule {
    fn default() -> Self {
        Self::Nonlinear { sigma_scale: 1.0 }
    }
}

impl WeightSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Nonlinear { sigma_scale } if !(sigma_scale >= 0.0 && sigma_scale.is_finite()) => {
                Err(Error::InvalidArgument(format!("sigma scale {sigma_scale} must be >= 0")))
            }
            Self::Constant(v) if !(0.0..=1.0).contains(&v) => Err(Error::InvalidArgument(format!("constant weight {v} must lie in [0, 1]"))),
            _ => Ok(()),
        }
    }

    /// Weight for step `k` of `total` at noise level `sigma`.
    pub fn weight(&self, sigma: f64, k: usize, total: usize) -> Result<f64> {
        if k >= total {
            return Err(Error::InvalidArgument(format!("step {k} outside schedule of {total}")));
        }
        let frac = if total == 1 { 0.0 } else { k as f64 / (total - 1) as f64 };
        Ok(match *self {
            Self::Nonlinear { sigma_scale } => alpha_weight(sigma * sigma_scale),
            Self::LinearDescending => 1.0 - frac,
            Self::LinearAscending => frac,
            Self::Constant(v) => v,
        })
    }
}

pub fn weight(schedule: &WeightSchedule, sigma: f64, k: usize, total: usize) -> Result<f64> {
    schedule.weight(sigma, k, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// References every 4th frame, three targets between each pair.
    Vfi4x,
    /// First and last frame given.
    Vfi11x,
    /// Only the first frame given.
    Vfp,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vfi4" | "vfi4x" => Ok(Self::Vfi4x),
            "vfi11" | "vfi11x" => Ok(Self::Vfi11x),
            "vfp" => Ok(Self::Vfp),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub refs: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Reference and target frame indices for a sequence of `frames` frames.
/// With 12 frames: VFI-4x uses `{0, 4, 8}`, VFI-11x `{0, 11}` and VFP `{0}`.
pub fn vfi_layout(task: Task, frames: usize) -> Result<Layout> {
    let min = match task {
        Task::Vfp => 2,
        Task::Vfi11x => 3,
        Task::Vfi4x => 5,
    };
    if frames < min {
        return Err(Error::InvalidArgument(format!("{task:?} needs at least {min} frames, got {frames}")));
    }
    let refs: Vec<usize> = match task {
        Task::Vfi4x => (0..frames).step_by(4).collect(),
        Task::Vfi11x => vec![0, frames - 1],
        Task::Vfp => vec![0],
    };
    let targets = match task {
        Task::Vfp => (1..frames).collect(),
        _ => refs.windows(2).flat_map(|w| w[0] + 1..w[1]).collect(),
    };
    Ok(Layout { refs, targets })
}

/// Sampler hook for one task. Interpolation modulates every segment between
/// consecutive references with that segment's endpoint deviations; frames
/// after the last reference are left alone. Prediction shifts every frame by
/// the first-frame deviation.
#[derive(Debug, Clone)]
pub struct ZeroShotHook {
    task: Task,
    layout: Layout,
    refs: Vec<Array3<f64>>,
    schedule: WeightSchedule,
}

impl ZeroShotHook {
    /// `refs` holds one clean latent frame per reference index of the layout.
    pub fn new(task: Task, frames: usize, refs: Vec<Array3<f64>>, schedule: WeightSchedule) -> Result<Self> {
        schedule.validate()?;
        let layout = vfi_layout(task, frames)?;
        if refs.len() != layout.refs.len() {
            return Err(Error::InvalidArgument(format!("{task:?} needs {} reference frames, got {}", layout.refs.len(), refs.len())));
        }
        if refs.iter().any(|r| r.dim() != refs[0].dim()) {
            return Err(Error::Shape("reference frames differ in shape".into()));
        }
        Ok(Self { task, layout, refs, schedule })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn modulate(&self, u: &mut Latent, alpha: f64) -> Result<()> {
        let f = u.shape()[0];
        let last = *self.layout.refs.last().unwrap();
        if last >= f || u.index_axis(Axis(0), 0).dim() != self.refs[0].dim() {
            return Err(Error::Shape(format!("latent {:?} does not fit the {:?} references", u.shape(), self.task)));
        }
        match self.task {
            Task::Vfp => {
                let refs = ReferenceSet::prediction(self.refs[0].clone());
                let (d0, _) = deviations(u, &refs)?;
                for i in 0..f {
                    let m = modulate_predict(u.index_axis(Axis(0), i), &d0, alpha);
                    u.index_axis_mut(Axis(0), i).assign(&m);
                }
            }
            Task::Vfi4x | Task::Vfi11x => {
                let devs: Vec<Array3<f64>> = self.layout.refs.iter().zip(&self.refs).map(|(&i, r)| r - &u.index_axis(Axis(0), i)).collect();
                let segments = self.layout.refs.len() - 1;
                for s in 0..segments {
                    let (a, b) = (self.layout.refs[s], self.layout.refs[s + 1]);
                    let end = if s + 1 == segments { b + 1 } else { b };
                    for i in a..end {
                        let m = modulate_interp(u.index_axis(Axis(0), i), &devs[s], &devs[s + 1], alpha);
                        u.index_axis_mut(Axis(0), i).assign(&m);
                    }
                }
            }
        }
        Ok(())
    }
}

impl StepHook for ZeroShotHook {
    fn apply(&self, estimate: &mut Latent, ctx: &StepContext) -> Result<()> {
        let alpha = self.schedule.weight(ctx.sigma, ctx.step, ctx.steps)?;
        self.modulate(estimate, alpha)
    }
}

/// Splits a latent into the frames at `indices`.
pub fn take_frames(u: &Latent, indices: &[usize]) -> Vec<Array3<f64>> {
    indices.iter().map(|&i| u.slice(s![i, .., .., ..]).to_owned()).collect()
}
