//! Contrast-threshold event simulation on linear intensity.
//!
//! Every pixel keeps a reference level `r = I_0 + n * C` where `n` is its
//! running signed event count. Between two frames the intensity is
//! interpolated linearly in time and one event is emitted each time the
//! intensity leaves the band around `r`, after which `r` moves by `C * p`.
//! Whatever was not converted into events stays as the offset `I - r` and is
//! carried into the next interval.
//!
//! Two band shapes are available, see [`ThresholdModel`].

use ndarray::{s, Array4, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::events::{group_events, stack_events, Event, EventStream, EventVolume, FrameTimeline};

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// `F x C x H x W` frames with their timestamps. Pixel values are nominally
/// in `[0, 1]`; decoded reconstructions may leave that range.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Array4<f64>,
    timeline: FrameTimeline,
}

impl FrameSequence {
    pub fn new(data: Array4<f64>, timeline: FrameTimeline) -> Result<Self> {
        let (f, c, _, _) = data.dim();
        if f == 0 {
            return Err(Error::Shape("frame sequence needs at least one frame".into()));
        }
        if c != 1 && c != 3 {
            return Err(Error::Shape(format!("frames need 1 or 3 channels, got {c}")));
        }
        if timeline.len() != f {
            return Err(Error::Shape(format!("{f} frames but {} timestamps", timeline.len())));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("frames contain non-finite values".into()));
        }
        Ok(Self { data, timeline })
    }

    /// Frames on a uniform timeline spanning one second.
    pub fn uniform(data: Array4<f64>) -> Result<Self> {
        let timeline = FrameTimeline::uniform(data.shape()[0].max(1), 1.0)?;
        Self::new(data, timeline)
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn timeline(&self) -> &FrameTimeline {
        &self.timeline
    }

    pub fn dim(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn frame(&self, f: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), f)
    }

    /// Single-channel luminance copy (returns a clone for grayscale input).
    pub fn luminance(&self) -> Array4<f64> {
        if self.channels() == 1 {
            return self.data.clone();
        }
        let (f, _, h, w) = self.dim();
        Array4::from_shape_fn((f, 1, h, w), |(f, _, y, x)| (0..3).map(|c| LUMA[c] * self.data[[f, c, y, x]]).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdModel {
    /// Events fire when `|I - r| > C / 2`. Consecutive events are still `C`
    /// apart in intensity, and the offset never exceeds `C / 2` at frame
    /// times, so `|R_k - dV_k| <= C` for every interval regardless of motion.
    #[default]
    LevelCrossing,
    /// Events fire when `|I - r| >= C` (the usual DVS reset behaviour).
    /// The per-interval error is only bounded by `2C` once a pixel reverses
    /// direction without firing.
    Hysteresis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub contrast_threshold: f64,
    /// Simulate each colour channel separately instead of on luminance.
    pub per_channel: bool,
    pub model: ThresholdModel,
}

impl SimConfig {
    pub fn new(contrast_threshold: f64) -> Result<Self> {
        let cfg = Self { contrast_threshold, per_channel: false, model: ThresholdModel::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("contrast threshold {} must be > 0", self.contrast_threshold)));
        }
        Ok(())
    }
}

/// Predicted (or true) inter-frame residuals, `(F-1) x C x H x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    data: Array4<f64>,
}

impl ResidualField {
    pub fn from_array(data: Array4<f64>) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array4<f64> {
        self.data
    }

    pub fn gaps(&self) -> usize {
        self.data.shape()[0]
    }

    /// Repeats a single-channel field across `channels`.
    pub fn broadcast_channels(&self, channels: usize) -> Result<Self> {
        let (k, c, h, w) = self.data.dim();
        if c == channels {
            return Ok(self.clone());
        }
        if c != 1 {
            return Err(Error::Shape(format!("cannot broadcast {c} residual channels to {channels}")));
        }
        Ok(Self { data: Array4::from_shape_fn((k, channels, h, w), |(k, _, y, x)| self.data[[k, 0, y, x]]) })
    }
}

/// `dV_k = V_{k+1} - V_k` for every consecutive pair.
pub fn frame_differences(frames: &Array4<f64>) -> ResidualField {
    let f = frames.shape()[0];
    if f < 2 {
        let (_, c, h, w) = frames.dim();
        return ResidualField { data: Array4::zeros((0, c, h, w)) };
    }
    ResidualField { data: &frames.slice(s![1.., .., .., ..]) - &frames.slice(s![..f - 1, .., .., ..]) }
}

/// Simulates events on luminance (or the only channel) of `frames`.
pub fn simulate_events(frames: &FrameSequence, config: &SimConfig) -> Result<EventStream> {
    if config.per_channel && frames.channels() > 1 {
        return Err(Error::InvalidArgument("per-channel simulation yields one stream per channel; use simulate_channels".into()));
    }
    let mut streams = simulate_channels(frames, config)?;
    Ok(streams.remove(0))
}

/// One stream per simulated channel: a single luminance stream unless
/// `config.per_channel` is set.
pub fn simulate_channels(frames: &FrameSequence, config: &SimConfig) -> Result<Vec<EventStream>> {
    config.validate()?;
    if frames.frames() < 2 {
        return Err(Error::InvalidArgument(format!("simulation needs at least 2 frames, got {}", frames.frames())));
    }
    let planes = if config.per_channel { frames.data().clone() } else { frames.luminance() };
    let (_, channels, h, w) = planes.dim();
    if w > u16::MAX as usize + 1 || h > u16::MAX as usize + 1 {
        return Err(Error::InvalidArgument(format!("sensor {w}x{h} too large for u16 coordinates")));
    }
    let ts = frames.timeline().timestamps();
    let duration = frames.timeline().end();
    (0..channels)
        .map(|c| {
            let mut events = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let trace: Vec<f64> = (0..planes.shape()[0]).map(|f| planes[[f, c, y, x]]).collect();
                    simulate_pixel(&trace, ts, config, |t, p| events.push(Event::new(x as u16, y as u16, t, p)));
                }
            }
            EventStream::new(events, w, h, duration)
        })
        .collect()
}

fn simulate_pixel(trace: &[f64], ts: &[f64], config: &SimConfig, mut emit: impl FnMut(f64, i8)) {
    let c = config.contrast_threshold;
    let origin = trace[0];
    let mut count: i64 = 0;
    for k in 0..trace.len() - 1 {
        let (i0, i1) = (trace[k], trace[k + 1]);
        let (t0, t1) = (ts[k], ts[k + 1]);
        loop {
            let reference = origin + count as f64 * c;
            let offset = i1 - reference;
            let (fires, level) = match config.model {
                ThresholdModel::LevelCrossing => (offset.abs() > 0.5 * c, reference + offset.signum() * 0.5 * c),
                ThresholdModel::Hysteresis => (offset.abs() >= c, reference + offset.signum() * c),
            };
            if !fires {
                break;
            }
            let p: i8 = if offset > 0.0 { 1 } else { -1 };
            let frac = if i1 != i0 { ((level - i0) / (i1 - i0)).clamp(0.0, 1.0) } else { 0.0 };
            let t = (t0 + frac * (t1 - t0)).max(t0).min(t1.next_down());
            emit(t, p);
            count += p as i64;
        }
    }
}

/// `R_k = C * ch0` of the group that lies between frames `k` and `k + 1`
/// (group `k + 1` of a volume stacked on the frames' own timeline).
pub fn residual_from_volume(volume: &EventVolume, config: &SimConfig) -> ResidualField {
    let f = volume.frames();
    let (h, w) = (volume.height(), volume.width());
    if f < 2 {
        return ResidualField { data: Array4::zeros((0, 1, h, w)) };
    }
    let c = config.contrast_threshold;
    let data = volume.data().slice(s![1.., 0..1, .., ..]).mapv(|v| v * c);
    ResidualField { data }
}

/// Simulates, groups on the frames' timeline and stacks: the full
/// frames-to-condition path.
pub fn simulate_volume(frames: &FrameSequence, config: &SimConfig) -> Result<(EventStream, EventVolume)> {
    let stream = simulate_events(frames, config)?;
    let groups = group_events(&stream, frames.timeline())?;
    let volume = stack_events(&groups, stream.width(), stream.height());
    Ok((stream, volume))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel_frames(values: &[f64]) -> FrameSequence {
        let data = Array4::from_shape_vec((values.len(), 1, 1, 1), values.to_vec()).unwrap();
        FrameSequence::uniform(data).unwrap()
    }

    fn count(stream: &EventStream) -> (usize, usize) {
        let pos = stream.events().iter().filter(|e| e.p > 0).count();
        (pos, stream.len() - pos)
    }

    #[test]
    fn two_positive_events_for_023() {
        for model in [ThresholdModel::LevelCrossing, ThresholdModel::Hysteresis] {
            let cfg = SimConfig { contrast_threshold: 0.1, per_channel: false, model };
            let s = simulate_events(&pixel_frames(&[0.5, 0.73]), &cfg).unwrap();
            assert_eq!(count(&s), (2, 0), "{model:?}");
        }
    }

    #[test]
    fn static_frames_emit_nothing() {
        let cfg = SimConfig::new(0.1).unwrap();
        let s = simulate_events(&pixel_frames(&[0.4, 0.4, 0.4]), &cfg).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn small_drop_is_carried() {
        for model in [ThresholdModel::LevelCrossing, ThresholdModel::Hysteresis] {
            let cfg = SimConfig { contrast_threshold: 0.1, per_channel: false, model };
            let s = simulate_events(&pixel_frames(&[0.3, 0.25]), &cfg).unwrap();
            assert!(s.is_empty(), "{model:?}");
            // the carried offset plus a second small drop crosses the band
            let s = simulate_events(&pixel_frames(&[0.3, 0.25, 0.19]), &cfg).unwrap();
            assert_eq!(count(&s), (0, 1), "{model:?}");
        }
    }

    #[test]
    fn hysteresis_can_exceed_one_threshold_on_reversal() {
        // up by 0.099 then down by 0.198: no events, |R - dV| = 0.198
        let cfg = SimConfig { contrast_threshold: 0.1, per_channel: false, model: ThresholdModel::Hysteresis };
        let s = simulate_events(&pixel_frames(&[0.5, 0.599, 0.401]), &cfg).unwrap();
        assert!(s.is_empty());
        // the level-crossing band keeps the error within C
        let cfg = SimConfig::new(0.1).unwrap();
        let frames = pixel_frames(&[0.5, 0.599, 0.401]);
        let (_, vol) = simulate_volume(&frames, &cfg).unwrap();
        let r = residual_from_volume(&vol, &cfg);
        let dv = frame_differences(frames.data());
        let worst = (r.data() - dv.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 0.1 + 1e-12, "{worst}");
    }

    #[test]
    fn timestamps_stay_inside_their_interval() {
        let cfg = SimConfig::new(0.05).unwrap();
        let frames = pixel_frames(&[0.0, 0.5, 1.0, 0.2]);
        let s = simulate_events(&frames, &cfg).unwrap();
        let ts = frames.timeline().timestamps();
        let groups = group_events(&s, frames.timeline()).unwrap();
        assert!(groups[0].is_empty());
        let total: usize = groups.iter().map(|g| g.len()).sum();
        assert_eq!(total, s.len());
        for g in &groups[1..] {
            assert!(g.events.iter().all(|e| e.t >= ts[g.index - 1] && e.t < ts[g.index]));
        }
        // polarity of each interval follows the intensity change
        assert!(groups[1].events.iter().all(|e| e.p == 1));
        assert!(groups[3].events.iter().all(|e| e.p == -1));
    }

    #[test]
    fn residual_scales_signed_sum() {
        let mut vol = EventVolume::zeros(2, 1, 1);
        let mut data = vol.clone().into_array();
        data[[1, 0, 0, 0]] = 2.0;
        vol = EventVolume::from_array(data).unwrap();
        let r = residual_from_volume(&vol, &SimConfig::new(0.1).unwrap());
        assert!((r.data()[[0, 0, 0, 0]] - 0.2).abs() < 1e-15);
        let r = residual_from_volume(&EventVolume::zeros(3, 2, 2), &SimConfig::new(0.1).unwrap());
        assert_eq!(r.data().dim(), (2, 1, 2, 2));
        assert!(r.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_single_frame() {
        assert!(simulate_events(&pixel_frames(&[0.1]), &SimConfig::new(0.1).unwrap()).is_err());
        assert!(SimConfig::new(0.0).is_err());
    }

    #[test]
    fn luminance_weights() {
        let data = Array4::from_shape_vec((1, 3, 1, 1), vec![1.0, 1.0, 1.0]).unwrap();
        let seq = FrameSequence::uniform(data).unwrap();
        assert!((seq.luminance()[[0, 0, 0, 0]] - 1.0).abs() < 1e-12);
    }
}
