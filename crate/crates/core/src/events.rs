//! Event streams and their stacked frame-interval representation.
//!
//! An [`EventStream`] is a time-sorted list of `(x, y, t, p)` records. A
//! [`FrameTimeline`] splits `[0, s_{F-1})` into half-open intervals
//! `[s_{f-1}, s_f)` (with `s_{-1} = 0`), [`group_events`] buckets the stream
//! into those intervals and [`stack_events`] turns every group into three
//! per-pixel channels: signed sum, positive sum and negative (signed) sum.

use std::io::{Read, Write};

use ndarray::{Array4, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Standard deviation of the fixed-level noise injected into the event
/// condition at inference time by the baseline scheme.
pub const BASELINE_NOISE_STD: f64 = 0.02;

const BINARY_MAGIC: &[u8; 4] = b"EVT0";
const BINARY_RECORD_LEN: usize = 8 + 2 + 2 + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Seconds from the start of the stream.
    pub t: f64,
    /// `+1` for a brightness increase, `-1` for a decrease.
    pub p: i8,
}

impl Event {
    pub fn new(x: u16, y: u16, t: f64, p: i8) -> Self {
        Self { x, y, t, p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    width: usize,
    height: usize,
    duration: f64,
}

impl EventStream {
    /// Validates every event against the sensor metadata and sorts by
    /// timestamp (stable, so equal timestamps keep their input order).
    pub fn new(mut events: Vec<Event>, width: usize, height: usize, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidArgument(format!("duration {duration} must be finite and >= 0")));
        }
        for (i, e) in events.iter().enumerate() {
            check_event(e, width, height, duration).map_err(|msg| Error::OutOfBounds { line: i + 1, msg })?;
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self { events, width, height, duration })
    }

    pub fn empty(width: usize, height: usize, duration: f64) -> Self {
        Self { events: Vec::new(), width, height, duration }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

fn check_event(e: &Event, width: usize, height: usize, duration: f64) -> std::result::Result<(), String> {
    if e.x as usize >= width || e.y as usize >= height {
        return Err(format!("coordinate ({}, {}) outside {width}x{height} sensor", e.x, e.y));
    }
    if !(e.t >= 0.0 && e.t <= duration) {
        return Err(format!("timestamp {} outside [0, {duration}]", e.t));
    }
    if e.p != 1 && e.p != -1 {
        return Err(format!("polarity {} is not +1 or -1", e.p));
    }
    Ok(())
}

/// Parses the line-oriented `t,x,y,p` text format.
///
/// Blank lines and lines starting with `#` are skipped. Polarity may be
/// written as `+1`/`1`/`-1` or as `1`/`0` (mapped to `+1`/`-1`).
pub fn parse_event_text(text: &str, width: usize, height: usize, duration: f64) -> Result<EventStream> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 4 fields t,x,y,p, found {}", fields.len()) });
        }
        let bad = |what: &str, v: &str| Error::Parse { line: line_no, msg: format!("cannot parse {what} from {v:?}") };
        let t: f64 = fields[0].parse().map_err(|_| bad("timestamp", fields[0]))?;
        let x: u16 = fields[1].parse().map_err(|_| bad("x", fields[1]))?;
        let y: u16 = fields[2].parse().map_err(|_| bad("y", fields[2]))?;
        let p: i8 = match fields[3] {
            "1" | "+1" => 1,
            "-1" | "0" => -1,
            other => return Err(bad("polarity", other)),
        };
        let e = Event { x, y, t, p };
        check_event(&e, width, height, duration).map_err(|msg| Error::OutOfBounds { line: line_no, msg })?;
        events.push(e);
    }
    EventStream::new(events, width, height, duration)
}

pub fn format_event_text(stream: &EventStream) -> String {
    let mut out = String::with_capacity(stream.len() * 20);
    out.push_str(&format!("# width={} height={} duration={}\n", stream.width, stream.height, stream.duration));
    for e in &stream.events {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.p));
    }
    out
}

/// Writes the binary container: 16-byte header (`EVT0`, u16 width,
/// u16 height, f64 duration) followed by packed little-endian
/// `(f64 t, u16 x, u16 y, i8 p)` records.
pub fn write_event_binary<W: Write>(stream: &EventStream, mut w: W) -> Result<()> {
    let dim = |v: usize, name: &str| {
        u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{name} {v} does not fit in u16")))
    };
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&dim(stream.width, "width")?.to_le_bytes())?;
    w.write_all(&dim(stream.height, "height")?.to_le_bytes())?;
    w.write_all(&stream.duration.to_le_bytes())?;
    let mut rec = [0u8; BINARY_RECORD_LEN];
    for e in &stream.events {
        rec[0..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p as u8;
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn read_event_binary<R: Read>(mut r: R) -> Result<EventStream> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 16 || &buf[0..4] != BINARY_MAGIC {
        return Err(Error::Format("missing EVT0 header".into()));
    }
    let width = u16::from_le_bytes([buf[4], buf[5]]) as usize;
    let height = u16::from_le_bytes([buf[6], buf[7]]) as usize;
    let duration = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    let body = &buf[16..];
    if body.len() % BINARY_RECORD_LEN != 0 {
        return Err(Error::Format(format!("trailing {} bytes after last record", body.len() % BINARY_RECORD_LEN)));
    }
    let events = body
        .chunks_exact(BINARY_RECORD_LEN)
        .map(|rec| Event {
            t: f64::from_le_bytes(rec[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([rec[8], rec[9]]),
            y: u16::from_le_bytes([rec[10], rec[11]]),
            p: rec[12] as i8,
        })
        .collect();
    EventStream::new(events, width, height, duration)
}

/// Frame timestamps `s_0 < s_1 < ... < s_{F-1}`; `s_{-1}` is implicitly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTimeline {
    timestamps: Vec<f64>,
}

impl FrameTimeline {
    pub fn new(timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::InvalidArgument("timeline needs at least one frame".into()));
        }
        if !timestamps.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::InvalidArgument("timestamps must be finite and >= 0".into()));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("timestamps must be strictly increasing".into()));
        }
        Ok(Self { timestamps })
    }

    /// `frames` timestamps spread evenly so each group spans `duration / frames`
    /// and the last frame lands on `duration`.
    pub fn uniform(frames: usize, duration: f64) -> Result<Self> {
        if frames == 0 || !(duration > 0.0) {
            return Err(Error::InvalidArgument(format!("uniform timeline needs frames >= 1 and duration > 0, got {frames}, {duration}")));
        }
        Self::new((0..frames).map(|f| duration * (f + 1) as f64 / frames as f64).collect())
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interval `[s_{f-1}, s_f)` of group `f`.
    pub fn interval(&self, f: usize) -> (f64, f64) {
        let start = if f == 0 { 0.0 } else { self.timestamps[f - 1] };
        (start, self.timestamps[f])
    }

    pub fn end(&self) -> f64 {
        *self.timestamps.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventGroup {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub events: Vec<Event>,
}

impl EventGroup {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Buckets events into `[s_{f-1}, s_f)`. Events at or after `s_{F-1}` are
/// dropped.
pub fn group_events(stream: &EventStream, timeline: &FrameTimeline) -> Result<Vec<EventGroup>> {
    if timeline.end() > stream.duration {
        return Err(Error::InvalidArgument(format!(
            "timeline ends at {} beyond stream duration {}",
            timeline.end(),
            stream.duration
        )));
    }
    let bounds = timeline.timestamps();
    let mut groups: Vec<EventGroup> = (0..timeline.len())
        .map(|f| {
            let (start, end) = timeline.interval(f);
            EventGroup { index: f, start, end, events: Vec::new() }
        })
        .collect();
    for e in &stream.events {
        // first boundary strictly greater than t
        let f = bounds.partition_point(|&s| s <= e.t);
        if f < groups.len() {
            groups[f].events.push(*e);
        }
    }
    Ok(groups)
}

/// `F x 3 x H x W` stacked events. Channel 0 is the signed sum of all
/// polarities, channel 1 the positive sum, channel 2 the negative sum
/// (stored signed, so `<= 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct EventVolume {
    data: Array4<f64>,
}

impl EventVolume {
    pub fn from_array(data: Array4<f64>) -> Result<Self> {
        if data.shape()[1] != 3 {
            return Err(Error::Shape(format!("event volume needs 3 channels, got {:?}", data.shape())));
        }
        Ok(Self { data })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Self {
        Self { data: Array4::zeros((frames, 3, height, width)) }
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array4<f64> {
        self.data
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[0]
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

    /// Same volume with every element set to zero; the "without events"
    /// condition.
    pub fn zeroed(&self) -> Self {
        Self { data: Array4::zeros(self.data.raw_dim()) }
    }

    /// Population standard deviation over all elements.
    pub fn std(&self) -> f64 {
        let n = self.data.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.data.sum() / n;
        (self.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

pub fn stack_events(groups: &[EventGroup], width: usize, height: usize) -> EventVolume {
    let mut data = Array4::<f64>::zeros((groups.len(), 3, height, width));
    for (f, g) in groups.iter().enumerate() {
        for e in &g.events {
            let (x, y) = (e.x as usize, e.y as usize);
            let p = e.p as f64;
            data[[f, 0, y, x]] += p;
            let ch = if e.p > 0 { 1 } else { 2 };
            data[[f, ch, y, x]] += p;
        }
    }
    EventVolume { data }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventNoise {
    /// Gaussian noise with std `eta * std(volume)`.
    Relative { eta: f64 },
    /// Gaussian noise with a fixed absolute std.
    Absolute { std: f64 },
}

impl EventNoise {
    pub fn baseline() -> Self {
        EventNoise::Absolute { std: BASELINE_NOISE_STD }
    }
}

#[derive(Debug, Clone)]
pub struct NoisyVolume {
    pub volume: EventVolume,
    /// Set when relative noise was requested on a constant volume; the input
    /// is returned unchanged.
    pub degenerate_variance: bool,
}

pub fn inject_noise(volume: &EventVolume, noise: EventNoise, seed: u64) -> Result<NoisyVolume> {
    let std = match noise {
        EventNoise::Relative { eta } => {
            if !(eta >= 0.0) {
                return Err(Error::InvalidArgument(format!("noise level {eta} must be >= 0")));
            }
            let vol_std = volume.std();
            if eta > 0.0 && vol_std == 0.0 {
                return Ok(NoisyVolume { volume: volume.clone(), degenerate_variance: true });
            }
            eta * vol_std
        }
        EventNoise::Absolute { std } => {
            if !(std >= 0.0) {
                return Err(Error::InvalidArgument(format!("noise std {std} must be >= 0")));
            }
            std
        }
    };
    if std == 0.0 {
        return Ok(NoisyVolume { volume: volume.clone(), degenerate_variance: false });
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = volume.data.clone();
    data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(NoisyVolume { volume: EventVolume { data }, degenerate_variance: false })
}

/// Redistributes the events of contiguous groups into `k` equal-duration
/// groups spanning the same time range.
pub fn repartition_groups(groups: &[EventGroup], k: usize) -> Result<Vec<EventGroup>> {
    if k == 0 {
        return Err(Error::InvalidArgument("repartition needs k >= 1".into()));
    }
    let (Some(first), Some(last)) = (groups.first(), groups.last()) else {
        return Err(Error::InvalidArgument("repartition needs at least one group".into()));
    };
    if groups.windows(2).any(|w| w[0].end != w[1].start) {
        return Err(Error::InvalidArgument("groups are not contiguous in time".into()));
    }
    let (start, end) = (first.start, last.end);
    let bounds: Vec<f64> = (1..=k).map(|j| if j == k { end } else { start + (end - start) * j as f64 / k as f64 }).collect();
    let mut out: Vec<EventGroup> = (0..k)
        .map(|j| EventGroup {
            index: j,
            start: if j == 0 { start } else { bounds[j - 1] },
            end: bounds[j],
            events: Vec::new(),
        })
        .collect();
    for e in groups.iter().flat_map(|g| g.events.iter()) {
        let j = bounds.partition_point(|&b| b <= e.t).min(k - 1);
        out[j].events.push(*e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(ts: &[f64]) -> EventStream {
        let ev = ts.iter().map(|&t| Event::new(0, 0, t, 1)).collect();
        EventStream::new(ev, 2, 2, 1.0).unwrap()
    }

    #[test]
    fn parses_single_record() {
        let s = parse_event_text("0.10,1,0,1", 2, 2, 1.0).unwrap();
        assert_eq!(s.events(), &[Event::new(1, 0, 0.1, 1)]);
    }

    #[test]
    fn parses_empty_input() {
        assert!(parse_event_text("", 2, 2, 1.0).unwrap().is_empty());
        assert!(parse_event_text("# only a comment\n\n", 2, 2, 1.0).unwrap().is_empty());
    }

    #[test]
    fn parse_sorts_by_time() {
        let s = parse_event_text("0.5,0,0,1\n0.2,1,1,0\n", 2, 2, 1.0).unwrap();
        let ts: Vec<f64> = s.events().iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0.2, 0.5]);
        assert_eq!(s.events()[0].p, -1);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_event_text("0.1,0,0,1\n0.2,0,0\n", 2, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_event_text("0.1,0,0,1\n#c\n0.2,5,0,1\n", 2, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { line: 3, .. }), "{err}");
        let err = parse_event_text("1.5,0,0,1\n", 2, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { line: 1, .. }), "{err}");
        let err = parse_event_text("0.1,0,0,2\n", 2, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_event_text("x,0,0,1\n", 2, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn groups_by_half_open_interval() {
        let tl = FrameTimeline::new(vec![0.5, 1.0]).unwrap();
        let g = group_events(&stream(&[0.1, 0.2, 0.6]), &tl).unwrap();
        assert_eq!(g.iter().map(EventGroup::len).collect::<Vec<_>>(), vec![2, 1]);

        let g = group_events(&stream(&[0.5]), &tl).unwrap();
        assert_eq!((g[0].len(), g[1].len()), (0, 1));

        // at s_{F-1}: discarded
        let g = group_events(&stream(&[1.0]), &tl).unwrap();
        assert!(g.iter().all(EventGroup::is_empty));

        let g = group_events(&stream(&[]), &tl).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(EventGroup::is_empty));
    }

    #[test]
    fn group_rejects_timeline_past_duration() {
        let tl = FrameTimeline::new(vec![0.5, 2.0]).unwrap();
        assert!(group_events(&stream(&[0.1]), &tl).is_err());
    }

    #[test]
    fn timeline_validation() {
        assert!(FrameTimeline::new(vec![]).is_err());
        assert!(FrameTimeline::new(vec![0.5, 0.5]).is_err());
        let u = FrameTimeline::uniform(4, 2.0).unwrap();
        assert_eq!(u.timestamps(), &[0.5, 1.0, 1.5, 2.0]);
        assert_eq!(u.interval(0), (0.0, 0.5));
    }

    #[test]
    fn stacks_mixed_polarity() {
        let g = vec![EventGroup {
            index: 0,
            start: 0.0,
            end: 1.0,
            events: vec![Event::new(1, 0, 0.1, 1), Event::new(1, 0, 0.2, -1)],
        }];
        let v = stack_events(&g, 2, 2);
        assert_eq!(v.data()[[0, 0, 0, 1]], 0.0);
        assert_eq!(v.data()[[0, 1, 0, 1]], 1.0);
        assert_eq!(v.data()[[0, 2, 0, 1]], -1.0);
    }

    #[test]
    fn stacks_repeated_positive() {
        let ev = vec![Event::new(0, 1, 0.1, 1); 3];
        let g = vec![
            EventGroup { index: 0, start: 0.0, end: 0.5, events: ev },
            EventGroup { index: 1, start: 0.5, end: 1.0, events: vec![] },
        ];
        let v = stack_events(&g, 2, 2);
        assert_eq!(v.data()[[0, 0, 1, 0]], 3.0);
        assert_eq!(v.data()[[0, 1, 1, 0]], 3.0);
        assert_eq!(v.data()[[0, 2, 1, 0]], 0.0);
        assert!(v.frame(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut v = EventVolume::zeros(2, 3, 3);
        v.data[[0, 0, 1, 1]] = 2.0;
        let out = inject_noise(&v, EventNoise::Relative { eta: 0.0 }, 7).unwrap();
        assert_eq!(out.volume, v);
        assert!(!out.degenerate_variance);
    }

    #[test]
    fn degenerate_variance_is_flagged() {
        let v = EventVolume::zeros(2, 3, 3);
        let out = inject_noise(&v, EventNoise::Relative { eta: 1.0 }, 7).unwrap();
        assert!(out.degenerate_variance);
        assert_eq!(out.volume, v);
    }

    #[test]
    fn relative_noise_matches_volume_std() {
        // 2 * 3 * 50 * 50 = 15000 elements
        let mut v = EventVolume::zeros(2, 50, 50);
        v.data.iter_mut().enumerate().for_each(|(i, x)| *x = ((i * 7919) % 13) as f64 - 6.0);
        let out = inject_noise(&v, EventNoise::Relative { eta: 1.0 }, 42).unwrap();
        let diff = &out.volume.data - &v.data;
        let n = diff.len() as f64;
        let mean = diff.sum() / n;
        let std = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std / v.std() - 1.0).abs() < 0.05, "{std} vs {}", v.std());
        let again = inject_noise(&v, EventNoise::Relative { eta: 1.0 }, 42).unwrap();
        assert_eq!(again.volume, out.volume);
    }

    #[test]
    fn baseline_noise_uses_fixed_std() {
        assert_eq!(EventNoise::baseline(), EventNoise::Absolute { std: 0.02 });
        let v = EventVolume::zeros(4, 40, 40);
        let out = inject_noise(&v, EventNoise::baseline(), 3).unwrap();
        let std = out.volume.std();
        assert!((std - 0.02).abs() < 0.001, "{std}");
    }

    fn twelve_groups() -> Vec<EventGroup> {
        // T = 12, uniform timeline: boundaries are exact integers
        let tl = FrameTimeline::uniform(12, 12.0).unwrap();
        let ev: Vec<Event> = (0..120).map(|i| Event::new(0, 0, i as f64 * 0.1 + 0.05, 1)).collect();
        let s = EventStream::new(ev, 1, 1, 12.0).unwrap();
        group_events(&s, &tl).unwrap()
    }

    #[test]
    fn repartitions_interior_groups() {
        let groups = twelve_groups();
        let interior = &groups[1..11];
        let re = repartition_groups(interior, 7).unwrap();
        assert_eq!(re.len(), 7);
        assert_eq!(re[0].start, interior[0].start);
        assert_eq!(re[6].end, interior[9].end);
        let before: usize = interior.iter().map(EventGroup::len).sum();
        assert_eq!(re.iter().map(EventGroup::len).sum::<usize>(), before);
        // with the two endpoint groups this gives nine groups
        assert_eq!(re.len() + 2, 9);
    }

    #[test]
    fn repartition_identity_when_aligned() {
        let groups = twelve_groups();
        let interior = &groups[1..11];
        let re = repartition_groups(interior, 10).unwrap();
        for (a, b) in re.iter().zip(interior) {
            assert_eq!(a.events, b.events);
            assert_eq!((a.start, a.end), (b.start, b.end));
        }
    }

    #[test]
    fn repartition_leaves_late_half_empty() {
        let g = vec![EventGroup {
            index: 0,
            start: 0.0,
            end: 1.0,
            events: vec![Event::new(0, 0, 0.1, 1), Event::new(0, 0, 0.4, -1)],
        }];
        let re = repartition_groups(&g, 2).unwrap();
        assert_eq!((re[0].len(), re[1].len()), (2, 0));
        assert!(repartition_groups(&g, 0).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let s = parse_event_text("0.25,1,0,1\n0.5,0,1,-1\n", 2, 2, 1.0).unwrap();
        let mut buf = Vec::new();
        write_event_binary(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 2 * 13);
        assert_eq!(&buf[..4], b"EVT0");
        assert_eq!(read_event_binary(&buf[..]).unwrap(), s);
        assert!(read_event_binary(&buf[..20]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = parse_event_text("0.25,1,0,1\n0.5,0,1,-1\n", 2, 2, 1.0).unwrap();
        let back = parse_event_text(&format_event_text(&s), 2, 2, 1.0).unwrap();
        assert_eq!(back, s);
    }
}
