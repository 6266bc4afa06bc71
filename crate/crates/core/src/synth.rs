//! Seeded synthetic scenes: smooth Gaussian blobs drifting over a shaded
//! background.

use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::simulator::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub blobs: usize,
    /// Largest blob speed in pixels per frame.
    pub max_speed: f64,
}

impl SceneSpec {
    pub fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        Self { frames, channels, height, width, blobs: 2, max_speed: 1.0 }
    }
}

struct Blob {
    x0: f64,
    y0: f64,
    vx: f64,
    vy: f64,
    radius: f64,
    amplitude: f64,
}

pub fn moving_scene(spec: &SceneSpec, seed: u64) -> Result<FrameSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (spec.height as f64, spec.width as f64);
    let scale = h.min(w) / 16.0;
    let base: f64 = rng.random_range(0.25..0.55);
    let gx: f64 = rng.random_range(-0.15..0.15);
    let gy: f64 = rng.random_range(-0.15..0.15);
    let blobs: Vec<Blob> = (0..spec.blobs)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(0.3..1.0) * spec.max_speed;
            Blob {
                x0: rng.random_range(0.2..0.8) * w,
                y0: rng.random_range(0.2..0.8) * h,
                vx: speed * angle.cos(),
                vy: speed * angle.sin(),
                radius: rng.random_range(1.5..3.5) * scale,
                amplitude: sign * rng.random_range(0.2..0.4),
            }
        })
        .collect();
    let gains: Vec<f64> = (0..spec.channels).map(|c| if c == 0 { 1.0 } else { rng.random_range(0.7..1.1) }).collect();
    let data = Array4::from_shape_fn((spec.frames, spec.channels, spec.height, spec.width), |(f, c, y, x)| {
        let (xf, yf) = (x as f64, y as f64);
        let mut v = base + gx * (xf / w - 0.5) + gy * (yf / h - 0.5);
        for b in &blobs {
            let cx = b.x0 + b.vx * f as f64;
            let cy = b.y0 + b.vy * f as f64;
            let d2 = (xf - cx).powi(2) + (yf - cy).powi(2);
            v += b.amplitude * (-d2 / (2.0 * b.radius * b.radius)).exp();
        }
        (v * gains[c]).clamp(0.0, 1.0)
    });
    FrameSequence::uniform(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let spec = SceneSpec::new(4, 3, 8, 10);
        let a = moving_scene(&spec, 5).unwrap();
        assert_eq!(a, moving_scene(&spec, 5).unwrap());
        assert_ne!(a, moving_scene(&spec, 6).unwrap());
        assert_eq!(a.dim(), (4, 3, 8, 10));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
