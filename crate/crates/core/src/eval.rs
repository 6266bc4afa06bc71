//! Frame fidelity metrics: MSE and Gaussian-window SSIM.

use ndarray::{s, Array2, Array4, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mse: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mean_mse: f64,
    pub mean_ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, range: 1.0 }
    }
}

/// SSIM on colour frames is the mean of the per-channel values.
pub const SSIM_CONVENTION: &str = "per-channel mean";

fn check_shapes(a: &Array4<f64>, b: &Array4<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("frame shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-frame mean squared error and its mean over frames.
pub fn mse(a: &Array4<f64>, b: &Array4<f64>) -> Result<(Vec<f64>, f64)> {
    check_shapes(a, b)?;
    let per: Vec<f64> = (0..a.shape()[0])
        .map(|f| {
            let (x, y) = (a.slice(s![f, .., .., ..]), b.slice(s![f, .., .., ..]));
            let n = x.len() as f64;
            x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / n
        })
        .collect();
    let m = mean(&per);
    Ok((per, m))
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Valid-mode separable filtering.
fn filter(img: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let n = k.len();
    let (h, w) = img.dim();
    let rows = Array2::from_shape_fn((h, w + 1 - n), |(y, x)| (0..n).map(|i| k[i] * img[[y, x + i]]).sum::<f64>());
    Array2::from_shape_fn((h + 1 - n, w + 1 - n), |(y, x)| (0..n).map(|i| k[i] * rows[[y + i, x]]).sum::<f64>())
}

fn ssim_plane(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, p: &SsimParams, k: &[f64]) -> f64 {
    let (a, b) = (a.to_owned(), b.to_owned());
    let (mx, my) = (filter(&a, k), filter(&b, k));
    let (sxx, syy, sxy) = (filter(&(&a * &a), k), filter(&(&b * &b), k), filter(&(&a * &b), k));
    let c1 = (p.k1 * p.range).powi(2);
    let c2 = (p.k2 * p.range).powi(2);
    let mut total = 0.0;
    for ((((&mx, &my), &sxx), &syy), &sxy) in mx.iter().zip(my.iter()).zip(sxx.iter()).zip(syy.iter()).zip(sxy.iter()) {
        let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total / mx.len() as f64
}

/// Per-frame SSIM averaged over valid window positions and channels.
pub fn ssim(a: &Array4<f64>, b: &Array4<f64>, params: &SsimParams) -> Result<(Vec<f64>, f64)> {
    check_shapes(a, b)?;
    let (frames, channels, h, w) = a.dim();
    if h < params.window || w < params.window || params.window == 0 {
        return Err(Error::Shape(format!("{h}x{w} frames are smaller than the {}-pixel SSIM window", params.window)));
    }
    let k = gaussian_kernel(params.window, params.sigma);
    let per: Vec<f64> = (0..frames)
        .map(|f| {
            (0..channels).map(|c| ssim_plane(a.slice(s![f, c, .., ..]), b.slice(s![f, c, .., ..]), params, &k)).sum::<f64>() / channels as f64
        })
        .collect();
    let m = mean(&per);
    Ok((per, m))
}

pub fn evaluate(pred: &Array4<f64>, truth: &Array4<f64>) -> Result<MetricReport> {
    let (mse, mean_mse) = mse(pred, truth)?;
    let (ssim, mean_ssim) = ssim(pred, truth, &SsimParams::default())?;
    Ok(MetricReport { mse, ssim, mean_mse, mean_ssim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, shape: (usize, usize, usize, usize)) -> Array4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array4::from_shape_simple_fn(shape, || rng.random())
    }

    #[test]
    fn mse_examples() {
        let a = random(1, (2, 1, 4, 4));
        assert_eq!(mse(&a, &a).unwrap().1, 0.0);
        let z = Array4::zeros((1, 1, 3, 3));
        let h = Array4::from_elem((1, 1, 3, 3), 0.5);
        assert_eq!(mse(&z, &h).unwrap().1, 0.25);
        assert!(mse(&z, &Array4::zeros((1, 1, 3, 2))).is_err());
    }

    #[test]
    fn ssim_examples() {
        let a = random(2, (2, 3, 16, 16));
        let (per, m) = ssim(&a, &a, &SsimParams::default()).unwrap();
        assert!(per.iter().all(|v| (v - 1.0).abs() < 1e-12) && (m - 1.0).abs() < 1e-12);
        let flat = Array4::from_elem((1, 1, 12, 12), 0.3);
        assert!((ssim(&flat, &flat, &SsimParams::default()).unwrap().1 - 1.0).abs() < 1e-12);
        let checker = Array4::from_shape_fn((1, 1, 16, 16), |(_, _, y, x)| ((y / 2 + x / 2) % 2) as f64);
        let inv = checker.mapv(|v| 1.0 - v);
        assert!(ssim(&checker, &inv, &SsimParams::default()).unwrap().1 < 0.0);
        assert!(ssim(&Array4::zeros((1, 1, 10, 12)), &Array4::zeros((1, 1, 10, 12)), &SsimParams::default()).is_err());
    }

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((0..11).all(|i| (k[i] - k[10 - i]).abs() < 1e-18));
    }
}
