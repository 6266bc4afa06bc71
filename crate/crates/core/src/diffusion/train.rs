use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::toy::{event_features, ToyDenoiser};
use super::{lambda_weight, Latent, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN};
use crate::error::{Error, Result};
use crate::events::EventVolume;

/// One training pair: the clean latent and the event condition over the
/// same frames.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub clean: Latent,
    pub condition: EventVolume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Training noise levels are drawn log-uniformly from this range.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub seed: u64,
    pub log_every: usize,
    /// Fixed `(sample, sigma, noise)` draws used for the reported loss.
    pub eval_draws: usize,
    pub cosine_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 1e-2,
            batch_size: 4,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            seed: 0,
            log_every: 100,
            eval_draws: 32,
            cosine_decay: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 || self.log_every == 0 || self.eval_draws == 0 {
            return Err(Error::InvalidArgument("batch_size, log_every and eval_draws must be >= 1".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
            return Err(Error::InvalidArgument("need 0 < sigma_min < sigma_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `(iteration, evaluation loss)` at iteration 0, every `log_every`
    /// iterations and at the end.
    pub log: Vec<(usize, f64)>,
    /// Worst relative error of the analytic gradient against central
    /// differences, measured on the initial parameters.
    pub gradient_check: f64,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.log.first().map(|l| l.1).unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.log.last().map(|l| l.1).unwrap_or(f64::NAN)
    }
}

struct Prepared {
    clean: Latent,
    features: Array4<f64>,
}

struct Draw {
    sample: usize,
    sigma: f64,
    noise: Latent,
}

fn draw(rng: &mut ChaCha8Rng, data: &[Prepared], config: &TrainConfig) -> Draw {
    let sample = rng.random_range(0..data.len());
    let (lo, hi) = (config.sigma_min.ln(), config.sigma_max.ln());
    let sigma = rng.random_range(lo..hi).exp();
    let noise = data[sample].clean.mapv(|_| StandardNormal.sample(rng));
    Draw { sample, sigma, noise }
}

fn draw_loss(model: &ToyDenoiser, data: &[Prepared], d: &Draw, grad: &mut [f64]) -> Result<f64> {
    let p = &data[d.sample];
    let noisy = &p.clean + &(&d.noise * d.sigma);
    model.loss_and_grad(&noisy, &p.features, &p.clean, d.sigma, lambda_weight(d.sigma, model.sigma_data()), grad)
}

fn eval_loss(model: &ToyDenoiser, data: &[Prepared], draws: &[Draw]) -> Result<f64> {
    let mut scratch = vec![0.0; model.params().len()];
    let mut total = 0.0;
    for d in draws {
        total += draw_loss(model, data, d, &mut scratch)?;
    }
    Ok(total / draws.len() as f64)
}

fn gradient_check(model: &mut ToyDenoiser, data: &[Prepared], d: &Draw, rng: &mut ChaCha8Rng) -> Result<f64> {
    let n = model.params().len();
    let mut grad = vec![0.0; n];
    draw_loss(model, data, d, &mut grad)?;
    let mut scratch = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let i = rng.random_range(0..n);
        let h = 1e-6;
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let lp = draw_loss(model, data, d, &mut scratch)?;
        model.params_mut()[i] = orig - h;
        let lm = draw_loss(model, data, d, &mut scratch)?;
        model.params_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-5));
    }
    Ok(worst)
}

/// Minimises the `lambda(sigma)`-weighted squared error between the clean
/// latents and the model's estimate with Adam.
pub fn train_denoiser(dataset: &[TrainSample], mut model: ToyDenoiser, config: &TrainConfig) -> Result<(ToyDenoiser, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one sample".into()));
    }
    let data: Vec<Prepared> = dataset
        .iter()
        .map(|s| Prepared { clean: s.clean.clone(), features: event_features(&s.condition, model.event_scale()) })
        .collect();

    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let eval_draws: Vec<Draw> = (0..config.eval_draws).map(|_| draw(&mut eval_rng, &data, config)).collect();
    let initial = eval_loss(&model, &data, &eval_draws)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let gradient_check = gradient_check(&mut model, &data, &eval_draws[0], &mut eval_rng)?;
    if !(gradient_check < 1e-4) {
        return Err(Error::InvalidArgument(format!("analytic gradient disagrees with finite differences (rel. error {gradient_check:e})")));
    }

    let n = model.params().len();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = vec![(0, initial)];

    for it in 1..=config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..config.batch_size {
            let d = draw(&mut rng, &data, config);
            loss += draw_loss(&model, &data, &d, &mut grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        let inv_b = 1.0 / config.batch_size as f64;
        let lr = if config.cosine_decay {
            config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * (it - 1) as f64 / config.iterations as f64).cos())
        } else {
            config.learning_rate
        };
        let (c1, c2) = (1.0 - beta1.powi(it as i32), 1.0 - beta2.powi(it as i32));
        let params = model.params_mut();
        for i in 0..n {
            let g = grad[i] * inv_b;
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
        if it % config.log_every == 0 || it == config.iterations {
            let l = eval_loss(&model, &data, &eval_draws)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: it });
            }
            log.push((it, l));
        }
    }
    Ok((model, TrainReport { log, gradient_check }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Arch;

    fn linear_dataset(n: usize) -> Vec<TrainSample> {
        // clean = 0.4 + 0.05 * running ch0 - 0.02 * ch1 (an event-linear map)
        (0..n)
            .map(|s| {
                let (f, h, w) = (4, 3, 3);
                let data = Array4::from_shape_fn((f, 3, h, w), |(fi, c, y, x)| {
                    let k = ((s * 31 + fi * 7 + y * 3 + x * 5) % 7) as f64 - 3.0;
                    match c {
                        0 => k,
                        1 => k.max(0.0),
                        _ => k.min(0.0),
                    }
                });
                let condition = EventVolume::from_array(data).unwrap();
                let feats = event_features(&condition, 1.0);
                let clean = Array4::from_shape_fn((f, 1, h, w), |(fi, _, y, x)| 0.4 + 0.05 * feats[[fi, 3, y, x]] - 0.02 * feats[[fi, 1, y, x]]);
                TrainSample { clean, condition }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let model = ToyDenoiser::new(Arch::Mlp { hidden: 4 }, 1, 0.5, 1.0, 3).unwrap();
        let cfg = TrainConfig { iterations: 20, learning_rate: 0.0, log_every: 10, ..Default::default() };
        let (trained, report) = train_denoiser(&linear_dataset(3), model.clone(), &cfg).unwrap();
        assert_eq!(trained.params(), model.params());
        assert!(report.gradient_check < 1e-4);
    }

    #[test]
    fn affine_model_solves_event_linear_data() {
        let model = ToyDenoiser::new(Arch::Affine, 1, 0.5, 1.0, 0).unwrap();
        let cfg = TrainConfig { iterations: 3000, learning_rate: 2e-2, batch_size: 4, log_every: 300, seed: 1, ..Default::default() };
        let (_, report) = train_denoiser(&linear_dataset(6), model, &cfg).unwrap();
        assert!(report.final_loss() < 1e-4 * report.initial_loss(), "{:?}", report.log);
    }

    #[test]
    fn rejects_empty_dataset_and_bad_config() {
        let model = ToyDenoiser::new(Arch::Affine, 1, 0.5, 1.0, 0).unwrap();
        assert!(train_denoiser(&[], model.clone(), &TrainConfig::default()).is_err());
        let cfg = TrainConfig { learning_rate: -1.0, ..Default::default() };
        assert!(train_denoiser(&linear_dataset(1), model, &cfg).is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut model = ToyDenoiser::new(Arch::Affine, 1, 0.5, 1.0, 0).unwrap();
        let mut data = linear_dataset(1);
        data[0].clean[[0, 0, 0, 0]] = f64::INFINITY;
        model.params_mut()[0] = 0.0;
        let cfg = TrainConfig { iterations: 5, eval_draws: 1, ..Default::default() };
        let err = train_denoiser(&data, model, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { iteration: 0 }), "{err}");
    }
}
