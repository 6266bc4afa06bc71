//! Flat `key = value` run configuration.

use std::fmt::Write as _;

use crate::diffusion::{make_schedule, Arch, NoiseSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::guidance::{GuidanceSchedule, StrengthMode};
use crate::simulator::SimConfig;
use crate::zeroshot::WeightSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub frames: usize,
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub sigma_data: f64,
    /// `None` disables guidance.
    pub guidance_mode: Option<StrengthMode>,
    pub guidance_s_max: f64,
    pub guidance_window: usize,
    pub threshold: f64,
    pub weight_mode: String,
    pub weight_value: f64,
    pub sigma_scale: f64,
    pub arch: Arch,
    pub event_scale: f64,
    pub train: TrainConfig,
    /// Relative event noise level (`0` leaves the condition untouched).
    pub event_noise: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 12,
            steps: 30,
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: 7.0,
            sigma_data: 0.5,
            guidance_mode: Some(StrengthMode::Linear),
            guidance_s_max: 0.1,
            guidance_window: 10,
            threshold: 0.05,
            weight_mode: "nonlinear".into(),
            weight_value: 0.5,
            sigma_scale: 1.0,
            arch: Arch::Mlp { hidden: 16 },
            event_scale: 0.05,
            train: TrainConfig::default(),
            event_noise: 0.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "frames",
    "schedule.steps",
    "schedule.sigma_min",
    "schedule.sigma_max",
    "schedule.rho",
    "schedule.sigma_data",
    "guidance.mode",
    "guidance.s_max",
    "guidance.window",
    "sim.threshold",
    "zeroshot.weight",
    "zeroshot.weight_value",
    "zeroshot.sigma_scale",
    "model.arch",
    "model.hidden",
    "model.event_scale",
    "train.iterations",
    "train.learning_rate",
    "train.batch_size",
    "train.sigma_min",
    "train.sigma_max",
    "train.log_every",
    "train.eval_draws",
    "train.cosine_decay",
    "events.noise",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = num(key, value)?,
            "frames" => self.frames = num(key, value)?,
            "schedule.steps" => self.steps = num(key, value)?,
            "schedule.sigma_min" => self.sigma_min = num(key, value)?,
            "schedule.sigma_max" => self.sigma_max = num(key, value)?,
            "schedule.rho" => self.rho = num(key, value)?,
            "schedule.sigma_data" => self.sigma_data = num(key, value)?,
            "guidance.mode" => self.guidance_mode = if value == "off" { None } else { Some(value.parse()?) },
            "guidance.s_max" => self.guidance_s_max = num(key, value)?,
            "guidance.window" => self.guidance_window = num(key, value)?,
            "sim.threshold" => self.threshold = num(key, value)?,
            "zeroshot.weight" => {
                if !["nonlinear", "linear-descending", "linear-ascending", "constant"].contains(&value) {
                    return Err(Error::InvalidArgument(format!("unknown weight schedule {value:?}")));
                }
                self.weight_mode = value.into();
            }
            "zeroshot.weight_value" => self.weight_value = num(key, value)?,
            "zeroshot.sigma_scale" => self.sigma_scale = num(key, value)?,
            "model.arch" => {
                self.arch = match value {
                    "affine" => Arch::Affine,
                    "mlp" => Arch::Mlp { hidden: if self.hidden() == 0 { 16 } else { self.hidden() } },
                    other => return Err(Error::InvalidArgument(format!("unknown model.arch {other:?}"))),
                }
            }
            "model.hidden" => {
                let hidden: usize = num(key, value)?;
                self.arch = if hidden == 0 { Arch::Affine } else { Arch::Mlp { hidden } };
            }
            "model.event_scale" => self.event_scale = num(key, value)?,
            "train.iterations" => self.train.iterations = num(key, value)?,
            "train.learning_rate" => self.train.learning_rate = num(key, value)?,
            "train.batch_size" => self.train.batch_size = num(key, value)?,
            "train.sigma_min" => self.train.sigma_min = num(key, value)?,
            "train.sigma_max" => self.train.sigma_max = num(key, value)?,
            "train.log_every" => self.train.log_every = num(key, value)?,
            "train.eval_draws" => self.train.eval_draws = num(key, value)?,
            "train.cosine_decay" => self.train.cosine_decay = num(key, value)?,
            "events.noise" => self.event_noise = num(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn hidden(&self) -> usize {
        match self.arch {
            Arch::Affine => 0,
            Arch::Mlp { hidden } => hidden,
        }
    }

    /// Every key with its effective value; parsing the output gives back an
    /// equal config.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        put("seed", self.seed.to_string());
        put("frames", self.frames.to_string());
        put("schedule.steps", self.steps.to_string());
        put("schedule.sigma_min", format!("{:?}", self.sigma_min));
        put("schedule.sigma_max", format!("{:?}", self.sigma_max));
        put("schedule.rho", format!("{:?}", self.rho));
        put("schedule.sigma_data", format!("{:?}", self.sigma_data));
        put("guidance.mode", self.guidance_mode.map_or("off".into(), |m| m.to_string()));
        put("guidance.s_max", format!("{:?}", self.guidance_s_max));
        put("guidance.window", self.guidance_window.to_string());
        put("sim.threshold", format!("{:?}", self.threshold));
        put("zeroshot.weight", self.weight_mode.clone());
        put("zeroshot.weight_value", format!("{:?}", self.weight_value));
        put("zeroshot.sigma_scale", format!("{:?}", self.sigma_scale));
        put("model.arch", if self.arch == Arch::Affine { "affine".into() } else { "mlp".into() });
        put("model.hidden", self.hidden().to_string());
        put("model.event_scale", format!("{:?}", self.event_scale));
        put("train.iterations", self.train.iterations.to_string());
        put("train.learning_rate", format!("{:?}", self.train.learning_rate));
        put("train.batch_size", self.train.batch_size.to_string());
        put("train.sigma_min", format!("{:?}", self.train.sigma_min));
        put("train.sigma_max", format!("{:?}", self.train.sigma_max));
        put("train.log_every", self.train.log_every.to_string());
        put("train.eval_draws", self.train.eval_draws.to_string());
        put("train.cosine_decay", self.train.cosine_decay.to_string());
        put("events.noise", format!("{:?}", self.event_noise));
        out
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        make_schedule(self.sigma_min, self.sigma_max, self.steps, self.rho)?.with_sigma_data(self.sigma_data)
    }

    pub fn guidance(&self) -> Result<Option<GuidanceSchedule>> {
        self.guidance_mode.map(|m| GuidanceSchedule::new(m, self.guidance_s_max, self.guidance_window)).transpose()
    }

    pub fn weights(&self) -> Result<WeightSchedule> {
        let w = match self.weight_mode.as_str() {
            "nonlinear" => WeightSchedule::Nonlinear { sigma_scale: self.sigma_scale },
            "linear-descending" => WeightSchedule::LinearDescending,
            "linear-ascending" => WeightSchedule::LinearAscending,
            _ => WeightSchedule::Constant(self.weight_value),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn sim(&self) -> Result<SimConfig> {
        SimConfig::new(self.threshold)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.schedule().unwrap(), NoiseSchedule::default());
        assert_eq!(c.guidance().unwrap(), Some(GuidanceSchedule::default()));
        assert_eq!(c.weights().unwrap(), WeightSchedule::default());
        assert_eq!(c.frames, 12);
    }

    #[test]
    fn dump_round_trip() {
        let mut c = RunConfig::default();
        c.set("guidance.mode", "off").unwrap();
        c.set("zeroshot.weight", "constant").unwrap();
        c.set("zeroshot.weight_value", "1").unwrap();
        c.set("model.arch", "affine").unwrap();
        c.set("schedule.sigma_min", "0.0031").unwrap();
        let back = RunConfig::parse(&c.dump()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::default().dump().lines().count(), KEYS.len());
        for line in RunConfig::default().dump().lines() {
            assert!(KEYS.contains(&line.split(" = ").next().unwrap()), "{line}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let err = RunConfig::parse("seed = 3\nnope = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(RunConfig::parse("guidance.mode = sideways").is_err());
        assert!(RunConfig::parse("seed 3").is_err());
        assert!(RunConfig::parse("frames = -1").is_err());
        assert_eq!(RunConfig::parse("# c\n\nseed = 9 # x").unwrap().seed, 9);
    }
}
