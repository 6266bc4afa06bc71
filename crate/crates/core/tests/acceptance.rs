//! Acceptance suite. Runs every criterion in sequence, prints one line per
//! criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use e2f_core::bounds::{check_bound, guided_step, random_instance};
use e2f_core::diffusion::{alpha_weight, lambda_weight, Arch, GaussianPosteriorDenoiser, NoiseSchedule, TrainConfig};
use e2f_core::eval::{mse, ssim, SsimParams};
use e2f_core::guidance::{residual_grad, residual_loss, GuidanceSchedule, StrengthMode};
use e2f_core::pipeline::{bench_sequences, frames_mse, run, train_on, BenchSpec, Mode, RunSettings};
use e2f_core::sampler::{sample, Decoder, SamplerConfig};
use e2f_core::simulator::{frame_differences, residual_from_volume, simulate_volume, SimConfig};
use e2f_core::synth::{moving_scene, SceneSpec};
use e2f_core::zeroshot::{deviations, modulate_interp, take_frames, vfi_layout, ReferenceSet, Task, WeightSchedule};
use e2f_core::events::EventVolume;
use ndarray::{s, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.2?}", o.detail, took);
    if let Some(limit) = limit {
        if took >= limit {
            o.pass = false;
            o.detail = format!("{} exceeds {:?}", o.detail, limit);
        }
    }
    o
}

fn quantization_bound() -> Outcome {
    let c = 0.05;
    let frames = moving_scene(&SceneSpec::new(12, 1, 32, 32), 2024).unwrap();
    let cfg = SimConfig::new(c).unwrap();
    let (stream, volume) = simulate_volume(&frames, &cfg).unwrap();
    let r = residual_from_volume(&volume, &cfg);
    let dv = frame_differences(frames.data());
    let worst = r.data().iter().zip(dv.data().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(worst <= c + 1e-12, format!("{} events, max |R - dV| = {worst:.6} (C = {c})", stream.len()))
}

fn sampler_fidelity() -> Outcome {
    let (mu, s0) = (0.7, 0.2);
    let d = GaussianPosteriorDenoiser { mu, s0 };
    let cond = EventVolume::zeros(1, 1, 1);
    let runs = 10_000;
    let xs: Vec<f64> = (0..runs)
        .map(|seed| {
            let cfg = SamplerConfig::new(NoiseSchedule::default(), (1, 1, 1, 1), seed);
            sample(&d, &cond, &cfg).unwrap().latent[[0, 0, 0, 0]]
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / runs as f64;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt();
    let pass = (mean - mu).abs() <= 0.02 && (std - s0).abs() <= 0.03;
    outcome(pass, format!("{runs} runs, mean {mean:.4} (target {mu}), std {std:.4} (target {s0})"))
}

fn guidance_descent() -> Outcome {
    let s = 1e-6;
    let h = 1e-6;
    let mut descents = 0;
    let mut fd_fail = 0;
    let mut worst_rel: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..100u64 {
        let inst = random_instance(seed).unwrap();
        let dec = Decoder::Linear(inst.decoder.clone());
        let u = &inst.latents;
        let r = &inst.residual;
        let before = residual_loss(u, r, &dec).unwrap();
        let grad = residual_grad(u, r, &dec).unwrap();
        let after = residual_loss(&(u - &(&grad * s)), r, &dec).unwrap();
        if after <= before {
            descents += 1;
        }
        // finite differences on 20 coordinates where the sign pattern is
        // constant over [u - h, u + h]
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
        let signs = |x: &Array4<f64>| -> Vec<i8> {
            let d = frame_differences(&dec.decode(x).unwrap());
            d.data().iter().zip(r.data().iter()).map(|(a, b)| (a - b).partial_cmp(&0.0).unwrap() as i8).collect()
        };
        let base = signs(u);
        let mut done = 0;
        let mut attempts = 0;
        while done < 20 && attempts < 1000 {
            attempts += 1;
            let idx: Vec<usize> = u.shape().iter().map(|&n| rng.random_range(0..n)).collect();
            let idx = [idx[0], idx[1], idx[2], idx[3]];
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[idx] += h;
            dn[idx] -= h;
            if signs(&up) != base || signs(&dn) != base || base.contains(&0) {
                continue;
            }
            let fd = (residual_loss(&up, r, &dec).unwrap() - residual_loss(&dn, r, &dec).unwrap()) / (2.0 * h);
            let g = grad[idx];
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-3);
            worst_rel = worst_rel.max(rel);
            if rel >= 1e-5 {
                fd_fail += 1;
            }
            done += 1;
            checked += 1;
        }
        if done < 20 {
            fd_fail += 1;
        }
    }
    let pass = descents >= 99 && fd_fail == 0;
    outcome(pass, format!("descent in {descents}/100, {checked} coordinates checked, worst rel. error {worst_rel:.2e}"))
}

fn error_bound() -> Outcome {
    let mut holds = 0;
    let mut rhs_ok = 0;
    let mut tightest: f64 = 0.0;
    for seed in 0..200u64 {
        let mut inst = random_instance(seed).unwrap();
        let before = check_bound(&inst).unwrap();
        if before.holds {
            holds += 1;
        }
        tightest = tightest.max(before.lhs / before.rhs);
        guided_step(&mut inst, 0.1).unwrap();
        let after = check_bound(&inst).unwrap();
        if after.rhs <= before.rhs {
            rhs_ok += 1;
        }
    }
    outcome(holds == 200 && rhs_ok == 200, format!("bound holds {holds}/200, max lhs/rhs {tightest:.3}, guided rhs non-increasing {rhs_ok}/200"))
}

fn zero_shot_anchors() -> Outcome {
    // prediction: alpha ramps 0 -> 1, so the final step is fully anchored
    let frames = moving_scene(&SceneSpec::new(12, 1, 16, 16), 77).unwrap();
    let (_, volume) = simulate_volume(&frames, &SimConfig::new(0.05).unwrap()).unwrap();
    let refs = take_frames(frames.data(), &vfi_layout(Task::Vfp, 12).unwrap().refs);
    let settings = RunSettings { weights: WeightSchedule::LinearAscending, guidance: None, seed: 3, ..Default::default() };
    let d = GaussianPosteriorDenoiser { mu: 0.5, s0: 0.25 };
    let out = run(&d, &volume, Mode::ZeroShot(Task::Vfp), refs.clone(), None, frames.dim(), &settings).unwrap();
    let anchor_err = out.latent.index_axis(Axis(0), 0).iter().zip(refs[0].iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let anchor_ok = anchor_err <= 2.0 * f64::EPSILON;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let shape = (rng.random_range(3..8), 1, rng.random_range(1..6), rng.random_range(1..6));
        let u = Array4::from_shape_simple_fn(shape, || rng.random_range(-2.0..2.0));
        let first = Array3::from_shape_simple_fn((1, shape.2, shape.3), || rng.random_range(-2.0..2.0));
        let last = Array3::from_shape_simple_fn((1, shape.2, shape.3), || rng.random_range(-2.0..2.0));
        let alpha: f64 = rng.random();
        let (d0, df) = deviations(&u, &ReferenceSet::interpolation(first, last).unwrap()).unwrap();
        let df = df.unwrap();
        for i in 0..shape.0 {
            let ui = u.index_axis(Axis(0), i);
            let m = modulate_interp(ui, &d0, &df, alpha);
            for (((&mv, &uv), &a), &b) in m.iter().zip(ui.iter()).zip(d0.iter()).zip(df.iter()) {
                let literal = alpha * ((a + uv) + (b + uv)) / 2.0 + (1.0 - alpha) * uv;
                worst = worst.max(((mv - uv) - alpha * (a + b) / 2.0).abs()).max((mv - literal).abs());
            }
        }
    }
    let pass = anchor_ok && worst <= 1e-12;
    outcome(pass, format!("VFP anchor max error {anchor_err:.1e}; VFI identity max error {worst:.1e}"))
}

/// One-sided paired t-test of `mean(a - b) < 0`.
fn paired_less(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let p = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(t);
    (mean, p)
}

/// Benchmark seeds: training sequences 1000..1016, evaluation sequences
/// 0..20, sampler seed = sequence index, model seed 7.
fn ablation_directions() -> Outcome {
    let spec = BenchSpec::default();
    let train = bench_sequences(&spec, 1000, 16).unwrap();
    let test = bench_sequences(&spec, 0, 20).unwrap();
    let cfg = TrainConfig { iterations: 1500, learning_rate: 1e-2, batch_size: 2, seed: 7, log_every: 500, ..Default::default() };
    let arch = Arch::Mlp { hidden: 16 };
    let (with_events, _) = train_on(&train, arch, spec.threshold, false, &cfg).unwrap();
    let (no_events, _) = train_on(&train, arch, spec.threshold, true, &cfg).unwrap();
    let all: Vec<usize> = (0..spec.scene.frames).collect();

    let mut lin = Vec::new();
    let mut con = Vec::new();
    for (i, seq) in test.iter().enumerate() {
        for (mode, out) in [(StrengthMode::Linear, &mut lin), (StrengthMode::Constant, &mut con)] {
            let settings = RunSettings { guidance: Some(GuidanceSchedule { mode, ..Default::default() }), seed: i as u64, ..Default::default() };
            let x = run(&with_events, &seq.volume, Mode::Reconstruct, vec![], Some(&seq.residual), seq.frames.dim(), &settings).unwrap();
            out.push(frames_mse(&x.latent, &seq.frames, &all));
        }
    }
    let layout = vfi_layout(Task::Vfp, spec.scene.frames).unwrap();
    let mut ev = Vec::new();
    let mut blind = Vec::new();
    for (i, seq) in test.iter().enumerate() {
        let refs = take_frames(seq.frames.data(), &layout.refs);
        let settings = RunSettings { guidance: None, seed: i as u64, ..Default::default() };
        let x = run(&with_events, &seq.volume, Mode::ZeroShot(Task::Vfp), refs.clone(), None, seq.frames.dim(), &settings).unwrap();
        ev.push(frames_mse(&x.latent, &seq.frames, &layout.targets));
        let x = run(&no_events, &seq.volume.zeroed(), Mode::ZeroShot(Task::Vfp), refs, None, seq.frames.dim(), &settings).unwrap();
        blind.push(frames_mse(&x.latent, &seq.frames, &layout.targets));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (_, pa) = paired_less(&lin, &con);
    let (_, pb) = paired_less(&ev, &blind);
    let a_ok = mean(&lin) <= mean(&con) && pa < 0.05;
    let b_ok = mean(&ev) < mean(&blind) && pb < 0.05;
    outcome(
        a_ok && b_ok,
        format!(
            "(a) linear {:.5} vs constant {:.5}, p = {pa:.2e}; (b) events {:.5} vs zeroed {:.5}, p = {pb:.2e}",
            mean(&lin),
            mean(&con),
            mean(&ev),
            mean(&blind)
        ),
    )
}

fn scalar_functions() -> Outcome {
    let checks = [
        (lambda_weight(0.5, 0.5), 0.5),
        (lambda_weight(0.0, 0.5), 1.0),
        (alpha_weight(0.0), 0.0),
        (alpha_weight(std::f64::consts::LN_2), 0.5),
    ];
    let worst = checks.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn naive_mse(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let (c, h, w) = a.dim();
    let mut total = 0.0;
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                total += (a[[ci, y, x]] - b[[ci, y, x]]).powi(2);
            }
        }
    }
    total / (c * h * w) as f64
}

fn naive_ssim(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let (c, h, w) = a.dim();
    let mut win = [[0.0; 11]; 11];
    let mut norm = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (-(((i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5))).exp();
            norm += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum_c = 0.0;
    for ci in 0..c {
        let mut sum = 0.0;
        for y in 0..=h - 11 {
            for x in 0..=w - 11 {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = win[i][j] / norm;
                        let (p, q) = (a[[ci, y + i, x + j]], b[[ci, y + i, x + j]]);
                        mx += wt * p;
                        my += wt * q;
                        xx += wt * p * p;
                        yy += wt * q * q;
                        xy += wt * p * q;
                    }
                }
                let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
                sum += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        sum_c += sum / ((h - 10) * (w - 10)) as f64;
    }
    sum_c / c as f64
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a = Array4::from_shape_simple_fn((10, 1, 24, 20), || rng.random::<f64>());
    let b = Array4::from_shape_simple_fn((10, 1, 24, 20), || rng.random::<f64>());
    let c3 = Array4::from_shape_simple_fn((2, 3, 16, 16), || rng.random::<f64>());
    let d3 = c3.mapv(|v| (v + 0.1 * rng.random::<f64>()).min(1.0));
    let p = SsimParams::default();
    let (self_mse, _) = mse(&a, &a).unwrap();
    let (self_ssim, _) = ssim(&a, &a, &p).unwrap();
    let self_ok = self_mse.iter().all(|&v| v == 0.0) && self_ssim.iter().all(|&v| (v - 1.0).abs() <= 1e-12);
    let mut worst: f64 = 0.0;
    for (x, y) in [(&a, &b), (&c3, &d3)] {
        let (m, _) = mse(x, y).unwrap();
        let (s, _) = ssim(x, y, &p).unwrap();
        for f in 0..x.shape()[0] {
            let (xf, yf) = (x.slice(s![f, .., .., ..]).to_owned(), y.slice(s![f, .., .., ..]).to_owned());
            worst = worst.max((m[f] - naive_mse(&xf, &yf)).abs()).max((s[f] - naive_ssim(&xf, &yf)).abs());
        }
    }
    outcome(self_ok && worst <= 1e-12, format!("self-comparison exact: {self_ok}; max oracle deviation {worst:.1e}"))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    println!("criterion 1: SKIP (full-scale benchmark numbers need the pretrained video backbone; replaced by criteria 2-9)");
    let criteria: Vec<Criterion> = vec![
        (2, "event round-trip quantization bound", Some(Duration::from_secs(1)), quantization_bound),
        (3, "sampler distribution fidelity", Some(Duration::from_secs(5)), sampler_fidelity),
        (4, "guidance descent and gradient", Some(Duration::from_secs(10)), guidance_descent),
        (5, "reconstruction error bound", Some(Duration::from_secs(10)), error_bound),
        (6, "zero-shot anchors", None, zero_shot_anchors),
        (7, "ablation directions", Some(Duration::from_secs(120)), ablation_directions),
        (8, "scalar-function exactness", None, scalar_functions),
        (9, "metric sanity", None, metric_sanity),
    ];
    let mut failed = 0;
    for (n, name, limit, f) in criteria {
        let o = timed(limit, f);
        println!("criterion {n}: {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
