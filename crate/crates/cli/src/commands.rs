use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use e2f_core::bounds::{check_bound, csv_row, random_instance, CSV_HEADER};
use e2f_core::config::RunConfig;
use e2f_core::diffusion::{read_container, train_denoiser, write_container, ToyDenoiser, TrainSample};
use e2f_core::eval::evaluate;
use e2f_core::events::{
    format_event_text, group_events, inject_noise, parse_event_text, read_event_binary, stack_events, write_event_binary, EventNoise,
    EventStream, EventVolume, FrameTimeline,
};
use e2f_core::io::{encode_pnm, read_tensor, write_tensor};
use e2f_core::pipeline::{self, Mode, RunSettings};
use e2f_core::simulator::{residual_from_volume, simulate_volume, FrameSequence};
use e2f_core::synth::{moving_scene, SceneSpec};
use e2f_core::zeroshot::{take_frames, vfi_layout, Task};
use ndarray::{s, Array4, Axis};

pub const FRAMES_FILE: &str = "frames.f32";
pub const VOLUME_FILE: &str = "volume.f32";
pub const EVENTS_FILE: &str = "events.bin";
pub const EVAL_HEADER: &str = "frame_index,mse,ssim_per_channel_mean";

fn load(path: &Path) -> Result<Array4<f64>> {
    read_tensor(path).with_context(|| format!("reading tensor {}", path.display()))
}

fn save(path: &Path, data: &Array4<f64>) -> Result<()> {
    write_tensor(path, data).with_context(|| format!("writing tensor {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating directory {}", path.display()))
}

pub fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_text_events(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "csv"))
}

fn write_events(path: &Path, stream: &EventStream) -> Result<()> {
    if is_text_events(path) {
        fs::write(path, format_event_text(stream))?;
    } else {
        let mut w = BufWriter::new(File::create(path)?);
        write_event_binary(stream, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// `# width=W height=H duration=T` as written by the text formatter.
fn text_header(text: &str) -> (Option<usize>, Option<usize>, Option<f64>) {
    let (mut w, mut h, mut d) = (None, None, None);
    if let Some(line) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        for field in line.split_whitespace() {
            match field.split_once('=') {
                Some(("width", v)) => w = v.parse().ok(),
                Some(("height", v)) => h = v.parse().ok(),
                Some(("duration", v)) => d = v.parse().ok(),
                _ => {}
            }
        }
    }
    (w, h, d)
}

fn read_events(path: &Path, width: Option<usize>, height: Option<usize>, duration: Option<f64>) -> Result<EventStream> {
    let bytes = fs::read(path).with_context(|| format!("reading events {}", path.display()))?;
    if bytes.starts_with(b"EVT0") {
        return Ok(read_event_binary(&bytes[..])?);
    }
    let text = String::from_utf8(bytes).context("event file is neither EVT0 binary nor UTF-8 text")?;
    let (hw, hh, hd) = text_header(&text);
    let (Some(w), Some(h), Some(d)) = (width.or(hw), height.or(hh), duration.or(hd)) else {
        bail!("text events need --width, --height and --duration (or a `# width= height= duration=` header)");
    };
    Ok(parse_event_text(&text, w, h, d)?)
}

pub fn synth(cfg: &RunConfig, out: &Path, count: usize, channels: usize, height: usize, width: usize) -> Result<()> {
    let sim = cfg.sim()?;
    let spec = SceneSpec::new(cfg.frames, channels, height, width);
    for i in 0..count {
        let seed = cfg.seed + i as u64;
        let frames = moving_scene(&spec, seed)?;
        let (stream, volume) = simulate_volume(&frames, &sim)?;
        let dir = out.join(format!("seq_{i:04}"));
        create_dir(&dir)?;
        save(&dir.join(FRAMES_FILE), frames.data())?;
        save(&dir.join(VOLUME_FILE), volume.data())?;
        write_events(&dir.join(EVENTS_FILE), &stream)?;
    }
    println!("wrote {count} sequences to {}", out.display());
    Ok(())
}

pub fn simulate(cfg: &RunConfig, frames: &Path, events: &Path, volume: Option<&Path>) -> Result<()> {
    let seq = FrameSequence::uniform(load(frames)?)?;
    let (stream, vol) = simulate_volume(&seq, &cfg.sim()?)?;
    write_events(events, &stream).with_context(|| format!("writing events {}", events.display()))?;
    if let Some(path) = volume {
        save(path, vol.data())?;
    }
    println!("{} events over {} frames", stream.len(), seq.frames());
    Ok(())
}

pub fn stack(cfg: &RunConfig, events: &Path, out: &Path, width: Option<usize>, height: Option<usize>, duration: Option<f64>) -> Result<()> {
    let stream = read_events(events, width, height, duration)?;
    let timeline = FrameTimeline::uniform(cfg.frames, stream.duration())?;
    let groups = group_events(&stream, &timeline)?;
    let volume = stack_events(&groups, stream.width(), stream.height());
    save(out, volume.data())
}

fn sequence_dirs(data: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(data)
        .with_context(|| format!("reading dataset {}", data.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(FRAMES_FILE).is_file())
        .collect();
    dirs.sort();
    ensure!(!dirs.is_empty(), "dataset {} has no sequence directories containing {FRAMES_FILE}", data.display());
    Ok(dirs)
}

pub fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let sim = cfg.sim()?;
    let mut samples = Vec::new();
    for dir in sequence_dirs(data)? {
        let frames = load(&dir.join(FRAMES_FILE))?;
        let volume_path = dir.join(VOLUME_FILE);
        let condition = if volume_path.is_file() {
            EventVolume::from_array(load(&volume_path)?)?
        } else {
            simulate_volume(&FrameSequence::uniform(frames.clone())?, &sim)?.1
        };
        let (f, _, h, w) = frames.dim();
        ensure!(
            (condition.frames(), condition.height(), condition.width()) == (f, h, w),
            "{}: volume is {:?} but frames are {:?}",
            dir.display(),
            condition.data().shape(),
            frames.shape()
        );
        samples.push(TrainSample { clean: frames, condition });
    }
    let channels = samples[0].clean.shape()[1];
    ensure!(samples.iter().all(|s| s.clean.shape()[1] == channels), "sequences have differing channel counts");

    let tc = cfg.train_config();
    let model = ToyDenoiser::new(cfg.arch, channels, cfg.sigma_data, cfg.event_scale, tc.seed)?;
    let (model, report) = train_denoiser(&samples, model, &tc)?;

    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_container(&model.to_arrays(), &mut w)?;
    w.flush()?;
    let mut csv = String::from("iteration,loss\n");
    for (it, loss) in &report.log {
        writeln!(csv, "{it},{loss}")?;
    }
    fs::write(report_path(out), csv)?;
    println!(
        "trained on {} sequences: loss {} -> {} (gradient check {:e})",
        samples.len(),
        report.initial_loss(),
        report.final_loss(),
        report.gradient_check
    );
    Ok(())
}

pub fn report_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".report.csv");
    PathBuf::from(s)
}

fn load_model(path: &Path) -> Result<ToyDenoiser> {
    let file = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    let arrays = read_container(BufReader::new(file)).with_context(|| format!("reading model {}", path.display()))?;
    Ok(ToyDenoiser::from_arrays(&arrays)?)
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Vfi4x => "vfi4",
        Task::Vfi11x => "vfi11",
        Task::Vfp => "vfp",
    }
}

fn reference_frames(task: Task, path: &Path, shape: (usize, usize, usize, usize)) -> Result<Vec<ndarray::Array3<f64>>> {
    let refs = load(path)?;
    let (f, c, h, w) = shape;
    let (n, rc, rh, rw) = refs.dim();
    ensure!((rc, rh, rw) == (c, h, w), "reference frames are {rc}x{rh}x{rw} but the run needs {c}x{h}x{w}");
    let layout = vfi_layout(task, f)?;
    if n == f {
        Ok(take_frames(&refs, &layout.refs))
    } else if n == layout.refs.len() {
        Ok(refs.axis_iter(Axis(0)).map(|v| v.to_owned()).collect())
    } else {
        bail!("{} over {f} frames needs {} reference frames (or all {f}), got {n}", task_name(task), layout.refs.len())
    }
}

pub struct RunArgs<'a> {
    pub volume: &'a Path,
    pub model: &'a Path,
    pub refs: Option<&'a Path>,
    pub out: &'a Path,
    pub pnm: Option<&'a Path>,
    pub trace: Option<&'a Path>,
}

pub fn run(cfg: &RunConfig, task: Option<Task>, args: &RunArgs<'_>) -> Result<()> {
    let mut volume = EventVolume::from_array(load(args.volume)?)?;
    if cfg.event_noise > 0.0 {
        volume = inject_noise(&volume, EventNoise::Relative { eta: cfg.event_noise }, cfg.seed)?.volume;
    }
    let model = load_model(args.model)?;
    let shape = (volume.frames(), model.channels(), volume.height(), volume.width());

    let (mode, refs) = match (task, args.refs) {
        (None, None) => (Mode::Reconstruct, Vec::new()),
        (None, Some(_)) => bail!("reconstruct takes no reference frames"),
        (Some(t), None) => bail!("{} needs --refs", task_name(t)),
        (Some(t), Some(path)) => (Mode::ZeroShot(t), reference_frames(t, path, shape)?),
    };
    let guidance = cfg.guidance()?;
    let residual = guidance.map(|_| cfg.sim().map(|sim| residual_from_volume(&volume, &sim))).transpose()?;
    let settings = RunSettings {
        schedule: cfg.schedule()?,
        guidance,
        weights: cfg.weights()?,
        seed: cfg.seed,
        trace_every: args.trace.map(|_| 1),
    };
    let output = pipeline::run(&model, &volume, mode, refs, residual.as_ref(), shape, &settings)?;

    save(args.out, &output.latent)?;
    if let Some(dir) = args.pnm {
        create_dir(dir)?;
        let ext = if shape.1 == 3 { "ppm" } else { "pgm" };
        for f in 0..shape.0 {
            let bytes = encode_pnm(output.latent.slice(s![f, .., .., ..]))?;
            fs::write(dir.join(format!("frame_{f:03}.{ext}")), bytes)?;
        }
    }
    if let Some(dir) = args.trace {
        create_dir(dir)?;
        for (step, latent) in &output.trace {
            save(&dir.join(format!("step_{step:03}.f32")), latent)?;
        }
    }
    Ok(())
}

pub fn bound_check(cfg: &RunConfig, instances: usize, out: Option<&Path>) -> Result<()> {
    let mut csv = format!("{CSV_HEADER}\n");
    let mut holds = 0;
    for i in 0..instances as u64 {
        let seed = cfg.seed + i;
        let report = check_bound(&random_instance(seed)?).with_context(|| format!("instance {seed}"))?;
        holds += usize::from(report.holds);
        writeln!(csv, "{}", csv_row(seed, &report))?;
    }
    write_or_print(out, &csv)?;
    if out.is_some() {
        println!("bound holds in {holds}/{instances} instances");
    }
    Ok(())
}

pub fn eval(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let report = evaluate(&load(pred)?, &load(truth)?)?;
    let mut csv = format!("{EVAL_HEADER}\n");
    for (f, (m, s)) in report.mse.iter().zip(&report.ssim).enumerate() {
        writeln!(csv, "{f},{m},{s}")?;
    }
    writeln!(csv, "mean,{},{}", report.mean_mse, report.mean_ssim)?;
    write_or_print(out, &csv)
}
