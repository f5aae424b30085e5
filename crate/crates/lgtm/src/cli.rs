//! The `lgtm` command line.
//!
//! Exit codes: 0 ok, 1 I/O, 2 argument, 3 data contract, 4 backend.
//!
//! `--config <file.json>` supplies defaults for the chosen subcommand: each
//! key is a long flag name, and explicit flags on the command line win.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lgtm_core::eval::{BaselineObjectDetector, BaselineShadowDetector, EvalSample, LightDirection};
use lgtm_core::fixtures::shadow_dataset;
use lgtm_core::sensitivity::{run_sweep, SweepConfig, DEFAULT_ALPHAS};
use lgtm_core::{
    apply_light_guidance_with, generate, make_light_mask, resample_mask, sample_initial_noise, Channel,
    GenerationRequest, GuidanceOptions, LightSpec, OutputSize, Point, StructuralCondition,
};
use serde_json::Value;

use crate::formats::{ltz, mask_png, read_bytes, rgb_png};
use crate::registry::{self, SharedBackend};
use crate::service::{self, ServiceConfig};
use crate::{dataset, report, spec_json, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_ARGS: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn args(message: impl ToString) -> Self {
        Self { code: EXIT_ARGS, message: message.to_string() }
    }

    fn data(message: impl ToString) -> Self {
        Self { code: EXIT_DATA, message: message.to_string() }
    }

    fn backend(message: impl ToString) -> Self {
        Self { code: EXIT_BACKEND, message: message.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => EXIT_IO,
            Error::UnknownBackend(_) => EXIT_ARGS,
            Error::BackendUnavailable { .. } => EXIT_BACKEND,
            Error::Core(lgtm_core::Error::Backend(_)) => EXIT_BACKEND,
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lgtm", version, about = "Light-guided initial-noise manipulation for latent diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a light mask as a 16-bit grayscale PNG.
    #[command(args_override_self = true)]
    Mask(MaskArgs),
    /// Sample seeded initial latent noise into an LTZ file.
    #[command(args_override_self = true)]
    Noise(NoiseArgs),
    /// Apply light guidance to an LTZ latent with a mask PNG.
    #[command(args_override_self = true)]
    Guide(GuideArgs),
    /// Generate an image through a backend.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Run the channel-scaling sensitivity sweep.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Score shadow-direction light accuracy on a dataset directory.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Write a synthetic shadow dataset with a manifest.
    #[command(args_override_self = true)]
    Fixtures(FixturesArgs),
    /// Run the HTTP job service.
    #[command(args_override_self = true)]
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LightArgs {
    /// Point light at normalized x,y.
    #[arg(long, value_name = "X,Y", value_parser = parse_point, conflicts_with_all = ["segment", "spec"])]
    pub point: Option<Point>,
    /// Segment light from x1,y1 to x2,y2.
    #[arg(long, value_name = "X1,Y1,X2,Y2", value_parser = parse_segment, conflicts_with = "spec")]
    pub segment: Option<(Point, Point)>,
    /// Falloff radius as a fraction of the frame diagonal, in (0, 4].
    #[arg(long, default_value_t = 0.8)]
    pub radius: f64,
    /// LightSpec JSON file (strict).
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
}

impl LightArgs {
    fn resolve(&self) -> CliResult<Option<LightSpec>> {
        if let Some(path) = &self.spec {
            let text = String::from_utf8(read_bytes(path)?).map_err(CliError::args)?;
            return spec_json::parse_light_spec(&text, true).map(Some).map_err(CliError::args);
        }
        let spec = match (self.point, self.segment) {
            (Some(p), _) => LightSpec::point(p, self.radius),
            (None, Some((a, b))) => LightSpec::segment(a, b, self.radius),
            (None, None) => return Ok(None),
        };
        spec.map(Some).map_err(CliError::args)
    }
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[command(flatten)]
    pub light: LightArgs,
    #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "512x512")]
    pub size: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image size; the latent is one eighth of it on each side.
    #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "1024x1024")]
    pub size: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GuideArgs {
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Resample the mask to latent resolution when sizes differ.
    #[arg(long)]
    pub resample: bool,
    /// Rescale lit cells of channel 1 to unit standard deviation.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct BackendArg {
    /// "mock" or "adapter:<name>".
    #[arg(long, env = "LGTM_BACKEND", default_value = "mock")]
    pub backend: String,
}

impl BackendArg {
    fn resolve(&self) -> CliResult<SharedBackend> {
        registry::resolve_str(&self.backend).map_err(CliError::from)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub prompt: String,
    #[arg(long)]
    pub negative_prompt: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = lgtm_core::backend::DEFAULT_STEPS)]
    pub steps: u32,
    #[arg(long, default_value_t = lgtm_core::backend::DEFAULT_GUIDANCE_SCALE)]
    pub guidance_scale: f64,
    #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "1024x1024")]
    pub size: (usize, usize),
    #[command(flatten)]
    pub light: LightArgs,
    /// Structural conditioning payload passed to the backend untouched.
    #[arg(long, value_name = "FILE")]
    pub condition: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArg,
    #[arg(long, default_value = "out.png")]
    pub out: PathBuf,
    /// Write a JSON summary of the run.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "a photo of a cat")]
    pub prompt: String,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_channel, default_value = "1,2,3,4")]
    pub channels: Vec<Channel>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "512x512")]
    pub size: (usize, usize),
    #[command(flatten)]
    pub backend: BackendArg,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding images and manifest.json.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Text table path; printed to stdout when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value = "Ours")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub per_direction: usize,
    #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "128x128")]
    pub size: (usize, usize),
    /// Randomly permute the recorded directions with this seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "lgtm-store")]
    pub store: PathBuf,
    #[arg(long, default_value_t = service::DEFAULT_QUEUE_CAPACITY)]
    pub queue_capacity: usize,
    /// Allowed CORS origin; any origin when absent.
    #[arg(long)]
    pub cors_origin: Option<String>,
    #[command(flatten)]
    pub backend: BackendArg,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", parts.len()));
    }
    Ok(parts)
}

fn parse_point(s: &str) -> Result<Point, String> {
    let v = parse_floats(s, 2)?;
    Ok(Point::new(v[0], v[1]))
}

fn parse_segment(s: &str) -> Result<(Point, Point), String> {
    let v = parse_floats(s, 4)?;
    Ok((Point::new(v[0], v[1]), Point::new(v[2], v[3])))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.parse().map_err(|e| format!("width: {e}"))?;
    let h: usize = h.parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("width and height must be positive".into());
    }
    Ok((w, h))
}

fn parse_channel(s: &str) -> Result<Channel, String> {
    let n: u8 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    Channel::new(n).map_err(|e| e.to_string())
}

fn output_size((w, h): (usize, usize)) -> CliResult<OutputSize> {
    let size = OutputSize::new(
        u32::try_from(w).map_err(CliError::args)?,
        u32::try_from(h).map_err(CliError::args)?,
    );
    lgtm_core::latent_dims(size).map_err(CliError::args)?;
    Ok(size)
}

/// Expands `--config FILE` into flags inserted right after the subcommand,
/// ahead of the explicit flags so those take precedence.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            config = Some(PathBuf::from(iter.next().ok_or_else(|| CliError::args("--config needs a path"))?));
        } else if let Some(path) = arg.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let value: Value = serde_json::from_slice(&read_bytes(&path)?)
        .map_err(|e| CliError::args(format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::args("config file must hold a JSON object"));
    };
    let mut injected = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => injected.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => injected.extend([flag.into(), s.into()]),
            Value::Number(n) => injected.extend([flag.into(), n.to_string().into()]),
            Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(",");
                injected.extend([flag.into(), joined.into()]);
            }
            Value::Object(_) => return Err(CliError::args(format!("config key {key:?} must not be an object"))),
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, injected);
    Ok(rest)
}

/// Parses arguments (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = match expand_config(args.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ARGS } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command) -> CliResult {
    match command {
        Command::Mask(a) => cmd_mask(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Guide(a) => cmd_guide(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Fixtures(a) => cmd_fixtures(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn cmd_mask(args: MaskArgs) -> CliResult {
    let spec = args
        .light
        .resolve()?
        .ok_or_else(|| CliError::args("one of --point, --segment or --spec is required"))?;
    let (w, h) = args.size;
    let mask = make_light_mask(&spec, w, h).map_err(CliError::args)?;
    mask_png::write(&args.out, &mask)?;
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> CliResult {
    let size = output_size(args.size)?;
    let (h, w) = lgtm_core::latent_dims(size).map_err(CliError::args)?;
    let z = sample_initial_noise(args.seed, h, w).map_err(CliError::args)?;
    ltz::write(&args.out, &z)?;
    Ok(())
}

fn cmd_guide(args: GuideArgs) -> CliResult {
    let z = ltz::read(&args.latents)?;
    let mut mask = mask_png::read(&args.mask)?;
    if (mask.width(), mask.height()) != (z.width(), z.height()) {
        if !args.resample {
            return Err(CliError::data(format!(
                "mask is {}x{} but latent is {}x{}; pass --resample to resize the mask",
                mask.width(),
                mask.height(),
                z.width(),
                z.height()
            )));
        }
        mask = resample_mask(&mask, z.width(), z.height()).map_err(CliError::data)?;
    }
    let guided = apply_light_guidance_with(&z, &mask, GuidanceOptions { normalize: args.normalize })
        .map_err(CliError::data)?;
    ltz::write(&args.out, &guided)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    report::write_text(path, &text)?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> CliResult {
    let mut request = GenerationRequest::new(args.prompt, args.seed, output_size(args.size)?);
    request.negative_prompt = args.negative_prompt;
    request.steps = args.steps;
    request.guidance_scale = args.guidance_scale;
    request.light = args.light.resolve()?;
    if let Some(path) = &args.condition {
        request.structural_condition = Some(StructuralCondition(read_bytes(path)?));
    }
    request.validate().map_err(CliError::args)?;
    let backend = args.backend.resolve()?;
    let image = generate(&request, &backend).map_err(|e| match e {
        lgtm_core::Error::Backend(_) => CliError::backend(e),
        other => CliError::data(other),
    })?;
    rgb_png::write(&args.out, &image.image)?;
    if let Some(path) = &args.report {
        let stats = lgtm_core::sensitivity::luminance_stats(&image.image);
        write_json(
            path,
            &serde_json::json!({
                "backend": backend.name(),
                "request": request,
                "request_fingerprint": image.request_fingerprint,
                "width": image.width(),
                "height": image.height(),
                "mean_luminance": stats.mean_luminance,
                "luminance_centroid": stats.centroid,
            }),
        )?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let mut config = SweepConfig::new(args.prompt, args.seeds, args.channels, output_size(args.size)?);
    config.alphas = args.alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    config.validate().map_err(CliError::args)?;
    let backend = args.backend.resolve()?;
    let sweep = run_sweep(&config, &backend).map_err(|e| match e {
        lgtm_core::Error::Backend(_) => CliError::backend(e),
        other => CliError::data(other),
    })?;
    let json = report::sweep_json(&sweep)?;
    match &args.report {
        Some(path) => report::write_text(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        report::write_text(path, &report::sweep_csv(&sweep)?)?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let samples = dataset::load(&args.dataset)?;
    let accuracy = lgtm_core::eval::evaluate_light_accuracy(
        &samples,
        &BaselineObjectDetector::default(),
        &BaselineShadowDetector::default(),
    );
    if let Some(path) = &args.report {
        report::write_text(path, &report::accuracy_json(&accuracy)?)?;
    }
    let table = report::accuracy_table(&[(args.label.as_str(), &accuracy)]);
    match &args.table {
        Some(path) => report::write_text(path, &table)?,
        None => print!("{table}"),
    }
    Ok(())
}

/// Fisher-Yates with a SplitMix64 stream; only used to relabel fixtures.
fn shuffle_directions(samples: &mut [EvalSample], seed: u64) {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let mut directions: Vec<LightDirection> = samples.iter().map(|s| s.direction).collect();
    for i in (1..directions.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        directions.swap(i, j);
    }
    for (s, d) in samples.iter_mut().zip(directions) {
        s.direction = d;
    }
}

fn cmd_fixtures(args: FixturesArgs) -> CliResult {
    let (w, h) = args.size;
    let mut samples = shadow_dataset(args.per_direction, w, h);
    if let Some(seed) = args.shuffle_seed {
        shuffle_directions(&mut samples, seed);
    }
    dataset::write(&args.out, &samples)?;
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> CliResult {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::args(format!("bind address: {e}")))?;
    let mut config = ServiceConfig::new(args.store, args.backend.resolve()?);
    config.queue_capacity = args.queue_capacity;
    config.cors_origin = args.cors_origin;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::from(Error::io("runtime", e)))?;
    runtime.block_on(service::serve(config, addr))?;
    Ok(())
}
