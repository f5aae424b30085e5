//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. Tolerances and sample sets are fixed below.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lgtm::core::eval::{
    evaluate_light_accuracy, BaselineObjectDetector, BaselineShadowDetector, LightDirection,
};
use lgtm::core::fixtures::shadow_dataset;
use lgtm::core::sensitivity::{luminance_stats, run_sweep, SweepConfig, DEFAULT_ALPHAS};
use lgtm::core::{
    apply_light_guidance, generate, make_light_mask, sample_initial_noise, scale_channel, Channel,
    ChannelPerturbation, GenerationRequest, LatentNoise, LightMask, LightSpec, MockBackend, OutputSize, Point,
};
use lgtm::formats::{ltz, mask_png};
use lgtm::service::{start, ServiceConfig};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

const MASK_TOLERANCE: f64 = 1e-9;
const GUIDANCE_TOLERANCE: f64 = 1e-7;
const SHIFT_SEEDS: u64 = 100;
const SHIFT_MIN_COUNT: usize = 95;
const SHIFT_MIN_MEAN: f64 = 0.02;
const SHIFT_TIME_LIMIT: Duration = Duration::from_secs(60);
const SWEEP_SEEDS: u64 = 100;
const FLAT_TOLERANCE: f64 = 1e-6;
const SHUFFLED_BAND: f64 = 0.07;
const CONCURRENT_JOBS: u64 = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn random_latent(rng: &mut StdRng) -> LatentNoise {
    let (h, w) = (rng.random_range(1..=32), rng.random_range(1..=32));
    sample_initial_noise(rng.random(), h, w).unwrap()
}

fn random_mask(rng: &mut StdRng, w: usize, h: usize) -> LightMask {
    LightMask::from_values(w, h, (0..w * h).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap()
}

/// Scalar reference written from the definition, independent of the library.
fn reference_mask_value(kind_segment: bool, a: (f64, f64), b: (f64, f64), r: f64, px: (f64, f64)) -> f64 {
    let raw = if kind_segment {
        let (ux, uy) = (b.0 - a.0, b.1 - a.1);
        let (vx, vy) = (px.0 - a.0, px.1 - a.1);
        let len2 = ux * ux + uy * uy;
        let t = if len2 > 0.0 { ((vx * ux + vy * uy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let (cx, cy) = (a.0 + t * ux, a.1 + t * uy);
        ((px.0 - cx).powi(2) + (px.1 - cy).powi(2)).sqrt()
    } else {
        ((px.0 - a.0).powi(2) + (px.1 - a.1).powi(2)).sqrt()
    };
    let d = raw / 2f64.sqrt();
    (1.0 - d / r).max(0.0)
}

fn mask_formula() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let segment = rng.random_bool(0.5);
        let a = (rng.random_range(-0.5..=1.5), rng.random_range(-0.5..=1.5));
        let b = (rng.random_range(-0.5..=1.5), rng.random_range(-0.5..=1.5));
        let r = rng.random_range(0.01..=4.0);
        let (w, h) = (rng.random_range(1..=64usize), rng.random_range(1..=64usize));
        let (row, col) = (rng.random_range(0..h), rng.random_range(0..w));
        let spec = if segment {
            LightSpec::segment(Point::new(a.0, a.1), Point::new(b.0, b.1), r)
        } else {
            LightSpec::point(Point::new(a.0, a.1), r)
        }
        .unwrap();
        let got = make_light_mask(&spec, w, h).unwrap().get(row, col);
        let px = ((col as f64 + 0.5) / w as f64, (row as f64 + 0.5) / h as f64);
        worst = worst.max((got - reference_mask_value(segment, a, b, r, px)).abs());
    }
    check(
        worst <= MASK_TOLERANCE,
        format!("1000 pairs, max |error| {worst:.2e} <= {MASK_TOLERANCE:e}"),
        format!("max |error| {worst:.2e} > {MASK_TOLERANCE:e}"),
    )
}

fn light_guidance_algebra() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x22);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let z = random_latent(&mut rng);
        let (w, h) = (z.width(), z.height());
        let m = random_mask(&mut rng, w, h);
        let g = apply_light_guidance(&z, &m).unwrap();
        for ((after, before), mv) in g.channel(Channel::LIGHT).iter().zip(z.channel(Channel::LIGHT)).zip(m.values()) {
            worst = worst.max(((after - before) - before * mv).abs());
        }
        for c in &Channel::ALL[1..] {
            if g.channel(*c) != z.channel(*c) {
                return Err(format!("latent {i}: channel {} changed", c.number()));
            }
        }
        let zero = apply_light_guidance(&z, &LightMask::constant(w, h, 0.0).unwrap()).unwrap();
        if zero.values() != z.values() {
            return Err(format!("latent {i}: zero mask is not the identity"));
        }
        let unit = apply_light_guidance(&z, &LightMask::constant(w, h, 1.0).unwrap()).unwrap();
        let doubled: Vec<f64> = z.channel(Channel::LIGHT).iter().map(|v| 2.0 * v).collect();
        if unit.channel(Channel::LIGHT) != doubled.as_slice() {
            return Err(format!("latent {i}: unit mask does not double channel 1 exactly"));
        }
    }
    check(
        worst <= GUIDANCE_TOLERANCE,
        format!("100 latents, max delta error {worst:.2e}, other channels bit-identical, zero/unit masks exact"),
        format!("max delta error {worst:.2e} > {GUIDANCE_TOLERANCE:e}"),
    )
}

fn channel_scaling_algebra() -> Outcome {
    // Powers of two keep products exact, so sequential scaling must equal a
    // single scaling by the product bit for bit.
    const DYADIC: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 4.0, -1.0, -0.5];
    let mut rng = StdRng::seed_from_u64(0x33);
    for i in 0..100 {
        let z = random_latent(&mut rng);
        let c = Channel::ALL[rng.random_range(0..4)];
        let d = Channel::ALL[rng.random_range(0..4)];
        let (a, b) = (DYADIC[rng.random_range(0..7)], DYADIC[rng.random_range(0..7)]);
        let p = |ch: Channel, alpha: f64| ChannelPerturbation::new(ch.number(), alpha).unwrap();

        if scale_channel(&z, p(c, 1.0)).values() != z.values() {
            return Err(format!("latent {i}: alpha 1 is not the identity"));
        }
        let once = scale_channel(&z, p(c, a));
        for other in Channel::ALL.iter().filter(|o| **o != c) {
            if once.channel(*other) != z.channel(*other) {
                return Err(format!("latent {i}: scaling channel {} touched channel {}", c.number(), other.number()));
            }
        }
        if scale_channel(&once, p(c, b)).values() != scale_channel(&z, p(c, a * b)).values() {
            return Err(format!("latent {i}: same-channel composition differs from the product"));
        }
        let ab = scale_channel(&scale_channel(&z, p(c, a)), p(d, b));
        let ba = scale_channel(&scale_channel(&z, p(d, b)), p(c, a));
        if ab.values() != ba.values() {
            return Err(format!("latent {i}: scaling different channels does not commute"));
        }
        let general = rng.random_range(-4.0..4.0);
        let expected: Vec<f64> = z.channel(c).iter().map(|v| v * general).collect();
        if scale_channel(&z, p(c, general)).channel(c) != expected.as_slice() {
            return Err(format!("latent {i}: scaled channel is not z * alpha"));
        }
    }
    Ok("100 latents: identity, isolation, composition and commutation bit-exact".into())
}

fn mock_directional_shift() -> Outcome {
    let started = Instant::now();
    let size = OutputSize::new(512, 512);
    let light = LightSpec::point(Point::new(0.0, 0.5), 0.8).unwrap();
    let mirrored = light.mirrored_horizontally();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for seed in 0..SHIFT_SEEDS {
        let base = GenerationRequest::new("a photo of a cat", seed, size);
        let cx = |req: &GenerationRequest| luminance_stats(&generate(req, &MockBackend).unwrap().image).centroid.0;
        let reference = cx(&base);
        left.push(cx(&base.clone().with_light(light)) - reference);
        right.push(cx(&base.with_light(mirrored)) - reference);
    }
    let elapsed = started.elapsed();
    let moved_left = left.iter().filter(|d| **d < 0.0).count();
    let moved_right = right.iter().filter(|d| **d > 0.0).count();
    let mean_left = -left.iter().sum::<f64>() / SHIFT_SEEDS as f64;
    let mean_right = right.iter().sum::<f64>() / SHIFT_SEEDS as f64;
    let detail = format!(
        "left light: {moved_left}/{SHIFT_SEEDS} seeds moved left, mean shift {mean_left:+.5}; \
         mirrored: {moved_right}/{SHIFT_SEEDS} moved right, mean shift {mean_right:+.5}; {:.1}s \
         (need >= {SHIFT_MIN_COUNT} and >= {SHIFT_MIN_MEAN} each, < {}s)",
        elapsed.as_secs_f64(),
        SHIFT_TIME_LIMIT.as_secs()
    );
    let pass = moved_left >= SHIFT_MIN_COUNT
        && moved_right >= SHIFT_MIN_COUNT
        && mean_left >= SHIFT_MIN_MEAN
        && mean_right >= SHIFT_MIN_MEAN
        && elapsed < SHIFT_TIME_LIMIT;
    check(pass, detail.clone(), detail)
}

fn sweep_monotonicity() -> Outcome {
    let config = SweepConfig::new(
        "a photo of a cat",
        (0..SWEEP_SEEDS).collect(),
        Channel::ALL.to_vec(),
        OutputSize::new(512, 512),
    );
    let report = run_sweep(&config, &MockBackend).map_err(|e| e.to_string())?;
    let mut not_monotone = Vec::new();
    let mut worst_flat = 0.0f64;
    for seed in 0..SWEEP_SEEDS {
        let series: Vec<f64> = report.series(seed, Channel::LIGHT).map(|e| e.mean_luminance).collect();
        assert_eq!(series.len(), DEFAULT_ALPHAS.len());
        let increasing = series.windows(2).all(|p| p[1] > p[0]);
        let decreasing = series.windows(2).all(|p| p[1] < p[0]);
        if !(increasing || decreasing) {
            not_monotone.push(seed);
        }
        for c in &Channel::ALL[1..] {
            let values: Vec<f64> = report.series(seed, *c).map(|e| e.mean_luminance).collect();
            let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            worst_flat = worst_flat.max(hi - lo);
        }
    }
    let detail = format!(
        "channel 1 strictly monotone for {}/{SWEEP_SEEDS} seeds (not: {:?}); channels 2-4 max spread {worst_flat:.1e}",
        SWEEP_SEEDS as usize - not_monotone.len(),
        not_monotone
    );
    check(not_monotone.is_empty() && worst_flat <= FLAT_TOLERANCE, detail.clone(), detail)
}

fn light_accuracy_oracle() -> Outcome {
    let objects = BaselineObjectDetector::default();
    let shadows = BaselineShadowDetector::default();
    let mut samples = shadow_dataset(100, 128, 128);
    let clean = evaluate_light_accuracy(&samples, &objects, &shadows);

    let mut directions: Vec<LightDirection> = samples.iter().map(|s| s.direction).collect();
    directions.shuffle(&mut StdRng::seed_from_u64(0x66));
    for (s, d) in samples.iter_mut().zip(directions) {
        s.direction = d;
    }
    let shuffled = evaluate_light_accuracy(&samples, &objects, &shadows);
    let within = |a: Option<f64>| a.is_some_and(|a| (a - 0.5).abs() <= SHUFFLED_BAND);
    let detail = format!(
        "constructed: left {:?} right {:?}; shuffled: left {:?} right {:?} (band 0.5 +/- {SHUFFLED_BAND})",
        clean.accuracy_left, clean.accuracy_right, shuffled.accuracy_left, shuffled.accuracy_right
    );
    let pass = clean.accuracy_left == Some(1.0)
        && clean.accuracy_right == Some(1.0)
        && within(shuffled.accuracy_left)
        && within(shuffled.accuracy_right);
    check(pass, detail.clone(), detail)
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lgtm")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("lgtm {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn format_round_trips() -> Outcome {
    let z = sample_initial_noise(9, 64, 48).unwrap();
    let first = ltz::encode(&z).map_err(|e| e.to_string())?;
    let second = ltz::encode(&ltz::decode(&first).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if first != second {
        return Err("LTZ write-read-write changed bytes".into());
    }
    let spec = LightSpec::segment(Point::new(0.1, 0.2), Point::new(0.8, 0.9), 0.6).unwrap();
    let mask = make_light_mask(&spec, 96, 64).unwrap();
    let first = mask_png::encode(&mask).map_err(|e| e.to_string())?;
    let second =
        mask_png::encode(&mask_png::decode(&first).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if first != second {
        return Err("mask PNG export-import-export changed bytes".into());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let runs: [(&str, Vec<&str>); 4] = [
        ("png", vec!["generate", "--prompt", "a dog", "--seed", "4", "--size", "256x256", "--point", "0,0.5"]),
        ("png", vec!["mask", "--segment", "0,0,0,1", "--radius", "0.5", "--size", "200x100"]),
        ("ltz", vec!["noise", "--seed", "11", "--size", "512x512"]),
        ("json", vec!["sweep", "--seeds", "1,2", "--size", "64x64"]),
    ];
    for (i, (ext, args)) in runs.iter().enumerate() {
        let outs = [path(&format!("{i}a.{ext}")), path(&format!("{i}b.{ext}"))];
        for out in &outs {
            let flag = if *ext == "json" { "--report" } else { "--out" };
            run_cli(&[&args[..], &[flag, out.as_str()]].concat())?;
        }
        let (a, b) = (std::fs::read(&outs[0]).unwrap(), std::fs::read(&outs[1]).unwrap());
        if a != b {
            return Err(format!("lgtm {} produced different bytes on repeat", args[0]));
        }
    }
    Ok("LTZ and mask PNG byte-identical after round trip; generate/mask/noise/sweep byte-identical on repeat".into())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |v| Body::from(v.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn state_rank(state: &str) -> u8 {
    match state {
        "queued" => 0,
        "running" => 1,
        _ => 2,
    }
}

async fn service_lifecycle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = ServiceConfig::new(dir.path(), Arc::new(MockBackend));
    config.queue_capacity = CONCURRENT_JOBS as usize;
    let app = start(config).map_err(|e| e.to_string())?;
    let request = |seed: u64| {
        json!({"prompt": "a cat", "seed": seed, "output_size": {"width": 128, "height": 128},
               "light": {"kind": "point", "ax": 0.0, "ay": 0.5, "radius": 0.8}})
    };

    let submissions = (0..CONCURRENT_JOBS).map(|seed| {
        let app = app.clone();
        tokio::spawn(async move { call(&app, "POST", "/v1/generate", Some(request(seed))).await })
    });
    let mut ids = Vec::new();
    for handle in submissions.collect::<Vec<_>>() {
        let (status, body) = handle.await.unwrap();
        if status != StatusCode::ACCEPTED {
            return Err(format!("submission got {status}"));
        }
        let v: Value = serde_json::from_slice(&body).unwrap();
        ids.push(v["job_id"].as_str().unwrap().to_owned());
    }

    let mut rank = vec![0u8; ids.len()];
    let deadline = Instant::now() + Duration::from_secs(60);
    while rank.iter().any(|r| *r < 2) {
        if Instant::now() > deadline {
            return Err("jobs did not finish within 60s".into());
        }
        for (i, id) in ids.iter().enumerate() {
            let (_, body) = call(&app, "GET", &format!("/v1/jobs/{id}"), None).await;
            let v: Value = serde_json::from_slice(&body).unwrap();
            let state = v["state"].as_str().unwrap_or_default();
            if state == "failed" {
                return Err(format!("job {id} failed: {}", v["error"]));
            }
            let next = state_rank(state);
            if next < rank[i] {
                return Err(format!("job {id} went backwards to {state}"));
            }
            rank[i] = next;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    for id in &ids {
        let (_, body) = call(&app, "GET", &format!("/v1/jobs/{id}"), None).await;
        let v: Value = serde_json::from_slice(&body).unwrap();
        let (status, png) = call(&app, "GET", v["result"].as_str().unwrap_or("/v1/images/none"), None).await;
        if status != StatusCode::OK || !png.starts_with(b"\x89PNG") {
            return Err(format!("job {id} image not retrievable ({status})"));
        }
    }

    if call(&app, "GET", "/v1/jobs/does-not-exist", None).await.0 != StatusCode::NOT_FOUND {
        return Err("unknown job id did not give 404".into());
    }
    let bad = json!({"prompt": "x", "seed": 0, "output_size": {"width": 100, "height": 64}});
    if call(&app, "POST", "/v1/generate", Some(bad)).await.0 != StatusCode::BAD_REQUEST {
        return Err("malformed request did not give 400".into());
    }

    // A one-slot queue behind a busy worker must refuse the overflow.
    let full_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = ServiceConfig::new(full_dir.path(), Arc::new(MockBackend));
    config.queue_capacity = 1;
    let small = start(config).map_err(|e| e.to_string())?;
    let big = json!({"prompt": "x", "seed": 0, "output_size": {"width": 2048, "height": 2048}});
    let mut saw_503 = false;
    for _ in 0..8 {
        if call(&small, "POST", "/v1/generate", Some(big.clone())).await.0 == StatusCode::SERVICE_UNAVAILABLE {
            saw_503 = true;
            break;
        }
    }
    check(
        saw_503,
        format!("{CONCURRENT_JOBS} concurrent jobs moved monotonically to done; 404/400/503 contracts hold"),
        "queue overflow did not give 503",
    )
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let criteria: Vec<Criterion> = vec![
        ("mask formula exactness", Box::new(mask_formula)),
        ("light guidance algebra", Box::new(light_guidance_algebra)),
        ("channel scaling algebra", Box::new(channel_scaling_algebra)),
        ("mock end-to-end directional shift", Box::new(mock_directional_shift)),
        ("sensitivity sweep monotonicity", Box::new(sweep_monotonicity)),
        ("light-accuracy oracle", Box::new(light_accuracy_oracle)),
        ("format round-trips and CLI determinism", Box::new(format_round_trips)),
        ("service lifecycle", Box::new(move || runtime.block_on(service_lifecycle()))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
