//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! The training criteria take a few minutes on one core.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{dense_gap, dense_minimizer, dense_objective, mm_steps_for, pattern_mask, random_image, rggb_mask, rng};
use joint_demosaick::cascade::init_schedule;
use joint_demosaick::cfa::{bilinear_demosaick, data_consistency, mosaic, CfaPattern, PatternKind};
use joint_demosaick::dataset::{synthetic_dataset, Dataset};
use joint_demosaick::gradcheck::run_all;
use joint_demosaick::majorize::{mm_reference_iterate, objective_value, surrogate_value, QuadraticPrior};
use joint_demosaick::metrics::psnr_255;
use joint_demosaick::modelfile::encode_cascade;
use joint_demosaick::noise::{add_noise, noisy_observation, NoiseSpec};
use joint_demosaick::resdnet::{materialize_weights, project_noise, projection_radius};
use joint_demosaick::train::{pretrain_denoiser, train_joint, Phase, TrainConfig};
use joint_demosaick::{demosaick, denoise, CascadeParams, ImageTensor, Precision, ResDNetParams};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= limit, format!("{:.2}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = match run_all(2024) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let (fast, time) = within(start, Duration::from_secs(60));
    let max = report.max_rel_err();
    outcome(
        report.passed() && max < 1e-4 && fast,
        format!("{} checks, max relative error {max:.3e}, {time}", report.entries.len()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let kinds = PatternKind::ALL;
    let mut worst_bound = f64::INFINITY;
    let mut worst_touch = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut count = 0;
    for &alpha in &[1.1, 2.0, 10.0] {
        for i in 0..1000 {
            let p = CfaPattern::new(kinds[i % kinds.len()]);
            let (h, w) = (r.random_range(1..5), r.random_range(1..5));
            let x0 = random_image(&mut r, h, w, 0.0, 255.0);
            let x = random_image(&mut r, h, w, 0.0, 255.0);
            let y = mosaic(&random_image(&mut r, h, w, 0.0, 255.0), &p).unwrap();
            let sigma = r.random_range(0.5..25.0);
            let prior = QuadraticPrior {
                lambda: r.random_range(0.0..1.0),
            };
            let q = objective_value(&x, &y, sigma, prior);
            let s = surrogate_value(&x, &x0, &y, sigma, alpha, prior);
            let scale = q.abs().max(1.0);
            worst_bound = worst_bound.min((s - q) / scale);
            let q0 = objective_value(&x0, &y, sigma, prior);
            let s0 = surrogate_value(&x0, &x0, &y, sigma, alpha, prior);
            worst_touch = worst_touch.max((s0 - q0).abs() / q0.abs().max(1.0));
            let dense = dense_gap(&x, &x0, &pattern_mask(&p, h, w), sigma, alpha);
            worst_oracle = worst_oracle.max(((s - q) - dense).abs() / scale);
            count += 1;
        }
    }
    // α = 1/2 with a step along a sampled coordinate: d = (α − 1)δ²/(2σ²) < 0
    let p = CfaPattern::new(PatternKind::BayerRggb);
    let x0 = ImageTensor::filled(2, 2, 3, 100.0);
    let mut x = x0.clone();
    x.set(0, 0, 0, 108.0);
    let y = mosaic(&ImageTensor::filled(2, 2, 3, 50.0), &p).unwrap();
    let prior = QuadraticPrior { lambda: 0.0 };
    let counter = surrogate_value(&x, &x0, &y, 1.0, 0.5, prior) - objective_value(&x, &y, 1.0, prior);
    let (fast, time) = within(start, Duration::from_secs(5));
    let pass = worst_bound >= -1e-10 && worst_touch <= 1e-10 && worst_oracle <= 1e-9 && counter < 0.0 && fast;
    outcome(
        pass,
        format!(
            "{count} instances, min (Q~−Q)/|Q| {worst_bound:.2e}, touch error {worst_touch:.1e}, \
             dense-gap error {worst_oracle:.1e}, alpha=0.5 gap {counter:.1}, {time}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut descent_ok = true;
    let mut worst_limit = 0.0f64;
    let mut worst_obj = 0.0f64;
    for i in 0..100 {
        let (h, w) = [(4, 4), (2, 8), (3, 5), (1, 16), (2, 2)][i % 5];
        let alpha = r.random_range(1.0..10.0) + 1e-3;
        let lambda = r.random_range(0.01..1.0);
        let sigma = r.random_range(1.0..20.0);
        let p = CfaPattern::new(PatternKind::BayerRggb);
        let mask = rggb_mask(h, w);
        let y = mosaic(&random_image(&mut r, h, w, 0.0, 255.0), &p).unwrap();
        let steps = mm_steps_for(alpha, lambda, sigma, 1e-14);
        let it = mm_reference_iterate(&y, sigma, alpha, lambda, steps).unwrap();
        let prior = QuadraticPrior { lambda };
        let values: Vec<f64> = it.iter().map(|x| objective_value(x, &y, sigma, prior)).collect();
        if values.windows(2).any(|v| v[1] > v[0] + 1e-12 * v[0].abs()) {
            descent_ok = false;
        }
        let exact = dense_minimizer(&y, &mask, sigma, lambda);
        let last = it.last().unwrap();
        for (a, b) in last.data().iter().zip(exact.iter()) {
            worst_limit = worst_limit.max((a - b).abs());
        }
        let xs = ImageTensor::from_vec(h, w, 3, exact.iter().copied().collect()).unwrap();
        let q_exact = dense_objective(&xs, &y, &mask, sigma, lambda);
        worst_obj = worst_obj.max((values.last().unwrap() - q_exact).abs() / q_exact.max(1.0));
    }
    let (fast, time) = within(start, Duration::from_secs(10));
    outcome(
        descent_ok && worst_limit <= 1e-8 && fast,
        format!(
            "100 configurations, monotone {descent_ok}, max |limit − dense| {worst_limit:.2e}, \
             objective gap {worst_obj:.1e}, {time}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let mut failures = Vec::new();
    for i in 0..500 {
        let p = CfaPattern::new(PatternKind::ALL[i % 5]);
        let (h, w) = (r.random_range(2..13), r.random_range(2..13));
        let x = random_image(&mut r, h, w, 0.0, 255.0);
        let u = random_image(&mut r, h, w, -50.0, 300.0);
        let y = mosaic(&x, &p).unwrap();
        if mosaic(y.data(), &p).unwrap().data() != y.data() {
            failures.push("mosaic idempotency");
        }
        let z = data_consistency(&u, &y).unwrap();
        let mask = pattern_mask(&p, h, w);
        let expect: Vec<f64> = (0..z.len())
            .map(|k| mask[k] * y.data().data()[k] + (1.0 - mask[k]) * u.data()[k])
            .collect();
        if z.data() != expect.as_slice() {
            failures.push("data-consistency mask equality");
        }
        let sigma = r.random_range(0.1..30.0);
        let gamma = r.random_range(-3.0..1.0);
        let e = random_image(&mut r, h, w, -40.0, 40.0);
        let eps = projection_radius(sigma, gamma, e.len());
        let pe = project_noise(&e, sigma, gamma);
        if pe.norm() > eps * (1.0 + 1e-12) {
            failures.push("projection bound");
        }
        let inside = e.scale(0.999 * eps / e.norm());
        if project_noise(&inside, sigma, gamma) != inside {
            failures.push("projection fixed point");
        }
        let raw: Vec<f64> = (0..r.random_range(9..600)).map(|_| r.random_range(-1.0..1.0)).collect();
        let s = r.random_range(-5.0..5.0);
        let v = materialize_weights(&raw, s).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if mean.abs() > 1e-12 || (norm - s.abs()).abs() > 1e-12 {
            failures.push("filter zero mean / norm");
        }
    }
    failures.dedup();
    let (fast, time) = within(start, Duration::from_secs(5));
    outcome(
        failures.is_empty() && fast,
        format!("500 random instances, failures {failures:?}, {time}"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (w, s) = init_schedule(10, 15.0, 1.0).unwrap();
    let w_ok = w.len() == 10 && w.iter().enumerate().all(|(j, &v)| v == j as f64 / (j as f64 + 3.0));
    let s_ok = s.len() == 10 && s[0] == 15.0 && s[9] == 1.0 && s.windows(2).all(|p| p[1] < p[0]);
    // geometric: constant ratio between neighbours
    let ratio = (1.0f64 / 15.0).powf(1.0 / 9.0);
    let geo = s.windows(2).all(|p| (p[1] / p[0] - ratio).abs() < 1e-12);
    let (fast, time) = within(start, Duration::from_secs(1));
    outcome(
        w_ok && s_ok && geo && fast,
        format!("w[1..3] = {:?}, sigma endpoints {} and {}, {time}", &w[..3], s[0], s[9]),
    )
}

/// Images never seen by training or model selection.
fn test_set() -> Dataset {
    synthetic_dataset(12, 96, 96, 90_210)
}

fn training_set() -> Dataset {
    synthetic_dataset(60, 96, 96, 11)
}

fn pretrain_config() -> TrainConfig {
    TrainConfig {
        epochs: 10,
        crops_per_image: 4,
        ..TrainConfig::desk(Phase::Pretrain)
    }
}

fn pretrain(data: &Dataset) -> joint_demosaick::Result<ResDNetParams> {
    let cfg = pretrain_config();
    let init = ResDNetParams::init(cfg.depth, cfg.features, cfg.seed)?;
    Ok(pretrain_denoiser(data, init, &cfg)?.params)
}

fn joint(data: &Dataset, denoiser: ResDNetParams, noise_sigma: f64) -> joint_demosaick::Result<CascadeParams> {
    let cfg = TrainConfig {
        epochs: 20,
        crops_per_image: 4,
        noise_sigma,
        ..TrainConfig::desk(Phase::Joint)
    };
    Ok(train_joint(data, denoiser, &cfg)?.params)
}

fn criterion_6(data: &Dataset, denoiser: &joint_demosaick::Result<ResDNetParams>, elapsed: Duration) -> Outcome {
    let params = match denoiser {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let cfg = pretrain_config();
    let sigma = 15.0;
    let (mut noisy_db, mut out_db) = (0.0, 0.0);
    let test = test_set();
    for (i, clean) in test.images().enumerate() {
        let noisy = add_noise(clean, &NoiseSpec::iid(sigma, 500 + i as u64)).unwrap();
        noisy_db += psnr_255(&noisy, clean).unwrap();
        out_db += psnr_255(&denoise(&noisy, sigma, params, Precision::F64).unwrap(), clean).unwrap();
    }
    let n = test.len() as f64;
    let gain = (out_db - noisy_db) / n;
    let fast = elapsed <= Duration::from_secs(15 * 60);
    outcome(
        gain >= 1.0 && fast && data.len() >= 50 && cfg.depth == 1 && cfg.features == 8 && cfg.patch_size == 32,
        format!(
            "{} training images, held-out sigma=15: noisy {:.2} dB, denoised {:.2} dB (gain {gain:+.2} dB), {:.0}s",
            data.len(),
            noisy_db / n,
            out_db / n,
            elapsed.as_secs_f64()
        ),
    )
}

/// Mean PSNR of (bilinear, cascade) on the test set at noise level `sigma`.
fn demosaick_scores(cascade: &CascadeParams, sigma: f64) -> (f64, f64) {
    let p = CfaPattern::new(PatternKind::BayerRggb);
    let test = test_set();
    let (mut base, mut ours) = (0.0, 0.0);
    for (i, clean) in test.images().enumerate() {
        let y = noisy_observation(clean, &p, &NoiseSpec::iid(sigma, 700 + i as u64)).unwrap();
        base += psnr_255(&bilinear_demosaick(&y), clean).unwrap();
        ours += psnr_255(&demosaick(&y, cascade, Precision::F64).unwrap(), clean).unwrap();
    }
    let n = test.len() as f64;
    (base / n, ours / n)
}

struct JointRun {
    clean: CascadeParams,
    noisy: CascadeParams,
    elapsed: Duration,
}

fn joint_run(data: &Dataset, denoiser: ResDNetParams) -> joint_demosaick::Result<JointRun> {
    let start = Instant::now();
    let clean = joint(data, denoiser.clone(), 0.0)?;
    let noisy = joint(data, denoiser, 10.0)?;
    Ok(JointRun {
        clean,
        noisy,
        elapsed: start.elapsed(),
    })
}

fn criterion_7(run: &joint_demosaick::Result<JointRun>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let (b0, c0) = demosaick_scores(&run.clean, 0.0);
    let (b10, c10) = demosaick_scores(&run.noisy, 10.0);
    let fast = run.elapsed <= Duration::from_secs(60 * 60);
    outcome(
        c0 - b0 >= 1.0 && c10 - b10 >= 2.0 && fast && run.clean.steps() == 5,
        format!(
            "noise-free: bilinear {b0:.2} dB, cascade {c0:.2} dB ({:+.2}); sigma=10: bilinear {b10:.2} dB, \
             cascade {c10:.2} dB ({:+.2}); {:.0}s",
            c0 - b0,
            c10 - b10,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let out = match Command::new(env!("CARGO_BIN_EXE_joint-demosaick"))
        .args(["params", "--depth", "5", "--features", "64", "--steps", "10"])
        .output()
    {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("cannot run binary: {e}")),
    };
    let text = String::from_utf8_lossy(&out.stdout);
    let groups = text.lines().filter(|l| !l.starts_with("total") && !l.starts_with("reference")).count();
    let total: Option<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("total").and_then(|r| r.trim().parse().ok()));
    let documented = text.contains("counted:");
    match total {
        Some(t) => {
            let dev = (t - 380_356.0) / 380_356.0;
            outcome(
                out.status.success() && dev.abs() <= 0.005 && documented && groups > 2,
                format!("total {t}, deviation {:+.4}% from 380356", 100.0 * dev),
            )
        }
        None => outcome(false, "no total line in params output"),
    }
}

fn criterion_9(first: &joint_demosaick::Result<JointRun>, data: &Dataset) -> Outcome {
    let first = match first {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("first run failed: {e}")),
    };
    let second = match pretrain(data).and_then(|d| joint_run(data, d)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("second run failed: {e}")),
    };
    let same_clean = encode_cascade(&first.clean) == encode_cascade(&second.clean);
    let same_noisy = encode_cascade(&first.noisy) == encode_cascade(&second.noisy);
    outcome(
        same_clean && same_noisy,
        format!(
            "model bytes identical: noise-free {same_clean}, sigma=10 {same_noisy} ({} bytes each)",
            encode_cascade(&first.clean).len()
        ),
    )
}

fn report(n: usize, o: &Outcome) -> bool {
    println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, &criterion_1());
    all &= report(2, &criterion_2());
    all &= report(3, &criterion_3());
    all &= report(4, &criterion_4());
    all &= report(5, &criterion_5());

    let data = training_set();
    let start = Instant::now();
    let denoiser = pretrain(&data);
    let pre_elapsed = start.elapsed();
    all &= report(6, &criterion_6(&data, &denoiser, pre_elapsed));

    let run = denoiser
        .as_ref()
        .map_err(|e| joint_demosaick::Error::Argument(e.to_string()))
        .and_then(|d| joint_run(&data, d.clone()));
    all &= report(7, &criterion_7(&run));
    all &= report(8, &criterion_8());
    all &= report(9, &criterion_9(&run, &data));

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
