use std::path::Path;
use std::process::{Command, Output};

use joint_demosaick::dataset::synthetic_image;
use joint_demosaick::imageio::{read_image, write_image};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_joint-demosaick"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn params_reports_full_size_total() {
    let o = run(&["params"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let total: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("total").map(|r| r.trim().parse().unwrap()))
        .unwrap();
    assert_eq!(total, 380_376);
    assert!(out.contains("deviation +0.0053%"));
    assert!(out.contains("counted:"));
}

#[test]
fn params_small_configuration_has_no_reference_line() {
    let o = run(&["params", "--depth", "1", "--features", "8", "--steps", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("reference"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["bilinear", "/nonexistent/x.ppm", "--out", "/tmp/never.ppm"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.ppm");
    write_image(&img, &synthetic_image(8, 8, 1)).unwrap();
    let out = dir.path().join("b.ppm");
    assert_eq!(run(&["demosaick", p(&img), "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(run(&["mosaic", p(&img)]).status.code(), Some(1));
    assert_eq!(run(&["mosaic", p(&img), "--out", p(&out), "--pattern", "hexagonal"]).status.code(), Some(1));
}

#[test]
fn gradcheck_passes() {
    let o = run(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("gradcheck passed"));
}

#[test]
fn mosaic_bilinear_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, obs) = (dir.path().join("truth"), dir.path().join("obs"));
    std::fs::create_dir_all(&truth).unwrap();
    std::fs::create_dir_all(&obs).unwrap();
    for i in 0..3 {
        let t = truth.join(format!("img{i}.rflt"));
        write_image(&t, &synthetic_image(24, 24, i)).unwrap();
        let o = run(&["mosaic", p(&t), "--out", p(&obs.join(format!("img{i}.rflt")))]);
        assert_eq!(o.status.code(), Some(0));
    }
    let y = read_image(obs.join("img0.rflt")).unwrap();
    // RGGB keeps only red at the origin
    assert_eq!(y.at(0, 0, 1), 0.0);
    assert_eq!(y.at(0, 0, 2), 0.0);

    let rgb = dir.path().join("rgb.ppm");
    let o = run(&["bilinear", p(&obs.join("img0.rflt")), "--out", p(&rgb)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_image(&rgb).unwrap().shape(), (24, 24, 3));

    let csv = dir.path().join("scores.csv");
    let o = run(&["eval", p(dir.path()), "--out", p(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("method: bilinear"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().starts_with("mean,"));
}

#[test]
fn training_is_reproducible_and_models_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, "# tiny run\nepochs = 1\nsteps = 2\nfeatures = 4\npatch_size = 16\n").unwrap();
    let den = dir.path().join("den.rdn");
    let o = run(&["pretrain", "--synthetic", "6", "--synthetic-size", "32", "--config", p(&cfg), "--out", p(&den)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let models: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let m = dir.path().join(format!("m{i}.rdn"));
            let o = run(&[
                "train", "--synthetic", "6", "--synthetic-size", "32", "--config", p(&cfg),
                "--init", p(&den), "--seed", "4", "--out", p(&m),
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read(&m).unwrap()
        })
        .collect();
    assert_eq!(models[0], models[1]);

    let m = dir.path().join("m0.rdn");
    let img = dir.path().join("y.rflt");
    write_image(&img, &synthetic_image(16, 16, 2)).unwrap();
    let out = dir.path().join("x.rflt");
    let o = run(&["demosaick", p(&img), "--model", p(&m), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let x = read_image(&out).unwrap();
    assert!(x.data().iter().all(|v| (0.0..=255.0).contains(v)));

    let o = run(&["params", "--model", p(&m)]);
    assert!(stdout(&o).contains("cascade.w"));
    let o = run(&["denoise", p(&img), "--model", p(&den), "--sigma", "5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
}
