//! End-to-end pipeline runs through the installed binary: synthesize,
//! label, train, infer, evaluate, sweep. Exercises exit codes, file
//! artifacts, and the overlay/count identity.

use std::path::Path;
use std::process::{Command, Output};

use symmnet::data::load_mask;
use symmnet::grid::View;
use symmnet::metrics::prf;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symmnet"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn symmnet");
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{stdout}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn synth_dataset(dir: &Path, count: usize, width: usize, height: usize, seed: u64) {
    run_ok(bin().args([
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--count",
        &count.to_string(),
        "--width",
        &width.to_string(),
        "--height",
        &height.to_string(),
        "--seed",
        &seed.to_string(),
    ]));
}

#[test]
fn synth_writes_a_complete_dataset_and_gen_gt_reproduces_its_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let stdout = run_ok(bin().args([
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--count",
        "2",
        "--width",
        "128",
        "--height",
        "96",
        "--seed",
        "5",
    ]));
    assert!(stdout.contains("resolved config (synth)"));
    for id in ["scene0000", "scene0001"] {
        for suffix in [
            "_left.png",
            "_right.png",
            "_left_disp.pfm",
            "_right_disp.pfm",
            "_left_occ.png",
            "_right_occ.png",
        ] {
            assert!(data.join(format!("{id}{suffix}")).is_file(), "{id}{suffix}");
        }
    }
    assert!(data.join("manifest.txt").is_file());

    // Relabeling from the stored disparities reproduces the stored masks.
    let out_left = tmp.path().join("relabel_left.png");
    let out_right = tmp.path().join("relabel_right.png");
    run_ok(bin().args([
        "gen-gt",
        "--left",
        data.join("scene0000_left_disp.pfm").to_str().unwrap(),
        "--right",
        data.join("scene0000_right_disp.pfm").to_str().unwrap(),
        "--out-left",
        out_left.to_str().unwrap(),
        "--out-right",
        out_right.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(&out_left).unwrap(),
        std::fs::read(data.join("scene0000_left_occ.png")).unwrap()
    );
    assert_eq!(
        std::fs::read(&out_right).unwrap(),
        std::fs::read(data.join("scene0000_right_occ.png")).unwrap()
    );
}

#[test]
fn gen_gt_derives_default_output_names() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_dataset(&data, 1, 128, 96, 11);
    // Move the disparities away from the premade masks to observe creation.
    let left = tmp.path().join("a_left_disp.pfm");
    let right = tmp.path().join("a_right_disp.pfm");
    std::fs::copy(data.join("scene0000_left_disp.pfm"), &left).unwrap();
    std::fs::copy(data.join("scene0000_right_disp.pfm"), &right).unwrap();
    run_ok(bin().args([
        "gen-gt",
        "--left",
        left.to_str().unwrap(),
        "--right",
        right.to_str().unwrap(),
    ]));
    assert!(tmp.path().join("a_left_disp_occ.png").is_file());
    assert!(tmp.path().join("a_right_disp_occ.png").is_file());
}

#[test]
fn train_infer_eval_pr_curve_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_dataset(&data, 2, 128, 64, 21);

    // Train a tiny model for a handful of steps.
    let ckpt = tmp.path().join("model.ckpt");
    let log = tmp.path().join("train.csv");
    let stdout = run_ok(bin().args([
        "train",
        "--data",
        data.to_str().unwrap(),
        "--holdout",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
        "--channel-scale",
        "0.125",
        "--batch-size",
        "2",
        "--epochs",
        "2",
        "--crop-height",
        "64",
        "--crop-width",
        "64",
        "--seed",
        "3",
    ]));
    assert!(stdout.contains("resolved config (train)"));
    assert!(stdout.contains("epoch 0: loss"));
    assert!(stdout.contains("holdout precision"));
    assert!(ckpt.is_file());
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("epoch,mean_loss,precision,recall,fscore\n"));
    assert_eq!(log_text.lines().count(), 3);

    // Infer on one training pair (64-divisible input required: crop first
    // via the stored 128x64 images, already divisible).
    let prefix = tmp.path().join("pred");
    let stdout = run_ok(bin().args([
        "infer",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--left",
        data.join("scene0000_left.png").to_str().unwrap(),
        "--right",
        data.join("scene0000_right.png").to_str().unwrap(),
        "--out-prefix",
        prefix.to_str().unwrap(),
    ]));
    assert!(stdout.contains("resolved config (infer)"));
    let pred_left = tmp.path().join("pred_left_occ.png");
    assert!(tmp.path().join("pred_left_prob.pfm").is_file());
    assert!(tmp.path().join("pred_right_prob.pfm").is_file());
    assert!(pred_left.is_file());
    assert!(tmp.path().join("pred_right_occ.png").is_file());

    // Evaluate the prediction against ground truth, with an overlay whose
    // color counts must equal the metric counts.
    let gt_left = data.join("scene0000_left_occ.png");
    let overlay = tmp.path().join("overlay.png");
    let stdout = run_ok(bin().args([
        "eval",
        "--pred",
        pred_left.to_str().unwrap(),
        "--gt",
        gt_left.to_str().unwrap(),
        "--overlay",
        overlay.to_str().unwrap(),
    ]));
    assert!(stdout.contains("micro.fscore="));

    let pred = load_mask(&pred_left, View::Left).unwrap();
    let gt = load_mask(&gt_left, View::Left).unwrap();
    let m = prf(&pred, &gt).unwrap();
    let img = symmnet::data::ColorImage::load_png(&overlay).unwrap();
    let (mut cyan, mut magenta, mut yellow) = (0usize, 0usize, 0usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            match img.pixel(x, y) {
                [0, 255, 255] => cyan += 1,
                [255, 0, 255] => magenta += 1,
                [255, 255, 0] => yellow += 1,
                _ => {}
            }
        }
    }
    assert_eq!(cyan, m.counts.tp);
    assert_eq!(magenta, m.counts.fn_);
    assert_eq!(yellow, m.counts.fp);

    // Identical masks score a printed F of 1.
    let stdout = run_ok(bin().args([
        "eval",
        "--pred",
        gt_left.to_str().unwrap(),
        "--gt",
        gt_left.to_str().unwrap(),
    ]));
    assert!(stdout.contains("micro.fscore=1"));

    // Threshold sweep over the dataset (uses the env-var data root).
    let csv = tmp.path().join("curve.csv");
    let stdout = run_ok(
        bin()
            .env("SYMMNET_DATA_ROOT", data.to_str().unwrap())
            .args([
                "pr-curve",
                "--ckpt",
                ckpt.to_str().unwrap(),
                "--out",
                csv.to_str().unwrap(),
            ]),
    );
    assert!(stdout.contains("oracle_f="));
    assert!(stdout.contains("global_f="));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("tau,precision,recall,fscore\n"));
    assert_eq!(text.lines().count(), 102); // header + 101 thresholds
}

#[test]
fn exit_codes_separate_usage_from_runtime_failures() {
    // Unknown flag: usage error, exit 1.
    let out: Output = bin().args(["synth", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // Unknown subcommand: usage error.
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // Missing checkpoint file: runtime error, exit 2, one-line diagnostic.
    let out = bin()
        .args([
            "infer",
            "--ckpt",
            "/nonexistent.ckpt",
            "--left",
            "/nonexistent_l.png",
            "--right",
            "/nonexistent_r.png",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: "));
    // Missing data root: runtime error with a pointer to the env var.
    let out = bin()
        .env_remove("SYMMNET_DATA_ROOT")
        .args(["train", "--out", "/tmp/never-written.ckpt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SYMMNET_DATA_ROOT"));
    // Help: success.
    let out = bin().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
