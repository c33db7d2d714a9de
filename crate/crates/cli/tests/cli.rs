use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use textdet::raster::RasterImage;

fn textdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textdet"))
        .args(args)
        .env_remove("TEXTDET_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = textdet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_one_patch_per_class_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["synth", "--count", "62", "--seed", "7", "--out", s(&a)]);
    ok(&["synth", "--count", "62", "--seed", "7", "--out", s(&b)]);
    let manifest = fs::read_to_string(a.join("chars/manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 62);
    assert_eq!(fs::read_dir(a.join("chars/patches")).unwrap().count(), 62);
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
}

#[test]
fn synth_reports_unwritable_output() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let out = textdet(&["synth", "--count", "2", "--out", s(&file)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("occupied"));
}

#[test]
fn train_requires_stage_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = textdet(&[
        "train",
        "--data",
        s(tmp.path()),
        "--out",
        s(tmp.path()),
        "--stage1-iters",
        "0",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage 1"));
}

#[test]
fn train_detect_eval_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "synth",
        "--count",
        "62",
        "--binary-count",
        "20",
        "--scenes",
        "2",
        "--out",
        s(&data),
    ]);
    let m1 = tmp.path().join("m1");
    let m2 = tmp.path().join("m2");
    for m in [&m1, &m2] {
        ok(&[
            "train",
            "--data",
            s(&data),
            "--out",
            s(m),
            "--stage1-iters",
            "3",
            "--stage2-iters",
            "3",
        ]);
    }
    assert_eq!(
        fs::read(m1.join("model.tcnn")).unwrap(),
        fs::read(m2.join("model.tcnn")).unwrap()
    );
    assert!(fs::read_to_string(m1.join("curve.tsv")).unwrap().lines().count() > 0);

    let blank = tmp.path().join("blank.png");
    RasterImage::filled(40, 30, [200, 200, 200]).save_png(&blank).unwrap();
    let det = tmp.path().join("det");
    let model = m1.join("model.tcnn");
    ok(&[
        "detect",
        "--model",
        s(&model),
        "--out",
        s(&det),
        "--dump-components",
        s(&blank),
    ]);
    assert_eq!(
        fs::read_to_string(det.join("detections.jsonl")).unwrap(),
        "{\"image\":\"blank\",\"words\":[]}\n"
    );
    assert!(det.join("components/blank.tsv").exists());
    assert!(det.join("overlays/blank.png").exists());

    let scenes = data.join("scenes");
    let d1 = tmp.path().join("d1");
    let d2 = tmp.path().join("d2");
    ok(&["detect", "--model", s(&model), "--out", s(&d1), s(&scenes)]);
    ok(&[
        "detect",
        "--model",
        s(&model),
        "--out",
        s(&d2),
        "--jobs",
        "2",
        s(&scenes),
    ]);
    assert_eq!(
        fs::read(d1.join("detections.jsonl")).unwrap(),
        fs::read(d2.join("detections.jsonl")).unwrap()
    );

    let gt = scenes.join("gt");
    let out = ok(&["eval", "--truth", s(&gt), "--detections", s(&gt)]);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(&row[1..], ["1.00", "1.00", "1.00"], "{table}");

    ok(&[
        "eval",
        "--truth",
        s(&gt),
        "--detections",
        s(&d1.join("detections.jsonl")),
    ]);

    let out = ok(&[
        "eval",
        "--truth",
        s(&gt),
        "--ablate",
        "--model",
        s(&model),
        "--images",
        s(&scenes),
    ]);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(
        table.contains("CE-MSERs") && table.lines().any(|l| l.starts_with("MSERs")),
        "{table}"
    );
    assert!(table.contains("character recall"));

    let missing = textdet(&[
        "detect",
        "--model",
        s(&tmp.path().join("none.tcnn")),
        "--out",
        s(&det),
        s(&blank),
    ]);
    assert!(!missing.status.success());
}

#[test]
fn eval_lists_unmatched_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt");
    fs::create_dir(&gt).unwrap();
    fs::write(gt.join("gt_a.txt"), "0,0,9,9,x\n").unwrap();
    let det = tmp.path().join("det.jsonl");
    fs::write(&det, "{\"image\":\"b\",\"words\":[]}\n").unwrap();
    let out = textdet(&["eval", "--truth", s(&gt), "--detections", s(&det)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("a") && err.contains("b"), "{err}");
}

#[test]
fn config_file_and_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 11\n[synth]\ncount = 5\n").unwrap();
    let out = tmp.path().join("o");
    let status = Command::new(env!("CARGO_BIN_EXE_textdet"))
        .args(["synth", "--out", s(&out)])
        .env("TEXTDET_CONFIG", &cfg)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read_to_string(out.join("chars/manifest.tsv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    fs::write(&cfg, "[synth]\ncolour = 1\n").unwrap();
    let bad = textdet(&["--config", s(&cfg), "synth", "--out", s(&out)]);
    assert!(!bad.status.success());
}
