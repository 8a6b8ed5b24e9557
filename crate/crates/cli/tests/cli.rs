use std::path::Path;
use std::process::{Command, Output};

use flowsurrogate::harness::read_fields_csv;

const CONFIG: &str = "sample_fraction = 0.2\n\n[gbm]\nn_estimators = 30\nmax_depth = 5\n\n[cnn]\nepochs = 1\naugment = false\n";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsurrogate")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    let config = dir.path().join("config.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let c = s(&config);

    let listing = ok(&["synth", "--out", s(&data), "--seed", "3", "--samples", "3", "--min-vertices", "1500", "--max-vertices", "2000"]);
    assert_eq!(listing.lines().count(), 4);
    assert!(data.join("manifest.json").exists());

    let fit = ok(&["--config", c, "train-filltime", "--data", s(&data), "--models", s(&models), "--seed", "3"]);
    assert!(fit.starts_with("samples,trees,nodes\n3,30,"), "{fit}");
    let losses = ok(&["--config", c, "train-deflection", "--data", s(&data), "--models", s(&models), "--seed", "3"]);
    assert_eq!(losses.lines().count(), 2, "{losses}");
    for f in ["filltime.json", "deflection.json", "deflection.bin", "deflection_loss.csv"] {
        assert!(models.join(f).exists(), "{f}");
    }

    let name = listing.lines().nth(1).unwrap().split(',').next().unwrap();
    let mesh = data.join(format!("{name}.obj"));
    let gates = data.join(format!("{name}.gates.json"));
    let fields = dir.path().join("pred.csv");
    let args = ["--config", c, "predict", "--mesh", s(&mesh), "--gates", s(&gates), "--models", s(&models), "--seed", "3"];
    ok(&[&args[..], &["--out", s(&fields)]].concat());
    let (fill, defl) = read_fields_csv(std::fs::File::open(&fields).unwrap(), "pred.csv").unwrap();
    let vertices: usize = listing.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(fill.len(), vertices);
    assert_eq!(defl.unwrap().len(), vertices);

    // same seed, same output
    let again = dir.path().join("again.csv");
    ok(&[&args[..], &["--out", s(&again)]].concat());
    assert_eq!(std::fs::read(&fields).unwrap(), std::fs::read(&again).unwrap());

    let only_fill = ok(&[&args[..], &["--no-deflection"]].concat());
    assert!(only_fill.lines().skip(1).all(|l| l.ends_with(',')));

    let bench = ok(&["benchmark", "--mesh", s(&mesh), "--gates", s(&gates), "--models", s(&models), "--seed", "3"]);
    let stages: Vec<&str> = bench.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(stages, ["stage", "preprocessing", "fill_time", "deflection", "total"]);

    let report = dir.path().join("cv.json");
    let points = dir.path().join("points.csv");
    let cv = ok(&["--config", c, "crossvalidate", "--data", s(&data), "--folds", "3", "--seed", "3", "--out", s(&report), "--points", s(&points)]);
    assert_eq!(cv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["folds"], 3);
    assert_eq!(std::fs::read_to_string(&points).unwrap().lines().count(), 1 + listing.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum::<usize>());

    let debug = dir.path().join("debug");
    let sidecar = ok(&["export-debug", "--mesh", s(&mesh), "--fields", s(&fields), "--out", s(&debug)]);
    let side: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!((side["height"].as_u64(), side["width"].as_u64()), (Some(384), Some(768)));
    for f in ["raster.values.pgm", "raster.mask.pgm", "raster.json"] {
        assert!(debug.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_is_required() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["synth", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn missing_models_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("t.obj");
    let gates = dir.path().join("g.json");
    std::fs::write(&mesh, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    std::fs::write(&gates, r#"{"gates":[{"node_id":0,"opening_time":0.0}]}"#).unwrap();
    let out = cli(&["predict", "--mesh", s(&mesh), "--gates", s(&gates), "--models", s(dir.path()), "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fill-time"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "sample_fraction = \"lots\"\n").unwrap();
    let out = cli(&["--config", s(&config), "train-filltime", "--data", s(dir.path()), "--models", s(dir.path()), "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}
