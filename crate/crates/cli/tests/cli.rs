use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{sub}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{sub}-{}", extra.join("")));
    let output = Command::new(env!("CARGO_BIN_EXE_phasered"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn ok(dir: &Path, sub: &str, config: &str) -> PathBuf {
    let (output, out) = run(dir, sub, config, &[]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn find_cycle_periods() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), "find-cycle", "[model]\nname = \"radial\"\n");
    let t = json(out.join("summary.json"))["T"].as_f64().unwrap();
    assert!((t - TAU).abs() <= 1e-5, "{t}");
    let rows = csv_rows(out.join("cycle.csv"));
    assert_eq!(rows.len(), 256);
    assert_eq!(rows[0].len(), 3);

    let sl = "[model]\nname = \"stuart_landau\"\nparams = { omega = 2.0, c2 = 1.0 }\n";
    let out = ok(dir.path(), "find-cycle", sl);
    let t = json(out.join("summary.json"))["T"].as_f64().unwrap();
    assert!((t - TAU).abs() <= 1e-5, "{t}");
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    for (config, needle) in [
        ("[model]\nparams = { omega = 1.0 }\n", "missing field `name`"),
        ("out = \"x\"\n", "missing field `model`"),
        ("[model]\nname = \"radial\"\ntolerance = 1\n", "unknown field `tolerance`"),
        ("[model]\nname = \"radial\"\n[cycle]\ngird = 128\n", "unknown field `gird`"),
        ("[model]\nname = \"radial\"\n[isochrons]\nr_min = 2.0\nr_max = 0.5\n", "radial range"),
    ] {
        let sub = if config.contains("isochrons") { "isochrons" } else { "find-cycle" };
        let (output, _) = run(dir.path(), sub, config, &[]);
        assert_eq!(output.status.code(), Some(2), "{config}");
        let err: Value = serde_json::from_slice(&output.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "config");
        let msg = err["error"]["message"].as_str().unwrap();
        assert!(msg.contains(needle), "{msg}");
    }
}

#[test]
fn prc_matches_spiral_gradient() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), "prc", "[model]\nname = \"spiral\"\n[prc]\nmethod = \"adjoint\"\n");
    let rows = csv_rows(out.join("prc.csv"));
    assert_eq!(rows.len(), 256);
    for r in rows {
        let th = r[0];
        assert!((r[1] - (th.cos() - th.sin())).abs() <= 1e-5);
        assert!((r[2] - (th.cos() + th.sin())).abs() <= 1e-5);
    }
}

#[test]
fn reduce_gives_half_cosine() {
    let dir = TempDir::new().unwrap();
    let config = "[model]\nname = \"radial\"\n[reduce.forcing]\ndirection = [1.0, 0.0]\nomega = 1.0\namplitude = 0.05\n";
    let out = ok(dir.path(), "reduce", config);
    for r in csv_rows(out.join("coupling.csv")) {
        // stored with the averaging theorem's sign, the negative of the restoring force
        assert!((-r[1] - 0.5 * r[0].cos()).abs() <= 1e-6);
    }
    let summary = json(out.join("summary.json"));
    assert_eq!(summary["lock"]["locked"], true);
}

#[test]
fn sweep_finds_threshold() {
    let dir = TempDir::new().unwrap();
    let config = "[sweep]\ndelta_omega = 0.02\ngrid = { start = 0.01, ratio = 1.35, count = 12 }\n";
    let out = ok(dir.path(), "sweep", config);
    let eps_c = json(out.join("summary.json"))["eps_c"].as_f64().unwrap();
    assert!((0.035..=0.065).contains(&eps_c), "{eps_c}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = "seed = 11\n[simulate]\nrandom_initial = true\nhorizon_mult = 1.0\nsamples = 50\n\
                  [simulate.network]\nkind = \"custom\"\nepsilon = 0.05\ncoupling = \"diffusive\"\n\
                  adjacency = [[0.0, { a = 1.0, b = 0.5 }], [1.0, 0.0]]\nnodes = [{ name = \"radial\" }, { name = \"spiral\" }]\n";
    let (a, out_a) = run(dir.path(), "simulate", config, &["--threads", "1"]);
    let (b, out_b) = run(dir.path(), "simulate", config, &["--threads", "3"]);
    assert!(a.status.success() && b.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    for name in ["phases.csv", "coupling_1_2.csv", "coupling_2_1.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(out_a.join(name)).unwrap(), fs::read(out_b.join(name)).unwrap(), "{name}");
    }
    let (c, out_c) = run(dir.path(), "simulate", config, &["--seed", "12"]);
    assert!(c.status.success());
    assert_ne!(fs::read(out_a.join("phases.csv")).unwrap(), fs::read(out_c.join("phases.csv")).unwrap());

    let manifest = json(out_a.join("manifest.json"));
    assert_eq!(manifest["config"].as_str().unwrap(), config);
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["command"], "simulate");
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == "phases.csv"));
}

#[test]
fn json_format_and_fit_scaling() {
    let dir = TempDir::new().unwrap();
    let config = "[fit_scaling]\ndetunings = [0.01, 0.02, 0.04, 0.08]\ngrid = { start = 0.01, ratio = 1.35, count = 12 }\n";
    let (output, out) = run(dir.path(), "fit-scaling", config, &["--format", "json"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let fit = json(out.join("scaling.json"));
    assert!((fit["exponent"].as_f64().unwrap() - 0.5).abs() <= 0.1);
    let table = json(out.join("thresholds.json"));
    assert_eq!(table["columns"][1], "eps_c");
    assert_eq!(table["rows"].as_array().unwrap().len(), 4);
}
