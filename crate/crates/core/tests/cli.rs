use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn relu_forge(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relu-forge"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RELU_FORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is a JSON report")
}

#[test]
fn help_and_version_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&relu_forge(dir.path(), &["--help"])), 0);
    assert_eq!(code(&relu_forge(dir.path(), &["--version"])), 0);
    assert_eq!(code(&relu_forge(dir.path(), &["deepen", "--help"])), 0);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = relu_forge(dir.path(), &["frobnicate"]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn invalid_flags_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&relu_forge(dir.path(), &["deepen", "--epsilon", "0"])),
        1
    );
    assert_eq!(
        code(&relu_forge(dir.path(), &["deepen", "--epsilon", "abc"])),
        1
    );
    assert_eq!(
        code(&relu_forge(
            dir.path(),
            &["deepen", "--data", "/no/such/file.csv"]
        )),
        1
    );
    assert_eq!(
        code(&relu_forge(
            dir.path(),
            &["approx-rate", "--n-list", "8,4,16"]
        )),
        1
    );
}

#[test]
fn deepen_defaults_pass_and_persist_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = relu_forge(dir.path(), &["--json", "deepen"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["schema_version"], 1);
    assert!(r["result"]["check"]["max_residual"].as_f64().unwrap() <= 1e-8);
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for suffix in [".manifest.json", ".report.json", ".student.json"] {
        assert_eq!(
            names.iter().filter(|n| n.ends_with(suffix)).count(),
            1,
            "{names:?}"
        );
    }
    let student = names.iter().find(|n| n.ends_with(".student.json")).unwrap();
    let net =
        relu_forge::ReluNet::from_json(&std::fs::read(dir.path().join(student)).unwrap()).unwrap();
    assert_eq!(
        net.depth(),
        r["result"]["check"]["depth"].as_u64().unwrap() as usize
    );
}

#[test]
fn verify_gates_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = relu_forge(
        dir.path(),
        &[
            "verify-gates",
            "--ells",
            "2,3",
            "--grid-points",
            "2000",
            "--random-points",
            "2000",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("sup error"));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn approx_rate_writes_csv_with_slope_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = relu_forge(dir.path(), &["approx-rate", "--n-list", "4,8,16"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(".rate.csv"))
        .unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("N,"));
    assert!(lines[4].starts_with("# slope"));
}

#[test]
fn failed_invariant_exits_with_two() {
    // in two dimensions the L¹ mass of a bump exceeds 2·(3τ/2)^d
    let dir = tempfile::tempdir().unwrap();
    let o = relu_forge(dir.path(), &["bad-interp", "--dim", "2", "--points", "5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("small norm"));
}

#[test]
fn csv_data_and_toml_config_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    std::fs::write(
        &csv,
        "x1,x2,y\n0.1,0.2,0.3\n-0.5,0.4,1.0\n0.9,-0.9,-0.2\n0.0,0.7,0.5\n",
    )
    .unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(
        &cfg,
        "depth = 2\nwidth = 16\nepochs = 50\nsplit_ratio = 1.0\n",
    )
    .unwrap();
    let o = relu_forge(
        dir.path(),
        &[
            "--json",
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["result"]["config"]["width"], 16);
    assert_eq!(r["result"]["data"]["train"], 4);
    std::fs::write(&cfg, "depht = 2\n").unwrap();
    let o = relu_forge(
        dir.path(),
        &[
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 1);
}
