use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use pab_prober::{Receiver, ReceiverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pab(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pab"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("PAB_OUTPUT_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SPEC: &str = "topology = \"dumbbell\"\ntrials = 3\npolicies = [\"WCI\", \"RR\"]\nseed = 11\n";

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = pab(out, &["simulate", "--spec", spec.to_str().unwrap(), "--seed", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("WCI"));
    }
    for name in ["report.json", "trials.csv", "scatter.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    assert!(!a.join("progress.jsonl").exists());

    // one scatter row per trial and policy, plus the header
    let scatter = std::fs::read_to_string(a.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 3 * 2);

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["spec"]["seed"], 5);
}

#[test]
fn simulate_overrides_apply_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    let o = pab(
        dir.path(),
        &["simulate", "--spec", spec.to_str().unwrap(), "--set", "trials=1", "--set", "policies=SEQ"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 2);
    assert!(stdout(&o).contains("SEQ"));
}

#[test]
fn unknown_policy_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pab(dir.path(), &["simulate", "--set", "policies=RR,XYZ"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("policies") && err.contains("XYZ"), "{err}");
}

#[test]
fn unknown_spec_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = pab(dir.path(), &["simulate", "--set", "trails=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

fn shaped_receiver(limit: f64) -> String {
    let config = ReceiverConfig {
        limit_mbps: Some(limit),
        ..ReceiverConfig::default()
    };
    Receiver::bind("127.0.0.1:0", config).unwrap().spawn().unwrap().to_string()
}

#[test]
fn estimate_brackets_shaped_loopback_paths() {
    let dir = tempfile::tempdir().unwrap();
    let limits = [20.0, 45.0];
    let topo = dir.path().join("topology.txt");
    std::fs::write(&topo, "link a\nlink b\npath slow a\npath fast b\n").unwrap();
    let endpoints = dir.path().join("endpoints.txt");
    std::fs::write(
        &endpoints,
        format!("slow {}\nfast {}\n", shaped_receiver(limits[0]), shaped_receiver(limits[1])),
    )
    .unwrap();
    let o = pab(
        dir.path(),
        &[
            "estimate",
            "--topology",
            topo.to_str().unwrap(),
            "--endpoints",
            endpoints.to_str().unwrap(),
            "--policy",
            "SEQ",
            "--set",
            "inter_train_ms=2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("session.json")).unwrap()).unwrap();
    assert_eq!(report["policy"]["kind"], "SEQ");
    let epsilon = report["config"]["epsilon"].as_f64().unwrap();
    for (e, limit) in report["estimates"].as_array().unwrap().iter().zip(limits) {
        let lb = e["lb"].as_f64().unwrap();
        let ub = e["ub"].as_f64().unwrap();
        assert!(lb <= limit + epsilon && ub >= limit - epsilon, "{} [{lb}, {ub}] vs {limit}", e["name"]);
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn estimate_rejects_missing_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topology.txt");
    std::fs::write(&topo, "link a\nlink b\npath p a\npath q b\n").unwrap();
    let endpoints = dir.path().join("endpoints.txt");
    std::fs::write(&endpoints, "p 127.0.0.1:9\n").unwrap();
    let o = pab(
        dir.path(),
        &["estimate", "--topology", topo.to_str().unwrap(), "--endpoints", endpoints.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`q`"), "{}", stderr(&o));
}

fn training_csv(paths: &[(&str, f64)], alpha: f64, reps: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("path,rate,z\n");
    for &(name, y) in paths {
        for r in 1..=100u32 {
            let p = 1.0 / (1.0 + (alpha * (f64::from(r) - y)).exp());
            for _ in 0..reps {
                writeln!(csv, "{name},{r},{}", u8::from(rng.gen_bool(p))).unwrap();
            }
        }
    }
    csv
}

#[test]
fn fit_recovers_slope_and_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    std::fs::write(&data, training_csv(&[("a", 40.0), ("b", 70.0)], 0.8, 30, 3)).unwrap();
    let o = pab(dir.path(), &["fit", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let model: toml::Table = std::fs::read_to_string(dir.path().join("model.toml")).unwrap().parse().unwrap();
    let alpha = model["alpha"].as_float().unwrap();
    assert!((alpha - 0.8).abs() < 0.25, "alpha {alpha}");
    assert_eq!(model["kappa"].as_float(), Some(0.05));
    let out = stdout(&o);
    assert!(out.contains("a") && out.contains("b"), "{out}");
}

#[test]
fn fit_reports_unidentifiable_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = training_csv(&[("a", 40.0)], 0.8, 10, 4);
    for r in 1..=100 {
        writeln!(csv, "flat,{r},1").unwrap();
    }
    let data = dir.path().join("train.csv");
    std::fs::write(&data, csv).unwrap();
    let o = pab(dir.path(), &["fit", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("flat"), "{}", stderr(&o));
    // the identifiable path still yields a model
    assert!(dir.path().join("model.toml").exists());
}

#[test]
fn fit_rejects_empty_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    std::fs::write(&data, "path,rate,z\n").unwrap();
    let o = pab(dir.path(), &["fit", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn topo_generate_then_show() {
    let dir = tempfile::tempdir().unwrap();
    let o = pab(
        dir.path(),
        &["topo", "generate", "--nodes", "30", "--extra-links", "3", "--paths", "8", "--seed", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let file = dir.path().join("topology.txt");
    let shown = pab(dir.path(), &["topo", "show", file.to_str().unwrap()]);
    assert!(shown.status.success(), "{}", stderr(&shown));
    assert!(stdout(&shown).contains("8 paths"), "{}", stdout(&shown));
}

#[test]
fn topo_show_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.txt");
    std::fs::write(&file, "link a\npath p a zz\n").unwrap();
    let o = pab(dir.path(), &["topo", "show", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zz"), "{}", stderr(&o));
}

#[test]
fn probe_without_receiver_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dest = format!("127.0.0.1:{port}");
    let o = pab(dir.path(), &["probe", "--dest", &dest, "--rate", "10", "--timeout-ms", "300"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
