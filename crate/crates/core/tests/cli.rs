use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn plap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .env("PLAP_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn kernels_lists_the_catalog_in_stable_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = plap(&["kernels"], dir.path());
    let b = plap(&["kernels"], dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("halfplane") && text.contains("indicator/rho=1"));
    assert!(text.contains("mean") && text.contains("Lip(1)"));
}

#[test]
fn verify_passes_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = plap(&["verify", "--seed", "0"], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(d.path().join("invariants.txt").exists());
    }
    assert_eq!(
        read(a.path(), "invariants.json"),
        read(b.path(), "invariants.json")
    );
    assert_eq!(
        read(a.path(), "invariants.txt"),
        read(b.path(), "invariants.txt")
    );
}

#[test]
fn corrupted_symmetry_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(&["verify", "--asymmetrize-kernel"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("discretization_symmetric_in_range"));
}

#[test]
fn shipped_configs_run_and_pass_their_gates() {
    for name in [
        "verify.toml",
        "simulate_disk.toml",
        "simulate_adaptive.toml",
        "sweep_n_mean.toml",
        "sweep_n_halfplane.toml",
        "sweep_tau_two_node.toml",
        "p_sweep.toml",
        "dimension.toml",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let o = plap(&["run", config(name).to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let manifest: serde_json::Value =
            serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
        assert_eq!(manifest["passed"], true);
        assert_eq!(manifest["library_version"], env!("CARGO_PKG_VERSION"));
        assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn sweep_n_reports_first_order_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(
        &["run", config("sweep_n_mean.toml").to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    let summary = read(dir.path(), "rate_summary.csv");
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("slope,intercept,r_squared,points_used,degenerate")
    );
    let slope: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 1.0).abs() <= 0.25, "slope {slope}");
    assert!(read(dir.path(), "rate.csv").starts_with("x,err\n8,"));
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in [
        "simulate_disk.toml",
        "sweep_tau_two_node.toml",
        "p_sweep.toml",
    ] {
        for d in [&a, &b] {
            assert!(plap(&["run", config(name).to_str().unwrap()], d.path())
                .status
                .success());
        }
        for entry in fs::read_dir(a.path()).unwrap() {
            let file = entry.unwrap().file_name();
            let file = file.to_str().unwrap();
            if file.ends_with(".csv") {
                assert_eq!(read(a.path(), file), read(b.path(), file), "{name}: {file}");
            }
        }
    }
}

#[test]
fn failed_gate_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("sweep_n_mean.toml"))
        .unwrap()
        .replace("slope_max = -0.75", "slope_max = -1.2");
    let cfg = dir.path().join("tight.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = plap(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("slope_max"));
    assert!(out.join("rate.csv").exists());
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");

    fs::write(
        &cfg,
        "experiment = \"simulate\"\n[graphon\nkind = \"mean\"\n",
    )
    .unwrap();
    let o = plap(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    fs::write(
        &cfg,
        "experiment = \"simulate\"\n[graphon]\nkind = \"moon\"\n",
    )
    .unwrap();
    let o = plap(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("moon"), "{}", stderr(&o));

    let text = fs::read_to_string(config("sweep_n_mean.toml"))
        .unwrap()
        .replace("n_ref = 512", "n_ref = 100");
    fs::write(&cfg, text).unwrap();
    let o = plap(&["run", cfg.to_str().unwrap()], &dir.path().join("never"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`sweep.n_ref`"), "{}", stderr(&o));
    // Validation happens before anything is written.
    assert!(!dir.path().join("never").exists());
}

#[test]
fn nothing_is_written_outside_the_output_dir() {
    let work = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(["run", config("simulate_disk.toml").to_str().unwrap()])
        .current_dir(work.path())
        .env("PLAP_OUTPUT_DIR", out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(work.path()).unwrap().count(), 0);
    let mut names: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "initial.csv",
            "kernel.csv",
            "manifest.json",
            "trajectory.csv",
            "trajectory.json"
        ]
    );
}
