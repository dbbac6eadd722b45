use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wqed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wqed"))
        .args(args)
        .current_dir(cwd)
        .env("WQED_THREADS", "2")
        .output()
        .expect("spawn wqed")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn bic_info_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = wqed(&["bic-info", "--gamma-tau", "3", "--gamma-over-4j", "0.075"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.contains("separation d     10"), "{out}");

    let o = wqed(&["bic-info", "--gamma-tau", "3", "--gamma-over-4j", "0.075", "--json"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eps2 = v["epsilon_sq"].as_f64().unwrap();
    // 1 / (1 + Γτ/2) for a qubit in front of a mirror
    assert!((eps2 - 0.4).abs() < 1e-12, "{eps2}");
    assert_eq!(v["params"]["d"].as_u64(), Some(10));
}

#[test]
fn bic_info_rejects_strong_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let o = wqed(&["bic-info", "--gamma-tau", "3", "--gamma-over-4j", "0.3"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn config_errors_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "kind = \"vacuum_decay\"\ngamma_tau = 3\ngamma_over_4J = 0.3\nDelta_K = 1\n",
    )
    .unwrap();
    let o = wqed(&["run", "vacuum_decay", "--config", "bad.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 1);
    let err = text(&o.stderr);
    assert!(err.contains("Delta_K"), "{err}");
    assert!(err.contains("Γ/(4J) ≤ 0.1"), "{err}");
    assert!(!dir.path().join("o").join("manifest.json").exists());
}

#[test]
fn kind_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "kind = \"vacuum_decay\"\ngamma_tau = 3\ngamma_over_4J = 0.075\n",
    )
    .unwrap();
    let o = wqed(&["run", "two_photon_scattering", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = wqed(&["run"], dir.path());
    assert_eq!(code(&o), 1);
    let o = wqed(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn run_then_verify_then_tamper() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("vac.toml"),
        "kind = \"vacuum_decay\"\ngamma_tau = 3.0\ngamma_over_4J = 0.075\nt_max = 20\n",
    )
    .unwrap();
    let o = wqed(
        &["run", "vacuum_decay", "--config", "vac.toml", "--out", "o", "--snapshot-times", "5,10", "--save-states"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = dir.path().join("o");
    for f in ["series.txt", "field.txt", "summary.json", "manifest.json", "snapshot_1.txt", "state_0.bin"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(!out.join(".wqed.lock").exists());

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["params"][0]["d"].as_u64(), Some(10));
    assert!(manifest["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let o = wqed(&["verify", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stdout));

    let series = out.join("series.txt");
    let mut bytes = fs::read(&series).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'1' { b'2' } else { b'1' };
    fs::write(&series, bytes).unwrap();
    let o = wqed(&["verify", "o"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(text(&o.stdout).contains("series.txt"));
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("vac.toml"),
        "kind = \"vacuum_decay\"\ngamma_tau = 3.0\ngamma_over_4J = 0.075\nt_max = 20\n",
    )
    .unwrap();
    fs::create_dir(dir.path().join("o")).unwrap();
    fs::write(dir.path().join("o").join(".wqed.lock"), "").unwrap();
    let o = wqed(&["run", "vacuum_decay", "--config", "vac.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn pair_sweep_finds_interior_optimum() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tp.toml"),
        "kind = \"two_photon_scattering\"\ngamma_tau = 3.0\ngamma_over_4J = 0.1\nt_max = 20\n",
    )
    .unwrap();
    let o = wqed(
        &["sweep", "--config", "tp.toml", "--out", "s", "--var", "dk", "--grid", "0.3,0.5,0.8,1.2"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let curve = fs::read_to_string(dir.path().join("s").join("curve.txt")).unwrap();
    assert!(curve.contains("boundary_optimum = false"));
    assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let o = wqed(&["verify", "s"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stdout));
}

#[test]
fn engineer_writes_reusable_grids() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("e.toml"),
        "kind = \"two_photon_scattering\"\ngamma_tau = 3.0\ngamma_over_4J = 0.1\n[engineer]\niterations = 1\n",
    )
    .unwrap();
    let o = wqed(&["engineer", "--config", "e.toml", "--out", "e"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = dir.path().join("e");
    assert!(out.join("iter1_input.txt").exists());
    assert!(out.join("engineering.txt").exists());

    // the designed input can be fed back as a custom pair
    fs::write(
        dir.path().join("c.toml"),
        "kind = \"two_photon_scattering\"\ngamma_tau = 3.0\ngamma_over_4J = 0.1\nt_max = 80\ncustom_grid = \"e/iter1_input.txt\"\n",
    )
    .unwrap();
    let o = wqed(&["run", "two_photon_scattering", "--config", "c.toml", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r").join("summary.json")).unwrap()).unwrap();
    let p_tr = summary["steady"]["p_tr"].as_f64().unwrap();
    assert!(p_tr > 0.3, "{p_tr}");
}
