use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::Command as Proc;

use kfpness_cli::commands::{Command, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK};
use kfpness_cli::{parse_config_str, run_command};
use kfpness_core::phasespace::read_snapshot;
use kfpness_core::DistributionField;

const HOMOGENEOUS: &str = "\
[model]
alpha = 0.05
thermostats = [{ eta = 2.0, temperature = 3.0 }]
[grid]
nx = 4
nv = 64
v_max = 8.0
[integrator]
dt = 1e-3
";

fn setup(text: &str) -> kfpness_cli::Setup {
    parse_config_str(text, Path::new("inline.toml")).unwrap()
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_kfpness"))
}

#[test]
fn validate_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_command(Command::Validate, &setup(HOMOGENEOUS), Some(&out));
    assert_eq!(o.exit_code, EXIT_OK);
    assert!(o.written.is_empty());
    assert!(!out.exists());
}

#[test]
fn ness_on_homogeneous_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_command(Command::Ness, &setup(HOMOGENEOUS), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_OK, "{}", o.summary);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let exact = 7.9 / 3.9;
    let nu = s["nu_star"].as_f64().unwrap();
    assert!(((nu - exact) / exact).abs() <= 0.01, "{nu}");
    assert_eq!(s["regime_flag"], "within proven regime");
    assert_eq!(s["status"], "ok");
    for key in ["energy", "E0", "alpha", "iterations", "residual", "command"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    for f in ["run.csv", "final.csv", "metadata.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn large_alpha_is_flagged_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let text = HOMOGENEOUS.replace("alpha = 0.05", "alpha = 0.4");
    let o = run_command(Command::Ness, &setup(&text), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_OK);
    assert_eq!(o.summary["regime_flag"], "outside proven regime");
}

#[test]
fn non_convergence_exits_3_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HOMOGENEOUS}[ness]\nmax_steps = 10\n");
    let o = run_command(Command::Ness, &setup(&text), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_NUMERICAL);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["reason"], "not_converged");
    assert_eq!(s["status"], "failed");
}

#[test]
fn oracle_check_needs_homogeneous_setup() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nthermostats = [{ eta = 1.0, temperature = 1.0, region = { lower = [0.0], upper = [0.5] } }]\n";
    let o = run_command(Command::OracleCheck, &setup(text), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_INVALID);
    assert_eq!(o.reason(), Some("not_homogeneous"));
}

#[test]
fn oracle_check_passes_on_homogeneous_setup() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_command(Command::OracleCheck, &setup(HOMOGENEOUS), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_OK, "{}", o.summary);
    let checks = o.summary["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c["pass"] == true));
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(csv.starts_with("r,fhat\n"));
}

const SIM: &str = "\
[model]
alpha = 0.05
tau = { linear_ramp = { start = 0.5, end = 1.5 } }
thermostats = [{ eta = 1.0, temperature = 0.5, region = { lower = [0.0], upper = [0.3] } }]
[model.boundary]
mode = \"maxwell\"
accommodation = 0.5
wall_temperature = 2.0
[grid]
nx = 16
nv = 32
[integrator]
t_final = 0.5
[output]
prefix = \"sim-\"
record_every = 0
";

#[test]
fn simulate_record_every_zero_keeps_two_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_command(Command::Simulate, &setup(SIM), Some(dir.path()));
    assert_eq!(o.exit_code, EXIT_OK, "{}", o.summary);
    let csv = fs::read_to_string(dir.path().join("sim-run.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "t,mass,energy,l2w_distance,boundary_energy_flux");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.0"));
    let budget = fs::read_to_string(dir.path().join("sim-budget.csv")).unwrap();
    assert!(budget.starts_with("mechanism,value\nfokker_planck,"));
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = setup(SIM);
    run_command(Command::Simulate, &s, Some(dir.path()));
    let file = fs::File::open(dir.path().join("sim-final.csv")).unwrap();
    let f: DistributionField = read_snapshot(BufReader::new(file)).unwrap();
    assert_eq!(f.grid().as_ref(), s.system.grid().as_ref());
    let mut again = Vec::new();
    kfpness_core::phasespace::write_snapshot(&f, &mut again).unwrap();
    let original = fs::read(dir.path().join("sim-final.csv")).unwrap();
    assert_eq!(again, original);
    let back: DistributionField = read_snapshot(BufReader::new(&again[..])).unwrap();
    for (a, b) in f.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 1e-15 * a.abs().max(f64::MIN_POSITIVE));
    }
}

#[test]
fn binary_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, HOMOGENEOUS).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let st = bin()
            .args(["ness", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        outputs.push(
            ["summary.json", "run.csv", "final.csv", "metadata.json"]
                .map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn binary_rejects_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nalpha = 0.7\n").unwrap();
    let out = dir.path().join("out");
    let st = bin()
        .args(["ness", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("bad.toml:2: model.alpha: alpha outside [0, 1/2)"), "{err}");
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["reason"], "validation_error");
    assert_eq!(s["issues"][0]["line"], 2);

    let st = bin().args(["validate", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let good = dir.path().join("good.toml");
    fs::write(&good, HOMOGENEOUS).unwrap();
    let st = bin().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
}
