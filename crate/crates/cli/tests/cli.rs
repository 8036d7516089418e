use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"

[model]
kind = "pk_system"
coupling = "vw_in_v"

[model.coefficients]
a_u = 1.0
b_v = 1.0
d_v = 1.0

[grid]
n = 8
length = 40.0

[initial_data]
preset = "random_bandlimited"
amplitude = 0.01
seed = 4

[time]
t_max = 4.0
dt = 0.5

[symbol]
preset = "null_b"

[norms]
list = ["u.h3", "v.l2", "w.linf"]
"#;

fn pdhs(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdhs")).args(args).env("PDHS_WORKERS", workers).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out = pdhs(&["run", &cfg, "--out", out_dir.to_str().unwrap()], workers);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read_to_string(out_dir.join("series.csv")).unwrap());
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["status"], "completed");
        assert_eq!(report["config"]["name"], "tiny");
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].starts_with("t,norm_name,value\n"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("t_max = 4.0", "t_max = 40.0"));
    let out = pdhs(&["run", &cfg], "1");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("t_max"), "{err}");

    let cfg = write_config(dir.path(), TINY);
    let out = pdhs(&["run", &cfg, "--set", "grid.n=10"], "1");
    assert_eq!(out.status.code(), Some(2));
    let out = pdhs(&["run", "no-such-preset"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_amplitude_completes_with_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = pdhs(&["run", &cfg, "--set", "initial_data.amplitude=0.0"], "1");
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = stdout.lines().skip_while(|l| !l.starts_with("t,norm_name")).skip(1).collect();
    assert_eq!(rows.len(), 3 * 4);
    assert!(rows.iter().all(|r| r.ends_with(",0e0")), "{rows:?}");
}

#[test]
fn blow_up_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = pdhs(&["run", &cfg, "--set", "initial_data.amplitude=200.0", "--set", "time.dt=0.25"], "1");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn presets_are_listed_and_parse() {
    let out = pdhs(&["presets", "list"], "1");
    assert!(out.status.success());
    let names: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect();
    assert!(names.iter().any(|n| n == "linear-sk-decay"));
    for name in &names {
        let show = pdhs(&["presets", "show", name], "1");
        assert!(show.status.success(), "{name}");
    }
}

#[test]
fn verify_runs_a_fast_criterion() {
    let out = pdhs(&["verify", "2"], "1");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("C2  PASS"));
    assert_eq!(pdhs(&["verify", "11"], "1").status.code(), Some(2));
}
