use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mechlink"));
    cmd.env_remove("MECHLINK_JOBS");
    cmd
}

fn reference_conf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.conf")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

const SMALL_SWEEP: &str = "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 2\naxis1_steps = 5\n\
    axis2 = detuning\naxis2_min = 0.8\naxis2_max = 1.2\naxis2_steps = 3\nmeasures = log_negativity, discord\n";

#[test]
fn validate_reports_stable() {
    let o = run(bin().arg("validate").arg(reference_conf()));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "stable"), "{}", stdout(&o));
}

#[test]
fn single_step_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.sweep");
    std::fs::write(&spec, "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 2\naxis1_steps = 1\n").unwrap();
    let o = run(bin().arg("sweep").arg(reference_conf()).arg("--spec").arg(&spec).arg("--out").arg(dir.path().join("o.csv")));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(2));
    assert_eq!(run(bin().arg("--no-such-flag").arg("validate").arg(reference_conf())).status.code(), Some(2));
    assert_eq!(run(bin().args(["fig", "4", "--out", "x.csv"])).status.code(), Some(2));
    assert_eq!(run(bin().args(["--convention", "sideways", "validate"]).arg(reference_conf())).status.code(), Some(2));
    assert_eq!(run(bin().args(["validate", "/nonexistent/reference.conf"])).status.code(), Some(2));
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    let text = std::fs::read_to_string(reference_conf()).unwrap().replace("mass = 145e-12", "mass = -1");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(run(bin().arg("validate").arg(&cfg)).status.code(), Some(2));
}

#[test]
fn blue_detuned_config_is_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blue.conf");
    let text = std::fs::read_to_string(reference_conf()).unwrap().replace("detuning_over_omega_m = 1.0", "detuning_over_omega_m = -1.0");
    std::fs::write(&cfg, text).unwrap();
    let o = run(bin().arg("validate").arg(&cfg));
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("unstable"));
}

#[test]
fn steady_state_writes_covariance_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cm.json");
    let o = run(bin().arg("steady-state").arg(reference_conf()).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["vacuum"], 0.5);
    assert_eq!(json["basis"].as_array().unwrap().len(), 8);
    assert_eq!(json["matrix"].as_array().unwrap().len(), 8);
}

#[test]
fn fig2_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2.csv");
    let o = run(bin().args(["fig", "2", "--out"]).arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&out);
    assert!(rows[0].starts_with("r,t_k,e_mean,d_mean,"), "{}", rows[0]);
    assert_eq!(rows.len(), 1 + 21 * 21);
}

#[test]
fn sweep_output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("small.sweep");
    std::fs::write(&spec, SMALL_SWEEP).unwrap();
    let render = |jobs: &str| {
        let out = dir.path().join(format!("jobs{jobs}.csv"));
        let o = run(bin().arg("--jobs").arg(jobs).arg("sweep").arg(reference_conf()).arg("--spec").arg(&spec).arg("--out").arg(&out));
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(&out).unwrap()
    };
    let one = render("1");
    assert_eq!(one, render("8"));
    let env_run = {
        let out = dir.path().join("env.csv");
        let o = run(bin().env("MECHLINK_JOBS", "3").arg("sweep").arg(reference_conf()).arg("--spec").arg(&spec).arg("--out").arg(&out));
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(&out).unwrap()
    };
    assert_eq!(one, env_run);
}

#[test]
fn log_base_only_rescales_display() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("small.sweep");
    std::fs::write(&spec, SMALL_SWEEP).unwrap();
    let read = |base: &str| {
        let out = dir.path().join(format!("base{base}.csv"));
        run(bin().args(["--log-base", base, "sweep"]).arg(reference_conf()).arg("--spec").arg(&spec).arg("--out").arg(&out));
        data_rows(&out)
    };
    let (e, two) = (read("e"), read("2"));
    let col = |row: &str, i: usize| row.split(',').nth(i).unwrap().parse::<f64>().unwrap();
    for (a, b) in e.iter().zip(&two).skip(1) {
        let (ea, eb) = (col(a, 2), col(b, 2));
        assert!((ea / std::f64::consts::LN_2 - eb).abs() <= 1e-12 * eb.abs().max(1.0));
    }
}

#[test]
fn readout_writes_points_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("io.csv");
    let o = run(bin().arg("readout").arg(reference_conf()).args(["--r-grid", "0:1.5:8", "--out"]).arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(fit["r_squared"].as_f64().unwrap() > 0.9);
    let rows = data_rows(&out);
    assert_eq!(rows[0], "r,e_in,e_out,t_star");
    assert_eq!(rows.len(), 9);

    let bad = run(bin().arg("readout").arg(reference_conf()).args(["--r-grid", "0:1", "--out"]).arg(&out));
    assert_eq!(bad.status.code(), Some(2));
}
