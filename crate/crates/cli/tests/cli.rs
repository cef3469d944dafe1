use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_subtaylor"));
    cmd.env_remove("SUBTAYLOR_SEED");
    cmd
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

const SMALL_ABELIAN: &str =
    r#"{"structure":{"kind":"abelian","n":1},"polynomials":["w1","w1^2"],"mc":{"samples":20000}}"#;

#[test]
fn abelian_isometry_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", SMALL_ABELIAN);
    let out = run(bin().arg("isometry").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("experiment,structure,f,"));
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("isometry-halved"));
}

#[test]
fn broken_skew_structure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"structure":{"kind":"inline","n":2,"N":1,"omega":[[0,0],[1,0],[1,0],[0,0]]}}"#,
    );
    let out = run(bin().arg("isometry").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skew"));
}

#[test]
fn unparsable_literal_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lit.json", r#"{"polynomials":["w1 +* 3"]}"#);
    let out = run(bin().arg("isometry").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_field_and_mismatched_experiment_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "x.json", r#"{"bogus":1}"#);
    assert_eq!(run(bin().arg("fejer").arg("--config").arg(&cfg)).status.code(), Some(3));
    let cfg = write(dir.path(), "y.json", r#"{"experiment":"geometry"}"#);
    assert_eq!(run(bin().arg("fejer").arg("--config").arg(&cfg)).status.code(), Some(3));
    assert_eq!(run(bin().arg("no-such-command")).status.code(), Some(3));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", SMALL_ABELIAN);
    let a = run(bin().args(["isometry", "--seed", "7", "--config"]).arg(&cfg));
    let b = run(bin().args(["isometry", "--seed", "7", "--config"]).arg(&cfg));
    let c = run(bin().args(["isometry", "--seed", "8", "--config"]).arg(&cfg));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn environment_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", SMALL_ABELIAN);
    let flag = run(bin().args(["isometry", "--seed", "11", "--config"]).arg(&cfg));
    let env = run(bin().env("SUBTAYLOR_SEED", "11").args(["isometry", "--seed", "99", "--config"]).arg(&cfg));
    assert_eq!(flag.stdout, env.stdout);
    assert!(String::from_utf8_lossy(&env.stdout).contains(",11,"));
}

#[test]
fn json_and_csv_outputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("fejer.json");
    let out = run(bin().args(["fejer", "--format", "json", "--out"]).arg(&json_path));
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    let csv = String::from_utf8(run(bin().arg("fejer")).stdout).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(rows.iter().all(|r| r["cutoff_exact"] == serde_json::Value::Bool(true)));
}

#[test]
fn projection_reports_monotone_norms() {
    let out = run(bin().args(["projection", "--format", "json"]));
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    let norms: Vec<f64> = rows.iter().map(|r| r["restricted_norm_sq"].as_f64().unwrap()).collect();
    assert!(norms.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(rows.last().unwrap()["coefficient_distance"].as_f64().unwrap() < 1e-12);
}

#[test]
fn geometry_writes_witness_csv() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("witness.csv");
    let cfg = write(
        dir.path(),
        "g.json",
        &format!(
            r#"{{"structure":{{"kind":"heisenberg","pairs":1}},"targets":[{{"w":[[1,0],[0,0]],"c":[[0.5,0]]}}],"witness_csv":{}}}"#,
            serde_json::to_string(&witness).unwrap()
        ),
    );
    let out = run(bin().args(["geometry", "--format", "json", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &reports.as_array().unwrap()[0];
    assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap());
    let text = std::fs::read_to_string(&witness).unwrap();
    assert!(text.starts_with("t,re_w1,im_w1,re_w2,im_w2,re_c1,im_c1"));
    assert!(text.lines().count() > 2);
}

#[test]
fn selftest_passes() {
    let out = run(bin().arg("selftest"));
    assert_eq!(out.status.code(), Some(0));
    assert!(!String::from_utf8_lossy(&out.stdout).contains(",false"));
}
