use std::path::Path;
use std::process::{Command, Output};

use ihl::scenario_file::{self, ScenarioFile};

fn ihl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ihl")).args(args).output().expect("run ihl")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_two_point(dir: &Path, times: Vec<f64>) -> String {
    let p = path(dir, "two_point.json");
    std::fs::write(&p, scenario_file::two_point(times).to_json()).unwrap();
    p
}

#[test]
fn gen_writes_a_valid_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "zero.json");
    let o = ihl(&["gen", "zero_graph", "50", "7", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = ScenarioFile::read(Path::new(&out)).unwrap();
    assert_eq!(file.to_scenario().unwrap().len(), 50);
}

#[test]
fn gen_unknown_family_is_a_usage_error() {
    let o = ihl(&["gen", "spiral", "10", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown family"));
}

#[test]
fn eval_two_point_rows() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_two_point(dir.path(), vec![0.1, 1.0]);
    let o = ihl(&["eval", "--scenario", &scenario]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let value = |r: &Vec<&str>| r[2].parse::<f64>().unwrap();
    // t = 0.1: both points frozen; t = 1: y = 1 moves to 1/2t = 0.5
    assert_eq!(value(&rows[0]), 0.0);
    assert_eq!(value(&rows[1]), 2.0);
    assert_eq!(value(&rows[2]), 0.0);
    assert_eq!(value(&rows[3]), 0.5);
    assert_eq!(rows[3][3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn eval_rejects_empty_grid_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_two_point(dir.path(), vec![]);
    assert_eq!(ihl(&["eval", "--scenario", &scenario]).status.code(), Some(2));

    let broken = path(dir.path(), "broken.json");
    std::fs::write(&broken, "{\n  \"schema_version\": 1,\n  \"kappa\": \"two\"\n}\n").unwrap();
    let o = ihl(&["eval", "--scenario", &broken]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_two_point(dir.path(), vec![0.1, 0.3, 1.0]);
    let hard = "P_BOUNDS,P_T0,P_TLIP,P_DPM_MONO,P_DERIV,P_2TL,P_PAIR_SLOPE,T_DUALITY,R_GLOBAL_LIP,R_AE_EQUAL,O_CLASSICAL";
    let o = ihl(&["verify", "--scenario", &scenario, "--checks", hard]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 11);

    assert_eq!(ihl(&["verify", "--scenario", &scenario, "--checks", "P_NOPE"]).status.code(), Some(2));

    let mut file = scenario_file::two_point(vec![0.1, 0.3, 1.0]);
    file.fault_injection = Some(ihl::TheoremId::PTlip);
    let faulted = path(dir.path(), "fault.json");
    std::fs::write(&faulted, file.to_json()).unwrap();
    assert_eq!(ihl(&["verify", "--scenario", &faulted, "--checks", "P_TLIP"]).status.code(), Some(1));
}

#[test]
fn verify_summary_and_delta() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_two_point(dir.path(), vec![0.1, 0.3, 1.0]);
    let out = path(dir.path(), "reports.json");
    let o = ihl(&["verify", "--scenario", &scenario, "--checks", "P_TLIP", "--delta", "0.1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("P_TLIP") && l.contains("1/1")), "{table}");
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(reports[0]["extra"]["delta"], 0.1);
}

#[test]
fn verify_refinement_needs_generated_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_two_point(dir.path(), vec![0.1, 1.0]);
    assert_eq!(ihl(&["verify", "--scenario", &scenario, "--refine", "2"]).status.code(), Some(2));
    assert_eq!(ihl(&["verify", "--scenario", &scenario, "--refine", "3"]).status.code(), Some(2));

    let generated = path(dir.path(), "affine.json");
    ihl(&["gen", "affine_graph", "50", "0", "--out", &generated]);
    let o = ihl(&["verify", "--scenario", &generated, "--checks", "T_DUALITY", "--refine", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports[1]["extra"]["sizes"], serde_json::json!([50, 100, 200]));
}

#[test]
fn slope_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let zero = path(dir.path(), "zero.json");
    ihl(&["gen", "zero_graph", "20", "0", "--out", &zero]);
    let o = ihl(&["slope", "--scenario", &zero]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["ils_global"], 1.0);

    let affine = path(dir.path(), "affine.json");
    ihl(&["gen", "affine_graph", "20", "0", "--slope", "2", "--out", &affine]);
    let o = ihl(&["slope", "--scenario", &affine]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((report["ils_global"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-12);

    let csv = path(dir.path(), "slopes.csv");
    assert_eq!(ihl(&["slope", "--scenario", &affine, "--out", &csv]).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("index,slope,slope_asymptotic,radius\n"));
    assert_eq!(text.lines().count(), 21);

    let mut single = scenario_file::two_point(vec![1.0]);
    single.sample.points.truncate(1);
    single.section.values.as_mut().unwrap().truncate(1);
    let one = path(dir.path(), "single.json");
    std::fs::write(&one, single.to_json()).unwrap();
    let o = ihl(&["slope", "--scenario", &one]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["slope"], serde_json::json!([0.0]));
}

#[test]
fn shipped_two_point_file_matches_generator() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two_point.json");
    let text = std::fs::read_to_string(shipped).unwrap();
    assert_eq!(text, scenario_file::two_point(vec![0.1, 0.25, 0.3, 1.0]).to_json());
}
