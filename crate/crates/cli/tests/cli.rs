use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbpnet"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sbpnet-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_variant(dir: &Path, base: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(example(base)).unwrap();
    assert!(text.contains(from), "{from} not in {base}");
    let path = dir.join("variant.toml");
    fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

#[test]
fn bundled_configs_validate() {
    for entry in fs::read_dir(example("")).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&["validate", s(&path)]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn malformed_routing_row_is_a_validation_error() {
    let dir = scratch("routing");
    let cfg = write_variant(&dir, "reentrant_rho_0.96_0.99.toml", "[0, 0, 1, 0, 0],", "[0, 0, 1, 0.5, 0],");
    let out = run(&["validate", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("routing[2]"));
}

#[test]
fn unknown_policy_class_is_a_validation_error() {
    let dir = scratch("policy");
    let cfg = write_variant(&dir, "reentrant_rho_0.96_0.99.toml", "[[5, 3, 1], [2, 4]]", "[[5, 3, 1], [2, 4, 7]]");
    let out = run(&["validate", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("policy[2][3]"));
}

#[test]
fn analyze_writes_constants_for_mm1() {
    let dir = scratch("mm1");
    let out = run(&["analyze", s(&example("mm1.toml")), "--out", s(&dir)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("constants.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let mean: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((mean - 4.0).abs() < 1e-7, "{row}");
    let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
    for f in ["constants.csv", "matrices.json", "manifest.json"] {
        assert!(manifest.contains(f));
    }
}

#[test]
fn assumption_failure_is_reported_and_fatal_only_when_strict() {
    let dir = scratch("strict");
    let cfg = example("rybko_stolyar.toml");
    let out = run(&["analyze", s(&cfg), "--out", s(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let json = fs::read_to_string(dir.join("matrices.json")).unwrap();
    assert!(json.contains("\"status\": \"R_not_P_matrix\""));
    assert!(String::from_utf8_lossy(&out.stdout).contains("VIOLATED"));
    let out = run(&["analyze", s(&cfg), "--out", s(&dir), "--strict"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_tags_policies_outside_the_theory() {
    let dir = scratch("optimize-rs");
    let out = run(&["optimize", s(&example("rybko_stolyar.toml")), "--out", s(&dir)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("ranking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("\"{(4,1),(2,3)}\",R_not_P_matrix,"));
}

#[test]
fn single_policy_network_ranks_one_row() {
    let dir = scratch("optimize-mm1");
    let out = run(&["optimize", s(&example("mm1.toml")), "--out", s(&dir)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("ranking.csv")).unwrap();
    assert_eq!(csv.lines().collect::<Vec<_>>(), vec!["policy,estimate_or_tag,group_id", "{(1)},4,1"]);
}

#[test]
fn oversized_enumeration_hits_the_guard() {
    let dir = scratch("guard");
    let out = run(&["optimize", s(&example("reentrant_rho_0.96_0.99.toml")), "--out", s(&dir), "--max-policies", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("12 policies"));
}

#[test]
fn simulation_outputs_are_reproducible() {
    let a = scratch("sim-a");
    let b = scratch("sim-b");
    let cfg = example("reentrant_rho_0.90_0.95.toml");
    for dir in [&a, &b] {
        let out = run(&["simulate", s(&cfg), "--out", s(dir), "--arrivals", "3e4", "--reps", "2", "--seed", "7", "--joint", "1,4"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut csvs = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_str().unwrap().ends_with(".csv") {
            csvs += 1;
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
    }
    assert!(csvs >= 9);
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.contains("\niqr_1_4,"));
    assert!(a.join("joint_1_4.csv").exists());
}

#[test]
fn idle_check_is_exact_for_clockwork_queue() {
    let dir = scratch("clockwork");
    let cfg = write_variant(
        &dir,
        "mm1.toml",
        "arrival = { family = \"exponential\" }\nservice = { family = \"exponential\" }",
        "arrival = { family = \"deterministic\" }\nservice = { family = \"deterministic\" }",
    );
    let out = run(&["idle-check", s(&cfg), "--out", s(&dir), "--arrivals", "1000", "--reps", "2"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("idle_check.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "1,0.2,0.2,0,true");
}
