use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semiflow_cli::{parse_scenario, run_scenario, run_sweep, SweepAxis};
use tempfile::TempDir;

const BASE: &str = r#"name = "small"

[space]
kind = "interval"
a = -2.0
b = 2.0
points = 4001

[potential]
kind = "quadratic"
scale = 0.5

[flow]
tau = 0.02
horizon = 1.0
kappa = 1.0
starts = [1.0, -0.5]
atoms = [1.0, 0.5]
weights = [0.5, 0.5]
"#;

fn semiflow(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiflow"))
        .args(args)
        .env("SEMIFLOW_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn scenario_file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn check(name: &str, tolerance: f64) -> String {
    format!("\n[[checks]]\nname = \"{name}\"\ntolerance = {tolerance:?}\n")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_key_exits_2_with_line_and_key() {
    let dir = TempDir::new().unwrap();
    let body = BASE.replace("horizon = 1.0", "horizon = 1.0\nhorizn = 2.0");
    let path = scenario_file(&dir, "bad.toml", &body);
    let out = semiflow(&["verify", "suite", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("horizn") && msg.contains("line 16"), "{msg}");
}

#[test]
fn unknown_check_name_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = scenario_file(&dir, "bad.toml", &format!("{BASE}{}", check("evi_sideways", 0.1)));
    let out = semiflow(&["verify", "suite", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("evi_sideways"));
}

#[test]
fn zero_tolerance_on_a_discretized_check_fails() {
    let dir = TempDir::new().unwrap();
    let path = scenario_file(&dir, "s.toml", &format!("{BASE}{}", check("evi_differential", 0.0)));
    let out = semiflow(&["--quiet", "verify", "suite", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(dir.path().join("small/reports.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"), "{csv}");
}

#[test]
fn exact_checks_pass_at_zero_tolerance() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{BASE}{}{}{}{}",
        check("dirac_preservation", 0.0),
        check("monotonicity", 0.0),
        check("additivity", 0.0),
        check("pushforward", 0.0)
    );
    let path = scenario_file(&dir, "s.toml", &body);
    let out = semiflow(&["verify", "suite", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 4, "{stdout}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{BASE}{}{}{}",
        check("evi_differential", 0.2),
        check("convexity", 0.0),
        check("variance_decay", 0.01)
    );
    let path = scenario_file(&dir, "s.toml", &body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = semiflow(
            &["--out", out.to_str().unwrap(), "verify", "suite", path.to_str().unwrap()],
            dir.path(),
        );
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"reports.json".to_owned()) && names.contains(&"point_flow_1.csv".to_owned()));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_overrides_the_scenario_seed() {
    let dir = TempDir::new().unwrap();
    let body = format!("{BASE}\n[[checks]]\nname = \"convexity\"\ntolerance = 0.0\nbudget = 1000\n");
    let path = scenario_file(&dir, "s.toml", &body);
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let res = semiflow(
            &["--seed", seed, "--out", out.to_str().unwrap(), "verify", "suite", path.to_str().unwrap()],
            dir.path(),
        );
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        fs::read_to_string(out.join("reports.json")).unwrap()
    };
    let (a, b, c) = (run("1", "a"), run("1", "b"), run("2", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.contains("\"seed\": 1"));
}

#[test]
fn flow_run_writes_trajectories() {
    let dir = TempDir::new().unwrap();
    let path = scenario_file(&dir, "s.toml", BASE);
    let out = semiflow(&["flow", "run", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("small/point_flow_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,point_index,coord,V"));
    assert_eq!(csv.lines().count(), 1 + 51);
    let summary = fs::read_to_string(dir.path().join("small/measure_summary.csv")).unwrap();
    assert!(summary.starts_with("t,energy,variance\n"));
}

#[test]
fn singleton_tau_sweep_matches_the_suite() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{BASE}{}{}\n[sweep]\ntau_list = [0.02]\n",
        check("evi_differential", 0.05),
        check("contraction", 0.02)
    );
    let path = scenario_file(&dir, "s.toml", &body);
    let scenario = parse_scenario(&path).unwrap();
    let suite = run_scenario(&scenario, None, None).unwrap();
    let table = run_sweep(&scenario, SweepAxis::TauList, None).unwrap();
    assert_eq!(table.rows.len(), 1);
    let residuals: Vec<f64> = suite.outcomes.iter().map(|o| o.report.max_residual).collect();
    assert_eq!(table.rows[0][1..], residuals[..]);
    assert_eq!(table.row_pass, vec![suite.all_passed()]);
}

#[test]
fn tau_sweep_residuals_shrink_with_tau() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{BASE}{}\n[sweep]\ntau_list = [0.08, 0.04, 0.02]\n[sweep.monotone]\ncolumn = \"evi_differential\"\norder = \"strictly_decreasing\"\n",
        check("evi_differential", 0.05)
    );
    let path = scenario_file(&dir, "s.toml", &body);
    let out = semiflow(&["sweep", "run", path.to_str().unwrap(), "--axis", "tau_list"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("small/sweep_tau_list.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("tau,evi_differential,all_pass"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn failed_monotone_assertion_exits_1() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{BASE}{}\n[sweep]\ntau_list = [0.02, 0.08]\n[sweep.monotone]\ncolumn = \"evi_differential\"\norder = \"non_increasing\"\n",
        check("evi_differential", 0.05)
    );
    let path = scenario_file(&dir, "s.toml", &body);
    let out = semiflow(&["sweep", "run", path.to_str().unwrap(), "--axis", "tau_list"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn n_sweep_variance_strictly_decreases() {
    let dir = TempDir::new().unwrap();
    let body = r#"name = "reg"
[space]
kind = "interval"
a = -2.0
b = 2.0
points = 41
[potential]
kind = "quadratic"
[flow]
tau = 0.1
horizon = 0.3
atoms = [1.0]
weights = [1.0]
n_list = [1.0, 10.0, 100.0]
[sweep.monotone]
column = "final_variance"
order = "strictly_decreasing"
"#;
    let path = scenario_file(&dir, "reg.toml", body);
    let scenario = parse_scenario(&path).unwrap();
    let table = run_sweep(&scenario, SweepAxis::NList, None).unwrap();
    assert_eq!(table.header, ["n", "kappa_n", "final_energy", "final_variance"]);
    assert_eq!(table.monotone, Some(true));
    let v = table.column("final_variance").unwrap();
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
}

#[test]
fn h_sweep_needs_a_gridded_space() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("g.edges"), "0 1 1.0\n1 2 1.0\n").unwrap();
    fs::write(dir.path().join("v.csv"), "0,0.0\n1,1.0\n2,2.0\n").unwrap();
    let body = "name = \"g\"\n[space]\nkind = \"graph\"\npath = \"g.edges\"\n[potential]\nkind = \"file\"\npath = \"v.csv\"\n[flow]\ntau = 0.5\nhorizon = 1.0\nstart_indices = [2]\n[sweep]\nh_list = [0.1]\n";
    let path = scenario_file(&dir, "g.toml", body);
    let out = semiflow(&["sweep", "run", path.to_str().unwrap(), "--axis", "h_list"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("interval or circle"));
}

#[test]
fn space_validate_reports_graphs() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.edges");
    fs::write(&good, "0 1 1.0\n1 2 2.0\n0 2 2.5\n").unwrap();
    let out = semiflow(&["space", "validate", good.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));

    let bad = dir.path().join("bad.edges");
    fs::write(&bad, "0 1 1.0\n1 2 x\n").unwrap();
    let out = semiflow(&["space", "validate", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn shipped_scenarios_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
