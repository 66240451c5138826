use std::path::Path;
use std::process::{Command, Output};

use fpstar::builtin_example;

fn fpstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpstar")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_example(dir: &Path, id: u32) -> String {
    let path = dir.join(format!("example{id}.json"));
    std::fs::write(&path, builtin_example(id).unwrap().to_json().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn example_csv_is_deterministic() {
    let a = fpstar(&["example", "--id", "1"]);
    let b = fpstar(&["example", "--id", "1"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let csv = stdout(&a);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "J1,J2,M1,M2,edge,e_rho,e_u,sigma,iterations,converged");
    assert_eq!(lines.count(), 3);
}

#[test]
fn example_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = fpstar(&["example", "--id", "1", "--J1", "1", "--J2", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], &["1", "1", "4", "4", "1"]);
    // 17 significant digits in scientific notation.
    assert!(row[5].contains('e') && row[5].split('e').next().unwrap().len() >= 18);
}

#[test]
fn invalid_inputs_exit_with_three() {
    assert_eq!(code(&fpstar(&["example", "--id", "9"])), 3);
    assert_eq!(code(&fpstar(&["example", "--id", "1", "--omega", "2"])), 3);
    assert_eq!(code(&fpstar(&["example", "--id", "1", "--M1", "0"])), 3);
    assert_eq!(code(&fpstar(&["solve", "--problem", "/nonexistent/p.json"])), 3);
    assert_eq!(code(&fpstar(&["frobnicate"])), 3);
    assert_eq!(code(&fpstar(&["table", "--id", "1", "--levels", ""])), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"edges": [], "T": 1.0, "data": {"rho0": [], "rho_d": [], "rho_T": [], "f": []}}"#).unwrap();
    assert_eq!(code(&fpstar(&["solve", "--problem", bad.to_str().unwrap()])), 3);
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(&fpstar(&["solve", "--problem", bad.to_str().unwrap()])), 3);
}

#[test]
fn nonconvergence_exits_with_two() {
    let o = fpstar(&["example", "--id", "2", "--max-sweeps", "2"]);
    assert_eq!(code(&o), 2);
    let o = fpstar(&["example", "--id", "2", "--solver", "newton", "--max-iter", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_reads_a_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path(), 1);
    let from_file = fpstar(&["solve", "--problem", &path]);
    let builtin = fpstar(&["example", "--id", "1"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, builtin.stdout);
}

#[test]
fn multistart_lists_distinct_costs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path(), 2);
    let o = fpstar(&["solve", "--problem", &path, "--multistart", "3", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("distinct converged costs: 1"), "{err}");
    assert_eq!(err.matches("start ").count(), 3);
    assert_eq!(code(&fpstar(&["solve", "--problem", &path, "--multistart", "0"])), 3);
}

#[test]
fn table_has_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = fpstar(&["table", "--id", "1", "--levels", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "J1,J2,e_rho12,e_rho3,e_u12,e_u3,sigma,iterations,wall_time_s");
    assert_eq!(lines.len(), 5);
    let pairs: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(pairs, [("1", "1"), ("1", "2"), ("2", "1"), ("2", "2")]);
}

#[test]
fn profiles_are_written_per_edge_and_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prof");
    let o = fpstar(&["profiles", "--id", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 6);
    let f = out.join("profile_edge1_t0.075.csv");
    let text = std::fs::read_to_string(f).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,rho_approx,rho_exact,u_approx");
    assert_eq!(lines.len(), 202);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() <= 1e-7);
    }
    let o = fpstar(&["profiles", "--id", "1", "--times", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_basis_suite_passes() {
    let o = fpstar(&["verify", "--suite", "basis"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 9);
    assert!(!text.contains("[FAIL]"));
    assert_eq!(code(&fpstar(&["verify", "--suite", "nothing"])), 3);
}

#[test]
fn help_exits_cleanly() {
    let o = fpstar(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["solve", "example", "table", "verify", "profiles"] {
        assert!(stdout(&o).contains(sub));
    }
}
