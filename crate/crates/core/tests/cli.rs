use std::fs;
use std::io::BufReader;
use std::process::Command;

use noether_fem::mesh::{read_mesh, BoundaryKind};

fn noether(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes() {
    assert_eq!(noether(&["--cmd", "verify"]).status.code(), Some(0));
    assert_eq!(noether(&["--cmd", "verify", "--flip-sign"]).status.code(), Some(2));
    assert_eq!(noether(&["--cmd", "convergence", "--k", "4"]).status.code(), Some(1));
    assert_eq!(noether(&["--cmd", "estimator", "--p", "3"]).status.code(), Some(1));
}

#[test]
fn verify_output_lists_every_property() {
    let out = noether(&["--cmd", "verify", "--seed", "11"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("property,passed,value,tolerance"));
    let rows: Vec<_> = lines.collect();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("true")));
    assert!(rows.iter().any(|r| r.starts_with("conservation_residual,")));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = noether(&[
            "--cmd", "estimator", "--k", "2", "--levels", "2", "--seed", seed, "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        fs::read(path).unwrap()
    };
    let a = run("a.csv", "5");
    assert_eq!(a, run("b.csv", "5"));
    assert_ne!(a, run("c.csv", "6"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("dofs,l2_err,l2_eoc,h1_err,h1_eoc,E,E_eoc,N"));
}

#[test]
fn adapt_writes_trace_and_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = noether(&["--cmd", "adapt", "--target-e", "0.3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(&path).unwrap();
    assert!(trace.starts_with("round,dofs,E,N,lp_err,w1p_err"));
    let last: Vec<&str> = trace.lines().last().unwrap().split(',').collect();
    assert!(last[2].parse::<f64>().unwrap() <= 0.3);

    let file = fs::File::open(path.with_extension("mesh")).unwrap();
    let mesh = read_mesh(BufReader::new(file), BoundaryKind::Polygon).unwrap();
    mesh.check_conformity().unwrap();
    assert_eq!(mesh.num_triangles().to_string(), last[6]);
}

#[test]
fn convergence_reports_rates() {
    let out = noether(&["--cmd", "convergence", "--p", "2", "--levels", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let w1p_eoc: f64 = rows[2][4].parse().unwrap();
    assert!((0.9..=1.3).contains(&w1p_eoc), "{w1p_eoc}");
}
