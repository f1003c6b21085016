use std::path::Path;
use std::process::{Command, Output};

use crm_cli::trace_io::parse_trace;
use crm_core::problems::builtin;
use crm_core::{Method, StopRule, Tolerances};

fn crm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crm")).args(args).output().expect("spawn crm")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_to(dir: &Path, file: &str, args: &[&str]) -> (Output, std::path::PathBuf) {
    let path = dir.join(file);
    let mut full = vec!["run"];
    full.extend_from_slice(args);
    full.extend(["--out", path.to_str().unwrap()]);
    (crm(&full), path)
}

#[test]
fn crm_on_sphere_line_succeeds_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_to(dir.path(), "t.csv", &["--problem", "sphere-line", "--method", "crm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("stop=residual-met"), "{summary}");
    let t = parse_trace(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(t.rows.len() - 1 <= 10);
    assert!(t.rows.last().unwrap().residual <= 1e-10);
}

#[test]
fn newton_on_signed_sqrt_reports_a_cycle() {
    let o = crm(&["run", "--problem", "signed-sqrt", "--method", "newton", "--x0", "0.25,0"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stdout).unwrap().contains("cycle(2)"));
}

#[test]
fn iteration_cap_exits_2() {
    let o = crm(&["run", "--problem", "sphere-line", "--method", "dr", "--max-iter", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn first_crm_step_on_parabola_from_three() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_to(dir.path(), "p.csv", &["--problem", "parabola", "--method", "crm", "--x0", "3,0"]);
    assert_eq!(code(&o), 0);
    let t = parse_trace(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(t.rows[0].coords, vec![3.0, 0.0]);
    let x1 = &t.rows[1].coords;
    assert!((x1[0] - 0.5).abs() <= 1e-12 && x1[1].abs() <= 1e-12, "{x1:?}");
    assert_eq!(t.rows[1].used_circumcenter, Some(true));
}

#[test]
fn csv_trace_matches_in_process_solve_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_to(dir.path(), "e.csv", &["--problem", "ellipse-line", "--method", "crm"]);
    assert_eq!(code(&o), 0);
    let file = parse_trace(&std::fs::read_to_string(path).unwrap()).unwrap();
    let p = builtin("ellipse-line").unwrap();
    let t = p.solve(Method::Crm, None, &StopRule::default(), &Tolerances::default()).unwrap();
    assert_eq!(file.problem.as_ref(), Some(&p));
    assert_eq!(file.rows.len(), t.iterates.len());
    for (row, x) in file.rows.iter().zip(&t.iterates) {
        for (a, b) in row.coords.iter().zip(x.coords()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    let dist = t.dist_to_solution.unwrap();
    for (row, d) in file.rows.iter().zip(dist) {
        assert_eq!(row.dist_to_solution.map(f64::to_bits), Some(d.to_bits()));
    }
}

#[test]
fn problem_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pf = dir.path().join("problem.json");
    std::fs::write(&pf, builtin("psphere-3").unwrap().to_json()).unwrap();
    let o = crm(&["run", "--problem-file", pf.to_str().unwrap(), "--method", "dr"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&pf, "{\"name\": 1}").unwrap();
    assert_eq!(code(&crm(&["run", "--problem-file", pf.to_str().unwrap(), "--method", "dr"])), 64);
}

#[test]
fn compare_table_shape_and_exit_codes() {
    let o = crm(&["compare", "--problem", "sphere-line", "--methods", "dr,crm,newton"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,iterations,final_residual,rate_class,rate_constant,wall_time_ms");
    assert_eq!(lines.len(), 4);

    assert_eq!(code(&crm(&["compare", "--problem", "no-such-problem"])), 64);
    assert_eq!(code(&crm(&["compare", "--problem", "parabola", "--methods", "crm,warp"])), 64);
}

#[test]
fn compare_from_a_feasible_start_is_finite_for_all_methods() {
    let o = crm(&[
        "compare",
        "--problem",
        "parabola",
        "--methods",
        "altproj,crm,dr,newton,subgrad",
        "--x0",
        "0,0",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r["iterations"], 0, "{r}");
        assert_eq!(r["rate"]["class"], "finite", "{r}");
    }
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(dir.path(), "dr.csv", &["--problem", "sphere-line", "--method", "dr"]);
    let (_, b) = run_to(dir.path(), "crm.json", &["--problem", "sphere-line", "--method", "crm", "--format", "json"]);
    let svg1 = dir.path().join("1.svg");
    let svg2 = dir.path().join("2.svg");
    for out in [&svg1, &svg2] {
        let o = crm(&["plot", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let s1 = std::fs::read(&svg1).unwrap();
    assert_eq!(s1, std::fs::read(&svg2).unwrap());
    assert!(String::from_utf8(s1).unwrap().starts_with("<svg"));
}

#[test]
fn plot_rejects_empty_and_malformed_traces() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "# method: dr\niter,x0,x1,residual,dist_to_solution,case_tag,used_circumcenter\n").unwrap();
    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "not a trace").unwrap();
    let out = dir.path().join("o.svg");
    for f in [&empty, &junk] {
        let o = crm(&["plot", f.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 65);
    }
    assert!(!out.exists());
}
