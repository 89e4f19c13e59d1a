//! End-to-end runs of the installed binary against the bundled fixtures.

use std::path::PathBuf;
use std::process::Command;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_nccauchy"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("no signal"),
        stdout: String::from_utf8(out.stdout).expect("utf8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf8 stderr"),
    }
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

fn temp_path(name: &str) -> String {
    let dir = std::env::temp_dir().join(format!("nccauchy-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn eval_point_mass_at_i_gives_i() {
    let r = run(&[
        "eval",
        "--model",
        &fixture("classical_point_mass.json"),
        "--point",
        &fixture("point_scalar_i.json"),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let point = nccauchy::io::point_from_str(&r.stdout).unwrap();
    let value = point.flat()[(0, 0)];
    assert!((value - nccauchy::linalg::IM).norm() < 1e-12);
}

#[test]
fn eval_counterexample_matches_closed_form() {
    let out = temp_path("eval_ce.json");
    let r = run(&[
        "eval",
        "--model",
        &fixture("counterexample_model.json"),
        "--point",
        &fixture("point_pair_ii.json"),
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let point = nccauchy::io::point_from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let (f1, f2) =
        nccauchy::cauchy::counterexample_closed_form(nccauchy::linalg::IM, nccauchy::linalg::IM)
            .unwrap();
    let cell = point.grid_cell(0, 0);
    assert!((cell.data()[(0, 0)] - f1).norm() < 1e-12);
    assert!((cell.data()[(1, 1)] - f2).norm() < 1e-12);
}

#[test]
fn eval_rejects_truncated_json() {
    let text = std::fs::read_to_string(fixture("counterexample_model.json")).unwrap();
    let broken = temp_path("truncated_model.json");
    std::fs::write(&broken, &text[..text.len() / 2]).unwrap();
    let r = run(&[
        "eval",
        "--model",
        &broken,
        "--point",
        &fixture("point_pair_ii.json"),
    ]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
}

#[test]
fn check_pick_passes_on_the_counterexample() {
    let r = run(&[
        "check-pick",
        "--model",
        &fixture("counterexample_model.json"),
        "--trials",
        "40",
    ]);
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("\"suite\": \"check-pick\""));
    assert!(r.stdout.contains("\"status\": \"pass\""));
}

#[test]
fn check_pick_rejects_zero_trials() {
    let r = run(&[
        "check-pick",
        "--model",
        &fixture("counterexample_model.json"),
        "--trials",
        "0",
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn reports_are_byte_deterministic() {
    let args = [
        "check-pick",
        "--model",
        &fixture("classical_two_atom.json"),
        "--trials",
        "20",
        "--seed",
        "7",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn asymptotics_counterexample_is_cauchy_like_with_quadratic_slope() {
    let csv = temp_path("asym.csv");
    let r = run(&[
        "asymptotics",
        "--model",
        &fixture("counterexample_model.json"),
        "--csv",
        &csv,
    ]);
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("cauchy_like"));
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let witness = report["checks"][0]["witness"].as_str().unwrap();
    let slope: f64 = witness
        .split(',')
        .next()
        .unwrap()
        .trim_start_matches("slope ")
        .parse()
        .unwrap();
    assert!((slope + 2.0).abs() < 0.3, "slope {slope}");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("s,residual\n"));
    assert_eq!(table.trim_end().lines().count(), 10);
}

#[test]
fn asymptotics_fails_on_the_nonhomomorphic_fixture() {
    let r = run(&[
        "asymptotics",
        "--model",
        &fixture("nonhomomorphic_model.json"),
    ]);
    assert_eq!(r.code, 1, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("\"status\": \"fail\""));
}

#[test]
fn asymptotics_rejects_inverted_scale_range() {
    let r = run(&[
        "asymptotics",
        "--model",
        &fixture("counterexample_model.json"),
        "--s-min",
        "1e6",
        "--s-max",
        "1e2",
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn extract_classical_data_is_cauchy() {
    let out = temp_path("nev.json");
    let r = run(&[
        "extract",
        "--data",
        &fixture("herglotz_two_atom.json"),
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("\"witness\": \"is_cauchy true\""));
    let nev = nccauchy::io::nev_from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(nev.is_cauchy);
}

#[test]
fn extract_refuses_overlapping_vessel() {
    let r = run(&["extract", "--data", &fixture("herglotz_overlap.json")]);
    assert_eq!(r.code, 1, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stderr.contains("liminf condition violated"));
}

#[test]
fn counterexample_suite_passes() {
    let r = run(&["counterexample"]);
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("witness-nonpolynomial"));
    assert!(r.stdout.contains("\"status\": \"pass\""));
}

#[test]
fn moments_pass_on_counterexample_and_fail_on_fixture() {
    let good = run(&[
        "moments",
        "--model",
        &fixture("counterexample_model.json"),
        "--k",
        "5",
    ]);
    assert_eq!(good.code, 0, "stdout: {}\nstderr: {}", good.stdout, good.stderr);
    let bad = run(&[
        "moments",
        "--model",
        &fixture("nonhomomorphic_model.json"),
        "--k",
        "3",
    ]);
    assert_eq!(bad.code, 1, "stdout: {}\nstderr: {}", bad.stdout, bad.stderr);
}

#[test]
fn tomiyama_separates_the_two_bundled_models() {
    let good = run(&[
        "tomiyama",
        "--model",
        &fixture("counterexample_model.json"),
    ]);
    assert_eq!(good.code, 0, "stdout: {}\nstderr: {}", good.stdout, good.stderr);
    let bad = run(&[
        "tomiyama",
        "--model",
        &fixture("nonhomomorphic_model.json"),
    ]);
    assert_eq!(bad.code, 1, "stdout: {}\nstderr: {}", bad.stdout, bad.stderr);
}

#[test]
fn ncrat_evaluates_from_manifest() {
    let vars = temp_path("vars.json");
    std::fs::write(&vars, r#"{"vars":[[[[0,1]]]]}"#).unwrap();
    let r = run(&["ncrat", "--expr", "-inv(Z1)", "--vars-file", &vars]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let value = nccauchy::io::matrix_from_str(&r.stdout).unwrap();
    assert!((value[(0, 0)] - nccauchy::linalg::IM).norm() < 1e-15);
}

#[test]
fn ncrat_reports_singular_inverse_as_violation() {
    let vars = temp_path("vars_one.json");
    std::fs::write(&vars, r#"[[[[1,0]]]]"#).unwrap();
    let r = run(&["ncrat", "--expr", "inv(Z1 - Z1)", "--vars-file", &vars]);
    assert_eq!(r.code, 1, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("singular inverse"));
}

#[test]
fn ncrat_rejects_syntax_errors_and_missing_expressions() {
    let r = run(&["ncrat", "--expr", "inv("]);
    assert_eq!(r.code, 2);
    let r = run(&["ncrat"]);
    assert_eq!(r.code, 2);
}
