use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grcca"))
        .args(args)
        .env_remove("GRCCA_THREADS")
        .output()
        .unwrap()
}

fn demo(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(file)
        .to_string_lossy()
        .into_owned()
}

fn path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn csv_rows(file: &Path) -> Vec<String> {
    fs::read_to_string(file).unwrap().lines().skip(1).map(str::to_owned).collect()
}

fn write_matrix(file: &Path, header: &str, rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) {
    let mut s = String::from(header);
    s.push('\n');
    for i in 0..rows {
        let row: Vec<String> = (0..cols).map(|j| f(i, j).to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    fs::write(file, s).unwrap();
}

#[test]
fn fit_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fit");
    let o = bin(&["fit", "--x", &demo("demo_x.csv"), "--y", &demo("demo_y.csv"), "--method", "rcca", "--lambda1", "1", "--out", &path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "model.json", "summary.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert!(model.is_object());
}

#[test]
fn grcca_model_records_both_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = bin(&[
        "fit", "--x", &demo("demo_x.csv"), "--y", &demo("demo_y.csv"), "--method", "grcca",
        "--groups-x", &demo("demo_groups.csv"), "--lambda1", "100", "--mu1", "1", "--out", &path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("model.json")).unwrap();
    assert!(text.contains("\"lambda\": 100") || text.contains("\"lambda\":100"), "{text}");
    assert!(text.contains("\"mu\": 1") || text.contains("\"mu\":1"), "{text}");
}

#[test]
fn unidentifiable_partial_penalty_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (x, y) = (tmp.path().join("x.csv"), tmp.path().join("y.csv"));
    let header: Vec<String> = (1..=8).map(|j| format!("f{j}")).collect();
    write_matrix(&x, &header.join(","), 5, 8, |i, j| ((i * 8 + j) as f64 * 0.37).sin());
    write_matrix(&y, "a,b", 5, 2, |i, j| ((i * 2 + j) as f64 * 1.3).cos());
    let o = bin(&[
        "fit", "--x", &path(&x), "--y", &path(&y), "--method", "prcca", "--unpenalized-x", "1,2,3,4,5",
        "--lambda1", "1", "--out", &path(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(&tmp.path().join("o"));
    assert_eq!(bin(&["fit", "--method", "rcca"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    let o = bin(&["fit", "--x", "/nonexistent.csv", "--y", &demo("demo_y.csv"), "--method", "rcca", "--lambda1", "1", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["fit", "--x", &demo("demo_x.csv"), "--y", &demo("demo_y.csv"), "--method", "rcca", "--lambda1", "-1", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cv_summary_has_one_row_per_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cv");
    let o = bin(&[
        "cv", "--x", &demo("demo_x.csv"), "--y", &demo("demo_y.csv"), "--method", "rcca",
        "--grid-lambda1", "1e-3:1e5:log10", "--out", &path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("cv_summary.csv")).len(), 9);
    assert_eq!(csv_rows(&out.join("cv_curves.csv")).len(), 90);
}

#[test]
fn ncv_reports_every_outer_fold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ncv");
    let o = bin(&[
        "ncv", "--x", &demo("demo_x.csv"), "--y", &demo("demo_y.csv"), "--method", "rcca",
        "--grid-lambda1", "1e-1:1e3:log10", "--outer-folds", "11", "--out", &path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("ncv_outer.csv")).len(), 11);
}

#[test]
fn simulate_is_reproducible_from_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = bin(&["simulate", "--reps", "1", "--seed", "7", "--out", &path(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("experiment.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn screen_marks_selected_features() {
    let tmp = tempfile::tempdir().unwrap();
    let x = tmp.path().join("x.csv");
    fs::write(&x, "a,b\n1,0\n2,1\n3,-1\n").unwrap();
    let out = tmp.path().join("s");
    let o = bin(&["screen", "--x", &path(&x), "--threshold", "1.5", "--out", &path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("cohens_d.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("a,2") && rows[0].ends_with("true"), "{rows:?}");
    assert!(rows[1].ends_with("false"), "{rows:?}");
}
