use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stws(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stws"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("failed to launch stws")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn run_writes_study_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = stws(&["run", "--problem", "convdiff", "--jmax", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let study = csv_rows(&dir.path().join("study.csv"));
    assert_eq!(&study[0][..4], ["j", "px", "pt", "dof"]);
    assert_eq!(study.len(), 3);
    let status = study[0].iter().position(|c| c == "status").unwrap();
    assert!(study[1..].iter().all(|r| r[status] == "converged"));

    let solution = csv_rows(&dir.path().join("solution.csv"));
    assert_eq!(solution[0], ["x", "t", "value"]);
    // level 1 with (6,4): 25 × 17 nodes
    assert_eq!(solution.len() - 1, 25 * 17);
}

#[test]
fn unconverged_solve_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = stws(
        &["run", "--jmax", "1", "--mode", "baseline", "--max-restarts", "1", "--m-factor", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("study.csv").exists());
}

#[test]
fn export_matrices_reports_published_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = stws(&["export-matrices", "--j", "2"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("A: 47x47 nnz 403"), "{text}");
    assert!(text.contains("B: 32x32 nnz 126"), "{text}");
    assert!(text.contains("nnz 18677"), "{text}");
    let header = fs::read_to_string(dir.path().join("K.mtx")).unwrap();
    assert!(header.starts_with("%%MatrixMarket matrix coordinate real general"));
}

#[test]
fn spectrum_csv_has_one_row_per_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let out = stws(&["spectrum", "--j", "0", "--problem", "convdiff"], dir.path());
    assert!(out.status.success());
    let a = csv_rows(&dir.path().join("spectrum_A.csv"));
    assert_eq!(a[0], ["re", "im"]);
    assert_eq!(a.len() - 1, 11);
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = stws(&["study", "--orders", "6;4", "--levels", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = stws(&["run", "--jmax", "0", "--pt", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
