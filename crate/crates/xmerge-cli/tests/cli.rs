use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_xmerge");

fn xmerge(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("XMERGE_THREADS");
    if let Some(t) = threads {
        cmd.env("XMERGE_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulated two-study input in `dir/sim`.
fn simulate(dir: &Path, genes: &str) -> PathBuf {
    let sim = dir.join("sim");
    let out = xmerge(
        &[
            "simulate",
            "--out",
            s(&sim),
            "--genes",
            genes,
            "--differential",
            "30",
            "--seed",
            "5",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    sim
}

fn merge_args(sim: &Path, out: &Path) -> Vec<String> {
    [
        "merge",
        "-i",
        s(&sim.join("distorted_1.tsv")),
        "-i",
        s(&sim.join("distorted_2.tsv")),
        "--study-id",
        "a",
        "--study-id",
        "b",
        "--labels",
        s(&sim.join("labels.tsv")),
        "--out",
        s(out),
    ]
    .iter()
    .map(|x| x.to_string())
    .collect()
}

fn run(args: &[String], threads: Option<&str>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    xmerge(&refs, threads)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn two_study_merge_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "400");
    let out = dir.path().join("merged");
    let o = run(&merge_args(&sim, &out), Some("2"));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "adjusted_a.tsv",
        "adjusted_b.tsv",
        "merged.tsv",
        "manifest.txt",
        "trace.tsv",
        "genes.tsv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let merged = fs::read_to_string(out.join("merged.tsv")).unwrap();
    let header: Vec<&str> = merged.lines().next().unwrap().split('\t').collect();
    assert_eq!(header.len(), 1 + 42);
    assert_eq!(merged.lines().count(), 401);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for key in [
        "lambda = gcv",
        "max_outer_iters = 30",
        "study_id = a,b",
        "damping = true",
    ] {
        assert!(manifest.contains(key), "manifest lacks '{key}'");
    }
    assert!(!manifest.contains("threads"));
}

#[test]
fn malformed_row_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "gene\tx\ty\ng1\t1\t2\ng2\t1\t2\ng3\t4\n").unwrap();
    let o = xmerge(
        &["merge", "-i", s(&bad), "--out", s(&dir.path().join("o"))],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.tsv:4"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(xmerge(&["merge"], None).status.code(), Some(1));
    assert_eq!(xmerge(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(
        xmerge(&["merge", "--lambda", "-3", "-i", "x.tsv"], None)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(xmerge(&["--help"], None).status.code(), Some(0));
    assert_eq!(
        xmerge(&["merge", "-i", "x.tsv"], Some("zero"))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = xmerge(&["merge", "-i", s(&dir.path().join("absent.tsv"))], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "300");
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# test\nmax-outer-iters = 2\nlambda_reg = 0.01\n").unwrap();
    let out = dir.path().join("o");
    let mut args = merge_args(&sim, &out);
    args.extend(["--config", s(&conf), "--lambda-reg", "0.02"].map(String::from));
    let o = run(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("max_outer_iters = 2"));
    assert!(manifest.contains("lambda_reg = 0.02"));

    fs::write(&conf, "no_such_key = 1\n").unwrap();
    let mut args = merge_args(&sim, &out);
    args.extend(["--config", s(&conf)].map(String::from));
    let o = run(&args, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.conf:1"));
}

#[test]
fn manifest_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "300");
    let first = dir.path().join("first");
    assert!(run(&merge_args(&sim, &first), None).status.success());
    let second = dir.path().join("second");
    let o = xmerge(
        &[
            "merge",
            "--config",
            s(&first.join("manifest.txt")),
            "--out",
            s(&second),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(tree(&first), tree(&second));
}

#[test]
fn merge_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "500");
    let one = dir.path().join("one");
    let eight = dir.path().join("eight");
    assert!(run(&merge_args(&sim, &one), Some("1")).status.success());
    let mut args = merge_args(&sim, &eight);
    args.extend(["--threads", "8"].map(String::from));
    assert!(run(&args, None).status.success());
    assert_eq!(tree(&one), tree(&eight));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&dir.path().join("a"), "200");
    let b = simulate(&dir.path().join("b"), "200");
    assert_eq!(tree(&a), tree(&b));
    let meta = fs::read_to_string(a.join("metadata.txt")).unwrap();
    for key in [
        "power_exponents = 0.7,1.4",
        "seed = 5",
        "tau2_true_1 = ",
        "tau2_true_2 = ",
        "rng = ChaCha8",
    ] {
        assert!(meta.contains(key), "metadata lacks '{key}'");
    }
}

#[test]
fn simulate_from_input_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let base = simulate(dir.path(), "200");
    let out = dir.path().join("re");
    let o = xmerge(
        &[
            "simulate",
            "--input",
            s(&base.join("base.tsv")),
            "--labels",
            s(&base.join("labels.tsv")),
            "--exponents",
            "1,2",
            "--out",
            s(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("base.tsv").exists());
    let meta = fs::read_to_string(out.join("metadata.txt")).unwrap();
    assert!(meta.contains("power_exponents = 1,2"));
}

#[test]
fn diff_and_pca_commands() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "300");
    let out = dir.path().join("d");
    let labels = sim.join("labels.tsv");
    let o = xmerge(
        &[
            "diff",
            "-i",
            &format!("base={}", s(&sim.join("base.tsv"))),
            "-i",
            &format!("one={}", s(&sim.join("distorted_1.tsv"))),
            "-i",
            &format!("two={}", s(&sim.join("distorted_2.tsv"))),
            "--intersect",
            "one+two",
            "--labels",
            s(&labels),
            "--filter",
            "0.1",
            "--out",
            s(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("callsets.tsv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("base\tone+two\t")));
    let diff = fs::read_to_string(out.join("diff_one.tsv")).unwrap();
    assert_eq!(diff.lines().count(), 1 + 270);

    let p = dir.path().join("p");
    let o = xmerge(
        &[
            "pca",
            "-i",
            s(&sim.join("distorted_1.tsv")),
            "-i",
            s(&sim.join("distorted_2.tsv")),
            "--labels",
            s(&labels),
            "--out",
            s(&p),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pca = fs::read_to_string(p.join("pca.tsv")).unwrap();
    assert_eq!(pca.lines().count(), 1 + 42);
    assert!(pca.lines().nth(1).unwrap().contains("distorted_1"));
}

#[test]
fn diff_needs_labels_for_every_array() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "100");
    let partial = dir.path().join("l.tsv");
    let text = fs::read_to_string(sim.join("labels.tsv")).unwrap();
    let kept: Vec<&str> = text.lines().take(10).collect();
    fs::write(&partial, kept.join("\n") + "\n").unwrap();
    let o = xmerge(
        &[
            "diff",
            "-i",
            &format!("a={}", s(&sim.join("base.tsv"))),
            "--labels",
            s(&partial),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}
