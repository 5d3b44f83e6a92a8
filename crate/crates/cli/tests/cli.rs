use std::path::Path;
use std::process::{Command, Output};

const KEYS: &[&str] = &[
    "estimator",
    "beta",
    "gamma",
    "eps",
    "kappa",
    "iters",
    "batch",
    "lr",
    "seed",
    "replicates",
    "chains",
    "graph",
    "out",
    "relaxation",
    "curvature",
    "init",
    "hidden",
    "grid",
    "param",
    "target",
    "planted",
    "svg",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaxgrad"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    run(&all)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn toy_binary_writes_parseable_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "toy-binary",
            "--estimator",
            "ram,pwl",
            "--iters",
            "200",
            "--batch",
            "10",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("toy_binary_convex_ram.csv"));
    assert_eq!(header[0], "iter");
    assert_eq!(rows.len(), 200);
    for row in &rows {
        for cell in row {
            assert!(cell.parse::<f64>().unwrap().is_finite());
        }
    }
    let (_, summary) = read_csv(&dir.path().join("toy_binary_convex_summary.csv"));
    assert_eq!(summary.len(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "bias",
        "--estimator",
        "igsm,ram",
        "--grid",
        "-1,0,2",
        "--replicates",
        "500",
        "--seed",
        "3",
    ];
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    let name = "bias_convex.csv";
    assert_eq!(
        std::fs::read(a.path().join(name)).unwrap(),
        std::fs::read(b.path().join(name)).unwrap()
    );
    let (header, rows) = read_csv(&a.path().join(name));
    assert!(header.iter().any(|h| h == "oracle_grad"));
    assert_eq!(rows.len(), 6);
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"estimator": ["ram", "arm"], "iters": 7, "batch": 2, "seed": 1}"#,
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["toy-binary", "--config", cfg.to_str().unwrap(), "--iters", "11"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("toy_binary_convex_arm.csv"));
    assert_eq!(rows.len(), 11);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"estimatr": "ram"}"#).unwrap();
    let out = run_in(dir.path(), &["toy-binary", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["toy-binary", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(
        run_in(dir.path(), &["toy-binary", "--estimator", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(run_in(dir.path(), &["toy-binary", "--lr", "-1"]).status.code(), Some(2));
    let missing = dir.path().join("missing.clq");
    let out = run_in(dir.path(), &["maxclique", "--graph", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.clq"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn help_lists_every_key() {
    for sub in ["toy-binary", "toy-categorical", "bias", "maxclique", "sweep"] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        for key in KEYS {
            assert!(text.contains(&format!("--{key}")), "{sub} --help lacks --{key}");
        }
    }
}

#[test]
fn maxclique_on_dimacs_file_reports_a_clique() {
    let dir = tempfile::tempdir().unwrap();
    // a 4-clique {1,2,3,4} plus a pendant path
    let graph = dir.path().join("g.clq");
    std::fs::write(
        &graph,
        "c tiny\np edge 6 8\ne 1 2\ne 1 3\ne 1 4\ne 2 3\ne 2 4\ne 3 4\ne 4 5\ne 5 6\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "maxclique",
            "--graph",
            graph.to_str().unwrap(),
            "--chains",
            "4",
            "--iters",
            "300",
            "--svg",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("maxclique_pwl_kappa0.5_summary.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows[0][col("best_size")], "4");
    let (_, trace) = read_csv(&dir.path().join("maxclique_pwl_kappa0.5.csv"));
    assert_eq!(trace.len(), 300);
    assert!(dir.path().join("maxclique_kappa0.5.svg").exists());
}
