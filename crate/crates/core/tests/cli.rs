use std::fs;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csbm-attention"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_flag_exits_one_and_names_it() {
    let out = bin(&["sweep-q", "--frobnicate", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
}

#[test]
fn verify_output_is_deterministic() {
    let a = bin(&["verify", "--suite", "spectral", "--seed", "42"]);
    let b = bin(&["verify", "--suite", "spectral", "--seed", "42", "--jobs", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("suite spectral seed 42\n"));
    assert!(text.ends_with("PASS overall\n"));
}

#[test]
fn sweep_distance_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dist.csv");
    let status = bin(&[
        "sweep-distance", "--n", "120", "--trials", "2", "--models", "linear,gcn", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("sweep_value,trial,model,metric,value\n"));
    assert_eq!(csv.lines().count(), 1 + 15 * 2 * 2);
    let summary = fs::read_to_string(dir.path().join("dist.summary.csv")).unwrap();
    assert!(summary.starts_with("sweep_value,model,metric,mean,std,trials\n"));
    assert_eq!(summary.lines().count(), 1 + 15 * 2);
}

#[test]
fn dumped_sample_feeds_real_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dump = bin(&["dump-sample", "--n", "80", "--q", "0.2", "--regime", "hard", "--dump-dir", d.to_str().unwrap()]);
    assert_eq!(dump.status.code(), Some(0), "{}", String::from_utf8_lossy(&dump.stderr));
    let path = |f: &str| d.join(f).to_str().unwrap().to_string();
    let (f, e, l) = (path("features.tsv"), path("edges.tsv"), path("labels.tsv"));
    let out = bin(&[
        "real-data", "--features", &f, "--edges", &e, "--labels", &l, "--class", "1",
        "--mu-norm-grid", "0.5,2", "--models", "mlp-psi,linear",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("2,0,mlp-psi,edge_acc,")));
    assert!(text.lines().any(|l| l.starts_with("0.5,0,linear,node_acc,")));
}

#[test]
fn malformed_edges_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("f.tsv"), "0\t1\n1\t2\n2\t3\n").unwrap();
    fs::write(d.join("e.tsv"), "0\t1\n2\t2\n").unwrap();
    fs::write(d.join("l.tsv"), "0\t0\n1\t1\n2\t1\n").unwrap();
    let p = |f: &str| d.join(f).to_str().unwrap().to_string();
    let out = bin(&[
        "real-data", "--features", &p("f.tsv"), "--edges", &p("e.tsv"), "--labels", &p("l.tsv"),
        "--class", "1", "--mu-norm-grid", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("self-loop at line 2"));
}
