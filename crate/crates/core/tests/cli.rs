use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spline-ot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spline-ot")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary JSON")
}

fn error_of(out: &Output) -> (i32, Value) {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("error JSON");
    (out.status.code().unwrap(), v["error"].clone())
}

fn write_pgm(path: &Path, n: usize) {
    let mut s = format!("P2\n{n} {n}\n255\n");
    for j in 0..n {
        let row: Vec<String> = (0..n)
            .map(|i| ((i * 7 + j * 13) % 256).to_string())
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// CSV with the timing column blanked.
fn strip_time(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "cpu_time_s").unwrap();
    lines
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f[t] = "";
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn poisson_reports_small_error() {
    let v = json_stdout(&run(&[
        "poisson",
        "--resolution",
        "4",
        "--degree",
        "8",
        "--smoothness",
        "2",
    ]));
    assert!(v["rmse"].as_f64().unwrap() < 1e-6, "{v}");
    assert_eq!(v["n_t"], 32);
}

#[test]
fn invalid_space_is_rejected_with_json() {
    let (code, e) = error_of(&run(&["poisson", "--degree", "4", "--smoothness", "1"]));
    assert_eq!((code, e["code"].as_str().unwrap()), (7, "invalid_argument"));
    assert!(e["message"].as_str().unwrap().contains("--force"));
    // --force accepts it.
    let out = run(&[
        "poisson",
        "--degree",
        "4",
        "--smoothness",
        "1",
        "--resolution",
        "2",
        "--force",
    ]);
    assert!(out.status.success());
}

#[test]
fn missing_files_are_io_errors() {
    let (code, e) = error_of(&run(&[
        "warp",
        "--image",
        "/nonexistent/in.pgm",
        "--out",
        "/tmp/x.pgm",
    ]));
    assert_eq!((code, e["code"].as_str().unwrap()), (6, "io"));
    let (code, e) = error_of(&run(&["poisson", "--domain", "hexagonal-prism"]));
    assert_eq!((code, e["code"].as_str().unwrap()), (7, "invalid_argument"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "degree = 5\nsmoothness = 1\nresolution = 2\nbc = \"quadratic\"\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let a = json_stdout(&run(&["poisson", "--config", c]));
    assert_eq!(a["n_t"], 8);
    let b = json_stdout(&run(&["poisson", "--config", c, "--resolution", "4"]));
    assert_eq!(b["n_t"], 32);
    // Quadratics are reproduced exactly.
    assert!(b["max_error"].as_f64().unwrap() < 1e-10);
    std::fs::write(&cfg, "degre = 5\n").unwrap();
    let (code, _) = error_of(&run(&["poisson", "--config", c]));
    assert_eq!(code, 7);
}

#[test]
fn mae_trace_and_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, sol) = (dir.path().join("t.csv"), dir.path().join("u.json"));
    let v = json_stdout(&run(&[
        "mae",
        "--resolution",
        "4",
        "--iters",
        "12",
        "--stages",
        "1",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
    ]));
    assert_eq!(v["iterations"], 12);
    assert!(v["rmse"].as_f64().unwrap() < 1e-6, "{v}");
    assert_eq!(v["diagnostics"]["nonneg_ok"], true);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("k,lap_inf,delta_inf,clamp_events,nonneg_min,hess_min_eig\n"));
    assert_eq!(csv.lines().count(), 13);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(file["potential"]["degree"], 8);
}

#[test]
fn identity_warp_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (src, dst) = (dir.path().join("in.pgm"), dir.path().join("out.pgm"));
    write_pgm(&src, 32);
    let v = json_stdout(&run(&[
        "warp",
        "--image",
        src.to_str().unwrap(),
        "--potential",
        "identity",
        "--domain",
        "square",
        "--out",
        dst.to_str().unwrap(),
    ]));
    assert_eq!(v["identical"], true);
    assert_eq!(v["prefill_coverage"], 1.0);
    assert!(std::fs::read(&dst)
        .unwrap()
        .starts_with(b"P5\n32 32\n255\n"));
}

#[test]
fn ot_solution_drives_warp() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("ot.json");
    let v = json_stdout(&run(&[
        "ot",
        "--domain",
        "unit-square",
        "--target-domain",
        "rect:1,0,2,1",
        "--resolution",
        "2",
        "--degree",
        "5",
        "--smoothness",
        "1",
        "--out",
        sol.to_str().unwrap(),
    ]));
    assert!(
        (v["transport"]["cost"].as_f64().unwrap() - 1.0).abs() < 1e-8,
        "{v}"
    );
    let (src, dst) = (dir.path().join("in.pgm"), dir.path().join("out.pgm"));
    write_pgm(&src, 16);
    let w = json_stdout(&run(&[
        "warp",
        "--image",
        src.to_str().unwrap(),
        "--potential",
        sol.to_str().unwrap(),
        "--out",
        dst.to_str().unwrap(),
    ]));
    // A pure translation moves every pixel onto its own target pixel.
    assert_eq!(w["identical"], true, "{w}");
}

#[test]
fn bench_csv_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let path = dir.path().join(format!("t2-{threads}.csv"));
        let out = bin()
            .env("SPLINE_OT_THREADS", threads)
            .args([
                "bench",
                "table2",
                "--resolution",
                "4",
                "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read_to_string(&path).unwrap());
    }
    assert!(csvs[0].starts_with("degree,cpu_time_s,rmse,"));
    assert_eq!(strip_time(&csvs[0]), strip_time(&csvs[1]));
}
