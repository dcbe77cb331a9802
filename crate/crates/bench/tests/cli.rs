use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swarm_fusion::swarm::{EnergyTrace, CSV_HEADER};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarm-bench"))
        .args(args)
        .env_remove("SWARM_DETERMINISTIC")
        .output()
        .expect("binary runs")
}

fn bench_deterministic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarm-bench"))
        .args(args)
        .env("SWARM_DETERMINISTIC", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read_trace(p: &Path) -> EnergyTrace {
    EnergyTrace::from_csv(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn zero_budget_traces_hold_only_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bench(&[
        "compare", "--problem", "random", "--arch", "ae,sf-mf,pae", "--budget-ms", "0",
        "--seeds", "3,4", "--threads", "3", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for arch in ["ae", "sf-mf", "pae"] {
        for seed in [3, 4] {
            let t = read_trace(&dir.path().join(format!("{arch}_seed{seed}.csv")));
            assert!(!t.is_empty());
            assert!(t.records().iter().all(|r| r.iteration == 0), "{arch}");
        }
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
}

#[test]
fn summary_best_matches_trace_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bench(&[
        "compare", "--problem", "stereo-synth", "--arch", "ae,sf-mf", "--budget-ms", "300",
        "--seeds", "1", "--threads", "2", "--out", out, "--set", "width=20", "--set",
        "height=15", "--set", "labels=8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("family,seed,final_energy,best_energy,target,time_to_target_ms,fusions")
    );
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let t = read_trace(&dir.path().join(format!("{}_seed{}.csv", f[0], f[1])));
        let min = t
            .records()
            .iter()
            .map(|r| r.best_energy)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(f[3].parse::<f64>().unwrap(), min);
        assert_eq!(f[2].parse::<f64>().unwrap(), min);
        let target: f64 = f[4].parse().unwrap();
        assert!(!f[5].is_empty(), "every run reaches the weakest final energy");
        assert!(min <= target);
    }
}

#[test]
fn deterministic_runs_repeat_exactly() {
    let payload = |dir: &Path| {
        let o = bench_deterministic(&[
            "compare", "--problem", "flow-synth", "--arch", "sf-mf,pfm,hfm", "--budget-ms",
            "60000", "--seeds", "5", "--threads", "3", "--out", dir.to_str().unwrap(), "--set",
            "width=16", "--set", "height=12", "--set", "labels=20", "--set", "max_iterations=12",
            "--set", "pregen=10",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        ["sf-mf", "pfm", "hfm"]
            .iter()
            .map(|a| {
                let t = read_trace(&dir.join(format!("{a}_seed5.csv")));
                t.records()
                    .iter()
                    .map(|r| (r.worker, r.iteration, r.energy.to_bits(), r.best_energy.to_bits()))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = payload(a.path());
    assert!(first.iter().all(|t| t.iter().any(|r| r.1 > 0)));
    assert_eq!(first, payload(b.path()));
}

#[test]
fn unknown_architecture_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["compare", "--arch", "ae,swarm", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("unknown architecture `swarm`"), "{e}");
    assert!(e.contains("ae, fm, pae, pfm, hfm, sf-mf, sf-ss, sf"), "{e}");
}

#[test]
fn beta_beyond_peer_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&[
        "sweep", "--param", "beta", "--values", "0,4", "--threads", "4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta <= N - 1"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_with_two() {
    assert_eq!(bench(&["compare", "--threads", "x"]).status.code(), Some(2));
    assert_eq!(bench(&["launch"]).status.code(), Some(2));
    assert_eq!(bench(&["compare", "--problem", "stereo"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        "# tiny random instance\nproblem = random\nwidth = 6\nheight = 5\nlabels = 3\n\
         budget_ms = 5000\nseeds = 1, 2\nthreads = 2\nmax_iterations = 3\n",
    )
    .unwrap();
    let o = bench(&[
        "sweep", "--param", "threads", "--values", "1,2", "--config", cfg.to_str().unwrap(),
        "--seeds", "9", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("threads1_seed9.csv").exists());
    assert!(out.join("threads2_seed9.csv").exists());
    assert!(!out.join("threads1_seed1.csv").exists());
    let t = read_trace(&out.join("threads2_seed9.csv"));
    assert_eq!(t.workers(), vec![0, 1]);
    assert!(t.records().iter().all(|r| r.iteration <= 3));
}

#[test]
fn bad_config_lines_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "threads = 2\nthreads two\n").unwrap();
    let o = bench(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn sweeps_produce_one_family_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (param, values, prefix) in [
        ("beta", "0,1,2,3", "beta"),
        ("share_frequency", "1,4", "k"),
        ("alpha", "1,2,4", "alpha"),
    ] {
        let o = bench(&[
            "sweep", "--param", param, "--values", values, "--problem", "random", "--budget-ms",
            "50", "--seeds", "0", "--out", out, "--set", "width=5", "--set", "height=5",
            "--set", "labels=3", "--set", "max_iterations=4",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        for v in values.split(',') {
            assert!(dir.path().join(format!("{prefix}{v}_seed0.csv")).exists());
        }
    }
}

#[test]
fn plot_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    for (flag, golden) in [(None, "tiny_trace.svg"), (Some("--per-worker"), "tiny_trace_workers.svg")] {
        let out = dir.path().join(golden);
        let mut args = vec!["plot", "--out", out.to_str().unwrap()];
        args.extend(flag);
        let input = fixture("tiny_trace.csv");
        args.push(&input);
        let o = bench(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(
            fs::read_to_string(&out).unwrap(),
            fs::read_to_string(fixture(golden)).unwrap()
        );
    }
}

#[test]
fn plot_reports_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, format!("{CSV_HEADER}\n0.0,0,0,1.0,1.0\n0.5,0,1,oops,1.0\n")).unwrap();
    let out = dir.path().join("p.svg");
    let o = bench(&["plot", "--out", out.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("invalid energy"), "{e}");
}

#[test]
fn plot_of_empty_trace_is_axes_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{CSV_HEADER}\n")).unwrap();
    let out = dir.path().join("p.svg");
    let o = bench(&["plot", "--out", out.to_str().unwrap(), empty.to_str().unwrap()]);
    assert!(o.status.success());
    let svg = fs::read_to_string(out).unwrap();
    assert!(svg.contains("id=\"axes\"") && !svg.contains("class=\"series\""));
}
