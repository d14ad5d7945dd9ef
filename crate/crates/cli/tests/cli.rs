use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hypersat_cli::bench::{read_csv, Method, CSV_HEADER};
use hypersat_core::wcnf::{evaluate, parse_dimacs};

fn hypersat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersat"))
        .args(args)
        .env_remove("HYPERSAT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_writes_deterministic_wcnf_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = hypersat(&[
            "gen",
            "-n",
            "100",
            "-m",
            "430",
            "--count",
            "3",
            "--out-dir",
            path(out),
            "--seed",
            "5",
        ]);
        assert!(res.status.success());
    }
    let files = hypersat_cli::inputs::list_dir(&a).unwrap();
    assert_eq!(files.len(), 3);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        assert!(text.starts_with("p wcnf 100 430\n"));
        assert_eq!(
            text,
            fs::read_to_string(b.join(f.file_name().unwrap())).unwrap()
        );
    }

    let unit = dir.path().join("unit");
    hypersat(&[
        "gen",
        "-n",
        "20",
        "-m",
        "50",
        "--weight-lo",
        "1",
        "--weight-hi",
        "1",
        "--out-dir",
        path(&unit),
    ]);
    let inst = parse_dimacs(&fs::read_to_string(unit.join("rand3sat-001.wcnf")).unwrap()).unwrap();
    assert!(inst.weights().iter().all(|&w| w == 1));
}

#[test]
fn solve_reports_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    // every clause contains x1
    let sat = dir.path().join("easy.wcnf");
    fs::write(&sat, "p wcnf 4 3\n3 1 2 -3 0\n5 1 -2 4 0\n2 1 3 -4 0\n").unwrap();
    let out = hypersat(&["solve", path(&sat)]);
    assert!(out.status.success());
    let lines = json_lines(&stdout(&out));
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["unsat_weight"], 0);
    assert_eq!(lines[0]["sat_weight"], 10);
    assert!(!lines[0]["loss_trace"].as_array().unwrap().is_empty());
    assert_eq!(lines[1]["summary"]["instances"], 1);

    let set = dir.path().join("set");
    hypersat(&[
        "gen",
        "-n",
        "12",
        "-m",
        "50",
        "--count",
        "5",
        "--out-dir",
        path(&set),
    ]);
    let glob = format!("{}/*.wcnf", set.display());
    let out = hypersat(&["solve", &glob, "--epochs", "20"]);
    let lines = json_lines(&stdout(&out));
    assert_eq!(lines.len(), 6);
    let mean = lines[..5]
        .iter()
        .map(|l| l["unsat_weight"].as_f64().unwrap())
        .sum::<f64>()
        / 5.0;
    assert!((lines[5]["summary"]["mean_unsat_weight"].as_f64().unwrap() - mean).abs() < 1e-9);
    for l in &lines[..5] {
        let inst = parse_dimacs(&fs::read_to_string(l["file"].as_str().unwrap()).unwrap()).unwrap();
        let assignment = serde_json::from_value(l["assignment"].clone()).unwrap();
        assert_eq!(
            evaluate(&inst, &assignment).unwrap().unsat_weight,
            l["unsat_weight"].as_u64().unwrap()
        );
    }
}

#[test]
fn solve_ablation_flags_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    hypersat(&["gen", "-n", "10", "-m", "40", "--out-dir", path(dir.path())]);
    let out = hypersat(&[
        "solve",
        path(dir.path()),
        "--lambda",
        "0",
        "--no-transformer",
        "--variable-nodes",
        "--epochs",
        "5",
    ]);
    let record = &json_lines(&stdout(&out))[0];
    assert_eq!(record["config"]["lambda"], 0.0);
    assert_eq!(record["config"]["use_transformer"], false);
    assert_eq!(record["config"]["mode"], "variable");
    assert_eq!(record["epochs_run"], 5);
}

#[test]
fn solve_continues_past_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cnf"), "p cnf 2 1\n3 0\n").unwrap();
    fs::write(dir.path().join("good.cnf"), "p cnf 3 1\n1 2 3 0\n").unwrap();
    let out = hypersat(&["solve", path(dir.path()), "--epochs", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let lines = json_lines(&stdout(&out));
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["summary"]["failed"], 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cnf"));
}

#[test]
fn bench_csv_is_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny10");
    hypersat(&[
        "gen",
        "-n",
        "10",
        "-m",
        "43",
        "--count",
        "4",
        "--out-dir",
        path(&data),
    ]);
    let run = |csv: &Path, workers: &str| {
        let out = hypersat(&[
            "bench",
            path(&data),
            "--methods",
            "hypersat,local-search,exhaustive",
            "--seeds",
            "1,2",
            "--epochs",
            "25",
            "--limit",
            "3",
            "--workers",
            workers,
            "--csv",
            path(csv),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            read_csv(fs::File::open(csv).unwrap()).unwrap(),
            stdout(&out),
        )
    };
    let (a, summary) = run(&dir.path().join("a.csv"), "1");
    let (b, _) = run(&dir.path().join("b.csv"), "3");
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(a.len(), 3 * 3 * 2);
    let strip = |mut v: Vec<hypersat_cli::bench::BenchRecord>| {
        v.iter_mut().for_each(|r| r.wall_time_ms = 0);
        v
    };
    assert_eq!(strip(a.clone()), strip(b));
    assert!(summary.starts_with("dataset tiny10: 3 instances"));

    for r in &a {
        assert_eq!(r.dataset, "tiny10");
        let opt = a
            .iter()
            .find(|o| o.instance == r.instance && o.method == Method::Exhaustive)
            .unwrap();
        assert!(r.unsat_weight >= opt.unsat_weight);
    }
    let rows: Vec<f64> = a
        .iter()
        .filter(|r| r.method == Method::Hypersat)
        .map(|r| r.unsat_weight as f64)
        .collect();
    let mean = rows.iter().sum::<f64>() / rows.len() as f64;
    let line = summary
        .lines()
        .find(|l| l.starts_with("hypersat "))
        .unwrap();
    assert!(line.contains(&format!("{mean:.3} ±")), "{line} vs {mean}");
}

#[test]
fn oracle_and_seed_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.wcnf"), "p wcnf 1 2\n2 1 0\n5 -1 0\n").unwrap();
    let out = hypersat(&["oracle", path(dir.path())]);
    let line = &json_lines(&stdout(&out))[0];
    assert_eq!(line["best_unsat_weight"], 2);
    assert_eq!(line["best_assignment"], serde_json::json!([false]));

    let ls = hypersat(&[
        "oracle",
        path(dir.path()),
        "--method",
        "local-search",
        "--steps",
        "100",
    ]);
    assert_eq!(json_lines(&stdout(&ls))[0]["best_unsat_weight"], 2);

    let with_env = Command::new(env!("CARGO_BIN_EXE_hypersat"))
        .args(["oracle", path(dir.path()), "--method", "local-search"])
        .env("HYPERSAT_SEED", "77")
        .output()
        .unwrap();
    let explicit = hypersat(&[
        "oracle",
        path(dir.path()),
        "--method",
        "local-search",
        "--seed",
        "77",
    ]);
    assert_eq!(stdout(&with_env), stdout(&explicit));
    assert_ne!(stdout(&with_env), stdout(&ls));
}

#[test]
fn gradcheck_contract() {
    let a = hypersat(&["gradcheck"]);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    assert!(text.contains("PASS"));
    assert_eq!(text.lines().filter(|l| l.ends_with(" ok")).count(), 15);
    assert_eq!(text, stdout(&hypersat(&["gradcheck"])));

    let wide = hypersat(&["gradcheck", "-n", "8", "--width", "3", "--seed", "4"]);
    assert_eq!(wide.status.code(), Some(0), "{}", stdout(&wide));

    let failing = hypersat(&[
        "gradcheck",
        "--width",
        "3",
        "--tolerance",
        "0",
        "--step",
        "1e-2",
    ]);
    assert_eq!(failing.status.code(), Some(1));
    assert_eq!(hypersat(&["gradcheck", "-n", "13"]).status.code(), Some(2));
}
