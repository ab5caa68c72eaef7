use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn aab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aab"))
        .args(args)
        .current_dir(dir)
        .env_remove("OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Five workers on which the CCB-NS augmentation step breaks monotonicity
/// in a large share of realizations.
fn strategic_fixture(dir: &Path) {
    write(
        dir,
        "pool.csv",
        "quality,cost\n0.65,9.1\n0.87,7.6\n0.56,6.9\n0.61,2.1\n0.62,6.2\n",
    );
    write(
        dir,
        "mech.cfg",
        "horizon=600\nalpha=0.26\nxi=0\nmu=0.1\ncost_max=10\n",
    );
}

const MECH: &[&str] = &[
    "--pool",
    "pool.csv",
    "--config",
    "mech.cfg",
    "--model",
    "worst_case",
    "--solver",
    "exact",
    "--out",
    "out",
];

#[test]
fn run_writes_csvs_and_plots() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "small.cfg", "n=22\nhorizon=500\nalpha=0.3\n");
    let out = aab(
        &[
            "run",
            "--engine",
            "ccb-ns",
            "--config",
            "small.cfg",
            "--seeds",
            "4",
            "--out",
            "o",
            "--plot",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in [
        "run-rounds_ccb-ns.csv",
        "run-regret_ccb-ns.csv",
        "run-cost_ccb-ns.csv",
        "run-regret_ccb-ns.svg",
    ] {
        assert!(tmp.path().join("o").join(f).exists(), "{f} missing");
    }
    let agg = fs::read_to_string(tmp.path().join("o/run-regret_ccb-ns.csv")).unwrap();
    assert!(agg.starts_with("round,engine,mean,stderr\n1,ccb-ns,"));
    assert_eq!(agg.lines().count(), 501);
    let rounds = fs::read_to_string(tmp.path().join("o/run-rounds_ccb-ns.csv")).unwrap();
    assert!(rounds.starts_with("round,engine,seed,cost,regret,violated\n"));
    assert_eq!(rounds.lines().count(), 1 + 4 * 500);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "small.cfg", "n=22\nhorizon=50\nalpha=0.3\n");
    let out = Command::new(env!("CARGO_BIN_EXE_aab"))
        .args([
            "run",
            "--engine",
            "oracle",
            "--config",
            "small.cfg",
            "--seeds",
            "2",
        ])
        .current_dir(tmp.path())
        .env("OUT_DIR", "envout")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("envout/run-cost_oracle.csv").exists());
}

#[test]
fn output_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "small.cfg",
        "n=22\nhorizon=300\nalpha=0.3\nseed=9\n",
    );
    let args = |o: &'static str| {
        [
            "run",
            "--engine",
            "eps-greedy",
            "--config",
            "small.cfg",
            "--seeds",
            "3",
            "--out",
            o,
        ]
    };
    assert_eq!(code(&aab(&args("a"), tmp.path())), 0);
    assert_eq!(code(&aab(&args("b"), tmp.path())), 0);
    let read = |d: &str| fs::read(tmp.path().join(d).join("run-rounds_eps-greedy.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn missing_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = aab(
        &["run", "--engine", "ccb-ns", "--config", "nope.cfg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_config_and_engine_exit_2() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.cfg", "alpha=0.1\nalpah=0.2\n");
    assert_eq!(
        code(&aab(
            &["run", "--engine", "ccb-ns", "--config", "bad.cfg"],
            tmp.path()
        )),
        2
    );
    assert_eq!(code(&aab(&["verify", "--engine", "ccb-x"], tmp.path())), 2);
    assert_eq!(
        code(&aab(
            &["run", "--engine", "ccb-s", "--bogus-flag"],
            tmp.path()
        )),
        2
    );
}

#[test]
fn infeasible_pool_exits_3() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "weak.csv", "quality,cost\n0.6,1\n0.6,1\n");
    let out = aab(
        &[
            "run",
            "--engine",
            "ccb-s",
            "--pool",
            "weak.csv",
            "--model",
            "worst_case",
            "--solver",
            "exact",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("INFEASIBLE"));
}

#[test]
fn bounds_prints_four_numbers() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "toy.csv",
        "quality,cost\n0.8,1\n0.9,2\n0.95,3\n",
    );
    write(tmp.path(), "toy.cfg", "alpha=0.15\nxi=0.05\n");
    let out = aab(
        &[
            "bounds",
            "--pool",
            "toy.csv",
            "--config",
            "toy.cfg",
            "--model",
            "worst_case",
            "--solver",
            "exact",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let value = |label: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    let lower = value("lower bound");
    let (ns, s, range) = (
        value("ccb-ns bound"),
        value("ccb-s bound"),
        value("xi-range bound"),
    );
    assert!(lower.is_finite() && lower > 0.0);
    assert!(ns >= s && s >= range && s >= lower);
}

#[test]
fn zero_separation_without_slack_exits_3() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "tie.csv", "quality,cost\n0.9,1\n");
    write(tmp.path(), "tie.cfg", "alpha=0.1\nxi=0\n");
    let out = aab(
        &[
            "bounds",
            "--pool",
            "tie.csv",
            "--config",
            "tie.cfg",
            "--model",
            "worst_case",
            "--solver",
            "exact",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_ccb_s_passes() {
    let tmp = TempDir::new().unwrap();
    strategic_fixture(tmp.path());
    let mut args = vec!["verify", "--engine", "ccb-s", "--seeds", "50"];
    args.extend_from_slice(MECH);
    let out = aab(&args, tmp.path());
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let report = fs::read_to_string(tmp.path().join("out/verify_ccb-s.csv")).unwrap();
    assert!(
        report.starts_with("seed,worker_id,bid,allocation_count,payment,utility,violation_flag\n")
    );
    assert!(!report.contains(",true"));
}

#[test]
fn verify_ccb_ns_reports_counterexample() {
    let tmp = TempDir::new().unwrap();
    strategic_fixture(tmp.path());
    let mut args = vec![
        "verify", "--engine", "ccb-ns", "--checks", "monotone", "--seeds", "20",
    ];
    args.extend_from_slice(MECH);
    let out = aab(&args, tmp.path());
    assert_eq!(code(&out), 4);
    let cex = fs::read_to_string(tmp.path().join("out/counterexample_ccb-ns.txt")).unwrap();
    assert!(cex.contains("tasks at bid"));
    assert!(tmp.path().join("out/verify_ccb-ns.csv").exists());
}

#[test]
fn sweep_marks_infeasible_sizes() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "small.cfg", "horizon=100\nalpha=0.3\n");
    let out = aab(
        &[
            "sweep",
            "--engine",
            "ccb-ns",
            "--config",
            "small.cfg",
            "--sizes",
            "11,22",
            "--seeds",
            "2",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/sweep_ccb-ns.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("11,ccb-ns,false"));
    assert!(rows[2].starts_with("22,ccb-ns,true"));
}

#[test]
fn repro_writes_every_learner() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "small.cfg", "n=22\nhorizon=200\nalpha=0.3\n");
    let out = aab(
        &[
            "repro",
            "--config",
            "small.cfg",
            "--seeds",
            "2",
            "--out",
            "o",
            "--plot",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for engine in ["ccb-ns", "ccb-s", "ccb-se", "eps-greedy"] {
        assert!(tmp
            .path()
            .join(format!("o/repro-regret_{engine}.csv"))
            .exists());
    }
    assert!(tmp.path().join("o/repro_cost.svg").exists());
}
