use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use infctl::config::Config;
use infctl::io::read_boundary;

fn infctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infctl")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn roots_prints_the_unit_barrier() {
    let out = infctl(&["roots"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("alpha = -2.732050807568877"), "{text}");
    assert!(text.contains("beta = 0.7320508075688773"), "{text}");
    assert!(text.contains("b_circ = 0.760345996300946"), "{text}");
}

#[test]
fn roots_without_positive_drift_has_no_barrier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "model.mu = -0.5\n").unwrap();
    let out = infctl(&["roots", "--config", path_str(&cfg)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("b_circ = \"undefined\""));
}

#[test]
fn boundary_output_is_reproducible_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "boundary.step = 1e-3\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(infctl(&["boundary", "-c", path_str(&cfg), "-o", path_str(d)]).status.success());
    }
    for f in ["boundary.csv", "boundary.meta"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let t = read_boundary(&a.join("boundary.csv"), &a.join("boundary.meta")).unwrap();
    assert_eq!(t.step(), 1e-3);
    // The crossing is located on the interpolated table, so it carries the
    // interpolation error of the coarse step.
    assert!((t.i_star() - 0.617_502_704_253_921_3).abs() < 1e-6);

    let effective = Config::load(&a.join("config.effective.toml")).unwrap();
    assert_eq!(effective.boundary.step, 1e-3);
    assert_eq!(effective.output.dir, a);
}

#[test]
fn bad_configuration_gives_a_json_error_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "model.eta = -1.0\n").unwrap();
    let out = infctl(&["boundary", "-c", path_str(&cfg), "-o", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "parameter_domain");

    fs::write(&cfg, "model.typo = 1.0\n").unwrap();
    let out = infctl(&["roots", "-c", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "config_parse");
}

#[test]
fn simulate_and_value_table_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "boundary.step = 1e-3\ngrid.nx = 11\ngrid.ni = 11\nsimulate.n_paths = 3\nsimulate.horizon = 1.0\nsimulate.stride = 50\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    for cmd in ["simulate", "value-table"] {
        let o = infctl(&[cmd, "-c", path_str(&cfg), "-o", path_str(&out)]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let table = fs::read_to_string(out.join("value_table.csv")).unwrap();
    assert!(table.starts_with("x,i,region,value,gradient_gap\n"));
    assert!(table.contains("WAIT_C"));
    for n in 0..3 {
        let path = fs::read_to_string(out.join(format!("path_{n:04}.csv"))).unwrap();
        let mut lines = path.lines();
        assert_eq!(lines.next(), Some("t,X,I,D_cum"));
        let mut last_d = 0.0;
        for l in lines {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            assert!(v[2] <= v[1] || v[1] <= 0.0);
            assert!(v[3] >= last_d);
            last_d = v[3];
        }
    }
}

#[test]
fn sweep_q_passes_its_monotonicity_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "boundary.step = 1e-3\n").unwrap();
    let out = infctl(&["sweep-q", "-c", path_str(&cfg), "-o", path_str(dir.path())]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
    assert_eq!(fs::read_to_string(dir.path().join("sweep_q.csv")).unwrap().lines().count(), 5);
}

#[test]
fn reduced_verify_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    // Small enough to run in seconds; the 1.5% slack still covers the
    // coarser step's bias at these sizes.
    fs::write(&cfg, "verify.n_paths = 2000\nverify.dt = 1e-3\nverify.support_paths = 20\n").unwrap();
    let out = infctl(&["verify", "-c", path_str(&cfg), "-o", path_str(dir.path())]);
    let report = fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 11, "{report}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 11);
    let all_pass = json.as_array().unwrap().iter().all(|c| c["passed"] == true);
    assert_eq!(out.status.success(), all_pass);
}
