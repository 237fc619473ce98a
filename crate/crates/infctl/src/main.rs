use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use infctl::config::{parse_absorption, Config};
use infctl::io::{fmt17, write_boundary, write_float_csv, write_meta, Meta};
use infctl::suite::run_suite;
use infctl::verify::q_sweep;
use infctl_core::model::value_point;
use infctl_core::{char_roots, simulate_path, solve_boundary, BoundaryTable, ModelParams, Policy, SimConfig};

/// Worker threads for Monte Carlo batches. Only affects wall time.
const WORKERS_ENV: &str = "INFCTL_WORKERS";

#[derive(Parser)]
#[command(version, about = "Dividend control with a running infimum: boundary solves, simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `section.key = value` lines.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the characteristic roots and the classical barrier.
    Roots,
    /// Solve the free boundary and write it with its metadata.
    Boundary,
    /// Tabulate region, value and gradient gap on a grid.
    ValueTable,
    /// Write simulated paths, one CSV per path.
    Simulate,
    /// Run the acceptance suite.
    Verify,
    /// Boundary and value along a decreasing ladder of q.
    SweepQ,
}

/// Error category for the machine-readable record.
fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<infctl_core::Error>() {
        return core.kind();
    }
    if e.downcast_ref::<toml::de::Error>().is_some() {
        return "config_parse";
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool exists already, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let record = serde_json::json!({
                "error": { "kind": error_kind(&e), "message": format!("{e:#}") },
            });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every requested check passed.
fn run(cli: &Cli) -> anyhow::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    let params = cfg.params()?;

    if let Command::Roots = cli.command {
        let r = char_roots(&params)?;
        println!("alpha = {:?}", r.alpha);
        println!("beta = {:?}", r.beta);
        match r.b_circ {
            Some(b) => println!("b_circ = {b:?}"),
            None => println!("b_circ = \"undefined\""),
        }
        return Ok(true);
    }

    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.effective.toml"), cfg.to_flat()?)?;

    match cli.command {
        Command::Roots => unreachable!(),
        Command::Boundary => {
            let table = boundary(&cfg, &params)?;
            write_boundary(&dir.join("boundary.csv"), &dir.join("boundary.meta"), &table)?;
            Ok(true)
        }
        Command::ValueTable => value_table(&cfg, &params, &dir),
        Command::Simulate => simulate(&cfg, &params, &dir),
        Command::Verify => verify(&cfg, &dir),
        Command::SweepQ => sweep(&cfg, &params, &dir),
    }
}

fn boundary(cfg: &Config, params: &ModelParams) -> anyhow::Result<BoundaryTable> {
    Ok(solve_boundary(params, cfg.boundary_i_max()?, cfg.boundary.step)?)
}

/// The boundary when the value function needs one, `None` otherwise.
fn optional_boundary(cfg: &Config, params: &ModelParams) -> anyhow::Result<Option<BoundaryTable>> {
    if params.mu > 0.0 && params.q > 0.0 {
        Ok(Some(boundary(cfg, params)?))
    } else {
        Ok(None)
    }
}

fn value_table(cfg: &Config, params: &ModelParams, dir: &Path) -> anyhow::Result<bool> {
    let table = optional_boundary(cfg, params)?;
    let b_circ = char_roots(params)?.b_circ;
    let x_max = match (cfg.grid.x_max, b_circ) {
        (Some(x), _) => x,
        (None, Some(b)) => 2.0 * b,
        (None, None) => 2.0,
    };
    let i_max = match (cfg.grid.i_max, &table) {
        (Some(i), _) => i,
        (None, Some(t)) => 2.0 * t.i_star(),
        (None, None) => x_max,
    };
    let (nx, ni) = (cfg.grid.nx, cfg.grid.ni);
    if nx < 2 || ni < 2 {
        bail!("grid.nx and grid.ni must be at least 2");
    }
    let mut w = csv::Writer::from_path(dir.join("value_table.csv"))?;
    w.write_record(["x", "i", "region", "value", "gradient_gap"])?;
    for jx in 0..nx {
        let x = x_max * jx as f64 / (nx - 1) as f64;
        for ki in 0..ni {
            let i = i_max * ki as f64 / (ni - 1) as f64;
            if i > x {
                break;
            }
            let p = value_point(x, i, params, table.as_ref())?;
            w.write_record([fmt17(x), fmt17(i), p.region.tag().to_string(), fmt17(p.v), fmt17(p.gradient_gap)])?;
        }
    }
    w.flush()?;
    Ok(true)
}

fn simulate(cfg: &Config, params: &ModelParams, dir: &Path) -> anyhow::Result<bool> {
    let s = &cfg.simulate;
    let table = match s.policy.as_str() {
        "optimal" | "scaled" => Some(boundary(cfg, params)?),
        _ => None,
    };
    let policy = match s.policy.as_str() {
        "null" => Policy::Null,
        "immediate" => Policy::ImmediatePayout,
        "constant" => {
            let level = match s.barrier {
                Some(l) => l,
                None => char_roots(params)?
                    .b_circ
                    .context("simulate.barrier is required when mu <= 0")?,
            };
            Policy::ConstantBarrier(level)
        }
        "optimal" => Policy::OptimalReflection(table.as_ref().expect("solved above")),
        "scaled" => Policy::ScaledReflection {
            boundary: table.as_ref().expect("solved above"),
            factor: s.factor.context("simulate.factor is required for the scaled policy")?,
        },
        other => bail!("unknown policy {other:?}"),
    };
    if s.stride == 0 {
        bail!("simulate.stride must be positive");
    }
    let sim = SimConfig {
        dt: s.dt,
        horizon: s.horizon,
        seed: s.seed,
        path_index: 0,
        absorption: parse_absorption(&s.absorption)?,
    };
    let width = s.n_paths.saturating_sub(1).to_string().len().max(4);
    for n in 0..s.n_paths {
        let path = simulate_path(params, &policy, s.x0, s.i0, &SimConfig { path_index: n as u64, ..sim })?;
        let mut jump_at = vec![0.0; path.len()];
        for j in &path.jumps {
            jump_at[j.time_index] += j.delta_d;
        }
        let mut d_cum = 0.0;
        let mut rows = Vec::new();
        for (k, jump) in jump_at.iter().enumerate().take(path.end() + 1) {
            if k > 0 {
                d_cum += path.dc[k];
            }
            d_cum += jump;
            if k % s.stride == 0 || k == path.end() {
                rows.push(vec![path.time(k), path.x[k], path.inf[k], d_cum]);
            }
        }
        write_float_csv(&dir.join(format!("path_{n:0width$}.csv")), &["t", "X", "I", "D_cum"], rows)?;
    }
    Ok(true)
}

fn verify(cfg: &Config, dir: &Path) -> anyhow::Result<bool> {
    let results = run_suite(cfg, |c| println!("{}", c.line()))?;
    let passed = results.iter().all(|c| c.passed);
    let mut text = String::new();
    for c in &results {
        text.push_str(&c.line());
        text.push('\n');
    }
    text.push_str(if passed { "overall PASS\n" } else { "overall FAIL\n" });
    fs::write(dir.join("verify_report.txt"), text)?;
    fs::write(dir.join("verify_report.json"), serde_json::to_string_pretty(&results)?)?;
    Ok(passed)
}

fn sweep(cfg: &Config, params: &ModelParams, dir: &Path) -> anyhow::Result<bool> {
    let s = &cfg.sweep;
    let t = q_sweep(params, &s.q_list, &s.i_probes, s.x_probe, cfg.boundary_i_max()?, cfg.boundary.step)?;
    let mut w = csv::Writer::from_path(dir.join("sweep_q.csv"))?;
    let mut header = vec!["q".to_string(), "i_star".to_string()];
    for i in &s.i_probes {
        header.push(format!("b(i={i})"));
        header.push(format!("value(x={},i={i})", s.x_probe));
    }
    header.push("error".to_string());
    w.write_record(&header)?;
    for r in &t.rows {
        let mut rec = vec![fmt17(r.q), fmt17(r.i_star)];
        for k in 0..s.i_probes.len() {
            rec.push(r.b.get(k).map_or(String::new(), |v| fmt17(*v)));
            rec.push(r.value.get(k).map_or(String::new(), |v| fmt17(*v)));
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let checks = [
        ("all_solved", t.all_solved()),
        ("boundary_converges", t.boundary_converges()),
        ("value_converges", t.value_converges()),
        ("critical_level_rises", t.critical_level_rises()),
    ];
    let mut meta = vec![("b_circ", Meta::Float(t.b_circ)), ("classical_value", Meta::Float(t.classical))];
    for (k, ok) in checks {
        meta.push((k, Meta::Text(if ok { "PASS" } else { "FAIL" }.into())));
        println!("{k} = {}", if ok { "PASS" } else { "FAIL" });
    }
    write_meta(&dir.join("sweep_q.meta"), &meta)?;
    Ok(checks.iter().all(|(_, ok)| *ok))
}
