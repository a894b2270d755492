use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dppstream::report::{write_results, write_sweep_aggregate, write_topology, TraceWriter};
use dppstream::sim::{sweep, sweep_key, World};
use dppstream::{validate, Error, SimConfig};

/// Cross-layer adaptive video streaming simulator.
///
/// Exit status: 0 on success, 1 when a validation suite or a run fails,
/// 2 on usage or configuration errors.
#[derive(Parser)]
#[command(name = "dppstream", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write summary.csv and run.csv.
    Run(Common),
    /// Run one simulation per value of a parameter.
    Sweep(SweepArgs),
    /// Run the randomized oracle suites.
    Validate(ValidateArgs),
    /// Dump helper/user positions and pathloss gains.
    Topology(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set mimo.M=20`. Repeatable; the last one wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (same as `--set sim.seed=N`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// One of V, M, sMax, policy, receiverModel, userCount.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Random instances per suite.
    #[arg(long, default_value_t = 10_000)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corrupt one oracle comparison to check the harness reports failures.
    #[arg(long, hide = true)]
    inject_failure: bool,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(c: &Common) -> Result<SimConfig, Failure> {
    let mut cfg = match &c.config {
        None => SimConfig::default(),
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::Usage(format!("config file not found: {}", path.display())));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let mut cfg = SimConfig::default();
            cfg.apply_text(&text)?;
            cfg
        }
    };
    cfg.apply_overrides(&c.overrides)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &SimConfig, out: &Path) -> Result<dppstream::SimResult, Failure> {
    let mut traces = TraceWriter::new(out, cfg)?;
    let res = dppstream::run_with_observer(cfg, &mut traces)?;
    traces.finish()?;
    write_results(out, cfg, &res)?;
    Ok(res)
}

fn cmd_run(c: &Common) -> Result<(), Failure> {
    let cfg = load_config(c)?;
    let res = run_one(&cfg, &c.out)?;
    println!(
        "utility={:.6} mean_quality={:.6} mean_buffering={:.4}% users={} drain_complete={}",
        res.utility,
        res.mean_quality,
        res.mean_buffering_percent,
        res.users.len(),
        res.drain_complete
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.common)?;
    sweep_key(&a.param)?;
    let mut values: Vec<String> = Vec::new();
    for v in a.values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()) {
        if values.iter().any(|x| x == v) {
            eprintln!("warning: duplicate sweep value `{v}` ignored");
        } else {
            values.push(v.to_string());
        }
    }
    if values.is_empty() {
        return Err(Failure::Usage("sweep needs at least one value in --values".into()));
    }
    let results = sweep(&cfg, &a.param, &values)?;
    std::fs::create_dir_all(&a.common.out).map_err(Error::from)?;
    let key = sweep_key(&a.param)?;
    for (v, r) in &results {
        let mut c = cfg.clone();
        c.set(key, v)?;
        write_results(&a.common.out.join(format!("{}={v}", a.param)), &c, r)?;
        println!(
            "{}={v}: utility={:.6} mean_quality={:.6} mean_delay={:.4} mean_buffering={:.4}%",
            a.param, r.utility, r.mean_quality, r.mean_delay, r.mean_buffering_percent
        );
    }
    let agg = std::fs::File::create(a.common.out.join("sweep.csv")).map_err(Error::from)?;
    write_sweep_aggregate(agg, &cfg, &a.param, &results)?;
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let reports = validate::run_all(a.instances, a.seed, a.inject_failure);
    for r in &reports {
        println!("{}: {}/{}", r.name, r.passed, r.total);
    }
    if let Some(bad) = reports.iter().find(|r| !r.ok()) {
        let witness = serde_json::to_string_pretty(&bad.counterexample).unwrap_or_default();
        return Err(Failure::Run(format!("{} failed; first counterexample:\n{witness}", bad.name)));
    }
    Ok(())
}

fn cmd_topology(c: &Common) -> Result<(), Failure> {
    let cfg = load_config(c)?;
    let world = World::build(&cfg)?;
    for p in write_topology(&c.out, &cfg, &world)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Topology(c) => cmd_topology(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
