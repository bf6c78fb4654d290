//! Configuration-driven sweeps, pulse exports and invariant checks for
//! the `leakfree` library.

pub mod check;
pub mod config;
pub mod output;
pub mod runner;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use config::{ConfigError, RunConfig};
use leakfree::sweep::first_crossing;
use runner::{pulse_trace, run_sweep, Point, Schema};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "leakfree", version, about = "Leakage-correction sweeps, pulse traces and invariant checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// ODE tolerance, overriding tolerances.ode.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the configured parameter and write the sweep table.
    Sweep,
    /// Write pulse traces at the given parameter values (default: output.pulses_at).
    Pulses {
        #[arg(long = "at", value_name = "VALUE")]
        at: Vec<f64>,
    },
    /// Run the invariant suite.
    Check,
}

/// 0 if no point is flagged, 3 if all are, 1 otherwise.
pub fn exit_code(flagged: usize, total: usize) -> i32 {
    match flagged {
        0 => EXIT_OK,
        k if k == total => EXIT_FAILED,
        _ => EXIT_PARTIAL,
    }
}

fn status_name(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_PARTIAL => "partial",
        EXIT_FAILED => "failed",
        _ => "config_error",
    }
}

fn diagnostic(kind: &str, message: &str) -> i32 {
    eprintln!("{}", json!({ "status": kind, "message": message }));
    EXIT_CONFIG
}

/// Config file with command-line overrides applied, validated.
pub fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(tol) = cli.tol {
        cfg.tolerances.ode = tol;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, ConfigError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| ConfigError(e.to_string()))
}

fn write_traces(cfg: &RunConfig, schema: &Schema, values: &[f64], files: &mut Vec<Value>) -> Result<usize, output::OutputError> {
    let mut failed = 0;
    for (k, &v) in values.iter().enumerate() {
        match pulse_trace(cfg, v) {
            Ok(trace) => {
                let path = output::pulses_path(&cfg.output.dir, cfg, k);
                output::write_pulses(&path, cfg, schema, &trace)?;
                if !trace.errors.is_empty() {
                    failed += 1;
                    eprintln!("{}", json!({ "status": "pulse_error", "param": v, "errors": trace.errors }));
                }
                files.push(json!(path.display().to_string()));
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}", json!({ "status": "pulse_error", "param": v, "errors": [e.to_string()] }));
            }
        }
    }
    Ok(failed)
}

fn sweep(cfg: &RunConfig) -> Result<i32, output::OutputError> {
    let (schema, records) = run_sweep(cfg).map_err(|e| output::OutputError::Format(e.0))?;
    let (csv, timing) = output::write_sweep(&cfg.output.dir, cfg, &schema, &records)?;
    let mut files = vec![json!(csv.display().to_string()), json!(timing.display().to_string())];
    let pulse_failures = write_traces(cfg, &schema, &cfg.output.pulses_at, &mut files)?;
    let flagged = records.iter().filter(|r| !r.ok()).count();
    for r in records.iter().filter(|r| !r.ok()) {
        eprintln!("{}", json!({ "status": "point_error", "param": r.param, "message": r.status }));
    }
    let mut code = exit_code(flagged, records.len());
    if code == EXIT_OK && pulse_failures > 0 {
        code = EXIT_PARTIAL;
    }
    let mut summary = Map::new();
    summary.insert("status".into(), json!(status_name(code)));
    summary.insert("command".into(), json!("sweep"));
    summary.insert("config_sha256".into(), json!(cfg.hash()));
    summary.insert("points".into(), json!(records.len()));
    summary.insert("flagged".into(), json!(flagged));
    summary.insert("files".into(), Value::Array(files));
    if let Some(th) = cfg.tolerances.threshold {
        let xs: Vec<f64> = records.iter().map(|r| r.param).collect();
        let crossings: Map<String, Value> = schema
            .series
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let ys: Vec<f64> = records.iter().map(|r| r.infidelity[k]).collect();
                (s.name.to_string(), json!(first_crossing(&xs, &ys, th)))
            })
            .collect();
        summary.insert("threshold".into(), json!(th));
        summary.insert("crossings".into(), Value::Object(crossings));
    }
    println!("{}", Value::Object(summary));
    Ok(code)
}

fn pulses(cfg: &RunConfig, at: &[f64]) -> Result<i32, output::OutputError> {
    let values = if at.is_empty() { cfg.output.pulses_at.clone() } else { at.to_vec() };
    let schema = Schema::new(cfg);
    let mut files = Vec::new();
    let failed = write_traces(cfg, &schema, &values, &mut files)?;
    let code = exit_code(failed, values.len());
    println!("{}", json!({ "status": status_name(code), "command": "pulses", "config_sha256": cfg.hash(), "files": files }));
    Ok(code)
}

/// Run the command line and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => return diagnostic("config_error", e.to_string().trim()),
    };
    let pool = match pool(cli.threads) {
        Ok(p) => p,
        Err(e) => return diagnostic("config_error", &e.0),
    };
    match &cli.command {
        Command::Check => {
            let (seed, tol) = if cli.config.is_some() {
                match load_config(&cli) {
                    Ok(cfg) => (cfg.run.seed, cfg.tolerances.ode),
                    Err(e) => return diagnostic("config_error", &e.0),
                }
            } else {
                (0, cli.tol.unwrap_or(1e-10))
            };
            if !(config::MIN_TOL..=config::MAX_TOL).contains(&tol) {
                return diagnostic("config_error", &format!("--tol must lie in [{:e}, {:e}]", config::MIN_TOL, config::MAX_TOL));
            }
            let results = pool.install(|| check::run_checks(seed, tol));
            for r in &results {
                println!("{r}");
            }
            if results.iter().all(|r| r.pass) {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            }
        }
        Command::Sweep | Command::Pulses { .. } => {
            let cfg = match load_config(&cli) {
                Ok(cfg) => cfg,
                Err(e) => return diagnostic("config_error", &e.0),
            };
            let outcome = match &cli.command {
                Command::Pulses { at } => {
                    for &v in at {
                        if let Err(e) = Point::new(&cfg, v) {
                            return diagnostic("config_error", &format!("{} = {v}: {e}", cfg.sweep.parameter));
                        }
                    }
                    pool.install(|| pulses(&cfg, at))
                }
                _ => pool.install(|| sweep(&cfg)),
            };
            outcome.unwrap_or_else(|e| diagnostic("io_error", &e.to_string()))
        }
    }
}
