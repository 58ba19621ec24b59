use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use twotier::analytics::MobilityKind;
use twotier::config::RunConfig;
use twotier::deployment::{sample_with, SampleOptions};
use twotier::experiments::{
    bounds_csv, metrics_csv, mixing_csv, queue_table, ratio_summary, run_with_trace, standalone_sweep, sweep,
    write_run, write_sweep,
};
use twotier::metrics::Window;
use twotier::secondary_mobile::StandaloneParams;
use twotier::{Error, Result};

#[derive(Parser)]
#[command(name = "twotier", version, about = "Two-tier primary/secondary network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Iid,
    Rw,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a deployment and write it as text.
    Deploy {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Split secondary pairs into two mobility classes.
        #[arg(long)]
        mobile: bool,
        #[arg(long)]
        fixed_count: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configuration.
    Run {
        /// Config file (`key = value` lines); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` overrides, applied after the file.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep one parameter and report ratio stability of each law.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Secondary tier alone with two-hop relaying, swept over `m`.
    Standalone {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',')]
        m: Vec<f64>,
        #[arg(long, default_value_t = 5e-4)]
        lambda: f64,
        #[arg(long, default_value_t = 640)]
        warmup: u64,
        #[arg(long, default_value_t = 20_000)]
        measure: u64,
        #[arg(long, default_value_t = 50_000_000)]
        drain_cap: u64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate unit-constant predictions over `n`.
    Bounds {
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        /// RW-cell area for the walk laws (default `1/m`).
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separation profiles and threshold times of the walk.
    Mixing {
        #[arg(long, value_delimiter = ',')]
        s: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Queue-delay formula against the discrete queue.
    Queue {
        /// `p:q` pairs.
        #[arg(long, value_delimiter = ',', default_value = "0.5:1,0.5:0.9,0.8:0.95")]
        pairs: Vec<String>,
        #[arg(long, default_value_t = 16.0)]
        tau: f64,
        #[arg(long, default_value_t = 1_000_000)]
        periods: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Option<PathBuf>, set: &[String]) -> Result<RunConfig> {
    let mut text = match config {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    for kv in set {
        text.push('\n');
        text.push_str(kv);
    }
    RunConfig::parse(&text)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

/// Ok(true) when every invariant held.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Deploy { n, beta, seed, mobile, fixed_count, out } => {
            let opts = SampleOptions { fixed_count, mobile_classes: mobile };
            let dep = sample_with(n, beta, seed, opts)?;
            emit(&out, &dep.export_text(opts))?;
            Ok(true)
        }
        Cmd::Run { config, set, output } => {
            let mut cfg = load(&config, &set)?;
            if output.is_some() {
                cfg.output = output;
            }
            let out = run_with_trace(&cfg)?;
            if let Some(dir) = &cfg.output {
                write_run(dir, &out)?;
            }
            println!("{}", json(&out.metrics));
            for d in &out.metrics.diagnostics {
                eprintln!("invariant violated: {d}");
            }
            Ok(!out.metrics.failed())
        }
        Cmd::Sweep { config, set, param, values, seeds, output } => {
            let cfg = load(&config, &set)?;
            let rep = sweep(&cfg, &param, &values, &seeds)?;
            if let Some(dir) = &output {
                write_sweep(dir, &rep, Some(metrics_csv(&rep.runs)))?;
            }
            print!("{}", ratio_summary(&rep));
            let mut ok = true;
            for r in rep.runs.iter().filter(|r| r.failed()) {
                ok = false;
                eprintln!("n = {} seed {}: {:?}", r.n, r.seed, r.diagnostics);
            }
            Ok(ok)
        }
        Cmd::Standalone { kind, m, lambda, warmup, measure, drain_cap, seeds, output } => {
            let kind = match kind {
                Kind::Iid => MobilityKind::Iid,
                Kind::Rw => MobilityKind::RandomWalk,
            };
            let params = StandaloneParams { kind, lambda, window: Window { warmup, measure }, drain_cap };
            let rep = standalone_sweep(kind, &m, &params, &seeds)?;
            if let Some(dir) = &output {
                write_sweep(dir, &rep, None)?;
            }
            print!("{}", ratio_summary(&rep));
            Ok(true)
        }
        Cmd::Bounds { n, beta, s, out } => {
            emit(&out, &bounds_csv(&n, beta, s.unwrap_or(f64::NAN))?)?;
            Ok(true)
        }
        Cmd::Mixing { s, out } => {
            emit(&out, &mixing_csv(&s)?)?;
            Ok(true)
        }
        Cmd::Queue { pairs, tau, periods, seed, out } => {
            let parsed: Vec<(f64, f64)> = pairs
                .iter()
                .map(|s| {
                    let (p, q) = s
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidParameter(format!("pair `{s}` is not p:q")))?;
                    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{v}`")));
                    Ok((num(p)?, num(q)?))
                })
                .collect::<Result<_>>()?;
            let rows = queue_table(&parsed, tau, periods, seed)?;
            let mut text = String::from("model,p,q,tau,predicted,simulated,rel_error\n");
            for r in rows {
                let model = match r.model {
                    MobilityKind::Iid => "iid",
                    MobilityKind::RandomWalk => "rw",
                };
                text.push_str(&format!(
                    "{model},{},{},{},{},{},{}\n",
                    r.p, r.q, r.tau, r.predicted, r.simulated, r.rel_error
                ));
            }
            emit(&out, &text)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
