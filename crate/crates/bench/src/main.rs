use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use swarm_bench::experiment::{compare, sweep, SweepParam};
use swarm_bench::plot::{render, View};
use swarm_bench::settings::{parse_config, parse_list, Settings};
use swarm_bench::{UsageError, DETERMINISTIC_ENV};
use swarm_fusion::swarm::EnergyTrace;

#[derive(Parser)]
#[command(name = "swarm-bench", version, about = "Swarm fusion benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run several architectures on one problem.
    Compare {
        /// Comma-separated architectures: ae, fm, pae, pfm, hfm, sf-mf, sf-ss, sf.
        #[arg(long, default_value = "ae,sf-mf")]
        arch: String,
        #[command(flatten)]
        common: Common,
    },
    /// Vary one parameter of the swarm schedule.
    Sweep {
        /// beta, share_frequency, alpha or threads.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Plot trace CSVs as SVG.
    Plot {
        /// Trace files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
        /// One line per worker instead of the best energy per trace.
        #[arg(long)]
        per_worker: bool,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// stereo-synth, flow-synth or random.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    budget_ms: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
            s.apply(&parse_config(&text)?)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            s.set(k.trim(), v.trim())?;
        }
        if let Some(p) = &self.problem {
            s.problem = p.parse()?;
        }
        if let Some(b) = self.budget_ms {
            s.budget_ms = b;
        }
        if let Some(v) = &self.seeds {
            s.seeds = parse_list("seeds", v)?;
        }
        if let Some(t) = self.threads {
            s.threads = t;
        }
        if let Some(o) = &self.out {
            s.out = o.clone();
        }
        if std::env::var(DETERMINISTIC_ENV).is_ok_and(|v| !v.is_empty() && v != "0") {
            s.deterministic = true;
        }
        s.validate()?;
        Ok(s)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compare { arch, common } => {
            let s = common.settings()?;
            let archs: Vec<String> = parse_list("arch", &arch)?;
            compare(&archs, &s)?;
        }
        Command::Sweep {
            param,
            values,
            common,
        } => {
            let s = common.settings()?;
            let param: SweepParam = param.parse()?;
            let values: Vec<usize> = parse_list("values", &values)?;
            sweep(param, &values, &s)?;
        }
        Command::Plot {
            traces,
            out,
            per_worker,
        } => {
            let mut loaded = Vec::new();
            for path in &traces {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let trace = EnergyTrace::from_csv(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                loaded.push((name, trace));
            }
            let view = if per_worker { View::PerWorker } else { View::Global };
            fs::write(&out, render(&loaded, view))
                .with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
