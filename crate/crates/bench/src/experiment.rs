//! Architecture comparisons and parameter sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use log::info;
use swarm_fusion::model::{
    build_random_mrf, default_flow_labels, EnergyModel, FlowParams, StereoParams,
};
use swarm_fusion::swarm::{
    cfg_ae, cfg_fm, cfg_hfm, cfg_pae, cfg_pfm, cfg_sf, cfg_sf_period, cfg_sf_ss, run, ProposalPlan,
    Stall, SwarmConfig, SwarmOutcome,
};

use crate::settings::{Problem, Settings};
use crate::UsageError;

pub const ARCHITECTURES: [&str; 8] = ["ae", "fm", "pae", "pfm", "hfm", "sf-mf", "sf-ss", "sf"];

/// Builds the benchmark instance described by `s`.
pub fn build_problem(s: &Settings) -> Result<EnergyModel> {
    let model = match s.problem {
        Problem::StereoSynth => {
            let d = StereoParams::default();
            StereoParams {
                width: s.width.unwrap_or(d.width),
                height: s.height.unwrap_or(d.height),
                labels: s.labels.unwrap_or(d.labels),
                noise: s.noise.unwrap_or(d.noise),
                seed: s.problem_seed,
                ..d
            }
            .build()?
            .0
        }
        Problem::FlowSynth => {
            let d = FlowParams::default();
            let labels = default_flow_labels(s.labels.unwrap_or(60));
            FlowParams {
                width: s.width.unwrap_or(d.width),
                height: s.height.unwrap_or(d.height),
                noise: s.noise.unwrap_or(d.noise),
                seed: s.problem_seed,
                ..d
            }
            .build(&labels)?
            .0
        }
        Problem::Random => build_random_mrf(
            s.width.unwrap_or(16),
            s.height.unwrap_or(16),
            s.labels.unwrap_or(8),
            s.submodular,
            s.problem_seed,
        )?,
    };
    Ok(model)
}

fn check_beta(beta: usize, threads: usize) -> Result<(), UsageError> {
    if beta > threads.saturating_sub(1) {
        return Err(UsageError(format!(
            "beta = {beta} violates the constraint beta <= N - 1 = {} for N = {threads}",
            threads.saturating_sub(1)
        )));
    }
    Ok(())
}

/// The config of a named architecture under the run settings.
pub fn architecture(name: &str, s: &Settings) -> Result<SwarmConfig, UsageError> {
    let n = s.threads;
    // Stereo uses alpha 4 for SF-SS and (4, 1) for SF, flow
    // uses three proposals and (3, 3).
    let (ss_alpha, sf_alpha, sf_beta) = match s.problem {
        Problem::FlowSynth => (3, 3, 3),
        _ => (4, 4, 1),
    };
    let usage = |e: swarm_fusion::Error| UsageError(format!("{name}: {e}"));
    let cfg = match name {
        "ae" => cfg_ae(),
        "fm" => cfg_fm(),
        "pae" => cfg_pae(n).map_err(usage)?,
        "pfm" => cfg_pfm(n, s.pfm_deadline_ms.map(Duration::from_millis)).map_err(usage)?,
        "hfm" => cfg_hfm(n, s.pregen).map_err(usage)?,
        "sf-mf" => {
            let beta = s.beta.unwrap_or(1);
            check_beta(beta, n)?;
            let mut c = cfg_sf_period(n, 1, beta, s.share_period).map_err(usage)?;
            c.name = "sf-mf".into();
            c
        }
        "sf-ss" => cfg_sf_ss(n, s.alpha.unwrap_or(ss_alpha)).map_err(usage)?,
        "sf" => {
            let beta = s.beta.unwrap_or(sf_beta.min(n.saturating_sub(1)));
            check_beta(beta, n)?;
            cfg_sf(n, s.alpha.unwrap_or(sf_alpha), beta).map_err(usage)?
        }
        _ => {
            return Err(UsageError(format!(
                "unknown architecture `{name}`; valid architectures: {}",
                ARCHITECTURES.join(", ")
            )))
        }
    };
    Ok(finish(cfg, s))
}

fn finish(mut c: SwarmConfig, s: &Settings) -> SwarmConfig {
    c = c.with_budget(Duration::from_millis(s.budget_ms));
    if let Some(k) = s.stall {
        c.termination.stall = match (k, c.termination.stall) {
            (0, _) => Stall::Off,
            (k, Stall::OwnSlot(_)) => Stall::OwnSlot(k),
            (k, _) => Stall::PoolBest(k),
        };
    }
    if s.deterministic {
        c = c.with_deterministic(true);
        c.termination.max_iterations = Some(s.max_iterations.unwrap_or(DETERMINISTIC_ITERATIONS));
    } else if let Some(m) = s.max_iterations {
        c = c.with_max_iterations(m);
    }
    if let (ProposalPlan::Auto, Problem::FlowSynth) = (c.proposals, s.problem) {
        c = c.with_proposals(ProposalPlan::FlowMix { sigma: s.sigma });
    }
    c
}

/// Iteration cap applied in deterministic mode when none is given.
pub const DETERMINISTIC_ITERATIONS: usize = 100;

/// One family of runs (an architecture or a sweep value) over all seeds.
pub struct Family {
    pub label: String,
    pub config: SwarmConfig,
}

pub struct RunRecord {
    pub family: String,
    pub seed: u64,
    pub outcome: SwarmOutcome,
    pub trace_path: PathBuf,
}

/// Runs every family for every seed and writes the traces and the summary.
pub fn run_families(families: &[Family], s: &Settings) -> Result<Vec<RunRecord>> {
    let model = build_problem(s)?;
    fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let mut records = Vec::new();
    for f in families {
        for &seed in &s.seeds {
            let config = f.config.clone().with_seed(seed);
            info!("running {} seed {seed}", f.label);
            let outcome = run(&config, &model).with_context(|| format!("{} seed {seed}", f.label))?;
            let trace_path = s.out.join(format!("{}_seed{seed}.csv", f.label));
            fs::write(&trace_path, outcome.trace.to_csv())
                .with_context(|| format!("writing {}", trace_path.display()))?;
            records.push(RunRecord {
                family: f.label.clone(),
                seed,
                outcome,
                trace_path,
            });
        }
    }
    let summary = summarize(&records);
    let path = s.out.join("summary.csv");
    fs::write(&path, &summary).with_context(|| format!("writing {}", path.display()))?;
    print!("{summary}");
    Ok(records)
}

pub const SUMMARY_HEADER: &str = "family,seed,final_energy,best_energy,target,time_to_target_ms,fusions";

/// Per-run summary. The target of a seed is the weakest family's final
/// energy on that seed.
pub fn summarize(records: &[RunRecord]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        let target = records
            .iter()
            .filter(|o| o.seed == r.seed)
            .map(|o| o.outcome.cost())
            .fold(f64::NEG_INFINITY, f64::max);
        let best = r.outcome.trace.final_best().unwrap_or(f64::NAN);
        let ttt = r
            .outcome
            .trace
            .time_to_target(target)
            .map(|t| format!("{t:.3}"))
            .unwrap_or_default();
        let fusions: usize = r.outcome.iterations.iter().sum();
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{},{}",
            r.family,
            r.seed,
            r.outcome.cost(),
            best,
            target,
            ttt,
            fusions
        );
    }
    out
}

pub fn compare(architectures: &[String], s: &Settings) -> Result<Vec<RunRecord>> {
    let families = architectures
        .iter()
        .map(|a| {
            Ok(Family {
                label: a.clone(),
                config: architecture(a, s)?,
            })
        })
        .collect::<Result<Vec<_>, UsageError>>()?;
    run_families(&families, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Beta,
    ShareFrequency,
    Alpha,
    Threads,
}

impl std::str::FromStr for SweepParam {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "beta" => Ok(Self::Beta),
            "share_frequency" => Ok(Self::ShareFrequency),
            "alpha" => Ok(Self::Alpha),
            "threads" => Ok(Self::Threads),
            _ => Err(UsageError(format!(
                "unknown sweep parameter `{s}`; valid: beta, share_frequency, alpha, threads"
            ))),
        }
    }
}

/// Families of a sweep. Beta and share frequency vary the SF-MF schedule,
/// alpha varies SF-SS, threads runs SF-MF with beta = N - 1.
pub fn sweep_families(
    param: SweepParam,
    values: &[usize],
    s: &Settings,
) -> Result<Vec<Family>, UsageError> {
    let mut families = Vec::new();
    for &v in values {
        let (label, config) = match param {
            SweepParam::Beta => {
                check_beta(v, s.threads)?;
                let mut t = s.clone();
                t.beta = Some(v);
                (format!("beta{v}"), architecture("sf-mf", &t)?)
            }
            SweepParam::ShareFrequency => {
                if v == 0 {
                    return Err(UsageError("share frequency must be at least 1".into()));
                }
                let mut t = s.clone();
                t.share_period = v;
                (format!("k{v}"), architecture("sf-mf", &t)?)
            }
            SweepParam::Alpha => {
                if v == 0 {
                    return Err(UsageError("alpha must be at least 1".into()));
                }
                let mut t = s.clone();
                t.alpha = Some(v);
                (format!("alpha{v}"), architecture("sf-ss", &t)?)
            }
            SweepParam::Threads => {
                if v == 0 {
                    return Err(UsageError("thread count must be at least 1".into()));
                }
                let mut t = s.clone();
                t.threads = v;
                let c = cfg_sf_period(v, 1, v - 1, s.share_period)
                    .map_err(|e| UsageError(e.to_string()))?;
                (format!("threads{v}"), finish(c, &t))
            }
        };
        families.push(Family { label, config });
    }
    Ok(families)
}

pub fn sweep(param: SweepParam, values: &[usize], s: &Settings) -> Result<Vec<RunRecord>> {
    let families = sweep_families(param, values, s)?;
    run_families(&families, s)
}

/// Trace files of a directory, sorted by name.
pub fn traces_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name().is_some_and(|n| n != "summary.csv")
        })
        .collect();
    v.sort();
    Ok(v)
}
