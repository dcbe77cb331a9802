//! Run settings: `key = value` config files merged with command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    StereoSynth,
    FlowSynth,
    Random,
}

impl Problem {
    pub const NAMES: [&'static str; 3] = ["stereo-synth", "flow-synth", "random"];

    pub fn name(self) -> &'static str {
        match self {
            Problem::StereoSynth => "stereo-synth",
            Problem::FlowSynth => "flow-synth",
            Problem::Random => "random",
        }
    }
}

impl FromStr for Problem {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "stereo-synth" => Ok(Problem::StereoSynth),
            "flow-synth" => Ok(Problem::FlowSynth),
            "random" => Ok(Problem::Random),
            _ => Err(UsageError(format!(
                "unknown problem `{s}`; valid problems: {}",
                Problem::NAMES.join(", ")
            ))),
        }
    }
}

/// Every tunable of a benchmark run. Unset sizes fall back to the problem's
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub problem: Problem,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub labels: Option<usize>,
    pub noise: Option<f64>,
    pub submodular: bool,
    pub problem_seed: u64,
    pub budget_ms: u64,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
    pub share_period: usize,
    pub pregen: usize,
    pub pfm_deadline_ms: Option<u64>,
    pub sigma: f64,
    pub stall: Option<usize>,
    pub max_iterations: Option<usize>,
    pub deterministic: bool,
    pub out: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            problem: Problem::StereoSynth,
            width: None,
            height: None,
            labels: None,
            noise: None,
            submodular: false,
            problem_seed: 1,
            budget_ms: 10_000,
            seeds: vec![0],
            threads: 4,
            alpha: None,
            beta: None,
            share_period: 4,
            pregen: 250,
            pfm_deadline_ms: None,
            sigma: 1.0,
            stall: None,
            max_iterations: None,
            deterministic: false,
            out: PathBuf::from("bench-out"),
        }
    }
}

pub const KEYS: [&str; 20] = [
    "problem",
    "width",
    "height",
    "labels",
    "noise",
    "submodular",
    "problem_seed",
    "budget_ms",
    "seeds",
    "threads",
    "alpha",
    "beta",
    "share_period",
    "pregen",
    "pfm_deadline_ms",
    "sigma",
    "stall",
    "max_iterations",
    "deterministic",
    "out",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored; later duplicates win.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError(format!(
                "config line {}: expected `key = value`",
                i + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(UsageError(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError> {
    v.parse()
        .map_err(|_| UsageError(format!("invalid value `{v}` for `{key}`")))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, UsageError> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(UsageError(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, UsageError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(UsageError(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

impl Settings {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), UsageError> {
        match key {
            "problem" => self.problem = v.parse()?,
            "width" => self.width = Some(parse(key, v)?),
            "height" => self.height = Some(parse(key, v)?),
            "labels" => self.labels = Some(parse(key, v)?),
            "noise" => self.noise = Some(parse(key, v)?),
            "submodular" => self.submodular = parse_bool(key, v)?,
            "problem_seed" => self.problem_seed = parse(key, v)?,
            "budget_ms" => self.budget_ms = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "alpha" => self.alpha = Some(parse(key, v)?),
            "beta" => self.beta = Some(parse(key, v)?),
            "share_period" => self.share_period = parse(key, v)?,
            "pregen" => self.pregen = parse(key, v)?,
            "pfm_deadline_ms" => self.pfm_deadline_ms = Some(parse(key, v)?),
            "sigma" => self.sigma = parse(key, v)?,
            "stall" => {
                self.stall = match v {
                    "off" => Some(0),
                    _ => Some(parse(key, v)?),
                }
            }
            "max_iterations" => self.max_iterations = Some(parse(key, v)?),
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(UsageError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<(), UsageError> {
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.threads == 0 {
            return Err(UsageError("threads must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(UsageError("at least one seed is required".into()));
        }
        if self.share_period == 0 {
            return Err(UsageError("share_period must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(UsageError(format!("invalid sigma {}", self.sigma)));
        }
        Ok(())
    }
}
