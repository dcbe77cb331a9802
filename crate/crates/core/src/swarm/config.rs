//! Swarm configuration and the architecture builders.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::fusion::FusionPolicy;
use crate::trws::TrwsOptions;

/// One step of a worker's cyclic schedule: fuse `alpha` fresh proposals and
/// `beta` peer solutions into the current labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IterationStep {
    pub alpha: usize,
    pub beta: usize,
}

impl IterationStep {
    pub const fn new(alpha: usize, beta: usize) -> Self {
        Self { alpha, beta }
    }

    /// A step with nothing to fuse is skipped.
    pub fn is_active(&self) -> bool {
        self.alpha + self.beta > 0
    }
}

/// Which proposals the default generators produce.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ProposalPlan {
    /// Flow mix on vector-payload models, constant labels otherwise.
    #[default]
    Auto,
    /// Every worker cycles the full label order, starting at its own offset.
    ConstantLabels,
    /// Worker `i` cycles the `i`-th contiguous block of the label order.
    ConstantLabelBlocks,
    /// Shift, stagger, perturb and constant proposals, mixed uniformly.
    FlowMix { sigma: f64 },
    /// Uniformly random labelings.
    RandomLabels,
}

/// When the workers stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stall {
    Off,
    /// Stop everyone after this many consecutive fusions, over all workers,
    /// without a new pool best.
    PoolBest(usize),
    /// Each worker stops after this many consecutive fusions that leave its
    /// own slot unchanged in energy.
    OwnSlot(usize),
}

/// Point in time at which workers stop so the final fusion can start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deadline {
    After(Duration),
    FractionOfBudget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination {
    /// Wall-clock budget for the whole run.
    pub budget: Duration,
    /// Cap on schedule steps per worker.
    pub max_iterations: Option<usize>,
    pub stall: Stall,
    /// Earlier stop for the iterative phase.
    pub work_deadline: Option<Deadline>,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            budget: Duration::from_secs(10),
            max_iterations: None,
            stall: Stall::PoolBest(DEFAULT_STALL),
            work_deadline: None,
        }
    }
}

pub const DEFAULT_STALL: usize = 20;

/// Fusion performed by worker 0 after the iterative phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinalFusion {
    #[default]
    None,
    /// Binary fusions of the best slot with every other slot, in slot order.
    Sequential,
    /// One multi-way fusion of the best slot with all other slots.
    Multiway,
}

/// How workers organize their fusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Every worker loops its schedule.
    #[default]
    Iterative,
    /// `pregen` proposals are generated up front and fused pairwise up a
    /// binary tree, one level at a time.
    Hierarchical { pregen: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub name: String,
    pub threads: usize,
    /// Cyclic; worker iterations run through it in order.
    pub schedule: Vec<IterationStep>,
    pub proposals: ProposalPlan,
    /// Label order for constant-label proposals; a seeded random permutation
    /// when absent.
    pub label_order: Option<Vec<usize>>,
    pub policy: FusionPolicy,
    pub trws: TrwsOptions,
    pub termination: Termination,
    pub seed: u64,
    pub final_fusion: FinalFusion,
    pub mode: Mode,
    /// Round-robin lock-step execution in place of free-running threads.
    pub deterministic: bool,
}

impl SwarmConfig {
    fn base(name: &str, threads: usize, schedule: Vec<IterationStep>) -> Self {
        Self {
            name: name.to_string(),
            threads,
            schedule,
            proposals: ProposalPlan::Auto,
            label_order: None,
            policy: FusionPolicy::Multiway,
            trws: TrwsOptions::default(),
            termination: Termination::default(),
            seed: 0,
            final_fusion: FinalFusion::None,
            mode: Mode::Iterative,
            deterministic: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.termination.budget = budget;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.termination.max_iterations = Some(n);
        self
    }

    pub fn with_stall(mut self, stall: Stall) -> Self {
        self.termination.stall = stall;
        self
    }

    pub fn with_proposals(mut self, plan: ProposalPlan) -> Self {
        self.proposals = plan;
        self
    }

    pub fn with_label_order(mut self, order: Vec<usize>) -> Self {
        self.label_order = Some(order);
        self
    }

    pub fn with_deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.threads == 0 {
            return bad("thread count must be at least 1".into());
        }
        if self.schedule.is_empty() {
            return bad("schedule must not be empty".into());
        }
        if !self.schedule.iter().any(IterationStep::is_active) {
            return bad("schedule has no step with alpha + beta >= 1".into());
        }
        if let Some(s) = self.schedule.iter().find(|s| s.beta > self.threads - 1) {
            return bad(format!(
                "beta = {} exceeds N - 1 = {} peer solutions",
                s.beta,
                self.threads - 1
            ));
        }
        if let Mode::Hierarchical { pregen } = self.mode {
            if pregen == 0 {
                return bad("hierarchical fusion needs at least one proposal".into());
            }
        }
        match self.termination.work_deadline {
            Some(Deadline::FractionOfBudget(f)) if !(0.0..=1.0).contains(&f) => {
                return bad(format!("deadline fraction {f} outside [0, 1]"))
            }
            _ => {}
        }
        if let ProposalPlan::FlowMix { sigma } = self.proposals {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return bad(format!("invalid proposal sigma {sigma}"));
            }
        }
        Ok(())
    }

    /// Number of internal fusions of the hierarchical tree.
    pub fn tree_fusions(&self) -> usize {
        match self.mode {
            Mode::Hierarchical { pregen } => pregen.saturating_sub(1),
            Mode::Iterative => 0,
        }
    }
}

fn validated(c: SwarmConfig) -> Result<SwarmConfig> {
    c.validate()?;
    Ok(c)
}

fn repeat(step: IterationStep, k: usize) -> Vec<IterationStep> {
    vec![step; k]
}

/// Alpha expansion: one worker fusing one constant-label proposal per step.
pub fn cfg_ae() -> SwarmConfig {
    SwarmConfig::base("ae", 1, vec![IterationStep::new(1, 0)])
        .with_proposals(ProposalPlan::ConstantLabels)
}

/// Fusion move: one worker fusing one proposal per step.
pub fn cfg_fm() -> SwarmConfig {
    SwarmConfig::base("fm", 1, vec![IterationStep::new(1, 0)])
}

/// Parallel alpha expansion: worker `i` expands over its own block of the
/// label order, then worker 0 fuses all slots sequentially.
pub fn cfg_pae(threads: usize) -> Result<SwarmConfig> {
    let mut c = SwarmConfig::base("pae", threads, vec![IterationStep::new(1, 0)])
        .with_proposals(ProposalPlan::ConstantLabelBlocks)
        .with_stall(Stall::OwnSlot(DEFAULT_STALL));
    c.final_fusion = FinalFusion::Sequential;
    validated(c)
}

/// Parallel fusion move: independent fusion-move workers until the deadline,
/// then a sequential fusion of all slots. Without a deadline the final fusion
/// starts at 90% of the budget.
pub fn cfg_pfm(threads: usize, deadline: Option<Duration>) -> Result<SwarmConfig> {
    let mut c = SwarmConfig::base("pfm", threads, vec![IterationStep::new(1, 0)])
        .with_stall(Stall::Off);
    c.final_fusion = FinalFusion::Sequential;
    c.termination.work_deadline = Some(match deadline {
        Some(d) => Deadline::After(d),
        None => Deadline::FractionOfBudget(0.9),
    });
    validated(c)
}

/// Hierarchical fusion move over `pregen` proposals generated up front.
pub fn cfg_hfm(threads: usize, pregen: usize) -> Result<SwarmConfig> {
    let mut c = SwarmConfig::base("hfm", threads, vec![IterationStep::new(2, 0)]);
    c.mode = Mode::Hierarchical { pregen };
    c.policy = FusionPolicy::SequentialBinary;
    validated(c)
}

/// Swarm fusion without multi-way fusion: four single-proposal steps, then
/// one step fusing a single peer solution.
pub fn cfg_sf_mf(threads: usize) -> Result<SwarmConfig> {
    cfg_sf_period(threads, 1, 1, 4).map(|c| SwarmConfig {
        name: "sf-mf".into(),
        ..c
    })
}

/// Swarm fusion without sharing: `alpha` proposals per multi-way fusion and
/// a final multi-way fusion of all slots.
pub fn cfg_sf_ss(threads: usize, alpha: usize) -> Result<SwarmConfig> {
    let mut c = SwarmConfig::base("sf-ss", threads, vec![IterationStep::new(alpha, 0)])
        .with_stall(Stall::OwnSlot(DEFAULT_STALL));
    c.final_fusion = FinalFusion::Multiway;
    validated(c)
}

/// Full swarm fusion: four steps of `alpha` proposals, then one step of
/// `beta` peer solutions.
pub fn cfg_sf(threads: usize, alpha: usize, beta: usize) -> Result<SwarmConfig> {
    cfg_sf_period(threads, alpha, beta, 4)
}

/// `k` proposal steps of `alpha` between consecutive sharing steps of `beta`.
/// With `beta = 0` the sharing step is dropped.
pub fn cfg_sf_period(threads: usize, alpha: usize, beta: usize, k: usize) -> Result<SwarmConfig> {
    if alpha == 0 && k > 0 {
        return Err(Error::Config("alpha must be at least 1".into()));
    }
    let mut schedule = repeat(IterationStep::new(alpha, 0), k);
    if beta > 0 {
        schedule.push(IterationStep::new(0, beta));
    }
    validated(SwarmConfig::base("sf", threads, schedule))
}
