//! The swarm scheduler: workers, the shared pool, schedules, architecture
//! builders and energy traces.

mod config;
mod pool;
mod runner;
mod trace;

pub use config::{
    cfg_ae, cfg_fm, cfg_hfm, cfg_pae, cfg_pfm, cfg_sf, cfg_sf_mf, cfg_sf_period, cfg_sf_ss,
    Deadline, FinalFusion, IterationStep, Mode, ProposalPlan, Stall, SwarmConfig, Termination,
    DEFAULT_STALL,
};
pub use pool::{SlotSnapshot, SolutionPool};
pub use runner::{
    default_generators, initial_labeling, label_blocks, label_order, run, run_swarm, worker_rng,
    SwarmOutcome,
};
pub use trace::{EnergyTrace, TraceRecord, CSV_HEADER};
