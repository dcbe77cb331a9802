//! Parallel MAP inference for grid MRFs by swarm fusion.
//!
//! Several workers each keep a labeling and repeatedly fuse it with freshly
//! generated proposals and with solutions borrowed from their peers through
//! a shared pool. Binary fusions run on graph cuts (submodular) or QPBO
//! (non-submodular); fusions of more than two candidates run TRW-S.

pub mod error;
pub mod fusion;
pub mod maxflow;
pub mod model;
pub mod oracle;
pub mod proposals;
pub mod qpbo;
pub mod swarm;
pub mod trws;

pub use error::{Error, Result};
pub use fusion::{fuse, FusionPolicy};
pub use model::{EnergyModel, Labeling};

/// Random number generator used by workers and generators.
pub type SwarmRng = rand_chacha::ChaCha8Rng;
