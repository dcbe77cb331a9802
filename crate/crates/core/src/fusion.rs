//! Fusion dispatch: picks graph cut, QPBO or TRW-S for one fusion request.

use crate::error::Result;
use crate::maxflow::{binary_fusion_graphcut, is_submodular_fusion};
use crate::model::{check_all, EnergyModel, Labeling};
use crate::qpbo::binary_fusion_qpbo;
use crate::trws::{multiway_fusion, TrwsOptions};

/// How to fuse two or more candidates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FusionPolicy {
    /// One multi-way TRW-S fusion over all candidates.
    #[default]
    Multiway,
    /// Successive binary fusions, one per candidate, in order.
    SequentialBinary,
}

/// Which solver produced a fusion result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// No candidates.
    Identity,
    GraphCut,
    Qpbo,
    Trws,
    /// Sequential binary fusions; each step was graph cut or QPBO.
    Sequential,
}

/// Binary fusion routed by a per-instance submodularity test.
pub fn fuse_binary(
    model: &EnergyModel,
    current: &Labeling,
    proposal: &Labeling,
) -> Result<(Labeling, Route)> {
    if is_submodular_fusion(model, current, proposal)? {
        Ok((binary_fusion_graphcut(model, current, proposal)?, Route::GraphCut))
    } else {
        Ok((binary_fusion_qpbo(model, current, proposal)?, Route::Qpbo))
    }
}

/// Fuses `candidates` into `current`, reporting the route taken.
///
/// The result never has higher energy than `current`; should a solver return
/// a worse labeling, `current` is kept.
pub fn fuse_detailed(
    model: &EnergyModel,
    current: &Labeling,
    candidates: &[Labeling],
    policy: FusionPolicy,
    trws: TrwsOptions,
) -> Result<(Labeling, Route)> {
    check_all(model, std::iter::once(current).chain(candidates))?;
    let (fused, route) = match (candidates, policy) {
        ([], _) => return Ok((current.clone(), Route::Identity)),
        ([single], _) => fuse_binary(model, current, single)?,
        (many, FusionPolicy::SequentialBinary) => {
            let mut x = current.clone();
            for c in many {
                x = fuse_binary(model, &x, c)?.0;
            }
            (x, Route::Sequential)
        }
        (many, FusionPolicy::Multiway) => (multiway_fusion(model, current, many, trws)?, Route::Trws),
    };
    if model.energy_fixed(fused.as_slice()) > model.energy_fixed(current.as_slice()) {
        return Ok((current.clone(), route));
    }
    Ok((fused, route))
}

/// Fuses `candidates` into `current` with default TRW-S settings.
pub fn fuse(
    model: &EnergyModel,
    current: &Labeling,
    candidates: &[Labeling],
    policy: FusionPolicy,
) -> Result<Labeling> {
    fuse_detailed(model, current, candidates, policy, TrwsOptions::default()).map(|(l, _)| l)
}
