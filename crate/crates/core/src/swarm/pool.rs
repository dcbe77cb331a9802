//! The shared solution pool: one slot per worker.

use parking_lot::RwLock;
use rand::seq::index;

use crate::error::{contract, Result};
use crate::model::{from_fixed, EnergyModel, Labeling};
use crate::SwarmRng;

#[derive(Debug, Clone)]
struct Slot {
    labeling: Option<Labeling>,
    energy: i64,
    version: u64,
}

/// A consistent copy of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSnapshot {
    pub slot: usize,
    pub labeling: Labeling,
    /// Fixed-point energy.
    pub energy: i64,
    pub version: u64,
}

impl SlotSnapshot {
    pub fn cost(&self) -> f64 {
        from_fixed(self.energy)
    }
}

/// N reader-writer guarded slots holding (labeling, energy, version).
///
/// Slot `i` may only be written by worker `i`. Reads return copies, so later
/// writes never show through a labeling already handed out.
pub struct SolutionPool<'m> {
    model: &'m EnergyModel,
    slots: Vec<RwLock<Slot>>,
}

impl<'m> SolutionPool<'m> {
    /// An empty pool with `size` slots at version 0.
    pub fn new(model: &'m EnergyModel, size: usize) -> Result<Self> {
        if size == 0 {
            return contract("a solution pool needs at least one slot");
        }
        let slots = (0..size)
            .map(|_| {
                RwLock::new(Slot {
                    labeling: None,
                    energy: i64::MAX,
                    version: 0,
                })
            })
            .collect();
        Ok(Self { model, slots })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn model(&self) -> &'m EnergyModel {
        self.model
    }

    /// Replaces slot `slot` on behalf of worker `caller` and returns the new
    /// version. `energy` is the fixed-point energy of `labeling`.
    pub fn publish(
        &self,
        caller: usize,
        slot: usize,
        labeling: Labeling,
        energy: i64,
    ) -> Result<u64> {
        if slot >= self.slots.len() {
            return contract(format!("slot {slot} outside a pool of {}", self.slots.len()));
        }
        if caller != slot {
            return contract(format!("worker {caller} may not write slot {slot}"));
        }
        self.model.check(&labeling)?;
        debug_assert_eq!(self.model.energy_fixed(labeling.as_slice()), energy);
        let mut s = self.slots[slot].write();
        s.labeling = Some(labeling);
        s.energy = energy;
        s.version += 1;
        Ok(s.version)
    }

    /// Copy of one slot, or `None` before its first publish.
    pub fn snapshot(&self, slot: usize) -> Option<SlotSnapshot> {
        let s = self.slots.get(slot)?.read();
        s.labeling.as_ref().map(|l| SlotSnapshot {
            slot,
            labeling: l.clone(),
            energy: s.energy,
            version: s.version,
        })
    }

    pub fn version(&self, slot: usize) -> u64 {
        self.slots[slot].read().version
    }

    /// Fixed-point energy of every published slot.
    pub fn energies(&self) -> Vec<Option<i64>> {
        self.slots
            .iter()
            .map(|s| {
                let s = s.read();
                s.labeling.as_ref().map(|_| s.energy)
            })
            .collect()
    }

    /// The lowest-energy slot; ties go to the lowest slot index.
    pub fn best(&self) -> Option<SlotSnapshot> {
        (0..self.slots.len())
            .filter_map(|i| self.snapshot(i))
            .min_by_key(|s| (s.energy, s.slot))
    }

    /// `k` distinct slots other than `exclude`, drawn uniformly without
    /// replacement, returned in draw order.
    pub fn sample(&self, k: usize, rng: &mut SwarmRng, exclude: usize) -> Result<Vec<SlotSnapshot>> {
        let n = self.slots.len();
        if exclude >= n {
            return contract(format!("slot {exclude} outside a pool of {n}"));
        }
        if k > n - 1 {
            return contract(format!(
                "cannot sample {k} peers from a pool of {n} (at most {})",
                n - 1
            ));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        index::sample(rng, n - 1, k)
            .into_iter()
            .map(|i| if i >= exclude { i + 1 } else { i })
            .map(|i| match self.snapshot(i) {
                Some(s) => Ok(s),
                None => contract(format!("slot {i} has not been initialized")),
            })
            .collect()
    }
}
