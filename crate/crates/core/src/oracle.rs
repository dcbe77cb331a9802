//! Exhaustive ground truth for tiny instances.
//!
//! Every candidate is scored with [`EnergyModel::evaluate_fixed`]; ties are
//! broken towards the lexicographically smallest labeling.

use crate::error::{Error, Result};
use crate::model::{from_fixed, EnergyModel, Labeling};
use crate::trws::FusionProblem;

/// Largest state space the oracle will enumerate.
pub const STATE_CAP: u64 = 1_000_000;

/// An exact minimizer and its fixed-point energy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minimum {
    pub labeling: Labeling,
    pub energy: i64,
}

impl Minimum {
    pub fn cost(&self) -> f64 {
        from_fixed(self.energy)
    }
}

fn enumerate(model: &EnergyModel, lists: &[Vec<usize>]) -> Result<Minimum> {
    let states: f64 = lists.iter().map(|l| l.len() as f64).product();
    if states > STATE_CAP as f64 {
        return Err(Error::TooLarge {
            states,
            cap: STATE_CAP,
        });
    }
    // Sort each list so odometer order is lexicographic in label values.
    let lists: Vec<Vec<usize>> = lists
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.sort_unstable();
            l
        })
        .collect();
    let n = lists.len();
    let mut digits = vec![0usize; n];
    let mut best: Option<Minimum> = None;
    loop {
        let x = Labeling::new((0..n).map(|v| lists[v][digits[v]]).collect());
        let e = model.evaluate_fixed(&x)?;
        if best.as_ref().is_none_or(|b| e < b.energy) {
            best = Some(Minimum {
                labeling: x,
                energy: e,
            });
        }
        // Advance; the last variable is least significant.
        let mut v = n;
        loop {
            if v == 0 {
                return Ok(best.expect("at least one state"));
            }
            v -= 1;
            digits[v] += 1;
            if digits[v] < lists[v].len() {
                break;
            }
            digits[v] = 0;
        }
    }
}

/// Global minimum over all `L^(W·H)` labelings.
pub fn brute_force_map(model: &EnergyModel) -> Result<Minimum> {
    let all: Vec<usize> = (0..model.num_labels()).collect();
    enumerate(model, &vec![all; model.num_vars()])
}

/// Minimum over the candidate product space of a fusion problem.
pub fn brute_force_fusion(model: &EnergyModel, fp: &FusionProblem<'_>) -> Result<Minimum> {
    enumerate(model, fp.candidate_lists())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_random_mrf, GridTopology, LabelUniverse, PairwiseCost};
    use crate::trws::build_fusion_problem;

    #[test]
    fn finds_true_argmin_of_two_variable_example() {
        let m = EnergyModel::new(
            GridTopology::new(2, 1).unwrap(),
            LabelUniverse::new(2).unwrap(),
            vec![0.0, 5.0, 3.0, 1.0],
            PairwiseCost::TruncatedLinear { sigma: 10.0 },
            1.0,
        )
        .unwrap();
        let best = brute_force_map(&m).unwrap();
        // (0,0)=3, (0,1)=2, (1,0)=9, (1,1)=6
        assert_eq!(best.labeling, Labeling::new(vec![0, 1]));
        assert_eq!(best.cost(), 2.0);
    }

    #[test]
    fn zero_energy_prefers_all_zeros() {
        let m = EnergyModel::new(
            GridTopology::new(3, 2).unwrap(),
            LabelUniverse::new(3).unwrap(),
            vec![0.0; 18],
            PairwiseCost::TruncatedLinear { sigma: 1.0 },
            0.0,
        )
        .unwrap();
        let best = brute_force_map(&m).unwrap();
        assert_eq!(best.labeling, Labeling::constant(6, 0));
        assert_eq!(best.energy, 0);
    }

    #[test]
    fn three_by_three_binary_is_fast() {
        let m = build_random_mrf(3, 3, 2, false, 4).unwrap();
        let t = std::time::Instant::now();
        brute_force_map(&m).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn refuses_large_instances() {
        let m = build_random_mrf(4, 4, 3, false, 4).unwrap();
        assert!(matches!(brute_force_map(&m), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn singleton_fusion_returns_current() {
        let m = build_random_mrf(3, 2, 4, false, 6).unwrap();
        let cur = Labeling::new(vec![3, 0, 1, 2, 2, 1]);
        let fp = build_fusion_problem(&m, &cur, &[]).unwrap();
        assert_eq!(brute_force_fusion(&m, &fp).unwrap().labeling, cur);
    }
}
