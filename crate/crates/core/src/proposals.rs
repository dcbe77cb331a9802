//! Proposal generators: pluggable sources of candidate labelings.
//!
//! Shift, stagger and perturb operate on flow-style models whose labels carry
//! 2D vector payloads; displaced vectors snap back to the nearest label.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{contract, Result};
use crate::model::{EnergyModel, Labeling};
use crate::SwarmRng;

/// A source of proposal labelings. Implementations must return labelings
/// valid for `model` and be deterministic given the rng state.
pub trait ProposalGenerator: Send {
    fn name(&self) -> &str;

    fn generate(
        &mut self,
        model: &EnergyModel,
        current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling>;

    /// Number of calls after which the output sequence repeats, for
    /// generators that ignore the rng.
    fn cycle_len(&self) -> Option<usize> {
        None
    }
}

/// Emits constant labelings, cycling through a fixed label order.
#[derive(Debug, Clone)]
pub struct ConstantLabels {
    order: Vec<usize>,
    cursor: usize,
}

impl ConstantLabels {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Starts the cycle at position `offset` of the order.
    pub fn starting_at(mut self, offset: usize) -> Self {
        self.cursor = offset % self.order.len();
        self
    }
}

/// Constant-label proposals in the given order. The order may be any
/// non-empty list of distinct labels (a full permutation for expansion, a
/// block of one for parallel expansion).
pub fn constant_label_generator(order: Vec<usize>) -> Result<ConstantLabels> {
    if order.is_empty() {
        return contract("constant label order must not be empty");
    }
    let mut sorted = order.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != order.len() {
        return contract("constant label order must not repeat labels");
    }
    Ok(ConstantLabels { order, cursor: 0 })
}

impl ProposalGenerator for ConstantLabels {
    fn name(&self) -> &str {
        "constant"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        _current: &Labeling,
        _rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        let label = self.order[self.cursor];
        if label >= model.num_labels() {
            return contract(format!("constant label {label} outside the label universe"));
        }
        self.cursor = (self.cursor + 1) % self.order.len();
        Ok(Labeling::constant(model.num_vars(), label))
    }

    fn cycle_len(&self) -> Option<usize> {
        Some(self.order.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Translates the current labeling by a random axis, amount and direction,
/// replicating border pixels.
#[derive(Debug, Clone)]
pub struct Shift {
    amounts: Vec<usize>,
    axes: Vec<Axis>,
}

pub fn shift_generator(amounts: Vec<usize>, axes: Vec<Axis>) -> Result<Shift> {
    if amounts.is_empty() || axes.is_empty() {
        return contract("shift generator needs at least one amount and one axis");
    }
    Ok(Shift { amounts, axes })
}

impl Default for Shift {
    fn default() -> Self {
        Self {
            amounts: vec![1, 2, 3],
            axes: vec![Axis::X, Axis::Y],
        }
    }
}

/// `current` translated by `(dx, dy)`: `out(x, y) = current(x - dx, y - dy)`
/// with source coordinates clamped to the grid.
pub fn translate(model: &EnergyModel, current: &Labeling, dx: isize, dy: isize) -> Labeling {
    let topo = model.topology();
    let (w, h) = (topo.width() as isize, topo.height() as isize);
    let mut out = Vec::with_capacity(current.len());
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).clamp(0, w - 1);
            let sy = (y - dy).clamp(0, h - 1);
            out.push(current[(sy * w + sx) as usize]);
        }
    }
    Labeling::new(out)
}

fn require_vectors(model: &EnergyModel, who: &str) -> Result<()> {
    if model.labels().vectors().is_none() {
        return contract(format!("{who} proposals need vector label payloads"));
    }
    Ok(())
}

impl ProposalGenerator for Shift {
    fn name(&self) -> &str {
        "shift"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        require_vectors(model, "shift")?;
        model.check(current)?;
        let axis = *self.axes.choose(rng).expect("non-empty");
        let amount = *self.amounts.choose(rng).expect("non-empty") as isize;
        let signed = if rng.gen::<bool>() { amount } else { -amount };
        Ok(match axis {
            Axis::X => translate(model, current, signed, 0),
            Axis::Y => translate(model, current, 0, signed),
        })
    }
}

/// Adds one Gaussian displacement to every variable's flow vector.
#[derive(Debug, Clone)]
pub struct Stagger {
    sigma: f64,
}

pub fn stagger_generator(sigma: f64) -> Result<Stagger> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return contract("stagger sigma must be finite and non-negative");
    }
    Ok(Stagger { sigma })
}

impl ProposalGenerator for Stagger {
    fn name(&self) -> &str {
        "stagger"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        require_vectors(model, "stagger")?;
        model.check(current)?;
        if self.sigma == 0.0 {
            return Ok(current.clone());
        }
        let normal = Normal::new(0.0, self.sigma).expect("valid sigma");
        let d = [normal.sample(rng), normal.sample(rng)];
        let labels = model.labels();
        let table = labels.vectors().expect("checked");
        let snapped: Vec<usize> = table
            .iter()
            .map(|p| labels.nearest_vector([p[0] + d[0], p[1] + d[1]]).expect("checked"))
            .collect();
        Ok(Labeling::new(current.iter().map(|&l| snapped[l]).collect()))
    }
}

/// Adds an independent Gaussian displacement to each variable's flow vector.
#[derive(Debug, Clone)]
pub struct Perturb {
    sigma: f64,
}

pub fn perturb_generator(sigma: f64) -> Result<Perturb> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return contract("perturb sigma must be finite and non-negative");
    }
    Ok(Perturb { sigma })
}

impl ProposalGenerator for Perturb {
    fn name(&self) -> &str {
        "perturb"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        require_vectors(model, "perturb")?;
        model.check(current)?;
        if self.sigma == 0.0 {
            return Ok(current.clone());
        }
        let normal = Normal::new(0.0, self.sigma).expect("valid sigma");
        let labels = model.labels();
        let table = labels.vectors().expect("checked");
        let out = current
            .iter()
            .map(|&l| {
                let p = table[l];
                let q = [p[0] + normal.sample(rng), p[1] + normal.sample(rng)];
                labels.nearest_vector(q).expect("checked")
            })
            .collect();
        Ok(Labeling::new(out))
    }
}

/// Uniformly random label per variable.
#[derive(Debug, Clone, Default)]
pub struct RandomLabels;

pub fn random_labeling_generator() -> RandomLabels {
    RandomLabels
}

/// A uniformly random labeling of `model`.
pub fn random_labeling(model: &EnergyModel, rng: &mut SwarmRng) -> Labeling {
    let l = model.num_labels();
    Labeling::new((0..model.num_vars()).map(|_| rng.gen_range(0..l)).collect())
}

impl ProposalGenerator for RandomLabels {
    fn name(&self) -> &str {
        "random"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        _current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        Ok(random_labeling(model, rng))
    }
}

/// Picks one child uniformly at random per call.
pub struct Mix {
    children: Vec<Box<dyn ProposalGenerator>>,
    last: Option<usize>,
}

impl Mix {
    pub fn new(children: Vec<Box<dyn ProposalGenerator>>) -> Result<Self> {
        if children.is_empty() {
            return contract("a mixed generator needs at least one child");
        }
        Ok(Self {
            children,
            last: None,
        })
    }

    /// Index of the child used by the latest call.
    pub fn last_choice(&self) -> Option<usize> {
        self.last
    }
}

impl ProposalGenerator for Mix {
    fn name(&self) -> &str {
        "mix"
    }

    fn generate(
        &mut self,
        model: &EnergyModel,
        current: &Labeling,
        rng: &mut SwarmRng,
    ) -> Result<Labeling> {
        let i = rng.gen_range(0..self.children.len());
        self.last = Some(i);
        self.children[i].generate(model, current, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_synthetic_flow, build_synthetic_stereo, default_flow_labels};
    use rand::SeedableRng;

    fn flow() -> EnergyModel {
        build_synthetic_flow(9, 7, &default_flow_labels(21), 3).unwrap()
    }

    #[test]
    fn constant_labels_cycle() {
        let (m, _) = build_synthetic_stereo(4, 3, 3, 0.0, 1).unwrap();
        let mut g = constant_label_generator(vec![2, 0, 1]).unwrap();
        let mut rng = SwarmRng::seed_from_u64(0);
        let cur = Labeling::constant(12, 0);
        let got: Vec<usize> = (0..4)
            .map(|_| g.generate(&m, &cur, &mut rng).unwrap()[5])
            .collect();
        assert_eq!(got, vec![2, 0, 1, 2]);
        assert!(constant_label_generator(vec![1, 1]).is_err());
    }

    #[test]
    fn shift_of_constant_field_is_constant() {
        let m = flow();
        let cur = Labeling::constant(m.num_vars(), 5);
        let mut g = Shift::default();
        let mut rng = SwarmRng::seed_from_u64(9);
        for _ in 0..10 {
            assert_eq!(g.generate(&m, &cur, &mut rng).unwrap(), cur);
        }
    }

    #[test]
    fn translate_moves_interior_pixels() {
        let m = flow();
        let mut rng = SwarmRng::seed_from_u64(2);
        let cur = random_labeling(&m, &mut rng);
        let out = translate(&m, &cur, 1, 0);
        let t = m.topology();
        for y in 0..t.height() {
            assert_eq!(out[t.index(0, y)], cur[t.index(0, y)]);
            for x in 1..t.width() {
                assert_eq!(out[t.index(x, y)], cur[t.index(x - 1, y)]);
            }
        }
    }

    #[test]
    fn vector_generators_reject_scalar_models() {
        let (m, gt) = build_synthetic_stereo(4, 3, 5, 0.0, 1).unwrap();
        let mut rng = SwarmRng::seed_from_u64(0);
        assert!(Shift::default().generate(&m, &gt, &mut rng).is_err());
        assert!(stagger_generator(1.0).unwrap().generate(&m, &gt, &mut rng).is_err());
        assert!(perturb_generator(1.0).unwrap().generate(&m, &gt, &mut rng).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = flow();
        let mut rng = SwarmRng::seed_from_u64(4);
        let cur = random_labeling(&m, &mut rng);
        let mut s = stagger_generator(0.0).unwrap();
        let mut p = perturb_generator(0.0).unwrap();
        assert_eq!(s.generate(&m, &cur, &mut rng).unwrap(), cur);
        assert_eq!(p.generate(&m, &cur, &mut rng).unwrap(), cur);
    }

    #[test]
    fn generators_are_seed_deterministic_and_in_range() {
        let m = flow();
        let make = || -> Vec<Box<dyn ProposalGenerator>> {
            vec![
                Box::new(Shift::default()),
                Box::new(stagger_generator(1.0).unwrap()),
                Box::new(perturb_generator(1.0).unwrap()),
                Box::new(random_labeling_generator()),
            ]
        };
        let (mut a, mut b) = (make(), make());
        let mut ra = SwarmRng::seed_from_u64(77);
        let mut rb = SwarmRng::seed_from_u64(77);
        let cur = random_labeling(&m, &mut SwarmRng::seed_from_u64(1));
        for (ga, gb) in a.iter_mut().zip(b.iter_mut()) {
            let x = ga.generate(&m, &cur, &mut ra).unwrap();
            let y = gb.generate(&m, &cur, &mut rb).unwrap();
            assert_eq!(x, y, "{}", ga.name());
            m.check(&x).unwrap();
        }
    }

    #[test]
    fn consecutive_random_labelings_differ() {
        let m = flow();
        let mut g = random_labeling_generator();
        let mut rng = SwarmRng::seed_from_u64(5);
        let cur = Labeling::constant(m.num_vars(), 0);
        let mut prev = g.generate(&m, &cur, &mut rng).unwrap();
        for _ in 0..50 {
            let next = g.generate(&m, &cur, &mut rng).unwrap();
            assert_ne!(next, prev);
            prev = next;
        }
    }

    #[test]
    fn mix_covers_every_child() {
        let m = flow();
        let mut g = Mix::new(vec![
            Box::new(Shift::default()),
            Box::new(stagger_generator(1.0).unwrap()),
            Box::new(perturb_generator(1.0).unwrap()),
        ])
        .unwrap();
        let mut rng = SwarmRng::seed_from_u64(11);
        let cur = Labeling::constant(m.num_vars(), 3);
        let mut hits = [0usize; 3];
        for _ in 0..1000 {
            m.check(&g.generate(&m, &cur, &mut rng).unwrap()).unwrap();
            hits[g.last_choice().unwrap()] += 1;
        }
        assert!(hits.iter().all(|&h| h > 0), "{hits:?}");
    }
}
