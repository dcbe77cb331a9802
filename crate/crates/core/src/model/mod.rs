//! Grid MRF energy models.
//!
//! An [`EnergyModel`] couples a 4-connected [`GridTopology`] with a
//! [`LabelUniverse`], a dense unary table and a pairwise cost family.
//! Energies are accumulated in a fixed-point domain: every unary term and
//! every weighted pairwise term is rounded to an integer count of
//! `1 / ENERGY_SCALE` units before summation. All solvers (graph cut, QPBO,
//! TRW-S) and the exhaustive oracle work on exactly these integer terms, so
//! their results are comparable without floating point slack.

mod builders;

pub use builders::{
    build_random_mrf, build_synthetic_flow, build_synthetic_stereo, default_flow_labels,
    FlowParams, StereoParams, STEREO_PAIRWISE_WEIGHT, STEREO_SIGMA_S,
};

use std::ops::Index;

use crate::error::{contract, Error, Result};

/// Number of fixed-point energy units per unit of cost.
pub const ENERGY_SCALE: f64 = 1e6;

/// Rounds a real cost to fixed-point energy units.
#[inline]
pub fn to_fixed(cost: f64) -> i64 {
    (cost * ENERGY_SCALE).round() as i64
}

/// Converts fixed-point energy units back to a real cost.
#[inline]
pub fn from_fixed(units: i64) -> f64 {
    units as f64 / ENERGY_SCALE
}

/// A 4-connected `width × height` pixel grid.
///
/// Variables are numbered in raster order. Edges are listed once per
/// undirected neighbor pair, in raster order of their first endpoint with the
/// right neighbor before the lower one, and always satisfy `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridTopology {
    width: usize,
    height: usize,
    edges: Vec<(usize, usize)>,
    right: Vec<Option<usize>>,
    down: Vec<Option<usize>>,
}

impl GridTopology {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return contract(format!("grid must be at least 1x1, got {width}x{height}"));
        }
        let n = width * height;
        let mut edges = Vec::with_capacity(width * (height - 1) + height * (width - 1));
        let mut right = vec![None; n];
        let mut down = vec![None; n];
        for y in 0..height {
            for x in 0..width {
                let v = y * width + x;
                if x + 1 < width {
                    right[v] = Some(edges.len());
                    edges.push((v, v + 1));
                }
                if y + 1 < height {
                    down[v] = Some(edges.len());
                    edges.push((v, v + width));
                }
            }
        }
        Ok(Self {
            width,
            height,
            edges,
            right,
            down,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vars(&self) -> usize {
        self.width * self.height
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.width, v / self.width)
    }

    /// Edge joining `v` to its right neighbor, if any.
    pub fn right_edge(&self, v: usize) -> Option<usize> {
        self.right[v]
    }

    /// Edge joining `v` to the neighbor below it, if any.
    pub fn down_edge(&self, v: usize) -> Option<usize> {
        self.down[v]
    }

    /// Index of the edge between two variables, in either order.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        if v == u + 1 {
            self.right[u]
        } else if v == u + self.width {
            self.down[u]
        } else {
            None
        }
    }
}

/// Per-label payload values.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelPayload {
    /// Scalar value per label (e.g. disparity in pixels).
    Scalar(Vec<f64>),
    /// 2D vector per label (e.g. a flow vector in pixels).
    Vector(Vec<[f64; 2]>),
}

/// The dense label set `0..count`, optionally carrying per-label payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelUniverse {
    count: usize,
    payload: Option<LabelPayload>,
}

impl LabelUniverse {
    pub fn new(count: usize) -> Result<Self> {
        if count < 2 {
            return contract(format!("label universe needs at least 2 labels, got {count}"));
        }
        Ok(Self {
            count,
            payload: None,
        })
    }

    pub fn with_scalars(values: Vec<f64>) -> Result<Self> {
        let mut universe = Self::new(values.len())?;
        universe.payload = Some(LabelPayload::Scalar(values));
        Ok(universe)
    }

    pub fn with_vectors(vectors: Vec<[f64; 2]>) -> Result<Self> {
        let mut universe = Self::new(vectors.len())?;
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return contract("label payload vectors must be finite");
        }
        universe.payload = Some(LabelPayload::Vector(vectors));
        Ok(universe)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn payload(&self) -> Option<&LabelPayload> {
        self.payload.as_ref()
    }

    /// Vector payloads, if this universe carries them.
    pub fn vectors(&self) -> Option<&[[f64; 2]]> {
        match &self.payload {
            Some(LabelPayload::Vector(v)) => Some(v),
            _ => None,
        }
    }

    /// Label whose vector payload is closest (Euclidean) to `p`; ties go to
    /// the lowest index.
    pub fn nearest_vector(&self, p: [f64; 2]) -> Option<usize> {
        let vectors = self.vectors()?;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in vectors.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Some(best)
    }
}

/// Pairwise cost families. Costs are unweighted; the model's pairwise weight
/// multiplies them.
#[derive(Debug, Clone, PartialEq)]
pub enum PairwiseCost {
    /// `min(|a - b|, sigma)` on label indices.
    TruncatedLinear { sigma: f64 },
    /// `min(‖p(a) - p(b)‖, truncation)` on vector payloads.
    TruncatedEuclidean { truncation: f64 },
    /// Explicit symmetric `L × L` table per edge, row-major.
    Tables(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
enum FixedPairwise {
    Shared(Vec<i64>),
    PerEdge(Vec<Vec<i64>>),
}

/// Truncated absolute label difference, `min(|a - b|, sigma_s)`.
pub fn truncated_abs_pairwise(a: usize, b: usize, sigma_s: f64) -> f64 {
    (a.abs_diff(b) as f64).min(sigma_s)
}

/// A grid MRF: unary table, pairwise family and pairwise weight.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    topology: GridTopology,
    labels: LabelUniverse,
    unary: Vec<f64>,
    pairwise: PairwiseCost,
    pairwise_weight: f64,
    unary_fixed: Vec<i64>,
    pairwise_fixed: FixedPairwise,
}

impl EnergyModel {
    /// Builds a model. `unary` is row-major `num_vars × L`.
    pub fn new(
        topology: GridTopology,
        labels: LabelUniverse,
        unary: Vec<f64>,
        pairwise: PairwiseCost,
        pairwise_weight: f64,
    ) -> Result<Self> {
        let n = topology.num_vars();
        let l = labels.count();
        if unary.len() != n * l {
            return contract(format!(
                "unary table has {} entries, expected {n}x{l}",
                unary.len()
            ));
        }
        if unary.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return contract("unary costs must be finite and non-negative");
        }
        if !pairwise_weight.is_finite() || pairwise_weight < 0.0 {
            return contract("pairwise weight must be finite and non-negative");
        }
        let pairwise_fixed = match &pairwise {
            PairwiseCost::TruncatedLinear { sigma } => {
                if !(*sigma > 0.0) {
                    return contract("truncation sigma_s must be positive");
                }
                FixedPairwise::Shared(shared_table(l, pairwise_weight, |a, b| {
                    truncated_abs_pairwise(a, b, *sigma)
                }))
            }
            PairwiseCost::TruncatedEuclidean { truncation } => {
                let Some(vectors) = labels.vectors() else {
                    return contract("truncated Euclidean pairwise needs vector label payloads");
                };
                if !(*truncation > 0.0) {
                    return contract("pairwise truncation must be positive");
                }
                FixedPairwise::Shared(shared_table(l, pairwise_weight, |a, b| {
                    euclid(vectors[a], vectors[b]).min(*truncation)
                }))
            }
            PairwiseCost::Tables(tables) => {
                if tables.len() != topology.edges().len() {
                    return contract(format!(
                        "{} pairwise tables for {} edges",
                        tables.len(),
                        topology.edges().len()
                    ));
                }
                let mut fixed = Vec::with_capacity(tables.len());
                for t in tables {
                    if t.len() != l * l || t.iter().any(|c| !c.is_finite()) {
                        return contract("pairwise tables must be finite L x L");
                    }
                    for a in 0..l {
                        for b in 0..a {
                            if t[a * l + b] != t[b * l + a] {
                                return contract("pairwise tables must be symmetric");
                            }
                        }
                    }
                    fixed.push(t.iter().map(|c| to_fixed(pairwise_weight * c)).collect());
                }
                FixedPairwise::PerEdge(fixed)
            }
        };
        let unary_fixed = unary.iter().map(|&c| to_fixed(c)).collect();
        Ok(Self {
            topology,
            labels,
            unary,
            pairwise,
            pairwise_weight,
            unary_fixed,
            pairwise_fixed,
        })
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn labels(&self) -> &LabelUniverse {
        &self.labels
    }

    pub fn num_vars(&self) -> usize {
        self.topology.num_vars()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.count()
    }

    pub fn pairwise_cost(&self) -> &PairwiseCost {
        &self.pairwise
    }

    pub fn pairwise_weight(&self) -> f64 {
        self.pairwise_weight
    }

    pub fn unary(&self, v: usize, label: usize) -> f64 {
        self.unary[v * self.labels.count() + label]
    }

    /// Unweighted pairwise cost of `edge` at labels `(a, b)`; `a` belongs to
    /// the lower-indexed endpoint.
    pub fn pairwise(&self, edge: usize, a: usize, b: usize) -> f64 {
        match &self.pairwise {
            PairwiseCost::TruncatedLinear { sigma } => truncated_abs_pairwise(a, b, *sigma),
            PairwiseCost::TruncatedEuclidean { truncation } => {
                let p = self.labels.vectors().expect("checked at construction");
                euclid(p[a], p[b]).min(*truncation)
            }
            PairwiseCost::Tables(t) => t[edge][a * self.labels.count() + b],
        }
    }

    /// Unary term in fixed-point units.
    #[inline]
    pub fn unary_fixed(&self, v: usize, label: usize) -> i64 {
        self.unary_fixed[v * self.labels.count() + label]
    }

    /// Weighted pairwise term in fixed-point units.
    #[inline]
    pub fn pairwise_fixed(&self, edge: usize, a: usize, b: usize) -> i64 {
        let l = self.labels.count();
        match &self.pairwise_fixed {
            FixedPairwise::Shared(t) => t[a * l + b],
            FixedPairwise::PerEdge(t) => t[edge][a * l + b],
        }
    }

    /// Checks that `labeling` fits this model.
    pub fn check(&self, labeling: &Labeling) -> Result<()> {
        if labeling.len() != self.num_vars() {
            return contract(format!(
                "labeling has {} entries, model has {} variables",
                labeling.len(),
                self.num_vars()
            ));
        }
        if let Some((v, &l)) = labeling
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= self.num_labels())
        {
            return contract(format!(
                "label {l} at variable {v} is outside 0..{}",
                self.num_labels()
            ));
        }
        Ok(())
    }

    /// Energy of `labeling` in fixed-point units.
    pub fn evaluate_fixed(&self, labeling: &Labeling) -> Result<i64> {
        self.check(labeling)?;
        Ok(self.energy_fixed(labeling.as_slice()))
    }

    /// Energy of `labeling`: unary sum plus weighted pairwise sum.
    pub fn evaluate(&self, labeling: &Labeling) -> Result<f64> {
        self.evaluate_fixed(labeling).map(from_fixed)
    }

    /// Unchecked fixed-point energy; callers guarantee validity.
    pub(crate) fn energy_fixed(&self, x: &[usize]) -> i64 {
        let unary: i64 = x
            .iter()
            .enumerate()
            .map(|(v, &l)| self.unary_fixed(v, l))
            .sum();
        let pairwise: i64 = self
            .topology
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| self.pairwise_fixed(e, x[u], x[v]))
            .sum();
        unary + pairwise
    }

    /// Sub-model over the `w × h` window with top-left corner `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<EnergyModel> {
        if x0 + w > self.topology.width() || y0 + h > self.topology.height() {
            return contract("crop window exceeds the grid");
        }
        let topology = GridTopology::new(w, h)?;
        let l = self.num_labels();
        let src = |x: usize, y: usize| self.topology.index(x0 + x, y0 + y);
        let mut unary = Vec::with_capacity(w * h * l);
        for y in 0..h {
            for x in 0..w {
                let v = src(x, y);
                unary.extend_from_slice(&self.unary[v * l..(v + 1) * l]);
            }
        }
        let pairwise = match &self.pairwise {
            PairwiseCost::Tables(tables) => PairwiseCost::Tables(
                topology
                    .edges()
                    .iter()
                    .map(|&(u, v)| {
                        let (ux, uy) = topology.coords(u);
                        let (vx, vy) = topology.coords(v);
                        let e = self
                            .topology
                            .edge_between(src(ux, uy), src(vx, vy))
                            .expect("neighbors in the crop are neighbors in the grid");
                        tables[e].clone()
                    })
                    .collect(),
            ),
            other => other.clone(),
        };
        EnergyModel::new(topology, self.labels.clone(), unary, pairwise, self.pairwise_weight)
    }
}

fn shared_table(l: usize, weight: f64, cost: impl Fn(usize, usize) -> f64) -> Vec<i64> {
    let mut t = Vec::with_capacity(l * l);
    for a in 0..l {
        for b in 0..l {
            t.push(to_fixed(weight * cost(a, b)));
        }
    }
    t
}

fn euclid(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// One label index per grid variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn constant(num_vars: usize, label: usize) -> Self {
        Self(vec![label; num_vars])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Index<usize> for Labeling {
    type Output = usize;

    fn index(&self, v: usize) -> &usize {
        &self.0[v]
    }
}

impl From<Vec<usize>> for Labeling {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Fails unless every labeling fits the model.
pub(crate) fn check_all<'a>(
    model: &EnergyModel,
    labelings: impl IntoIterator<Item = &'a Labeling>,
) -> Result<()> {
    for l in labelings {
        model.check(l).map_err(|e| match e {
            Error::Contract(m) => Error::Contract(format!("mixed-model labeling: {m}")),
            other => other,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_model(w: usize, h: usize, l: usize, unary: Vec<f64>, weight: f64) -> EnergyModel {
        EnergyModel::new(
            GridTopology::new(w, h).unwrap(),
            LabelUniverse::new(l).unwrap(),
            unary,
            PairwiseCost::TruncatedLinear { sigma: 1e9 },
            weight,
        )
        .unwrap()
    }

    #[test]
    fn edge_count_matches_grid_formula() {
        for (w, h) in [(1, 1), (1, 5), (4, 1), (3, 3), (7, 4)] {
            let t = GridTopology::new(w, h).unwrap();
            assert_eq!(t.edges().len(), w * (h - 1) + h * (w - 1));
            let mut seen = std::collections::HashSet::new();
            for &(u, v) in t.edges() {
                assert!(u < v);
                assert!(seen.insert((u, v)));
                assert_eq!(t.edge_between(v, u), t.edge_between(u, v));
            }
        }
        assert!(GridTopology::new(0, 3).is_err());
    }

    #[test]
    fn two_variable_example() {
        let m = abs_model(2, 1, 2, vec![0.0, 5.0, 3.0, 1.0], 1.0);
        assert_eq!(m.evaluate(&Labeling::new(vec![0, 1])).unwrap(), 2.0);
    }

    #[test]
    fn zero_case() {
        let mut unary = vec![7.0; 4 * 3];
        for v in 0..4 {
            unary[v * 3] = 0.0;
        }
        let m = abs_model(2, 2, 3, unary, 0.0);
        assert_eq!(m.evaluate(&Labeling::constant(4, 0)).unwrap(), 0.0);
    }

    #[test]
    fn truncated_abs_examples() {
        assert_eq!(truncated_abs_pairwise(2, 9, 4.0), 4.0);
        assert_eq!(truncated_abs_pairwise(6, 6, 4.0), 0.0);
        assert_eq!(truncated_abs_pairwise(3, 5, 4.0), 2.0);
        let m = EnergyModel::new(
            GridTopology::new(2, 1).unwrap(),
            LabelUniverse::new(10).unwrap(),
            vec![0.0; 20],
            PairwiseCost::TruncatedLinear { sigma: 4.0 },
            0.005,
        )
        .unwrap();
        assert_eq!(m.evaluate(&Labeling::new(vec![2, 9])).unwrap(), 0.02);
    }

    #[test]
    fn rejects_bad_labelings() {
        let m = abs_model(2, 1, 2, vec![0.0; 4], 1.0);
        assert!(matches!(
            m.evaluate(&Labeling::new(vec![0])),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            m.evaluate(&Labeling::new(vec![0, 2])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn one_by_one_grid_is_pure_unary() {
        let m = abs_model(1, 1, 3, vec![4.0, 2.5, 9.0], 3.0);
        assert!(m.topology().edges().is_empty());
        assert_eq!(m.evaluate(&Labeling::new(vec![1])).unwrap(), 2.5);
    }

    #[test]
    fn euclidean_pairwise() {
        let m = EnergyModel::new(
            GridTopology::new(2, 1).unwrap(),
            LabelUniverse::with_vectors(vec![[0.0, 0.0], [3.0, 4.0]]).unwrap(),
            vec![0.0; 4],
            PairwiseCost::TruncatedEuclidean { truncation: 10.0 },
            1.0,
        )
        .unwrap();
        assert_eq!(m.pairwise(0, 0, 1), 5.0);
        assert_eq!(m.pairwise(0, 1, 1), 0.0);
        assert_eq!(m.evaluate(&Labeling::new(vec![0, 1])).unwrap(), 5.0);
    }

    #[test]
    fn crop_preserves_terms() {
        let m = build_random_mrf(4, 3, 3, false, 11).unwrap();
        let c = m.crop(1, 1, 2, 2).unwrap();
        for (e, &(u, v)) in c.topology().edges().iter().enumerate() {
            let (ux, uy) = c.topology().coords(u);
            let (vx, vy) = c.topology().coords(v);
            let pe = m
                .topology()
                .edge_between(m.topology().index(ux + 1, uy + 1), m.topology().index(vx + 1, vy + 1))
                .unwrap();
            assert_eq!(c.pairwise(e, 0, 2), m.pairwise(pe, 0, 2));
        }
        assert_eq!(c.unary(3, 1), m.unary(m.topology().index(2, 2), 1));
    }
}
