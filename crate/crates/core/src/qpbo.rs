//! Quadratic pseudo-boolean optimization (roof duality) for binary fusion
//! with non-submodular pairwise terms.
//!
//! The energy is brought to the form
//! `c + Σ a_p x_p + Σ w (1 - x_p) x_q + Σ w' x_p x_q` with `w, w' ≥ 0`, then
//! every term is split over a doubled variable set `{x_p, x̄_p}` so that all
//! resulting terms are submodular. One max-flow on that network gives the
//! roof-dual bound and a partial labeling: `x_p` is labeled wherever the two
//! halves agree (`x̄_p = 1 - x_p`). To keep everything integral the doubled
//! energy is twice the original one; bounds are halved on the way out.

use crate::error::Result;
use crate::maxflow::{solve_maxflow, FlowNetwork, Side};
use crate::model::{check_all, from_fixed, EnergyModel, Labeling};

/// Outcome for one binary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpboLabel {
    Zero,
    One,
    Unlabeled,
}

/// A pseudo-boolean energy in fixed-point units.
///
/// `unary[p] = [E_p(0), E_p(1)]`; each pairwise entry is
/// `(p, q, [E(0,0), E(0,1), E(1,0), E(1,1)])`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BinaryEnergy {
    pub constant: i64,
    pub unary: Vec<[i64; 2]>,
    pub pairwise: Vec<(usize, usize, [i64; 4])>,
}

impl BinaryEnergy {
    pub fn new(num_vars: usize) -> Self {
        Self {
            constant: 0,
            unary: vec![[0, 0]; num_vars],
            pairwise: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.unary.len()
    }

    /// Energy of a complete assignment.
    pub fn evaluate(&self, x: &[bool]) -> i64 {
        let u: i64 = self
            .unary
            .iter()
            .zip(x)
            .map(|(t, &b)| t[b as usize])
            .sum();
        let p: i64 = self
            .pairwise
            .iter()
            .map(|&(p, q, t)| t[2 * x[p] as usize + x[q] as usize])
            .sum();
        self.constant + u + p
    }

    /// The binary energy of fusing `proposal` into `current`: variable `k`
    /// is 1 when the `k`-th differing site takes its proposal label. Sites
    /// where both labelings agree are folded into unary and constant terms.
    /// Returns the energy and the site of each variable.
    pub fn from_fusion(
        model: &EnergyModel,
        current: &[usize],
        proposal: &[usize],
    ) -> (BinaryEnergy, Vec<usize>) {
        let n = model.num_vars();
        let mut node = vec![usize::MAX; n];
        let mut sites = Vec::new();
        for v in 0..n {
            if current[v] != proposal[v] {
                node[v] = sites.len();
                sites.push(v);
            }
        }
        let mut energy = BinaryEnergy::new(sites.len());
        for v in 0..n {
            match node[v] {
                usize::MAX => energy.constant += model.unary_fixed(v, current[v]),
                k => {
                    energy.unary[k] = [
                        model.unary_fixed(v, current[v]),
                        model.unary_fixed(v, proposal[v]),
                    ]
                }
            }
        }
        for (e, &(u, v)) in model.topology().edges().iter().enumerate() {
            let t = crate::maxflow::fusion_terms(model, e, u, v, current, proposal);
            match (node[u], node[v]) {
                (usize::MAX, usize::MAX) => energy.constant += t[0],
                (usize::MAX, kv) => {
                    energy.unary[kv][0] += t[0];
                    energy.unary[kv][1] += t[1];
                }
                (ku, usize::MAX) => {
                    energy.unary[ku][0] += t[0];
                    energy.unary[ku][1] += t[2];
                }
                (ku, kv) => energy.pairwise.push((ku, kv, t)),
            }
        }
        (energy, sites)
    }
}

/// Partial labeling and roof-dual lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct QpboResult {
    pub labels: Vec<QpboLabel>,
    /// Twice the lower bound, in fixed-point units.
    pub lower_bound_x2: i64,
}

impl QpboResult {
    /// Lower bound on the energy of every complete assignment.
    pub fn lower_bound(&self) -> f64 {
        from_fixed(self.lower_bound_x2) / 2.0
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l == QpboLabel::Unlabeled)
            .count()
    }
}

/// Solves the roof-dual relaxation of `energy` with a single max-flow.
pub fn qpbo_solve(energy: &BinaryEnergy) -> QpboResult {
    let n = energy.num_vars();
    let mut constant = energy.constant;
    let mut linear = vec![0i64; n];
    // (p, q, w): w (1 - x_p) x_q and w x_p x_q respectively.
    let mut sub = Vec::new();
    let mut sup = Vec::new();
    for (p, t) in energy.unary.iter().enumerate() {
        constant += t[0];
        linear[p] += t[1] - t[0];
    }
    for &(p, q, [a, b, c, d]) in &energy.pairwise {
        constant += a;
        linear[p] += c - a;
        linear[q] += d - c;
        let k = b + c - a - d;
        if k > 0 {
            sub.push((p, q, k));
        } else if k < 0 {
            linear[q] += k;
            sup.push((p, q, -k));
        }
    }

    // Nodes 0..n are x_p, n..2n are x̄_p; a node on the sink side reads 1.
    let bar = |p: usize| n + p;
    let mut net = FlowNetwork::new(2 * n);
    let mut constant_x2 = 2 * constant;
    for (p, &a) in linear.iter().enumerate() {
        // a x_p + a (1 - x̄_p)
        if a > 0 {
            net.add_terminal_edges(p, a, 0);
            net.add_terminal_edges(bar(p), 0, a);
        } else if a < 0 {
            constant_x2 += 2 * a;
            net.add_terminal_edges(p, 0, -a);
            net.add_terminal_edges(bar(p), -a, 0);
        }
    }
    for &(p, q, w) in &sub {
        // w (1 - x_p) x_q + w (1 - x̄_q) x̄_p
        net.add_edge(p, q, w, 0);
        net.add_edge(bar(q), bar(p), w, 0);
    }
    for &(p, q, w) in &sup {
        // w x_p (1 - x̄_q) + w x_q (1 - x̄_p)
        net.add_edge(bar(q), p, w, 0);
        net.add_edge(bar(p), q, w, 0);
    }
    let (flow, cut) = solve_maxflow(net);
    let labels = if sup.is_empty() {
        // Without supermodular terms the two halves are disconnected and the
        // mirror of the x-half cut is a minimum cut of the x̄-half.
        (0..n)
            .map(|p| match cut.sides[p] {
                Side::Source => QpboLabel::Zero,
                Side::Sink => QpboLabel::One,
            })
            .collect()
    } else {
        (0..n)
            .map(|p| match (cut.sides[p], cut.sides[bar(p)]) {
                (Side::Source, Side::Sink) => QpboLabel::Zero,
                (Side::Sink, Side::Source) => QpboLabel::One,
                _ => QpboLabel::Unlabeled,
            })
            .collect()
    };
    QpboResult {
        labels,
        lower_bound_x2: constant_x2 + flow,
    }
}

/// Binary fusion through QPBO. Labeled sites take the indicated candidate,
/// unlabeled sites keep their current label.
pub fn binary_fusion_qpbo(
    model: &EnergyModel,
    current: &Labeling,
    proposal: &Labeling,
) -> Result<Labeling> {
    check_all(model, [current, proposal])?;
    let (c, p) = (current.as_slice(), proposal.as_slice());
    let (energy, sites) = BinaryEnergy::from_fusion(model, c, p);
    if sites.is_empty() {
        return Ok(current.clone());
    }
    let result = qpbo_solve(&energy);
    let mut out = c.to_vec();
    for (k, &v) in sites.iter().enumerate() {
        if result.labels[k] == QpboLabel::One {
            out[v] = p[v];
        }
    }
    Ok(Labeling::new(out))
}
