//! Multi-way fusion by sequential tree-reweighted message passing.
//!
//! A [`FusionProblem`] restricts every variable to a short candidate list
//! (its current label plus the labels proposed by other labelings). TRW-S
//! runs on that restricted MRF with the grid split into monotonic chains:
//! every row and every column. Each node's reparameterized unary is shared
//! equally among the chains through it, which gives the `γ = 1/2` averaging
//! on 2D grids and plain dynamic programming on single rows or columns.
//!
//! All arithmetic is done on the model's fixed-point integer terms held in
//! `f64`, so the bound and the extracted energies are directly comparable
//! with the exact solvers.

use crate::error::Result;
use crate::model::{check_all, EnergyModel, Labeling, ENERGY_SCALE};

/// Per-variable candidate label lists for one fusion step.
#[derive(Debug, Clone)]
pub struct FusionProblem<'m> {
    model: &'m EnergyModel,
    candidates: Vec<Vec<usize>>,
}

impl<'m> FusionProblem<'m> {
    pub fn model(&self) -> &'m EnergyModel {
        self.model
    }

    /// Candidate labels of `v`; the first entry is the current label.
    pub fn candidates(&self, v: usize) -> &[usize] {
        &self.candidates[v]
    }

    pub fn candidate_lists(&self) -> &[Vec<usize>] {
        &self.candidates
    }

    /// The labeling every variable's first candidate forms.
    pub fn current(&self) -> Labeling {
        Labeling::new(self.candidates.iter().map(|c| c[0]).collect())
    }

    /// Size of the candidate product space (as a float; it can be huge).
    pub fn product_size(&self) -> f64 {
        self.candidates.iter().map(|c| c.len() as f64).product()
    }

    /// Labeling picking candidate `choice[v]` at every variable.
    pub fn labeling(&self, choice: &[usize]) -> Labeling {
        Labeling::new(
            self.candidates
                .iter()
                .zip(choice)
                .map(|(c, &k)| c[k])
                .collect(),
        )
    }
}

/// Builds the candidate lists `dedup({current_v} ∪ {c_v})` in first-seen order.
pub fn build_fusion_problem<'m>(
    model: &'m EnergyModel,
    current: &Labeling,
    candidates: &[Labeling],
) -> Result<FusionProblem<'m>> {
    check_all(model, std::iter::once(current).chain(candidates))?;
    let lists = (0..model.num_vars())
        .map(|v| {
            let mut list = vec![current[v]];
            for c in candidates {
                if !list.contains(&c[v]) {
                    list.push(c[v]);
                }
            }
            list
        })
        .collect();
    Ok(FusionProblem {
        model,
        candidates: lists,
    })
}

/// Budget of a TRW-S run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrwsOptions {
    pub max_passes: usize,
    /// Stop once a pass improves the bound by less than this fraction.
    pub rel_tol: f64,
}

impl Default for TrwsOptions {
    fn default() -> Self {
        Self {
            max_passes: 30,
            rel_tol: 1e-6,
        }
    }
}

/// Result of [`trws_solve`].
#[derive(Debug, Clone)]
pub struct TrwsOutcome {
    /// Lowest-energy labeling extracted over all passes.
    pub labeling: Labeling,
    /// Final lower bound, in cost units.
    pub lower_bound: f64,
    /// Lower bound after each forward-backward pass, in fixed-point units.
    pub bound_history: Vec<f64>,
}

struct Solver<'a> {
    fp: &'a FusionProblem<'a>,
    /// Unary costs, flattened with `offset`.
    unary: Vec<f64>,
    offset: Vec<usize>,
    /// Per edge: `K_u × K_v` table, row-major in the lower endpoint.
    tables: Vec<Vec<f64>>,
    /// `fwd[e]` is the message u → v (length K_v), `bwd[e]` is v → u.
    fwd: Vec<Vec<f64>>,
    bwd: Vec<Vec<f64>>,
    /// Incident edges per node as `(edge, neighbor)`.
    incident: Vec<Vec<(usize, usize)>>,
    /// Number of chains through each node.
    chains: f64,
}

impl<'a> Solver<'a> {
    fn new(fp: &'a FusionProblem<'a>) -> Self {
        let model = fp.model;
        let topo = model.topology();
        let n = model.num_vars();
        let mut offset = Vec::with_capacity(n + 1);
        let mut unary = Vec::new();
        for v in 0..n {
            offset.push(unary.len());
            unary.extend(fp.candidates[v].iter().map(|&l| model.unary_fixed(v, l) as f64));
        }
        offset.push(unary.len());
        let mut incident = vec![Vec::new(); n];
        let mut tables = Vec::with_capacity(topo.edges().len());
        let mut fwd = Vec::with_capacity(topo.edges().len());
        let mut bwd = Vec::with_capacity(topo.edges().len());
        for (e, &(u, v)) in topo.edges().iter().enumerate() {
            let (cu, cv) = (&fp.candidates[u], &fp.candidates[v]);
            let mut t = Vec::with_capacity(cu.len() * cv.len());
            for &a in cu {
                for &b in cv {
                    t.push(model.pairwise_fixed(e, a, b) as f64);
                }
            }
            tables.push(t);
            fwd.push(vec![0.0; cv.len()]);
            bwd.push(vec![0.0; cu.len()]);
            incident[u].push((e, v));
            incident[v].push((e, u));
        }
        let chains = (topo.width() > 1) as usize + (topo.height() > 1) as usize;
        Self {
            fp,
            unary,
            offset,
            tables,
            fwd,
            bwd,
            incident,
            chains: chains.max(1) as f64,
        }
    }

    fn size(&self, v: usize) -> usize {
        self.offset[v + 1] - self.offset[v]
    }

    fn theta(&self, v: usize) -> &[f64] {
        &self.unary[self.offset[v]..self.offset[v + 1]]
    }

    /// Message arriving at `v` over edge `e`.
    fn incoming(&self, e: usize, v: usize) -> &[f64] {
        if self.fp.model.topology().edges()[e].1 == v {
            &self.fwd[e]
        } else {
            &self.bwd[e]
        }
    }

    /// Unary of `v` plus every incoming message.
    fn belief(&self, v: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.theta(v));
        for &(e, _) in &self.incident[v] {
            for (o, m) in out.iter_mut().zip(self.incoming(e, v)) {
                *o += m;
            }
        }
    }

    /// Recomputes the message from `v` to `w` over `e`.
    fn send(&mut self, v: usize, w: usize, e: usize, belief: &[f64], scratch: &mut Vec<f64>) {
        let gamma = 1.0 / self.chains;
        let from_lower = v < w;
        // γ θ̂_v(k) - m_{w→v}(k)
        scratch.clear();
        let back = self.incoming(e, v);
        scratch.extend(belief.iter().zip(back).map(|(b, m)| gamma * b - m));
        let (kv, kw) = (self.size(v), self.size(w));
        let table = &self.tables[e];
        let mut msg = vec![f64::INFINITY; kw];
        for (l, out) in msg.iter_mut().enumerate() {
            for k in 0..kv {
                let pair = if from_lower {
                    table[k * kw + l]
                } else {
                    table[l * kv + k]
                };
                let c = scratch[k] + pair;
                if c < *out {
                    *out = c;
                }
            }
        }
        let lo = msg.iter().copied().fold(f64::INFINITY, f64::min);
        for m in &mut msg {
            *m -= lo;
        }
        if from_lower {
            self.fwd[e] = msg;
        } else {
            self.bwd[e] = msg;
        }
    }

    fn pass(&mut self, forward: bool) {
        let n = self.fp.model.num_vars();
        let mut belief = Vec::new();
        let mut scratch = Vec::new();
        let order: Box<dyn Iterator<Item = usize>> = if forward {
            Box::new(0..n)
        } else {
            Box::new((0..n).rev())
        };
        for v in order {
            self.belief(v, &mut belief);
            for i in 0..self.incident[v].len() {
                let (e, w) = self.incident[v][i];
                if (w > v) == forward {
                    self.send(v, w, e, &belief, &mut scratch);
                }
            }
        }
    }

    /// Sum over all row and column chains of the chain minimum under the
    /// current reparameterization.
    fn lower_bound(&self) -> f64 {
        let topo = self.fp.model.topology();
        let (w, h) = (topo.width(), topo.height());
        let mut node_share = Vec::with_capacity(self.fp.model.num_vars());
        let mut belief = Vec::new();
        for v in 0..self.fp.model.num_vars() {
            self.belief(v, &mut belief);
            node_share.push(belief.iter().map(|b| b / self.chains).collect::<Vec<_>>());
        }
        let chain_min = |nodes: &mut dyn Iterator<Item = (usize, Option<usize>)>| -> f64 {
            // Items are (node, edge to the previous node).
            let mut f: Vec<f64> = Vec::new();
            let mut prev = usize::MAX;
            for (v, edge) in nodes {
                let share = &node_share[v];
                f = match edge {
                    None => share.clone(),
                    Some(e) => {
                        let (ku, kv) = (self.size(prev), self.size(v));
                        let t = &self.tables[e];
                        (0..kv)
                            .map(|l| {
                                let best = (0..ku)
                                    .map(|k| f[k] + t[k * kv + l] - self.fwd[e][l] - self.bwd[e][k])
                                    .fold(f64::INFINITY, f64::min);
                                share[l] + best
                            })
                            .collect()
                    }
                };
                prev = v;
            }
            f.into_iter().fold(f64::INFINITY, f64::min)
        };
        let mut total = 0.0;
        if w == 1 && h == 1 {
            return node_share[0].iter().copied().fold(f64::INFINITY, f64::min);
        }
        if w > 1 {
            for y in 0..h {
                let mut it = (0..w).map(|x| {
                    let v = topo.index(x, y);
                    (v, (x > 0).then(|| topo.right_edge(v - 1).expect("row edge")))
                });
                total += chain_min(&mut it);
            }
        }
        if h > 1 {
            for x in 0..w {
                let mut it = (0..h).map(|y| {
                    let v = topo.index(x, y);
                    (v, (y > 0).then(|| topo.down_edge(v - w).expect("column edge")))
                });
                total += chain_min(&mut it);
            }
        }
        total
    }

    /// Greedy raster-order labeling: earlier neighbors contribute their
    /// chosen pairwise terms, later neighbors their incoming messages.
    fn extract(&self) -> Vec<usize> {
        let n = self.fp.model.num_vars();
        let mut choice = vec![0usize; n];
        for v in 0..n {
            let mut cost = self.theta(v).to_vec();
            for &(e, w) in &self.incident[v] {
                if w < v {
                    let kv = self.size(v);
                    let row = &self.tables[e][choice[w] * kv..(choice[w] + 1) * kv];
                    for (c, p) in cost.iter_mut().zip(row) {
                        *c += p;
                    }
                } else {
                    for (c, m) in cost.iter_mut().zip(self.incoming(e, v)) {
                        *c += m;
                    }
                }
            }
            let mut best = 0;
            for k in 1..cost.len() {
                if cost[k] < cost[best] {
                    best = k;
                }
            }
            choice[v] = best;
        }
        choice
    }
}

/// Runs sequential TRW-S on the candidate problem.
pub fn trws_solve(fp: &FusionProblem<'_>, options: TrwsOptions) -> TrwsOutcome {
    let model = fp.model;
    let mut solver = Solver::new(fp);
    let mut best = fp.current();
    let mut best_energy = model.energy_fixed(best.as_slice());
    let mut history = Vec::new();
    for _ in 0..options.max_passes.max(1) {
        solver.pass(true);
        solver.pass(false);
        let bound = solver.lower_bound();
        let candidate = fp.labeling(&solver.extract());
        let energy = model.energy_fixed(candidate.as_slice());
        if energy < best_energy {
            best_energy = energy;
            best = candidate;
        }
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| bound - prev <= options.rel_tol * prev.abs());
        history.push(bound);
        if converged || best_energy as f64 <= bound {
            break;
        }
    }
    let lower_bound = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    TrwsOutcome {
        labeling: best,
        lower_bound: lower_bound / ENERGY_SCALE,
        bound_history: history,
    }
}

/// Multi-way fusion of `candidates` into `current` with a no-regression
/// guarantee: if the TRW-S labeling is worse than `current`, `current` is
/// returned unchanged.
pub fn multiway_fusion(
    model: &EnergyModel,
    current: &Labeling,
    candidates: &[Labeling],
    options: TrwsOptions,
) -> Result<Labeling> {
    let fp = build_fusion_problem(model, current, candidates)?;
    if fp.candidates.iter().all(|c| c.len() == 1) {
        return Ok(current.clone());
    }
    let outcome = trws_solve(&fp, options);
    let fused = model.energy_fixed(outcome.labeling.as_slice());
    if fused > model.energy_fixed(current.as_slice()) {
        log::debug!("TRW-S extraction above current energy, keeping current");
        return Ok(current.clone());
    }
    Ok(outcome.labeling)
}
