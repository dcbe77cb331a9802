//! Max-flow / min-cut on integer capacities and the graph-cut route for
//! submodular binary fusion.
//!
//! The solver is Dinic's algorithm: BFS level graphs with blocking flows
//! found by an iterative depth-first search. The returned cut is the set of
//! nodes reachable from the source in the final residual graph, i.e. the
//! unique minimal source side among all minimum cuts.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{check_all, EnergyModel, Labeling};

/// Side of the cut a node falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    residual: i64,
    capacity: i64,
}

/// A flow network over `node_count` ordinary nodes plus a source and a sink.
///
/// Arcs are stored in pairs; arc `a ^ 1` is the reverse of arc `a`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    node_count: usize,
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); node_count + 2],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> usize {
        self.node_count
    }

    pub fn sink(&self) -> usize {
        self.node_count + 1
    }

    /// Adds the arc pair `from → to` (capacity `cap`) and `to → from`
    /// (capacity `rev_cap`). Returns the forward arc handle.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, rev_cap: i64) -> usize {
        assert!(cap >= 0 && rev_cap >= 0, "capacities must be non-negative");
        assert!(from != to, "self loops are not allowed");
        let a = self.arcs.len();
        self.arcs.push(Arc {
            to,
            residual: cap,
            capacity: cap,
        });
        self.arcs.push(Arc {
            to: from,
            residual: rev_cap,
            capacity: rev_cap,
        });
        self.adjacency[from].push(a);
        self.adjacency[to].push(a + 1);
        a
    }

    /// Adds `source → node` with capacity `from_source` and `node → sink`
    /// with capacity `to_sink`; zero capacities are skipped.
    pub fn add_terminal_edges(&mut self, node: usize, from_source: i64, to_sink: i64) {
        if from_source > 0 {
            self.add_edge(self.source(), node, from_source, 0);
        }
        if to_sink > 0 {
            self.add_edge(node, self.sink(), to_sink, 0);
        }
    }

    /// Total original capacity of arcs leaving the source side of `cut`.
    pub fn cut_capacity(&self, cut: &CutAssignment) -> i64 {
        let side = |v: usize| {
            if v == self.source() {
                Side::Source
            } else if v == self.sink() {
                Side::Sink
            } else {
                cut.sides[v]
            }
        };
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(from, arcs)| arcs.iter().map(move |&a| (from, a)))
            .filter(|&(from, a)| side(from) == Side::Source && side(self.arcs[a].to) == Side::Sink)
            .map(|(_, a)| self.arcs[a].capacity)
            .sum()
    }

    fn levels(&self) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.adjacency.len()];
        let mut queue = VecDeque::new();
        level[self.source()] = 0;
        queue.push_back(self.source());
        while let Some(v) = queue.pop_front() {
            for &a in &self.adjacency[v] {
                let arc = &self.arcs[a];
                if arc.residual > 0 && level[arc.to] == u32::MAX {
                    level[arc.to] = level[v] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        (level[self.sink()] != u32::MAX).then_some(level)
    }

    fn blocking_flow(&mut self, level: &[u32]) -> i64 {
        let (s, t) = (self.source(), self.sink());
        let mut next = vec![0usize; self.adjacency.len()];
        let mut path: Vec<usize> = Vec::new();
        let mut total = 0;
        loop {
            let v = path.last().map_or(s, |&a| self.arcs[a].to);
            if v == t {
                let push = path.iter().map(|&a| self.arcs[a].residual).min().unwrap_or(0);
                for &a in &path {
                    self.arcs[a].residual -= push;
                    self.arcs[a ^ 1].residual += push;
                }
                total += push;
                // Retreat to the tail of the first saturated arc.
                let cut = path
                    .iter()
                    .position(|&a| self.arcs[a].residual == 0)
                    .unwrap_or(0);
                path.truncate(cut);
                continue;
            }
            let mut advanced = false;
            while next[v] < self.adjacency[v].len() {
                let a = self.adjacency[v][next[v]];
                let arc = &self.arcs[a];
                if arc.residual > 0 && level[arc.to] == level[v] + 1 {
                    path.push(a);
                    advanced = true;
                    break;
                }
                next[v] += 1;
            }
            if !advanced {
                match path.pop() {
                    Some(a) => {
                        let tail = self.arcs[a ^ 1].to;
                        next[tail] += 1;
                    }
                    None => return total,
                }
            }
        }
    }

    fn source_reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![self.source()];
        seen[self.source()] = true;
        while let Some(v) = stack.pop() {
            for &a in &self.adjacency[v] {
                let arc = &self.arcs[a];
                if arc.residual > 0 && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}

/// Side of the minimum cut for every ordinary node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutAssignment {
    pub sides: Vec<Side>,
}

/// Computes a maximum flow and the canonical minimum cut.
pub fn solve_maxflow(mut net: FlowNetwork) -> (i64, CutAssignment) {
    let mut flow = 0;
    while let Some(level) = net.levels() {
        flow += net.blocking_flow(&level);
    }
    let reach = net.source_reachable();
    let sides = (0..net.node_count)
        .map(|v| if reach[v] { Side::Source } else { Side::Sink })
        .collect();
    (flow, CutAssignment { sides })
}

/// The four fixed-point pairwise values of an edge under a binary fusion:
/// `[E(c,c), E(c,p), E(p,c), E(p,p)]` with `c` = current, `p` = proposal.
#[inline]
pub(crate) fn fusion_terms(
    model: &EnergyModel,
    edge: usize,
    u: usize,
    v: usize,
    current: &[usize],
    proposal: &[usize],
) -> [i64; 4] {
    [
        model.pairwise_fixed(edge, current[u], current[v]),
        model.pairwise_fixed(edge, current[u], proposal[v]),
        model.pairwise_fixed(edge, proposal[u], current[v]),
        model.pairwise_fixed(edge, proposal[u], proposal[v]),
    ]
}

fn first_violation(model: &EnergyModel, current: &[usize], proposal: &[usize]) -> Option<usize> {
    model
        .topology()
        .edges()
        .iter()
        .enumerate()
        .find(|&(e, &(u, v))| {
            let [a, b, c, d] = fusion_terms(model, e, u, v, current, proposal);
            a + d > b + c
        })
        .map(|(e, _)| e)
}

/// True iff every edge satisfies
/// `θ(c_u,c_v) + θ(p_u,p_v) ≤ θ(c_u,p_v) + θ(p_u,c_v)` in fixed-point units.
pub fn is_submodular_fusion(
    model: &EnergyModel,
    current: &Labeling,
    proposal: &Labeling,
) -> Result<bool> {
    check_all(model, [current, proposal])?;
    Ok(first_violation(model, current.as_slice(), proposal.as_slice()).is_none())
}

/// Exact binary fusion by s-t min cut.
///
/// Returns the minimum-energy labeling in `{current_v, proposal_v}^V`.
/// Variables whose two candidates coincide are not put in the network.
/// Among several optimal fusions the one taking the proposal wherever the
/// minimal source side allows it is returned.
pub fn binary_fusion_graphcut(
    model: &EnergyModel,
    current: &Labeling,
    proposal: &Labeling,
) -> Result<Labeling> {
    check_all(model, [current, proposal])?;
    let (c, p) = (current.as_slice(), proposal.as_slice());
    if let Some(edge) = first_violation(model, c, p) {
        return Err(Error::NotSubmodular { edge });
    }
    let n = model.num_vars();
    let mut node = vec![usize::MAX; n];
    let mut free = 0;
    for v in 0..n {
        if c[v] != p[v] {
            node[v] = free;
            free += 1;
        }
    }
    if free == 0 {
        return Ok(current.clone());
    }
    // linear[k] = cost(x_k = 1) - cost(x_k = 0) for network node k.
    let mut linear = vec![0i64; free];
    let mut constant = 0i64;
    for v in 0..n {
        if node[v] != usize::MAX {
            let c0 = model.unary_fixed(v, c[v]);
            constant += c0;
            linear[node[v]] += model.unary_fixed(v, p[v]) - c0;
        } else {
            constant += model.unary_fixed(v, c[v]);
        }
    }
    let mut net = FlowNetwork::new(free);
    for (e, &(u, v)) in model.topology().edges().iter().enumerate() {
        let [a, b, cc, d] = fusion_terms(model, e, u, v, c, p);
        match (node[u], node[v]) {
            (usize::MAX, usize::MAX) => constant += a,
            (usize::MAX, kv) => {
                constant += a;
                linear[kv] += b - a;
            }
            (ku, usize::MAX) => {
                constant += a;
                linear[ku] += cc - a;
            }
            (ku, kv) => {
                constant += a;
                linear[ku] += cc - a;
                linear[kv] += d - cc;
                let w = b + cc - a - d;
                if w > 0 {
                    net.add_edge(ku, kv, w, 0);
                }
            }
        }
    }
    for (k, &a) in linear.iter().enumerate() {
        if a > 0 {
            net.add_terminal_edges(k, a, 0);
        } else if a < 0 {
            constant += a;
            net.add_terminal_edges(k, 0, -a);
        }
    }
    let (flow, cut) = solve_maxflow(net);
    let result: Vec<usize> = (0..n)
        .map(|v| match node[v] {
            usize::MAX => c[v],
            k if cut.sides[k] == Side::Sink => p[v],
            _ => c[v],
        })
        .collect();
    debug_assert_eq!(model.energy_fixed(&result), constant + flow);
    Ok(Labeling::new(result))
}
