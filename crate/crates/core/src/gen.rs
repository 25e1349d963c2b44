//! Instance generators: the ladder family with a fractional gap, the
//! satisfiability gadget, random strongly connected instances and a family
//! on which greedy deletion does badly.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{is_valid_reduction, Edge, EdgeId, Instance, NodeId};
use crate::maxred::greedy_baseline;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("literal {literal} of variable {var} occurs {count} times (at most 2 allowed)")]
    OccurrenceBound { var: usize, literal: String, count: usize },
    #[error("variable {var} is out of range for {num_vars} variables")]
    UnknownVariable { var: usize, num_vars: usize },
    #[error("certification failed for n = {n}: {reason}")]
    SearchFailed { n: usize, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Node id of ladder node `(i, j)` in `gap_family(n)`.
pub fn gap_node(n: usize, i: usize, j: usize) -> NodeId {
    match j {
        0 => 0,
        j if j == n => 2 * n - 1,
        j => i * (n - 1) + j,
    }
}

/// Two parallel paths from node `0` to node `n` over `(i, 1..n-1)`, with
/// backward cross edges `((i, j), (1 - i, j - 1))`; `2n` nodes, `4n` edges.
pub fn gap_family(n: usize) -> Result<Instance, GenError> {
    if n < 2 {
        return Err(GenError::InvalidParameters(format!("ladder length {n} < 2")));
    }
    let mut edges = Vec::with_capacity(4 * n);
    for i in 0..2 {
        for j in 0..n {
            edges.push(Edge::plain(gap_node(n, i, j), gap_node(n, i, j + 1)));
        }
        for j in 1..=n {
            edges.push(Edge::plain(gap_node(n, i, j), gap_node(n, 1 - i, j - 1)));
        }
    }
    Instance::new(2 * n, 1, edges).map_err(|e| GenError::InvalidParameters(e.to_string()))
}

/// Value of the fractional solution giving every edge 0.5.
pub fn gap_fractional_value(n: usize) -> f64 {
    2.0 * n as f64
}

/// The known integral optimum of `gap_family(n)`.
pub fn gap_optimum(n: usize) -> usize {
    (8 * n - 4).div_ceil(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }
}

pub type Clause = Vec<Literal>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatGadget {
    pub instance: Instance,
    /// Human-readable name of every node.
    pub legend: Vec<String>,
    /// The clauses actually encoded, padding included.
    pub clauses: Vec<Clause>,
    pub num_vars: usize,
    /// Number of unit clauses added so that every literal occurs twice.
    pub padded: usize,
}

impl SatGadget {
    pub fn hub(&self) -> NodeId {
        0
    }

    pub fn clause_node(&self, c: usize) -> NodeId {
        1 + c
    }

    /// Nodes `[sw1, sw2, pos1, pos2, neg1, neg2]` of a variable.
    pub fn variable_nodes(&self, var: usize) -> [NodeId; 6] {
        let base = 1 + self.clauses.len() + 6 * var;
        [base, base + 1, base + 2, base + 3, base + 4, base + 5]
    }

    /// Edge set of size `8n + 2m - k` built from an assignment satisfying
    /// `k` clauses.
    pub fn assignment_solution(&self, assignment: &[bool]) -> Vec<EdgeId> {
        let g = &self.instance;
        let e = |u, v| g.find_edge(u, v).expect("gadget edge");
        let mut out = Vec::new();
        for c in 0..self.clauses.len() {
            out.push(e(self.clause_node(c), self.hub()));
        }
        let occ = occurrences(&self.clauses, self.num_vars);
        for var in 0..self.num_vars {
            let [sw1, sw2, pos1, pos2, neg1, neg2] = self.variable_nodes(var);
            out.push(e(self.hub(), sw1));
            out.push(e(self.hub(), sw2));
            if assignment[var] {
                out.extend([e(sw1, neg1), e(neg1, pos1), e(sw2, neg2), e(neg2, pos2)]);
                out.push(e(pos1, self.clause_node(occ[var].0[0])));
                out.push(e(pos2, self.clause_node(occ[var].0[1])));
            } else {
                out.extend([e(sw1, pos2), e(pos2, neg2), e(sw2, pos1), e(pos1, neg1)]);
                out.push(e(neg1, self.clause_node(occ[var].1[0])));
                out.push(e(neg2, self.clause_node(occ[var].1[1])));
            }
        }
        for (c, clause) in self.clauses.iter().enumerate() {
            if clause.iter().any(|l| assignment[l.var] == l.positive) {
                continue;
            }
            let l = clause[0];
            let slot = if l.positive {
                occ[l.var].0.iter().position(|&x| x == c).unwrap()
            } else {
                occ[l.var].1.iter().position(|&x| x == c).unwrap()
            };
            let [_, _, pos1, pos2, neg1, neg2] = self.variable_nodes(l.var);
            let node = match (l.positive, slot) {
                (true, 0) => pos1,
                (true, _) => pos2,
                (false, 0) => neg1,
                (false, _) => neg2,
            };
            out.push(e(node, self.clause_node(c)));
        }
        out.sort_unstable();
        out
    }
}

/// Clause indices of the positive and negative occurrences of each variable.
fn occurrences(clauses: &[Clause], num_vars: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut occ = vec![(Vec::new(), Vec::new()); num_vars];
    for (c, clause) in clauses.iter().enumerate() {
        for l in clause {
            if l.positive {
                occ[l.var].0.push(c);
            } else {
                occ[l.var].1.push(c);
            }
        }
    }
    occ
}

/// Builds the gadget graph: hub `h`, one node per clause, six nodes per
/// variable. Literals occurring fewer than twice are padded with unit clauses.
pub fn sat_gadget(formula: &[Clause], num_vars: usize) -> Result<SatGadget, GenError> {
    for l in formula.iter().flatten() {
        if l.var >= num_vars {
            return Err(GenError::UnknownVariable { var: l.var, num_vars });
        }
    }
    let mut clauses: Vec<Clause> = formula.to_vec();
    let occ = occurrences(&clauses, num_vars);
    let mut padded = 0;
    for (var, (p, n)) in occ.iter().enumerate() {
        for (list, positive) in [(p, true), (n, false)] {
            if list.len() > 2 {
                return Err(GenError::OccurrenceBound {
                    var,
                    literal: if positive { format!("x{var}") } else { format!("!x{var}") },
                    count: list.len(),
                });
            }
            for _ in list.len()..2 {
                clauses.push(vec![Literal { var, positive }]);
                padded += 1;
            }
        }
    }
    let m = clauses.len();
    let occ = occurrences(&clauses, num_vars);
    let mut legend = vec!["h".to_string()];
    legend.extend((0..m).map(|c| format!("c{c}")));
    let mut edges = Vec::new();
    for c in 0..m {
        edges.push(Edge::plain(1 + c, 0));
    }
    for var in 0..num_vars {
        let base = 1 + m + 6 * var;
        let [sw1, sw2, pos1, pos2, neg1, neg2] = [base, base + 1, base + 2, base + 3, base + 4, base + 5];
        for name in ["?1", "?2", "+1", "+2", "-1", "-2"] {
            legend.push(format!("x{var}{name}"));
        }
        edges.push(Edge::plain(0, sw1));
        edges.push(Edge::plain(0, sw2));
        for (u, v) in [
            (sw1, neg1),
            (neg1, pos1),
            (sw2, neg2),
            (neg2, pos2),
            (sw1, pos2),
            (pos2, neg2),
            (sw2, pos1),
            (pos1, neg1),
        ] {
            edges.push(Edge::plain(u, v));
        }
        let (p, n) = &occ[var];
        edges.push(Edge::plain(pos1, 1 + p[0]));
        edges.push(Edge::plain(pos2, 1 + p[1]));
        edges.push(Edge::plain(neg1, 1 + n[0]));
        edges.push(Edge::plain(neg2, 1 + n[1]));
    }
    let instance = Instance::new(1 + m + 6 * num_vars, 1, edges)
        .map_err(|e| GenError::InvalidParameters(e.to_string()))?;
    Ok(SatGadget {
        instance,
        legend,
        clauses,
        num_vars,
        padded,
    })
}

/// Maximum number of simultaneously satisfiable clauses, by truth table.
pub fn max_satisfiable(clauses: &[Clause], num_vars: usize) -> usize {
    (0u64..1 << num_vars)
        .map(|bits| {
            clauses
                .iter()
                .filter(|c| c.iter().any(|l| (bits >> l.var & 1 == 1) == l.positive))
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Length of the longest simple cycle, by exhaustive search (small graphs).
pub fn longest_simple_cycle(inst: &Instance) -> usize {
    fn extend(inst: &Instance, start: NodeId, u: NodeId, on_path: &mut [bool], len: usize, best: &mut usize) {
        for e in inst.out_edges(u) {
            let v = inst.edge(e).target;
            if v == start {
                *best = (*best).max(len + 1);
            } else if v > start && !on_path[v] {
                on_path[v] = true;
                extend(inst, start, v, on_path, len + 1, best);
                on_path[v] = false;
            }
        }
    }
    let mut best = 0;
    let mut on_path = vec![false; inst.n()];
    for start in 0..inst.n() {
        on_path[start] = true;
        extend(inst, start, start, &mut on_path, 0, &mut best);
        on_path[start] = false;
    }
    best
}

/// Random strongly connected instance: a random Hamiltonian cycle plus
/// uniformly random extra edges, each edge required with probability
/// `d_density`, labels uniform in `[0, p)`.
pub fn random_scc(n: usize, m: usize, d_density: f64, p: u32, seed: u64) -> Result<Instance, GenError> {
    if n < 2 {
        return Err(GenError::InvalidParameters(format!("need at least 2 nodes, got {n}")));
    }
    let max_m = n * (n - 1);
    if m < n || m > max_m {
        return Err(GenError::InvalidParameters(format!("edge count {m} not in [{n}, {max_m}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let mut present: HashSet<(NodeId, NodeId)> = pairs.iter().copied().collect();
    if m - n > max_m / 2 {
        // dense: sample from the explicit complement
        let mut rest: Vec<(NodeId, NodeId)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v && !present.contains(&(u, v)))
            .collect();
        rest.shuffle(&mut rng);
        pairs.extend(rest.into_iter().take(m - n));
    } else {
        while pairs.len() < m {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v && present.insert((u, v)) {
                pairs.push((u, v));
            }
        }
    }
    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(u, v)| {
            let required = d_density > 0.0 && rng.gen_bool(d_density.min(1.0));
            let label = if p > 1 { rng.gen_range(0..p) } else { 0 };
            Edge::new(u, v, label, required)
        })
        .collect();
    Instance::new(n, p, edges).map_err(|e| GenError::InvalidParameters(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialInstance {
    pub instance: Instance,
    /// Edge order for which greedy deletion stops after one deletion.
    pub order: Vec<EdgeId>,
    pub greedy_deletions: usize,
    /// Deletions of a certified optimum.
    pub optimum_deletions: usize,
    /// The certified optimum (a Hamiltonian cycle).
    pub optimum: Vec<EdgeId>,
}

/// Triangle `0 -> 1 -> 2 -> 0`, a two-way path `2 - 3 - ... - (n-1)` and the
/// edge `(n-1, 0)`. Scanning `(n-1, 0)` first, greedy deletes it and nothing
/// else, while the cycle `0 -> 1 -> ... -> n-1 -> 0` is optimal: every node
/// needs an entering edge, so `n` edges are a lower bound.
pub fn greedy_adversarial(n: usize) -> Result<AdversarialInstance, GenError> {
    if n < 4 {
        return Err(GenError::InvalidParameters(format!("need n >= 4, got {n}")));
    }
    let mut edges = vec![Edge::plain(0, 1), Edge::plain(1, 2), Edge::plain(2, 0), Edge::plain(n - 1, 0)];
    for i in 2..n - 1 {
        edges.push(Edge::plain(i, i + 1));
        edges.push(Edge::plain(i + 1, i));
    }
    let instance = Instance::new(n, 1, edges).map_err(|e| GenError::InvalidParameters(e.to_string()))?;
    let first = instance.find_edge(n - 1, 0).unwrap();
    let mut order = vec![first];
    order.extend((0..instance.m()).filter(|&e| e != first));

    let fail = |reason: String| GenError::SearchFailed { n, reason };
    let greedy = greedy_baseline(&instance, &order).map_err(|e| fail(e.to_string()))?;
    let greedy_deletions = greedy.deletions(&instance);
    if greedy_deletions != 1 {
        return Err(fail(format!("greedy deleted {greedy_deletions} edges")));
    }
    let optimum: Vec<EdgeId> = (0..n).map(|i| instance.find_edge(i, (i + 1) % n).unwrap()).collect();
    if !is_valid_reduction(&instance, &optimum).valid {
        return Err(fail("the Hamiltonian cycle is not a valid reduction".into()));
    }
    Ok(AdversarialInstance {
        optimum_deletions: instance.m() - optimum.len(),
        instance,
        order,
        greedy_deletions,
        optimum,
    })
}
