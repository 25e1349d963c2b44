//! Labels modulo a prime `p`: per-component parity classification, the
//! single-edge lift of an unlabeled solution, and recombination of the
//! component solutions with a reduced set of cross-component edges.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{scc, EdgeId, Instance, NodeId, Violation};
use crate::maxred::{solve_max, MaxError, MaxOptions};
use crate::minred::{solve_min, MinError};
use crate::solution::Solution;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PAryError {
    #[error("component rooted at {0} has multiple parity but no edge breaks the tree labels")]
    NoWitness(NodeId),
    #[error(transparent)]
    Min(#[from] MinError),
    #[error(transparent)]
    Max(#[from] MaxError),
    #[error("recombined solution is invalid: {0:?}")]
    Invalid(Option<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityKind {
    /// One residue between every ordered pair of nodes.
    Single,
    /// Every residue between every ordered pair.
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityClass {
    /// Sorted node ids.
    pub component: Vec<NodeId>,
    pub kind: ParityKind,
    /// Lowest edge of the component whose label disagrees with the tree labels.
    pub witness: Option<EdgeId>,
    /// Label of the tree path from `component[0]`, per node of `component`.
    pub node_labels: Vec<u32>,
}

impl ParityClass {
    fn label_of(&self, v: NodeId) -> u32 {
        self.node_labels[self.component.binary_search(&v).expect("node of the component")]
    }

    fn breaks(&self, inst: &Instance, e: EdgeId) -> bool {
        let ed = inst.edge(e);
        let p = inst.p();
        (self.label_of(ed.source) + ed.label) % p != self.label_of(ed.target)
    }
}

fn component_edges(inst: &Instance, nodes: &[NodeId]) -> Vec<EdgeId> {
    let mut out: Vec<EdgeId> = nodes
        .iter()
        .flat_map(|&v| inst.out_edges(v))
        .filter(|&e| nodes.binary_search(&inst.edge(e).target).is_ok())
        .collect();
    out.sort_unstable();
    out
}

/// Labels every node by the characteristic of its path in a search tree of
/// `tr1_solution` (falling back to the other component edges for nodes the
/// solution does not reach), then tests every edge of the component against
/// those labels. By the parity dichotomy the component has a single parity
/// exactly when no edge disagrees.
pub fn classify(inst: &Instance, component: &[NodeId], tr1_solution: &[EdgeId]) -> ParityClass {
    let mut nodes = component.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let p = inst.p();
    let local = |v: NodeId| nodes.binary_search(&v).ok();
    let all = component_edges(inst, &nodes);
    let mut in_solution = vec![false; inst.m()];
    for &e in tr1_solution {
        in_solution[e] = true;
    }
    let mut labels: Vec<Option<u32>> = vec![None; nodes.len()];
    if !nodes.is_empty() {
        labels[0] = Some(0);
        for use_all in [false, true] {
            let mut queue: VecDeque<usize> = (0..nodes.len()).filter(|&i| labels[i].is_some()).collect();
            while let Some(i) = queue.pop_front() {
                let lu = labels[i].unwrap();
                for e in inst.out_edges(nodes[i]) {
                    let ed = inst.edge(e);
                    let Some(j) = local(ed.target) else {
                        continue;
                    };
                    if labels[j].is_none() && (use_all || in_solution[e]) {
                        labels[j] = Some((lu + ed.label) % p);
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    let mut class = ParityClass {
        component: nodes,
        kind: ParityKind::Single,
        witness: None,
        node_labels: labels.into_iter().map(|l| l.unwrap_or(0)).collect(),
    };
    class.witness = all.into_iter().find(|&e| class.breaks(inst, e));
    if class.witness.is_some() {
        class.kind = ParityKind::Multiple;
    }
    class
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lift {
    pub edges: Vec<EdgeId>,
    pub inserted: Option<EdgeId>,
    pub class: ParityClass,
}

/// Makes an unlabeled solution of one component valid for the labels: when
/// the component has multiple parity but the solution only one, the witness
/// edge is added.
pub fn lift(inst: &Instance, component: &[NodeId], tr1_solution: &[EdgeId]) -> Result<Lift, PAryError> {
    let class = classify(inst, component, tr1_solution);
    let mut edges = tr1_solution.to_vec();
    edges.sort_unstable();
    edges.dedup();
    let mut inserted = None;
    if class.kind == ParityKind::Multiple {
        let solution_single = edges
            .iter()
            .filter(|&&e| class.component.binary_search(&inst.edge(e).target).is_ok() && class.component.binary_search(&inst.edge(e).source).is_ok())
            .all(|&e| !class.breaks(inst, e));
        if solution_single {
            let w = class.witness.ok_or(PAryError::NoWitness(class.component[0]))?;
            edges.push(w);
            edges.sort_unstable();
            inserted = Some(w);
        }
    }
    Ok(Lift { edges, inserted, class })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub class: ParityClass,
    pub lifted: Option<EdgeId>,
    /// Kept edges inside the component.
    pub size: usize,
    pub lower_bound: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recombined {
    pub solution: Solution,
    pub components: Vec<ComponentReport>,
    pub cross_kept: usize,
    pub case_summary: BTreeMap<String, usize>,
    pub fallbacks: usize,
}

struct ComponentResult {
    edges: Vec<EdgeId>,
    report: ComponentReport,
    summary: BTreeMap<String, usize>,
}

fn solve_component(inst: &Instance, nodes: &[NodeId], objective: Objective, max: MaxOptions) -> Result<ComponentResult, PAryError> {
    let (sub, origin) = inst.induced(nodes);
    let plain = sub.unlabeled();
    let mut summary = BTreeMap::new();
    let (local, lower_bound, fallbacks) = if nodes.len() < 2 {
        (Vec::new(), 0, 0)
    } else {
        match objective {
            Objective::Min => {
                let s = solve_min(&plain)?;
                summary = s.trace.summary();
                (s.solution.edges, s.certificate.bound(), s.trace.fallbacks())
            }
            Objective::Max => {
                let s = solve_max(&plain, max)?;
                (s.solution.edges, 0, 0)
            }
        }
    };
    let global: Vec<EdgeId> = local.iter().map(|&e| origin[e]).collect();
    let lifted = lift(inst, nodes, &global)?;
    Ok(ComponentResult {
        report: ComponentReport {
            size: lifted.edges.len(),
            class: lifted.class,
            lifted: lifted.inserted,
            lower_bound,
            fallbacks,
        },
        edges: lifted.edges,
        summary,
    })
}

/// Offset of a path state: a residue, or every residue at once.
const ANY: usize = usize::MAX;

/// Residue shift of a cross edge relative to the node labels of its ends.
fn shift(inst: &Instance, class_of: &[&ParityClass], comp_of: &[usize], e: EdgeId) -> u32 {
    let ed = inst.edge(e);
    let p = inst.p();
    let (a, b) = (class_of[comp_of[ed.source]], class_of[comp_of[ed.target]]);
    (a.label_of(ed.source) + ed.label + p - b.label_of(ed.target)) % p
}

/// Drops cross-component edges whose triples other kept cross edges already
/// realize, from the highest id down, keeping required ones. A path through
/// single-parity components has a residue fixed by the node labels and the
/// shifts of its cross edges; touching a multiple-parity component makes it
/// realize every residue.
fn reduce_cross(inst: &Instance, comp_of: &[usize], classes: &[&ParityClass], cross: &[EdgeId]) -> Vec<EdgeId> {
    let k = classes.len();
    let p = inst.p() as usize;
    let multiple: Vec<bool> = classes.iter().map(|c| c.kind == ParityKind::Multiple).collect();
    let shifts: Vec<u32> = (0..inst.m())
        .map(|e| if comp_of[inst.edge(e).source] != comp_of[inst.edge(e).target] { shift(inst, classes, comp_of, e) } else { 0 })
        .collect();
    let mut keep = vec![false; inst.m()];
    let mut by_source: Vec<Vec<EdgeId>> = vec![Vec::new(); k];
    for &e in cross {
        keep[e] = true;
        by_source[comp_of[inst.edge(e).source]].push(e);
    }
    let slot = |r: usize| if r == ANY { p } else { r };
    let mut seen = vec![false; k * (p + 1)];
    let mut sorted = cross.to_vec();
    sorted.sort_unstable();
    for &e in sorted.iter().rev() {
        let ed = inst.edge(e);
        if ed.required {
            continue;
        }
        let (a, b) = (comp_of[ed.source], comp_of[ed.target]);
        let target = if multiple[a] || multiple[b] { ANY } else { shifts[e] as usize };
        seen.iter_mut().for_each(|s| *s = false);
        let start = if multiple[a] { ANY } else { 0 };
        seen[a * (p + 1) + slot(start)] = true;
        let mut queue = VecDeque::from([(a, start)]);
        let mut found = false;
        while let Some((c, r)) = queue.pop_front() {
            if c == b && (r == ANY || r == target) {
                found = true;
                break;
            }
            for &f in &by_source[c] {
                if f == e || !keep[f] {
                    continue;
                }
                let c2 = comp_of[inst.edge(f).target];
                let r2 = if r == ANY || multiple[c2] { ANY } else { (r + shifts[f] as usize) % p };
                let s = c2 * (p + 1) + slot(r2);
                if !seen[s] {
                    seen[s] = true;
                    queue.push_back((c2, r2));
                }
            }
        }
        if found {
            keep[e] = false;
        }
    }
    sorted.into_iter().filter(|&e| keep[e]).collect()
}

/// Solves a general instance: each strongly connected component on its
/// unlabeled view, lifted to the labels, plus a reduced set of edges between
/// components.
pub fn recombine(inst: &Instance, objective: Objective) -> Result<Recombined, PAryError> {
    recombine_with(inst, objective, MaxOptions::default())
}

pub fn recombine_with(inst: &Instance, objective: Objective, max: MaxOptions) -> Result<Recombined, PAryError> {
    let comps = scc(inst);
    let results: Vec<ComponentResult> = comps
        .components
        .par_iter()
        .map(|nodes| {
            let mut sorted = nodes.clone();
            sorted.sort_unstable();
            solve_component(inst, &sorted, objective, max)
        })
        .collect::<Result<_, _>>()?;
    let classes: Vec<&ParityClass> = results.iter().map(|r| &r.report.class).collect();
    let comp_of = &comps.component_of;
    let cross: Vec<EdgeId> = (0..inst.m()).filter(|&e| comp_of[inst.edge(e).source] != comp_of[inst.edge(e).target]).collect();
    let kept_cross = reduce_cross(inst, comp_of, &classes, &cross);

    let mut edges: Vec<EdgeId> = results.iter().flat_map(|r| r.edges.iter().copied()).collect();
    edges.extend(&kept_cross);
    let lower_bound = results.iter().map(|r| r.report.lower_bound).sum::<usize>();
    let solution = Solution::new(inst, edges, (objective == Objective::Min).then_some(lower_bound + kept_cross.len()));
    if !solution.is_valid() {
        return Err(PAryError::Invalid(solution.report.violation.clone()));
    }
    let mut case_summary = BTreeMap::new();
    for r in &results {
        for (k, v) in &r.summary {
            *case_summary.entry(k.clone()).or_insert(0) += v;
        }
    }
    let fallbacks = results.iter().map(|r| r.report.fallbacks).sum();
    Ok(Recombined {
        solution,
        components: results.into_iter().map(|r| r.report).collect(),
        cross_kept: kept_cross.len(),
        case_summary,
        fallbacks,
    })
}
