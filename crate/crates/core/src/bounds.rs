//! Cut-requirement lower bounds and the lower-bound edge set `L`.
//!
//! For every node `u`, the source components of `G - u` can only be entered
//! from `u`, and the sink components can only be left towards `u`. Each one
//! yields an edge set that every solution must hit. Requirements anchored at
//! an out-cut are pairwise disjoint, and so are those anchored at an in-cut,
//! so a solution edge hits at most one of each kind; a maximum matching
//! between the two kinds turns this into a bound.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credit::Quarters;
use crate::graph::{in_cut, out_cut, scc_mask, EdgeId, Instance, NodeId, TarjanWorkspace};
use crate::matching::max_weight_matching;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("instance is not strongly connected")]
    NotStronglyConnected,
    #[error("requirement graph is not bipartite: edge {0} satisfies two requirements on one side")]
    NonBipartite(EdgeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// Requirement contained in the out-cut of its anchor.
    Out,
    /// Requirement contained in the in-cut of its anchor.
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequirementKind {
    SingleEdge,
    MultiEdge,
    SiblingMember,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    /// Sorted edge ids.
    pub edges: Vec<EdgeId>,
    pub anchor: Vec<NodeId>,
    pub side: Side,
    pub coefficient: Quarters,
    pub kind: RequirementKind,
    /// Index of the other member of a sibling pair.
    pub sibling: Option<usize>,
}

impl Requirement {
    fn cut(edges: Vec<EdgeId>, anchor: Vec<NodeId>, side: Side) -> Self {
        let kind = if edges.len() == 1 {
            RequirementKind::SingleEdge
        } else {
            RequirementKind::MultiEdge
        };
        Requirement {
            edges,
            anchor,
            side,
            coefficient: Quarters::ONE,
            kind,
            sibling: None,
        }
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn satisfied_by(&self, mask: &[bool]) -> bool {
        self.edges.iter().any(|&e| mask[e])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedPair {
    /// Requirement indices of the out-side and in-side matching nodes
    /// (for a sibling pair, its lower member).
    pub out_node: usize,
    pub in_node: usize,
    /// The edge satisfying both.
    pub edge: EdgeId,
    /// Net credit of that edge.
    pub credit: Quarters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub requirements: Vec<Requirement>,
    pub matching: Vec<MatchedPair>,
    /// Sum of coefficients minus the weight of the matching.
    pub total: Quarters,
    /// Dual value per requirement; they sum to `total`.
    pub y: Vec<Quarters>,
    /// Worrisome digons `(u, v)` (non-required `(u, v)`, required `(v, u)`)
    /// whose requirements were rewritten.
    pub worrisome: Vec<(NodeId, NodeId)>,
}

impl DualCertificate {
    /// The bound as an edge count.
    pub fn bound(&self) -> usize {
        (self.total.0.max(0) as usize).div_ceil(4)
    }

    fn empty() -> Self {
        DualCertificate {
            requirements: Vec::new(),
            matching: Vec::new(),
            total: Quarters::ZERO,
            y: Vec::new(),
            worrisome: Vec::new(),
        }
    }
}

/// The minimal cut requirements of a strongly connected instance.
pub fn extract_requirements(inst: &Instance) -> Result<Vec<Requirement>, BoundsError> {
    if !inst.is_strongly_connected() {
        return Err(BoundsError::NotStronglyConnected);
    }
    if inst.n() <= 1 {
        return Ok(Vec::new());
    }
    let per_node: Vec<Vec<Requirement>> = (0..inst.n())
        .into_par_iter()
        .map_init(NodeCuts::default, |cuts, u| cuts.requirements_at(inst, u))
        .collect();
    let mut raw: Vec<Requirement> = per_node.into_iter().flatten().collect();
    for e in 0..inst.m() {
        let ed = inst.edge(e);
        if ed.required {
            raw.push(Requirement::cut(vec![e], vec![ed.source], Side::Out));
        }
    }
    Ok(minimize(inst, raw))
}

#[derive(Default)]
struct NodeCuts {
    ws: TarjanWorkspace,
    has_in: Vec<bool>,
    has_out: Vec<bool>,
    group: Vec<usize>,
}

impl NodeCuts {
    fn requirements_at(&mut self, inst: &Instance, u: NodeId) -> Vec<Requirement> {
        self.ws.run(inst, |v| v != u, |_| true);
        let comp = &self.ws.comp;
        let k = self.ws.comp_count;
        self.has_in.clear();
        self.has_in.resize(k, false);
        self.has_out.clear();
        self.has_out.resize(k, false);
        for ed in inst.edges() {
            if ed.source == u || ed.target == u {
                continue;
            }
            let (a, b) = (comp[ed.source], comp[ed.target]);
            if a != b {
                self.has_out[a] = true;
                self.has_in[b] = true;
            }
        }
        let mut out = Vec::new();
        // out-side: edges from u into each source component
        grouped(&mut self.group, k, inst.out_edges(u).map(|e| (e, comp[inst.edge(e).target])), |c| {
            !self.has_in[c]
        })
        .into_iter()
        .for_each(|edges| out.push(Requirement::cut(edges, vec![u], Side::Out)));
        grouped(
            &mut self.group,
            k,
            inst.in_edges(u).iter().map(|&e| (e, comp[inst.edge(e).source])),
            |c| !self.has_out[c],
        )
        .into_iter()
        .for_each(|edges| out.push(Requirement::cut(edges, vec![u], Side::In)));
        out
    }
}

/// Groups `(edge, component)` pairs by component, keeping components that
/// pass `keep`; groups come out ordered by their lowest edge.
fn grouped(
    slot: &mut Vec<usize>,
    k: usize,
    items: impl Iterator<Item = (EdgeId, usize)>,
    keep: impl Fn(usize) -> bool,
) -> Vec<Vec<EdgeId>> {
    slot.clear();
    slot.resize(k, usize::MAX);
    let mut groups: Vec<Vec<EdgeId>> = Vec::new();
    for (e, c) in items {
        if !keep(c) {
            continue;
        }
        if slot[c] == usize::MAX {
            slot[c] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[c]].push(e);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    groups
}

/// Drops duplicates and every requirement that strictly contains another.
/// Out-side requirements are pairwise disjoint and so are in-side ones, so a
/// strict containment can only involve a one-edge requirement.
fn minimize(inst: &Instance, raw: Vec<Requirement>) -> Vec<Requirement> {
    let mut singles = vec![false; inst.m()];
    for r in &raw {
        if r.edges.len() == 1 {
            singles[r.edges[0]] = true;
        }
    }
    let mut seen: HashSet<Vec<EdgeId>> = HashSet::new();
    raw.into_iter()
        .filter(|r| r.edges.len() == 1 || !r.edges.iter().any(|&e| singles[e]))
        .filter(|r| seen.insert(r.edges.clone()))
        .collect()
}

/// A node of the matching graph: a coefficient-1 requirement or a sibling
/// pair, with the requirement indices it stands for.
#[derive(Debug, Clone)]
struct MatchNode {
    members: Vec<usize>,
    side: Side,
}

/// Maximum net-credit matching of the requirement graph.
pub fn max_weight_requirement_matching(
    inst: &Instance,
    requirements: &[Requirement],
) -> Result<DualCertificate, BoundsError> {
    let mut nodes: Vec<MatchNode> = Vec::new();
    let mut node_of = vec![usize::MAX; requirements.len()];
    for (i, r) in requirements.iter().enumerate() {
        if node_of[i] != usize::MAX {
            continue;
        }
        let mut members = vec![i];
        if let Some(j) = r.sibling {
            members.push(j);
            node_of[j] = nodes.len();
        }
        node_of[i] = nodes.len();
        nodes.push(MatchNode { members, side: r.side });
    }
    // credit (in half units) each edge receives from its out-side and in-side nodes
    let mut out_credit: Vec<Option<(usize, i64)>> = vec![None; inst.m()];
    let mut in_credit: Vec<Option<(usize, i64)>> = vec![None; inst.m()];
    for (i, r) in requirements.iter().enumerate() {
        let node = node_of[i];
        let slot = match r.side {
            Side::Out => &mut out_credit,
            Side::In => &mut in_credit,
        };
        let halves = r.coefficient.0 / 2;
        for &e in &r.edges {
            match &mut slot[e] {
                Some((n2, c)) if *n2 == node => *c += halves,
                Some(_) => return Err(BoundsError::NonBipartite(e)),
                s @ None => *s = Some((node, halves)),
            }
        }
    }
    // an edge that is a one-edge requirement cannot serve anything else
    for r in requirements {
        if r.kind == RequirementKind::SingleEdge {
            let e = r.edges[0];
            let other = match r.side {
                Side::Out => in_credit[e],
                Side::In => out_credit[e],
            };
            if other.is_some() {
                return Err(BoundsError::NonBipartite(e));
            }
        }
    }

    let mut left_of = vec![usize::MAX; nodes.len()];
    let mut right_of = vec![usize::MAX; nodes.len()];
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (k, node) in nodes.iter().enumerate() {
        match node.side {
            Side::Out => {
                left_of[k] = left.len();
                left.push(k);
            }
            Side::In => {
                right_of[k] = right.len();
                right.push(k);
            }
        }
    }
    // best edge per node pair: highest weight, then lowest id
    let mut best: std::collections::BTreeMap<(usize, usize), (i64, EdgeId)> = Default::default();
    for e in 0..inst.m() {
        if let (Some((a, ca)), Some((b, cb))) = (out_credit[e], in_credit[e]) {
            let w = ca + cb - 2;
            if w <= 0 {
                continue;
            }
            let key = (left_of[a], right_of[b]);
            match best.get(&key) {
                Some(&(w0, _)) if w0 >= w => {}
                _ => {
                    best.insert(key, (w, e));
                }
            }
        }
    }
    let pairs: Vec<(usize, usize, i64)> = best.iter().map(|(&(l, r), &(w, _))| (l, r, w)).collect();
    let matched = max_weight_matching(left.len(), right.len(), &pairs);

    let coefficient_sum: Quarters = requirements.iter().map(|r| r.coefficient).sum();
    let mut y: Vec<Quarters> = requirements.iter().map(|r| r.coefficient).collect();
    let mut matching = Vec::with_capacity(matched.len());
    let mut weight = Quarters::ZERO;
    for (l, r) in matched {
        let (w, e) = best[&(l, r)];
        let credit = Quarters::halves(w);
        weight += credit;
        let (a, b) = (left[l], right[r]);
        let ca = Quarters::halves(out_credit[e].unwrap().1);
        let cb = Quarters::halves(in_credit[e].unwrap().1);
        for (node, c) in [(a, ca), (b, cb)] {
            let value = Quarters::ONE - c + Quarters::HALF;
            let members = &nodes[node].members;
            let share = Quarters(value.0 / members.len() as i64);
            for &i in members {
                y[i] = share;
            }
        }
        matching.push(MatchedPair {
            out_node: nodes[a].members[0],
            in_node: nodes[b].members[0],
            edge: e,
            credit,
        });
    }
    Ok(DualCertificate {
        requirements: requirements.to_vec(),
        matching,
        total: coefficient_sum - weight,
        y,
        worrisome: Vec::new(),
    })
}

/// The bound from the plain cut requirements.
pub fn p3_certificate(inst: &Instance) -> Result<DualCertificate, BoundsError> {
    let reqs = extract_requirements(inst)?;
    max_weight_requirement_matching(inst, &reqs)
}

/// Result of rewriting the requirement system around worrisome digons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorrisomeDigons {
    pub digons: Vec<(NodeId, NodeId)>,
    pub requirements: Vec<Requirement>,
}

/// Finds the worrisome digons and rewrites the requirements around them.
/// A digon `{u, v}` with non-required `(u, v)` and required `(v, u)` is a
/// candidate when it is an object of the `L` built from `requirements`; it is
/// discharged when another required edge enters or leaves it, or when any of
/// its four cuts holds more than one requirement.
pub fn worrisome_digons(inst: &Instance, requirements: &[Requirement]) -> Result<WorrisomeDigons, BoundsError> {
    let unchanged = WorrisomeDigons {
        digons: Vec::new(),
        requirements: requirements.to_vec(),
    };
    if inst.required_count() == 0 {
        return Ok(unchanged);
    }
    let cert = max_weight_requirement_matching(inst, requirements)?;
    let (partition, _) = build_l(inst, &cert);
    let count_at = |x: NodeId, side: Side| {
        requirements
            .iter()
            .filter(|r| match side {
                Side::Out => r.edges.iter().all(|&e| inst.edge(e).source == x),
                Side::In => r.edges.iter().all(|&e| inst.edge(e).target == x),
            })
            .count()
    };
    let mut used = vec![false; inst.n()];
    let mut digons = Vec::new();
    for (e, ed) in inst.edges().iter().enumerate() {
        let (u, v) = (ed.source, ed.target);
        if ed.required || used[u] || used[v] {
            continue;
        }
        let Some(back) = inst.find_edge(v, u) else { continue };
        if !inst.edge(back).required {
            continue;
        }
        let obj = partition.object_of[u];
        if partition.objects[obj].len() != 2 || partition.object_of[v] != obj {
            continue;
        }
        if !(partition.in_l[e] && partition.in_l[back]) {
            continue;
        }
        let pair = [u, v];
        let touching_d = in_cut(inst, &pair)
            .into_iter()
            .chain(out_cut(inst, &pair))
            .any(|x| inst.edge(x).required);
        if touching_d {
            continue;
        }
        if [(u, Side::Out), (u, Side::In), (v, Side::Out), (v, Side::In)]
            .iter()
            .any(|&(x, s)| count_at(x, s) > 1)
        {
            continue;
        }
        used[u] = true;
        used[v] = true;
        digons.push((u, v));
    }
    if digons.is_empty() {
        return Ok(unchanged);
    }
    let mut singles = vec![false; inst.m()];
    for r in requirements {
        if r.edges.len() == 1 {
            singles[r.edges[0]] = true;
        }
    }
    let mut reqs: Vec<Requirement> = requirements.to_vec();
    let mut drop = vec![false; reqs.len()];
    let mut extra: Vec<Requirement> = Vec::new();
    let mut siblings: Vec<(usize, Requirement)> = Vec::new();
    for &(u, v) in &digons {
        let d_edge = inst.find_edge(v, u).unwrap();
        let within = |r: &Requirement, x: NodeId, side: Side| match side {
            Side::Out => r.edges.iter().all(|&e| inst.edge(e).source == x),
            Side::In => r.edges.iter().all(|&e| inst.edge(e).target == x),
        };
        for (i, r) in reqs.iter().enumerate() {
            let keep_d = r.edges == [d_edge];
            if !keep_d && (within(r, v, Side::Out) || within(r, u, Side::In)) {
                drop[i] = true;
            }
        }
        let pair_cuts = pair_requirements(inst, u, v, &singles);
        for (side, anchor_node, found) in [(Side::Out, u, pair_cuts.0), (Side::In, v, pair_cuts.1)] {
            let Some(old) = reqs.iter().position(|r| within(r, anchor_node, side) && r.edges != [d_edge]) else {
                extra.extend(found);
                continue;
            };
            if found.len() == 1 {
                let r = found.into_iter().next().unwrap();
                siblings.push((old, r));
            } else {
                drop[old] = true;
                extra.extend(found);
            }
        }
    }
    let mut out: Vec<Requirement> = Vec::new();
    let mut index_of = vec![usize::MAX; reqs.len()];
    for (i, r) in reqs.drain(..).enumerate() {
        if !drop[i] {
            index_of[i] = out.len();
            out.push(r);
        }
    }
    let mut seen: HashSet<Vec<EdgeId>> = out.iter().map(|r| r.edges.clone()).collect();
    for r in extra {
        if seen.insert(r.edges.clone()) {
            out.push(r);
        }
    }
    for (old, mut r) in siblings {
        let a = index_of[old];
        if a == usize::MAX {
            continue;
        }
        let b = out.len();
        r.coefficient = Quarters::HALF;
        r.kind = RequirementKind::SiblingMember;
        r.sibling = Some(a);
        out[a].coefficient = Quarters::HALF;
        out[a].kind = RequirementKind::SiblingMember;
        out[a].sibling = Some(b);
        out.push(r);
    }
    Ok(WorrisomeDigons { digons, requirements: out })
}

/// Minimal requirements contained in `o({u, v})` and `ι({u, v})`, from the
/// source and sink components of `G - {u, v}`.
fn pair_requirements(inst: &Instance, u: NodeId, v: NodeId, singles: &[bool]) -> (Vec<Requirement>, Vec<Requirement>) {
    let mut ws = TarjanWorkspace::default();
    ws.run(inst, |x| x != u && x != v, |_| true);
    let comp = &ws.comp;
    let k = ws.comp_count;
    let mut has_in = vec![false; k];
    let mut has_out = vec![false; k];
    let outside = |x: NodeId| x != u && x != v;
    for ed in inst.edges() {
        if outside(ed.source) && outside(ed.target) && comp[ed.source] != comp[ed.target] {
            has_out[comp[ed.source]] = true;
            has_in[comp[ed.target]] = true;
        }
    }
    let mut slot = Vec::new();
    let pair = [u, v];
    let outs = grouped(
        &mut slot,
        k,
        out_cut(inst, &pair).into_iter().map(|e| (e, comp[inst.edge(e).target])),
        |c| !has_in[c],
    );
    let ins = grouped(
        &mut slot,
        k,
        in_cut(inst, &pair).into_iter().map(|e| (e, comp[inst.edge(e).source])),
        |c| !has_out[c],
    );
    let keep = |edges: &Vec<EdgeId>| edges.len() == 1 || !edges.iter().any(|&e| singles[e]);
    let mk = |edges: Vec<EdgeId>, side| Requirement::cut(edges, vec![u.min(v), u.max(v)], side);
    (
        outs.into_iter().filter(keep).map(|e| mk(e, Side::Out)).collect(),
        ins.into_iter().filter(keep).map(|e| mk(e, Side::In)).collect(),
    )
}

/// The stronger of the plain and digon-adjusted bounds.
pub fn lower_bound(inst: &Instance) -> Result<DualCertificate, BoundsError> {
    if inst.n() <= 1 {
        if inst.is_strongly_connected() {
            return Ok(DualCertificate::empty());
        }
        return Err(BoundsError::NotStronglyConnected);
    }
    let reqs = extract_requirements(inst)?;
    let p3 = max_weight_requirement_matching(inst, &reqs)?;
    let w = worrisome_digons(inst, &reqs)?;
    if w.digons.is_empty() {
        return Ok(p3);
    }
    let p4 = max_weight_requirement_matching(inst, &w.requirements)?;
    let mut best = if p4.total > p3.total { p4 } else { p3 };
    best.worrisome = w.digons;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeRole {
    Internal,
    Primary,
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectClass {
    Root,
    Rich,
    Poor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectPartition {
    pub l_edges: Vec<EdgeId>,
    pub in_l: Vec<bool>,
    pub objects: Vec<Vec<NodeId>>,
    pub object_of: Vec<usize>,
    /// Role of each edge of the instance (`None` outside `L`).
    pub role: Vec<Option<EdgeRole>>,
    pub primary_of: Vec<Option<EdgeId>>,
    pub class: Vec<ObjectClass>,
    pub root: usize,
}

impl ObjectPartition {
    /// Objects, roles and classes for the edge set `l`. For each object the
    /// primary edge is taken from `primary` when given, else the lowest
    /// leaving `L`-edge.
    pub fn new(inst: &Instance, l: &[EdgeId], primary: Option<&[Option<EdgeId>]>) -> Self {
        let mut in_l = vec![false; inst.m()];
        for &e in l {
            in_l[e] = true;
        }
        let d = scc_mask(inst, &in_l);
        let objects = d.components;
        let object_of = d.component_of;
        let mut primary_of: Vec<Option<EdgeId>> = vec![None; objects.len()];
        let mut l_edges: Vec<EdgeId> = l.to_vec();
        l_edges.sort_unstable();
        l_edges.dedup();
        for &e in &l_edges {
            let ed = inst.edge(e);
            let a = object_of[ed.source];
            if a != object_of[ed.target] && primary_of[a].is_none() {
                primary_of[a] = Some(e);
            }
        }
        if let Some(over) = primary {
            for (v, &p) in over.iter().enumerate() {
                if let Some(e) = p {
                    let ed = inst.edge(e);
                    let a = object_of[ed.source];
                    if in_l[e] && a == object_of[v] && object_of[ed.target] != a {
                        primary_of[a] = Some(e);
                    }
                }
            }
        }
        let mut role = vec![None; inst.m()];
        for &e in &l_edges {
            let ed = inst.edge(e);
            let a = object_of[ed.source];
            role[e] = Some(if a == object_of[ed.target] {
                EdgeRole::Internal
            } else if primary_of[a] == Some(e) {
                EdgeRole::Primary
            } else {
                EdgeRole::Secondary
            });
        }
        let root = if inst.n() == 0 { 0 } else { object_of[0] };
        let mut class = vec![ObjectClass::Poor; objects.len()];
        let mut exits = vec![false; objects.len()];
        let mut secondary_in = vec![false; objects.len()];
        let mut primary_from_big = vec![false; objects.len()];
        for &e in &l_edges {
            let ed = inst.edge(e);
            let (a, b) = (object_of[ed.source], object_of[ed.target]);
            match role[e] {
                Some(EdgeRole::Internal) => {}
                Some(EdgeRole::Primary) => {
                    exits[a] = true;
                    if objects[a].len() > 1 {
                        primary_from_big[b] = true;
                    }
                }
                _ => {
                    exits[a] = true;
                    secondary_in[b] = true;
                }
            }
        }
        for (k, obj) in objects.iter().enumerate() {
            let size = obj.len();
            class[k] = if k == root {
                ObjectClass::Root
            } else if size >= 4
                || (size > 1 && exits[k])
                || ((size == 1 || size == 3) && (secondary_in[k] || primary_from_big[k]))
            {
                ObjectClass::Rich
            } else {
                ObjectClass::Poor
            };
        }
        ObjectPartition {
            l_edges,
            in_l,
            objects,
            object_of,
            role,
            primary_of,
            class,
            root,
        }
    }

    /// A digon object with one required and one non-required edge.
    pub fn is_problematic(&self, inst: &Instance, obj: usize) -> bool {
        let nodes = &self.objects[obj];
        if nodes.len() != 2 {
            return false;
        }
        let (a, b) = (nodes[0], nodes[1]);
        match (inst.find_edge(a, b), inst.find_edge(b, a)) {
            (Some(x), Some(y)) => inst.edge(x).required != inst.edge(y).required,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Account {
    /// Money created for an `L`-edge.
    Edge(EdgeId),
    Object(usize),
    Reserve,
    /// Payment for a solution edge.
    Spent(EdgeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: Account,
    pub to: Account,
    pub amount: Quarters,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreditLedger {
    pub balance: Vec<Quarters>,
    /// Credit not given to any object.
    pub reserve: Quarters,
    pub transfers: Vec<Transfer>,
}

impl CreditLedger {
    /// Initial allocation of 1.5 per `L`-edge.
    pub fn allocate(inst: &Instance, part: &ObjectPartition) -> Self {
        let mut ledger = CreditLedger {
            balance: vec![Quarters::ZERO; part.objects.len()],
            reserve: Quarters::ZERO,
            transfers: Vec::new(),
        };
        for &e in &part.l_edges {
            let ed = inst.edge(e);
            let (a, b) = (part.object_of[ed.source], part.object_of[ed.target]);
            let size_a = part.objects[a].len();
            let target_problematic = part.is_problematic(inst, b);
            let shares: Vec<(Account, Quarters, &str)> = match part.role[e].unwrap() {
                EdgeRole::Internal => vec![(Account::Object(a), Quarters::ONE_AND_HALF, "internal edge")],
                EdgeRole::Primary if size_a == 1 => {
                    vec![(Account::Object(a), Quarters::ONE_AND_HALF, "primary edge from a path node")]
                }
                EdgeRole::Primary if size_a == 3 && target_problematic => vec![
                    (Account::Object(a), Quarters::HALF, "primary edge from a triangle"),
                    (Account::Object(b), Quarters::ONE, "into a problematic digon"),
                ],
                EdgeRole::Primary => vec![
                    (Account::Object(a), Quarters::ONE, "primary edge"),
                    (Account::Object(b), Quarters::HALF, "primary edge target"),
                ],
                EdgeRole::Secondary if target_problematic => vec![
                    (Account::Object(b), Quarters::ONE, "secondary edge into a problematic digon"),
                    (Account::Reserve, Quarters::HALF, "secondary edge remainder"),
                ],
                EdgeRole::Secondary => vec![
                    (Account::Object(b), Quarters::HALF, "secondary edge target"),
                    (Account::Reserve, Quarters::ONE, "secondary edge remainder"),
                ],
            };
            for (to, amount, reason) in shares {
                ledger.credit(Account::Edge(e), to, amount, reason);
            }
        }
        ledger
    }

    fn adjust(&mut self, acct: Account, amount: Quarters) {
        match acct {
            Account::Object(k) => self.balance[k] += amount,
            Account::Reserve => self.reserve += amount,
            Account::Edge(_) | Account::Spent(_) => {}
        }
    }

    pub fn credit(&mut self, from: Account, to: Account, amount: Quarters, reason: &str) {
        self.adjust(from, -amount);
        self.adjust(to, amount);
        self.transfers.push(Transfer {
            from,
            to,
            amount,
            reason: reason.to_string(),
        });
    }

    /// Sum of object balances plus the reserve.
    pub fn total(&self) -> Quarters {
        self.balance.iter().copied().sum::<Quarters>() + self.reserve
    }
}

/// Builds `L` from a certificate: one edge per matched pair, one per
/// remaining requirement or sibling pair, and a repair for nodes left without
/// an entering or leaving `L`-edge.
pub fn build_l(inst: &Instance, cert: &DualCertificate) -> (ObjectPartition, CreditLedger) {
    let m = inst.m();
    let mut in_l = vec![false; m];
    let reqs = &cert.requirements;
    let mut done = vec![false; reqs.len()];
    let lowest = |r: &Requirement| {
        r.edges
            .iter()
            .copied()
            .find(|&e| inst.edge(e).required)
            .unwrap_or(r.edges[0])
    };
    for mp in &cert.matching {
        in_l[mp.edge] = true;
        for start in [mp.out_node, mp.in_node] {
            done[start] = true;
            if let Some(s) = reqs[start].sibling {
                done[s] = true;
            }
        }
    }
    for (i, r) in reqs.iter().enumerate() {
        if done[i] {
            continue;
        }
        done[i] = true;
        if let Some(j) = r.sibling {
            done[j] = true;
            let common = r.edges.iter().copied().find(|&e| reqs[j].contains(e));
            match common {
                Some(e) => in_l[e] = true,
                None => {
                    in_l[lowest(r)] = true;
                    in_l[lowest(&reqs[j])] = true;
                }
            }
        } else {
            in_l[lowest(r)] = true;
        }
    }
    // anything still unsatisfied (a sibling member not hit by a matched edge)
    for r in reqs {
        if !r.satisfied_by(&in_l) {
            in_l[lowest(r)] = true;
        }
    }
    for e in 0..m {
        if inst.edge(e).required {
            in_l[e] = true;
        }
    }
    // nodes without an entering or leaving L-edge
    for v in 0..inst.n() {
        let digon_edge = cert
            .worrisome
            .iter()
            .find(|&&(a, b)| a == v || b == v)
            .and_then(|&(a, b)| inst.find_edge(a, b));
        if !inst.in_edges(v).iter().any(|&e| in_l[e]) {
            let pick = digon_edge
                .filter(|&e| inst.edge(e).target == v)
                .or_else(|| inst.in_edges(v).first().copied());
            if let Some(e) = pick {
                in_l[e] = true;
            }
        }
        if !inst.out_edges(v).any(|e| in_l[e]) {
            let pick = digon_edge
                .filter(|&e| inst.edge(e).source == v)
                .or_else(|| inst.out_edges(v).next());
            if let Some(e) = pick {
                in_l[e] = true;
            }
        }
    }
    let l: Vec<EdgeId> = (0..m).filter(|&e| in_l[e]).collect();
    let part = ObjectPartition::new(inst, &l, None);
    let ledger = CreditLedger::allocate(inst, &part);
    (part, ledger)
}
