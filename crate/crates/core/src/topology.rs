//! Steiner topologies over a fixed set of terminals and their forced flows.
//!
//! Vertices `0..n` are terminals (the atoms of the boundary, in boundary
//! order); vertices `n..n + n_branch` are unlabeled branch vertices. A
//! topology is a forest in which every branch vertex has degree at least 3
//! and every component touches at least two terminals.

use std::collections::{BTreeSet, HashMap};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::currents::{Boundary, UnionFind};
use crate::error::{Error, Result};
use crate::rational::{self, Mult};

/// Sorted edge list after the canonical relabeling of branch vertices.
pub type Signature = Vec<(usize, usize)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SteinerTopology {
    pub n_terminals: usize,
    pub n_branch: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SteinerTopology {
    pub fn n_vertices(&self) -> usize {
        self.n_terminals + self.n_branch
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_vertices()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.n_vertices());
        self.edges.iter().all(|&(a, b)| a != b && uf.union(a, b))
    }

    /// Structural validity: forest, branch degrees at least 3, no isolated terminal.
    pub fn is_valid(&self) -> bool {
        let d = self.degrees();
        self.is_forest()
            && d[..self.n_terminals].iter().all(|&x| x >= 1)
            && d[self.n_terminals..].iter().all(|&x| x >= 3)
    }

    /// Connected components as sorted vertex lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n_vertices();
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for v in 0..n {
            groups.entry(uf.find(v)).or_default().push(v);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    /// Minimum of the sorted edge list over all relabelings of branch vertices.
    pub fn signature(&self) -> Signature {
        canonical_edges(self.n_terminals, self.n_branch, &self.edges)
    }

    /// Relabels branch vertices so that `edges` equals the signature.
    pub fn canonical(&self) -> SteinerTopology {
        SteinerTopology { n_terminals: self.n_terminals, n_branch: self.n_branch, edges: self.signature() }
    }
}

fn normalized(edges: impl Iterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = edges.map(|(a, b)| (a.min(b), a.max(b))).collect();
    e.sort_unstable();
    e
}

fn canonical_edges(n: usize, s: usize, edges: &[(usize, usize)]) -> Signature {
    let mut best: Option<Signature> = None;
    let mut perm: Vec<usize> = (0..s).collect();
    let relabel = |v: usize, perm: &[usize]| if v < n { v } else { n + perm[v - n] };
    loop {
        let cand = normalized(edges.iter().map(|&(a, b)| (relabel(a, &perm), relabel(b, &perm))));
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap_or_default()
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Set partitions of `0..n` into blocks of size at least 2, blocks ordered by
/// smallest element.
pub fn partitions_min2(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            if blocks.iter().all(|b| b.len() >= 2) {
                out.push(blocks.clone());
            }
            return;
        }
        // prune: singletons that can no longer grow
        let short: usize = blocks.iter().map(|b| 2usize.saturating_sub(b.len())).sum();
        if short > n - i {
            return;
        }
        for k in 0..blocks.len() {
            blocks[k].push(i);
            rec(i + 1, n, blocks, out);
            blocks[k].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

fn prufer_decode(seq: &[usize], nv: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; nv];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(nv - 1);
    for &x in seq {
        let leaf = (0..nv).find(|&v| degree[v] == 1).expect("Prüfer sequence always has a leaf");
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..nv).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// All trees on `m` terminals and `s` unlabeled branch vertices of degree
/// at least 3, in local labels, deduplicated and sorted.
fn block_trees(m: usize, s: usize) -> Vec<Signature> {
    let nv = m + s;
    if nv < 2 {
        return Vec::new();
    }
    if nv == 2 {
        return if s == 0 { vec![vec![(0, 1)]] } else { Vec::new() };
    }
    let mut seen: BTreeSet<Signature> = BTreeSet::new();
    let mut seq = vec![0usize; nv - 2];
    let mut count = vec![0usize; s];

    // each branch symbol must appear at least twice (degree = occurrences + 1)
    fn rec(
        pos: usize,
        m: usize,
        s: usize,
        seq: &mut Vec<usize>,
        count: &mut Vec<usize>,
        seen: &mut BTreeSet<Signature>,
    ) {
        let len = seq.len();
        let deficit: usize = count.iter().map(|&c| 2usize.saturating_sub(c)).sum();
        if deficit > len - pos {
            return;
        }
        if pos == len {
            let edges = prufer_decode(seq, m + s);
            seen.insert(canonical_edges(m, s, &edges));
            return;
        }
        for x in 0..m + s {
            seq[pos] = x;
            if x >= m {
                count[x - m] += 1;
            }
            rec(pos + 1, m, s, seq, count, seen);
            if x >= m {
                count[x - m] -= 1;
            }
        }
    }
    rec(0, m, s, &mut seq, &mut count, &mut seen);
    seen.into_iter().collect()
}

/// Memoized generator of block trees.
#[derive(Default)]
struct TreeCache {
    trees: HashMap<(usize, usize), Vec<Signature>>,
}

impl TreeCache {
    fn get(&mut self, m: usize, s: usize) -> &[Signature] {
        self.trees.entry((m, s)).or_insert_with(|| block_trees(m, s))
    }
}

/// Every forest topology on `n` terminals with at most `max_branch` branch
/// vertices, up to relabeling of branch vertices, sorted by
/// `(n_branch, signature)`.
pub fn enumerate_forests(n: usize, max_branch: usize) -> Vec<SteinerTopology> {
    enumerate_filtered(n, max_branch, |_| true)
}

/// As [`enumerate_forests`] for the atoms of `b`.
pub fn enumerate_topologies(b: &Boundary, max_branch: Option<usize>) -> Vec<SteinerTopology> {
    let n = b.len();
    enumerate_forests(n, max_branch.unwrap_or(n.saturating_sub(2)))
}

/// Only forests whose components each carry zero net boundary mass.
pub fn enumerate_feasible(b: &Boundary, max_branch: Option<usize>) -> Vec<SteinerTopology> {
    let n = b.len();
    let masses: Vec<Mult> = b.atoms().iter().map(|a| a.mass).collect();
    enumerate_filtered(n, max_branch.unwrap_or(n.saturating_sub(2)), |block| {
        block.iter().map(|&i| masses[i]).sum::<Mult>().is_zero()
    })
}

fn enumerate_filtered(
    n: usize,
    max_branch: usize,
    keep_block: impl Fn(&[usize]) -> bool,
) -> Vec<SteinerTopology> {
    let mut cache = TreeCache::default();
    let mut out: Vec<SteinerTopology> = Vec::new();
    for partition in partitions_min2(n) {
        if !partition.iter().all(|b| keep_block(b)) {
            continue;
        }
        // per block: list of (s, tree) alternatives
        let options: Vec<Vec<(usize, Signature)>> = partition
            .iter()
            .map(|block| {
                let m = block.len();
                (0..=(m - 2).min(max_branch))
                    .flat_map(|s| cache.get(m, s).iter().map(move |t| (s, t.clone())).collect::<Vec<_>>())
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; partition.len()];
        'outer: loop {
            let total: usize = choice.iter().zip(&options).map(|(&c, o)| o[c].0).sum();
            if total <= max_branch {
                let mut edges = Vec::new();
                let mut next_branch = n;
                for ((&c, opts), block) in choice.iter().zip(&options).zip(&partition) {
                    let (s, tree) = &opts[c];
                    let m = block.len();
                    let map = |v: usize| if v < m { block[v] } else { next_branch + (v - m) };
                    edges.extend(tree.iter().map(|&(a, b)| (map(a), map(b))));
                    next_branch += s;
                }
                out.push(SteinerTopology { n_terminals: n, n_branch: total, edges }.canonical());
            }
            // odometer
            for i in (0..choice.len()).rev() {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    continue 'outer;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    out.sort_by(|a, b| (a.n_branch, &a.edges).cmp(&(b.n_branch, &b.edges)));
    out.dedup();
    out
}

/// Oriented edge carrying a positive flow from `from` to `to`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    #[serde(with = "rational::serde_mult")]
    pub flow: Mult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowedTopology {
    pub topology: SteinerTopology,
    pub edges: Vec<FlowEdge>,
}

impl FlowedTopology {
    /// Net inflow minus outflow at every vertex.
    pub fn divergence(&self) -> Vec<Mult> {
        let mut d = vec![Mult::zero(); self.topology.n_vertices()];
        for e in &self.edges {
            d[e.to] += e.flow;
            d[e.from] -= e.flow;
        }
        d
    }
}

/// Result of forcing flows onto a topology.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowAssignment {
    pub flowed: FlowedTopology,
    /// Set when zero-flow edges had to be removed; `flowed` then holds the
    /// reduced, re-canonicalized topology.
    pub degenerate: bool,
}

/// Which leaf to strip first; the result never depends on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafOrder {
    LowestFirst,
    HighestFirst,
}

pub fn assign_flows(t: &SteinerTopology, b: &Boundary) -> Result<FlowAssignment> {
    assign_flows_ordered(t, b, LeafOrder::LowestFirst)
}

/// Leaf stripping: the edge at a leaf `v` carries exactly the residual mass of
/// `v`, which is then passed on to its neighbor.
pub fn assign_flows_ordered(t: &SteinerTopology, b: &Boundary, order: LeafOrder) -> Result<FlowAssignment> {
    if b.len() != t.n_terminals {
        return Err(Error::Config(format!(
            "topology has {} terminals but the boundary has {} atoms",
            t.n_terminals,
            b.len()
        )));
    }
    if !t.is_forest() {
        return Err(Error::Invariant("topology is not a forest".into()));
    }
    let nv = t.n_vertices();
    let mut residual: Vec<Mult> = (0..nv)
        .map(|v| if v < t.n_terminals { b.atoms()[v].mass } else { Mult::zero() })
        .collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (i, &(a, c)) in t.edges.iter().enumerate() {
        incident[a].push(i);
        incident[c].push(i);
    }
    let mut alive = vec![true; t.edges.len()];
    let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
    let mut flows: Vec<Option<FlowEdge>> = vec![None; t.edges.len()];
    let mut remaining = t.edges.len();
    while remaining > 0 {
        let pick = |v: &usize| degree[*v] == 1;
        let leaf = match order {
            LeafOrder::LowestFirst => (0..nv).find(pick),
            LeafOrder::HighestFirst => (0..nv).rev().find(pick),
        }
        .ok_or_else(|| Error::Invariant("no leaf in a nonempty forest".into()))?;
        let e = *incident[leaf].iter().find(|&&e| alive[e]).expect("leaf has a live edge");
        let (a, c) = t.edges[e];
        let other = if a == leaf { c } else { a };
        // boundary at the leaf = inflow - outflow = residual
        let r = residual[leaf];
        flows[e] = Some(if r.is_negative() {
            FlowEdge { from: leaf, to: other, flow: -r }
        } else {
            FlowEdge { from: other, to: leaf, flow: r }
        });
        residual[other] += r;
        residual[leaf] = Mult::zero();
        alive[e] = false;
        degree[leaf] -= 1;
        degree[other] -= 1;
        remaining -= 1;
    }
    if residual.iter().any(|r| !r.is_zero()) {
        return Err(Error::InfeasibleComponent);
    }
    let edges: Vec<FlowEdge> = flows.into_iter().map(|f| f.expect("every edge stripped")).collect();
    if edges.iter().all(|e| !e.flow.is_zero()) {
        return Ok(FlowAssignment {
            flowed: FlowedTopology { topology: t.clone(), edges },
            degenerate: false,
        });
    }
    let reduced = reduce_zero_flows(t, edges);
    Ok(FlowAssignment { flowed: reduced, degenerate: true })
}

/// Drops zero-flow edges, then removes branch vertices of degree 0 and
/// suppresses those of degree 2 (their two edges carry the same flow).
fn reduce_zero_flows(t: &SteinerTopology, edges: Vec<FlowEdge>) -> FlowedTopology {
    let n = t.n_terminals;
    let mut edges: Vec<FlowEdge> = edges.into_iter().filter(|e| !e.flow.is_zero()).collect();
    loop {
        let mut deg = vec![0usize; t.n_vertices()];
        for e in &edges {
            deg[e.from] += 1;
            deg[e.to] += 1;
        }
        let Some(v) = (n..t.n_vertices()).find(|&v| deg[v] == 2) else { break };
        let inc: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].from == v || edges[i].to == v).collect();
        let (e0, e1) = (edges[inc[0]].clone(), edges[inc[1]].clone());
        let (from, to) = if e0.to == v { (e0.from, e1.to) } else { (e1.from, e0.to) };
        edges.retain(|e| e.from != v && e.to != v);
        edges.push(FlowEdge { from, to, flow: e0.flow });
    }
    // compact branch labels
    let mut used: Vec<usize> = edges.iter().flat_map(|e| [e.from, e.to]).filter(|&v| v >= n).collect();
    used.sort_unstable();
    used.dedup();
    let relabel = |v: usize| if v < n { v } else { n + used.iter().position(|&u| u == v).unwrap() };
    let edges: Vec<FlowEdge> =
        edges.into_iter().map(|e| FlowEdge { from: relabel(e.from), to: relabel(e.to), flow: e.flow }).collect();
    let topo = SteinerTopology {
        n_terminals: n,
        n_branch: used.len(),
        edges: edges.iter().map(|e| (e.from, e.to)).collect(),
    };
    canonical_flowed(&topo, &edges)
}

/// Relabels a flowed topology to its canonical branch labeling.
pub fn canonical_flowed(t: &SteinerTopology, edges: &[FlowEdge]) -> FlowedTopology {
    let (n, s) = (t.n_terminals, t.n_branch);
    let sig = t.signature();
    let mut perm: Vec<usize> = (0..s).collect();
    loop {
        let map = |v: usize| if v < n { v } else { n + perm[v - n] };
        if normalized(t.edges.iter().map(|&(a, b)| (map(a), map(b)))) == sig {
            let mut out: Vec<FlowEdge> =
                edges.iter().map(|e| FlowEdge { from: map(e.from), to: map(e.to), flow: e.flow }).collect();
            out.sort_by_key(|e| (e.from.min(e.to), e.from.max(e.to)));
            let topology = SteinerTopology { n_terminals: n, n_branch: s, edges: sig };
            return FlowedTopology { topology, edges: out };
        }
        if !next_permutation(&mut perm) {
            unreachable!("signature is attained by some permutation");
        }
    }
}
