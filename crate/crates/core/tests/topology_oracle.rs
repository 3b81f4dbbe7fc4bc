//! Topology counts against brute force over every edge subset of the
//! complete graph on terminals plus branch vertices.

use std::collections::BTreeSet;

use branchflow::topology::{enumerate_forests, SteinerTopology};

fn is_forest(nv: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Forests on `n` terminals and `s` branch vertices in which branch vertices
/// have degree ≥ 3 and every vertex lies in a component with ≥ 2 terminals,
/// up to relabeling of the branch vertices.
fn brute_force(n: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let mut seen = BTreeSet::new();
    for s in 0..=n.saturating_sub(2) {
        let nv = n + s;
        let all: Vec<(usize, usize)> = (0..nv).flat_map(|a| (a + 1..nv).map(move |b| (a, b))).collect();
        for mask in 0u64..(1 << all.len()) {
            let edges: Vec<(usize, usize)> =
                (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
            let mut deg = vec![0; nv];
            for &(a, b) in &edges {
                deg[a] += 1;
                deg[b] += 1;
            }
            if (0..n).any(|v| deg[v] == 0) || (n..nv).any(|v| deg[v] < 3) || !is_forest(nv, &edges) {
                continue;
            }
            let t = SteinerTopology { n_terminals: n, n_branch: s, edges: edges.clone() };
            let comps = t.components();
            if comps.iter().any(|c| c.iter().filter(|&&v| v < n).count() < 2) {
                continue;
            }
            // canonical form: lexicographically least sorted edge list over branch permutations
            let mut perm: Vec<usize> = (0..s).collect();
            let mut best: Option<Vec<(usize, usize)>> = None;
            loop {
                let map = |v: usize| if v < n { v } else { n + perm[v - n] };
                let mut e: Vec<(usize, usize)> =
                    edges.iter().map(|&(a, b)| (map(a).min(map(b)), map(a).max(map(b)))).collect();
                e.sort_unstable();
                if best.as_ref().is_none_or(|b| e < *b) {
                    best = Some(e);
                }
                // next permutation
                let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else { break };
                let j = (i..perm.len()).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
                perm.swap(i - 1, j);
                perm[i..].reverse();
            }
            seen.insert(best.unwrap());
        }
    }
    seen
}

#[test]
fn counts_match_brute_force() {
    for n in 2..=4 {
        let oracle = brute_force(n);
        let ours = enumerate_forests(n, n - 2);
        assert_eq!(ours.len(), oracle.len(), "n = {n}");
        let ours: BTreeSet<_> = ours.iter().map(|t| t.signature()).collect();
        assert_eq!(ours, oracle, "n = {n}");
    }
}

#[test]
fn known_counts() {
    let counts: Vec<usize> = (2..=5).map(|n| enumerate_forests(n, n - 2).len()).collect();
    assert_eq!(counts, vec![1, 4, 35, 436]);
}

#[test]
fn every_topology_is_valid() {
    for t in enumerate_forests(5, 3) {
        assert!(t.is_valid(), "{t:?}");
        assert_eq!(t, t.canonical());
    }
}
