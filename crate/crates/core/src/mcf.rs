//! Successive-shortest-path min-cost flow with integer capacities.
//!
//! Costs are lexicographic pairs `(primary, secondary)`: the secondary integer
//! only breaks exact ties in the floating-point primary, which keeps optimal
//! plans deterministic.

use std::cmp::Ordering;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cost {
    pub primary: f64,
    pub secondary: i64,
}

impl Cost {
    pub const ZERO: Cost = Cost { primary: 0.0, secondary: 0 };

    pub fn new(primary: f64, secondary: i64) -> Cost {
        Cost { primary, secondary }
    }

    fn add(self, o: Cost) -> Cost {
        Cost { primary: self.primary + o.primary, secondary: self.secondary + o.secondary }
    }

    fn neg(self) -> Cost {
        Cost { primary: -self.primary, secondary: -self.secondary }
    }

    /// Strict improvement with a small slack on the primary, so round-off
    /// around zero-cost residual cycles cannot trigger endless relaxation.
    fn improves_on(self, o: Cost) -> bool {
        const SLACK: f64 = 1e-12;
        if self.primary < o.primary - SLACK {
            return true;
        }
        if self.primary > o.primary + SLACK {
            return false;
        }
        self.secondary < o.secondary
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, o: &Cost) -> Option<Ordering> {
        Some(self.primary.total_cmp(&o.primary).then(self.secondary.cmp(&o.secondary)))
    }
}

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: i128,
    cost: Cost,
    rev: usize,
}

#[derive(Debug)]
pub struct MinCostFlow {
    graph: Vec<Vec<Arc>>,
    handles: Vec<(usize, usize, i128)>,
}

/// Index of an arc added through [`MinCostFlow::add_arc`].
#[derive(Clone, Copy, Debug)]
pub struct ArcId(usize);

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        MinCostFlow { graph: vec![Vec::new(); nodes], handles: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: i128, cost: Cost) -> ArcId {
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc { to, cap, cost, rev: bwd });
        self.graph[to].push(Arc { to: from, cap: 0, cost: cost.neg(), rev: fwd });
        self.handles.push((from, fwd, cap));
        ArcId(self.handles.len() - 1)
    }

    /// Flow currently carried by an arc.
    pub fn flow(&self, id: ArcId) -> i128 {
        let (from, idx, cap) = self.handles[id.0];
        cap - self.graph[from][idx].cap
    }

    /// Pushes as much flow as possible from `s` to `t` at minimum cost.
    /// Returns the flow value.
    pub fn run(&mut self, s: usize, t: usize) -> i128 {
        let n = self.graph.len();
        let mut total = 0i128;
        loop {
            // Bellman-Ford (queue based) on the residual graph
            let mut dist: Vec<Option<Cost>> = vec![None; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut in_queue = vec![false; n];
            let mut relax_count = vec![0usize; n];
            let mut queue = std::collections::VecDeque::new();
            dist[s] = Some(Cost::ZERO);
            queue.push_back(s);
            in_queue[s] = true;
            while let Some(u) = queue.pop_front() {
                in_queue[u] = false;
                let du = dist[u].expect("queued node has a distance");
                for (i, a) in self.graph[u].iter().enumerate() {
                    if a.cap <= 0 {
                        continue;
                    }
                    let nd = du.add(a.cost);
                    let better = match dist[a.to] {
                        None => true,
                        Some(old) => nd.improves_on(old),
                    };
                    if better {
                        dist[a.to] = Some(nd);
                        prev[a.to] = Some((u, i));
                        relax_count[a.to] += 1;
                        if !in_queue[a.to] && relax_count[a.to] <= n {
                            in_queue[a.to] = true;
                            queue.push_back(a.to);
                        }
                    }
                }
            }
            if dist[t].is_none() {
                break;
            }
            let mut push = i128::MAX;
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                push = push.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                let rev = self.graph[u][i].rev;
                self.graph[u][i].cap -= push;
                self.graph[v][rev].cap += push;
                v = u;
            }
            total += push;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_cheaper_route() {
        // s -> a -> t costs 1 + 1, s -> b -> t costs 1 + 5
        let mut g = MinCostFlow::new(4);
        let (s, a, b, t) = (0, 1, 2, 3);
        g.add_arc(s, a, 1, Cost::new(1.0, 0));
        g.add_arc(s, b, 5, Cost::new(1.0, 0));
        let at = g.add_arc(a, t, 5, Cost::new(1.0, 0));
        let bt = g.add_arc(b, t, 5, Cost::new(5.0, 0));
        assert_eq!(g.run(s, t), 6);
        assert_eq!(g.flow(at), 1);
        assert_eq!(g.flow(bt), 5);
    }

    #[test]
    fn secondary_breaks_ties() {
        let mut g = MinCostFlow::new(3);
        let x = g.add_arc(0, 1, 3, Cost::new(2.0, 1));
        let y = g.add_arc(0, 1, 3, Cost::new(2.0, 0));
        g.add_arc(1, 2, 3, Cost::ZERO);
        assert_eq!(g.run(0, 2), 3);
        assert_eq!((g.flow(x), g.flow(y)), (0, 3));
    }

    #[test]
    fn reroutes_through_residual() {
        // classic case where the first shortest path must be partially undone
        let mut g = MinCostFlow::new(4);
        g.add_arc(0, 1, 1, Cost::new(1.0, 0));
        g.add_arc(0, 2, 1, Cost::new(2.0, 0));
        g.add_arc(1, 2, 1, Cost::new(0.0, 0));
        g.add_arc(1, 3, 1, Cost::new(2.0, 0));
        g.add_arc(2, 3, 1, Cost::new(1.0, 0));
        assert_eq!(g.run(0, 3), 2);
    }
}
