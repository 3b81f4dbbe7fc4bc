//! Placement of branch vertices for a fixed flowed topology.
//!
//! The location energy `F(x) = Σ_e |f_e|^α |x_a − x_b|` is convex but not
//! differentiable where an edge has zero length, which is exactly where
//! optima tend to sit (a branch vertex merging into a terminal or into
//! another branch vertex). We minimize the smoothed energy
//! `Σ_e |f_e|^α sqrt(|x_a − x_b|² + ε²)` by damped Newton while shrinking ε
//! geometrically, contract edges that end up shorter than `tol_collapse`,
//! re-optimize the contracted topology, and certify the result with the
//! minimal-norm subgradient of the exact energy.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::currents::{Boundary, PolyhedralChain, Segment};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::rational;
use crate::topology::{FlowEdge, FlowedTopology, SteinerTopology};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Placement {
    pub branch_positions: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct OptimizeConfig {
    pub tol_grad: f64,
    pub tol_collapse: f64,
    /// First smoothing radius, relative to the terminal diameter.
    pub eps_initial: f64,
    pub eps_decay: f64,
    /// Last smoothing radius, relative to the terminal diameter.
    pub eps_final: f64,
    /// Newton iterations allowed across all stages and contractions.
    pub max_iters: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            tol_grad: 1e-8,
            tol_collapse: 1e-7,
            eps_initial: 0.1,
            eps_decay: 0.1,
            eps_final: 1e-11,
            max_iters: 5000,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_grad, self.tol_collapse, self.eps_initial, self.eps_final];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return Err(Error::Config("eps_decay must lie in (0, 1)".into()));
        }
        if self.eps_final > self.eps_initial || self.max_iters == 0 {
            return Err(Error::Config("invalid smoothing schedule".into()));
        }
        Ok(())
    }
}

/// One Newton iteration, as streamed by [`minimize_traced`].
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub eps: f64,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Minimized {
    /// Final topology; differs from the input when edges were contracted.
    pub flowed: FlowedTopology,
    pub placement: Placement,
    pub value: f64,
    pub residual: f64,
    pub collapsed: bool,
    pub converged: bool,
    pub iterations: usize,
}

fn weights(ft: &FlowedTopology, alpha: f64) -> Vec<f64> {
    ft.edges.iter().map(|e| rational::abs_pow(&e.flow, alpha)).collect()
}

fn vertex_positions(ft: &FlowedTopology, b: &Boundary, p: &Placement) -> Vec<Point> {
    debug_assert_eq!(p.branch_positions.len(), ft.topology.n_branch);
    b.atoms().iter().map(|a| a.point.clone()).chain(p.branch_positions.iter().cloned()).collect()
}

/// Exact location energy.
pub fn energy(ft: &FlowedTopology, b: &Boundary, p: &Placement, alpha: f64) -> f64 {
    let pos = vertex_positions(ft, b, p);
    ft.edges.iter().zip(weights(ft, alpha)).map(|(e, w)| w * pos[e.from].dist(&pos[e.to])).sum()
}

/// Per branch vertex: `Σ |f|^α · unit(x_v − x_u)`, zero-length edges contributing nothing.
pub fn subgradient(ft: &FlowedTopology, b: &Boundary, p: &Placement, alpha: f64) -> Vec<Vec<f64>> {
    let pos = vertex_positions(ft, b, p);
    let n = ft.topology.n_terminals;
    let dim = b.dim();
    let mut g = vec![vec![0.0; dim]; ft.topology.n_branch];
    for (e, w) in ft.edges.iter().zip(weights(ft, alpha)) {
        let d = pos[e.from].sub(&pos[e.to]);
        let len = geometry::norm(&d);
        if len == 0.0 {
            continue;
        }
        for (v, sign) in [(e.from, 1.0), (e.to, -1.0)] {
            if v >= n {
                for (gi, di) in g[v - n].iter_mut().zip(&d) {
                    *gi += sign * w * di / len;
                }
            }
        }
    }
    g
}

/// Largest norm of the minimal-norm subgradient over branch vertices.
///
/// An edge shorter than `zero_len` contributes the ball of radius `|f|^α`,
/// so a vertex is stationary when the pull of its proper edges can be
/// balanced by its degenerate ones. Branch vertices sitting on top of each
/// other are also checked as a cluster, whose internal edges cancel.
pub fn stationarity_residual_with(
    ft: &FlowedTopology,
    b: &Boundary,
    p: &Placement,
    alpha: f64,
    zero_len: f64,
) -> f64 {
    let pos = vertex_positions(ft, b, p);
    let n = ft.topology.n_terminals;
    let s = ft.topology.n_branch;
    let w = weights(ft, alpha);
    // clusters of branch vertices joined by zero-length edges
    let mut uf = crate::currents::UnionFind::new(s);
    for e in &ft.edges {
        if e.from >= n && e.to >= n && pos[e.from].dist(&pos[e.to]) <= zero_len {
            uf.union(e.from - n, e.to - n);
        }
    }
    let mut worst: f64 = 0.0;
    for root in 0..s {
        if uf.find(root) != root {
            continue;
        }
        let members: Vec<usize> = (0..s).filter(|&v| uf.find(v) == root).map(|v| v + n).collect();
        let mut g = vec![0.0; b.dim()];
        let mut slack = 0.0;
        for (e, &we) in ft.edges.iter().zip(&w) {
            let a_in = members.contains(&e.from);
            let b_in = members.contains(&e.to);
            if a_in == b_in {
                continue;
            }
            let (inner, outer) = if a_in { (e.from, e.to) } else { (e.to, e.from) };
            let d = pos[inner].sub(&pos[outer]);
            let len = geometry::norm(&d);
            if len <= zero_len {
                slack += we;
            } else {
                for (gi, di) in g.iter_mut().zip(&d) {
                    *gi += we * di / len;
                }
            }
        }
        worst = worst.max((geometry::norm(&g) - slack).max(0.0));
        // single vertices inside a cluster must be balanced too
        if members.len() > 1 {
            for &v in &members {
                let mut g = vec![0.0; b.dim()];
                let mut slack = 0.0;
                for (e, &we) in ft.edges.iter().zip(&w) {
                    if e.from != v && e.to != v {
                        continue;
                    }
                    let other = if e.from == v { e.to } else { e.from };
                    let d = pos[v].sub(&pos[other]);
                    let len = geometry::norm(&d);
                    if len <= zero_len {
                        slack += we;
                    } else {
                        for (gi, di) in g.iter_mut().zip(&d) {
                            *gi += we * di / len;
                        }
                    }
                }
                worst = worst.max((geometry::norm(&g) - slack).max(0.0));
            }
        }
    }
    worst
}

pub fn stationarity_residual(ft: &FlowedTopology, b: &Boundary, p: &Placement, alpha: f64) -> f64 {
    stationarity_residual_with(ft, b, p, alpha, 1e-12 * b.diameter().max(1.0))
}

/// Contracts every edge shorter than `tol_collapse` that touches a branch
/// vertex. Branch vertices merge into terminals, or into each other.
pub fn detect_collapse(
    ft: &FlowedTopology,
    b: &Boundary,
    p: &Placement,
    cfg: &OptimizeConfig,
) -> (FlowedTopology, Placement) {
    let n = ft.topology.n_terminals;
    let nv = ft.topology.n_vertices();
    let pos = vertex_positions(ft, b, p);
    // representative of every vertex; terminals always win
    let mut rep: Vec<usize> = (0..nv).collect();
    fn root(rep: &mut [usize], mut v: usize) -> usize {
        while rep[v] != v {
            rep[v] = rep[rep[v]];
            v = rep[v];
        }
        v
    }
    for e in &ft.edges {
        if e.from < n && e.to < n {
            continue;
        }
        if pos[e.from].dist(&pos[e.to]) <= cfg.tol_collapse {
            let (ra, rb) = (root(&mut rep, e.from), root(&mut rep, e.to));
            if ra == rb || (ra < n && rb < n) {
                continue;
            }
            rep[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..nv).map(|v| root(&mut rep, v)).collect();
    if roots.iter().enumerate().all(|(v, &r)| v == r) {
        return (ft.clone(), p.clone());
    }
    let kept: Vec<usize> = (n..nv).filter(|&v| roots[v] == v).collect();
    let relabel = |v: usize| {
        let r = roots[v];
        if r < n {
            r
        } else {
            n + kept.iter().position(|&k| k == r).expect("root is kept")
        }
    };
    let edges: Vec<FlowEdge> = ft
        .edges
        .iter()
        .filter(|e| roots[e.from] != roots[e.to])
        .map(|e| FlowEdge { from: relabel(e.from), to: relabel(e.to), flow: e.flow })
        .collect();
    let topology = SteinerTopology {
        n_terminals: n,
        n_branch: kept.len(),
        edges: edges.iter().map(|e| (e.from, e.to)).collect(),
    };
    let placement = Placement { branch_positions: kept.iter().map(|&v| pos[v].clone()).collect() };
    (FlowedTopology { topology, edges }, placement)
}

/// Each branch vertex at the weighted barycenter of its neighbors: the
/// unique fixed point, obtained from the weighted graph Laplacian.
pub fn barycentric_start(ft: &FlowedTopology, b: &Boundary, alpha: f64) -> Placement {
    let n = ft.topology.n_terminals;
    let s = ft.topology.n_branch;
    let dim = b.dim();
    if s == 0 {
        return Placement { branch_positions: Vec::new() };
    }
    let w = weights(ft, alpha);
    let mut lap = DMatrix::<f64>::zeros(s, s);
    let mut rhs = DMatrix::<f64>::zeros(s, dim);
    for (e, &we) in ft.edges.iter().zip(&w) {
        let (a, c) = (e.from, e.to);
        for (u, v) in [(a, c), (c, a)] {
            if u < n {
                continue;
            }
            lap[(u - n, u - n)] += we;
            if v >= n {
                lap[(u - n, v - n)] -= we;
            } else {
                for k in 0..dim {
                    rhs[(u - n, k)] += we * b.atoms()[v].point.0[k];
                }
            }
        }
    }
    let sol = lap.clone().lu().solve(&rhs).unwrap_or_else(|| {
        // every branch vertex reaches a terminal, so this is unexpected;
        // fall back to the terminal centroid
        let c = centroid(b);
        DMatrix::from_fn(s, dim, |_, k| c[k])
    });
    Placement { branch_positions: (0..s).map(|i| Point((0..dim).map(|k| sol[(i, k)]).collect())).collect() }
}

fn centroid(b: &Boundary) -> Vec<f64> {
    let mut c = vec![0.0; b.dim()];
    for a in b.atoms() {
        for (ci, x) in c.iter_mut().zip(&a.point.0) {
            *ci += x / b.len() as f64;
        }
    }
    c
}

struct Smoothed<'a> {
    edges: &'a [FlowEdge],
    w: Vec<f64>,
    n: usize,
    dim: usize,
    terminals: Vec<&'a [f64]>,
}

impl Smoothed<'_> {
    fn coords<'x>(&'x self, x: &'x DVector<f64>, v: usize) -> &'x [f64] {
        if v < self.n {
            self.terminals[v]
        } else {
            let k = (v - self.n) * self.dim;
            &x.as_slice()[k..k + self.dim]
        }
    }

    fn value(&self, x: &DVector<f64>, eps: f64) -> f64 {
        self.edges
            .iter()
            .zip(&self.w)
            .map(|(e, w)| {
                let d2: f64 = self.coords(x, e.from).iter().zip(self.coords(x, e.to)).map(|(a, b)| (a - b).powi(2)).sum();
                w * (d2 + eps * eps).sqrt()
            })
            .sum()
    }

    fn grad_hess(&self, x: &DVector<f64>, eps: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = x.len();
        let dim = self.dim;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for (e, &w) in self.edges.iter().zip(&self.w) {
            let d: Vec<f64> = self.coords(x, e.from).iter().zip(self.coords(x, e.to)).map(|(a, b)| a - b).collect();
            let s = (geometry::dot(&d, &d) + eps * eps).sqrt();
            // block = w (I/s - d dᵀ/s³)
            let block = |i: usize, j: usize| {
                let id = if i == j { 1.0 / s } else { 0.0 };
                w * (id - d[i] * d[j] / (s * s * s))
            };
            let a = (e.from >= self.n).then(|| (e.from - self.n) * dim);
            let c = (e.to >= self.n).then(|| (e.to - self.n) * dim);
            for i in 0..dim {
                if let Some(a) = a {
                    g[a + i] += w * d[i] / s;
                }
                if let Some(c) = c {
                    g[c + i] -= w * d[i] / s;
                }
                for j in 0..dim {
                    let v = block(i, j);
                    if let Some(a) = a {
                        h[(a + i, a + j)] += v;
                    }
                    if let Some(c) = c {
                        h[(c + i, c + j)] += v;
                    }
                    if let (Some(a), Some(c)) = (a, c) {
                        h[(a + i, c + j)] -= v;
                        h[(c + i, a + j)] -= v;
                    }
                }
            }
        }
        (g, h)
    }
}

pub fn minimize(ft: &FlowedTopology, b: &Boundary, alpha: f64, cfg: &OptimizeConfig) -> Result<Minimized> {
    minimize_traced(ft, b, alpha, cfg, |_| {})
}

/// As [`minimize`], reporting every Newton iteration to `trace`.
pub fn minimize_traced(
    ft: &FlowedTopology,
    b: &Boundary,
    alpha: f64,
    cfg: &OptimizeConfig,
    mut trace: impl FnMut(&TraceRecord),
) -> Result<Minimized> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    cfg.validate()?;
    if ft.topology.n_terminals != b.len() {
        return Err(Error::Config("topology and boundary disagree on the terminal count".into()));
    }
    let scale = b.diameter().max(f64::MIN_POSITIVE);
    let mut current = ft.clone();
    let mut placement = barycentric_start(&current, b, alpha);
    let mut iterations = 0usize;
    let mut collapsed = false;
    loop {
        placement = newton_schedule(&current, b, alpha, cfg, scale, placement, &mut iterations, &mut trace);
        let (next, next_p) = detect_collapse(&current, b, &placement, cfg);
        if next.topology.n_vertices() == current.topology.n_vertices() {
            break;
        }
        collapsed = true;
        current = next;
        placement = next_p;
        if iterations >= cfg.max_iters {
            break;
        }
    }
    let value = energy(&current, b, &placement, alpha);
    let residual = stationarity_residual(&current, b, &placement, alpha);
    Ok(Minimized {
        flowed: current,
        placement,
        value,
        residual,
        collapsed,
        converged: residual <= cfg.tol_grad && iterations < cfg.max_iters,
        iterations,
    })
}

#[allow(clippy::too_many_arguments)]
fn newton_schedule(
    ft: &FlowedTopology,
    b: &Boundary,
    alpha: f64,
    cfg: &OptimizeConfig,
    scale: f64,
    start: Placement,
    iterations: &mut usize,
    trace: &mut impl FnMut(&TraceRecord),
) -> Placement {
    let dim = b.dim();
    let s = ft.topology.n_branch;
    if s == 0 {
        return start;
    }
    let f = Smoothed {
        edges: &ft.edges,
        w: weights(ft, alpha),
        n: ft.topology.n_terminals,
        dim,
        terminals: b.atoms().iter().map(|a| a.point.coords()).collect(),
    };
    let wsum: f64 = f.w.iter().sum();
    let mut x = DVector::from_iterator(s * dim, start.branch_positions.iter().flat_map(|p| p.0.iter().copied()));
    let mut eps = cfg.eps_initial * scale;
    let eps_final = cfg.eps_final * scale;
    loop {
        for _ in 0..200 {
            if *iterations >= cfg.max_iters {
                break;
            }
            *iterations += 1;
            let (g, h) = f.grad_hess(&x, eps);
            let gnorm = g.norm();
            let fx = f.value(&x, eps);
            trace(&TraceRecord { iteration: *iterations, eps, energy: fx, residual: gnorm });
            if gnorm <= 1e-14 * wsum {
                break;
            }
            let step = match h.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => -&g,
            };
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-20 {
                let trial = &x + &step * t;
                if f.value(&trial, eps) <= fx + 1e-4 * t * slope {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || (&step * t).norm() <= 1e-15 * scale {
                break;
            }
        }
        if eps <= eps_final || *iterations >= cfg.max_iters {
            break;
        }
        eps = (eps * cfg.eps_decay).max(eps_final);
    }
    Placement {
        branch_positions: (0..s).map(|i| Point(x.as_slice()[i * dim..(i + 1) * dim].to_vec())).collect(),
    }
}

/// The polyhedral chain carried by a placed flowed topology, canonicalized.
pub fn realize(ft: &FlowedTopology, b: &Boundary, p: &Placement) -> PolyhedralChain {
    let pos = vertex_positions(ft, b, p);
    let segments = ft
        .edges
        .iter()
        .filter(|e| pos[e.from] != pos[e.to])
        .map(|e| Segment::new(pos[e.from].clone(), pos[e.to].clone(), e.flow))
        .collect();
    PolyhedralChain::new(b.dim(), segments).expect("positions share the boundary dimension").canonicalize()
}
