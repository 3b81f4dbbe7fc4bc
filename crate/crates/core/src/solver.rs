//! Exhaustive solver for the α-mass problem with atomic boundary.
//!
//! Every feasible forest topology is given its forced flows, its branch
//! vertices are placed optimally, and the realized chains are ranked. The
//! report keeps every chain within `value_tol` of the best value, grouped
//! into geometrically distinct minimizers.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::branch_opt::{self, Minimized, OptimizeConfig};
use crate::currents::{Boundary, PolyhedralChain, Segment};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::{self, Point, GEO_TOL};
use crate::rational::{self, Mult};
use crate::topology::{self, FlowedTopology, Signature};

pub const DEFAULT_MAX_TERMINALS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    /// Relative tolerance for calling two values equal.
    pub value_tol: f64,
    /// Mass of the canonical difference above which two chains are distinct.
    pub distinct_tol: f64,
    pub max_terminals: usize,
    pub optimize: OptimizeConfig,
    #[serde(skip)]
    pub execution: Execution,
}

impl SolverConfig {
    pub fn new(alpha: f64) -> SolverConfig {
        SolverConfig {
            alpha,
            value_tol: 1e-7,
            distinct_tol: 1e-5,
            max_terminals: DEFAULT_MAX_TERMINALS,
            optimize: OptimizeConfig::default(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if !(self.value_tol > 0.0 && self.distinct_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        self.optimize.validate()
    }

    /// Whether `v` is within the co-minimality tolerance of `best`.
    pub fn ties(&self, v: f64, best: f64) -> bool {
        v <= best + self.value_tol * (1.0 + best.abs())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub chain: PolyhedralChain,
    pub value: f64,
    /// Location energy before overlap merging; never below `value`.
    pub energy: f64,
    pub residual: f64,
    pub n_branch: usize,
    pub signature: Signature,
    pub collapsed: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub topologies: usize,
    pub degenerate_skipped: usize,
    pub optimized: usize,
    pub not_converged: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub best_value: f64,
    /// Distinct minimizers, best first.
    pub minimizers: Vec<Candidate>,
    /// Value of the best chain distinct from the first minimizer, minus the
    /// best value. `None` when there is no distinct competitor at all.
    pub gap: Option<f64>,
    pub value_tol: f64,
    pub distinct_tol: f64,
    pub stats: SolveStats,
}

impl SolveReport {
    pub fn is_unique(&self) -> bool {
        self.minimizers.len() == 1
    }
}

fn check_instance(b: &Boundary, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if b.len() < 2 {
        return Err(Error::TooFewAtoms(b.len()));
    }
    if b.len() > cfg.max_terminals {
        return Err(Error::TooManyTerminals { n: b.len(), max: cfg.max_terminals });
    }
    b.check_balanced()
}

/// Non-degenerate flowed topologies for `b`.
pub fn flowed_topologies(b: &Boundary, max_branch: Option<usize>) -> Result<(Vec<FlowedTopology>, SolveStats)> {
    let topologies = topology::enumerate_feasible(b, max_branch);
    let mut stats = SolveStats { topologies: topologies.len(), ..Default::default() };
    let mut flowed = Vec::with_capacity(topologies.len());
    for t in &topologies {
        match topology::assign_flows(t, b) {
            Ok(a) if a.degenerate => stats.degenerate_skipped += 1,
            Ok(a) => flowed.push(a.flowed),
            Err(Error::InfeasibleComponent) => {
                return Err(Error::Invariant("feasible partition rejected by flow assignment".into()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok((flowed, stats))
}

pub fn solve(b: &Boundary, cfg: &SolverConfig) -> Result<SolveReport> {
    check_instance(b, cfg)?;
    let (flowed, mut stats) = flowed_topologies(b, None)?;
    let results: Vec<Result<Minimized>> =
        exec::map(cfg.execution, &flowed, |ft| branch_opt::minimize(ft, b, cfg.alpha, &cfg.optimize));
    let mut candidates = Vec::with_capacity(results.len());
    for r in results {
        let m = r?;
        stats.optimized += 1;
        if !m.converged {
            stats.not_converged += 1;
        }
        let chain = branch_opt::realize(&m.flowed, b, &m.placement);
        if !chain.boundary().same_as(b, 10.0 * GEO_TOL) {
            return Err(Error::Invariant("realized chain has the wrong boundary".into()));
        }
        let value = chain.alpha_mass(cfg.alpha)?;
        candidates.push(Candidate {
            value,
            energy: m.value,
            residual: m.residual,
            n_branch: m.flowed.topology.n_branch,
            signature: m.flowed.topology.signature(),
            collapsed: m.collapsed,
            converged: m.converged,
            chain,
        });
    }
    candidates.sort_by(|x, y| {
        x.value.total_cmp(&y.value).then_with(|| x.signature.cmp(&y.signature))
    });
    let best = candidates.first().ok_or_else(|| Error::Invariant("no candidate topology".into()))?.value;

    let mut minimizers: Vec<Candidate> = Vec::new();
    for c in candidates.iter().take_while(|c| cfg.ties(c.value, best)) {
        let fresh = minimizers.iter().all(|m| {
            m.chain.difference_mass(&c.chain) > cfg.distinct_tol && !m.chain.same_support(&c.chain, GEO_TOL)
        });
        if fresh {
            minimizers.push(c.clone());
        }
    }
    let first = &minimizers[0].chain;
    let gap = candidates
        .iter()
        .find(|c| c.chain.difference_mass(first) > cfg.distinct_tol)
        .map(|c| c.value - best);
    Ok(SolveReport {
        best_value: best,
        minimizers,
        gap,
        value_tol: cfg.value_tol,
        distinct_tol: cfg.distinct_tol,
        stats,
    })
}

/// Membership in `A_C`: `M(b) ≤ C` and the optimal α-mass is at most `C`.
pub fn is_in_a_c(b: &Boundary, c: f64, cfg: &SolverConfig) -> Result<bool> {
    if b.mass() > c {
        return Ok(false);
    }
    Ok(solve(b, cfg)?.best_value <= c)
}

/// Points of `supp(T)` that no other reported minimizer covers, one per
/// competitor, where `T` is `report.minimizers[target]`.
///
/// Each point is the midpoint of the longest piece of `supp(T) ∖ supp(Tⁱ)`
/// after cutting at vertices of any minimizer and at crossings with the
/// other minimizers, so it stays away from branch points, boundary atoms
/// and the finite exceptional set.
pub fn magic_points(report: &SolveReport, target: usize) -> Result<Vec<Point>> {
    let t = &report
        .minimizers
        .get(target)
        .ok_or_else(|| Error::Config(format!("no minimizer with index {target}")))?
        .chain;
    let mut cut_points: Vec<Point> = report.minimizers.iter().flat_map(|m| m.chain.vertices()).collect();
    cut_points.sort_by(|a, b| a.lex_cmp(b));
    let mut out = Vec::new();
    for (i, other) in report.minimizers.iter().enumerate() {
        if i == target {
            continue;
        }
        let mut best: Option<(f64, Point)> = None;
        for seg in t.segments() {
            let len = seg.length();
            let mut cuts: Vec<f64> = cut_points
                .iter()
                .filter(|p| seg.contains_interior(p, GEO_TOL))
                .map(|p| seg.project(p).0)
                .collect();
            for m in &report.minimizers {
                for o in m.chain.segments() {
                    let (s, _, d) = geometry::segment_closest(&seg.start, &seg.end, &o.start, &o.end);
                    if d <= GEO_TOL && s * len > GEO_TOL && (1.0 - s) * len > GEO_TOL {
                        cuts.push(s);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            for (a, b) in other.chain.uncovered_parts(seg, GEO_TOL) {
                let mut lo = a;
                for &c in cuts.iter().filter(|&&c| c > a && c < b).chain(std::iter::once(&b)) {
                    let piece = (c - lo) * len;
                    if piece > GEO_TOL && best.as_ref().is_none_or(|(l, _)| piece > *l + GEO_TOL) {
                        best = Some((piece, seg.start.lerp(&seg.end, 0.5 * (lo + c))));
                    }
                    lo = c;
                }
            }
        }
        match best {
            Some((_, p)) => out.push(p),
            None => return Err(Error::NoDistinguishingPoint(target, i)),
        }
    }
    Ok(out)
}

/// Floors every multiplicity of a canonical chain to a multiple of `eta`.
pub fn quantize_chain(chain: &PolyhedralChain, eta: Mult) -> Result<PolyhedralChain> {
    if !eta.is_positive() {
        return Err(Error::Config("eta must be positive".into()));
    }
    if !chain.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let segments: Vec<Segment> = chain
        .segments()
        .iter()
        .map(|s| Segment::new(s.start.clone(), s.end.clone(), rational::floor_to(&s.mult, &eta)))
        .filter(|s| !s.mult.is_zero())
        .collect();
    Ok(PolyhedralChain::new(chain.dim(), segments)?.canonicalize())
}

/// Boundary of the η-quantized chain.
pub fn quantize_chain_boundary(chain: &PolyhedralChain, eta: Mult) -> Result<Boundary> {
    Ok(quantize_chain(chain, eta)?.boundary())
}

/// Quantizes `b` through its first optimal transport path.
pub fn quantize_boundary(b: &Boundary, eta: Mult, cfg: &SolverConfig) -> Result<Boundary> {
    let report = solve(b, cfg)?;
    quantize_chain_boundary(&report.minimizers[0].chain, eta)
}

/// Grid oracle: minimum of the location energy over grid placements, across
/// all flowed topologies with at most two branch vertices.
///
/// A full grid over the bounding box of the atoms is evaluated at a coarse
/// resolution, then the window around the best point is repeatedly shrunk and
/// re-gridded until the spacing reaches `grid_step`. Every returned value is
/// attained at a grid point, so it bounds the optimum from above.
pub fn brute_force_value(b: &Boundary, alpha: f64, grid_step: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if b.len() < 2 {
        return Err(Error::TooFewAtoms(b.len()));
    }
    if b.len() > 4 {
        return Err(Error::InstanceTooLarge(format!("{} atoms, at most 4 supported", b.len())));
    }
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(Error::Config("grid_step must be positive".into()));
    }
    b.check_balanced()?;
    let (flowed, _) = flowed_topologies(b, Some(2))?;
    let dim = b.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for a in b.atoms() {
        for k in 0..dim {
            lo[k] = lo[k].min(a.point.0[k]);
            hi[k] = hi[k].max(a.point.0[k]);
        }
    }
    let mut best = f64::INFINITY;
    for ft in &flowed {
        best = best.min(grid_min(ft, b, alpha, grid_step, &lo, &hi));
    }
    Ok(best)
}

fn grid_min(ft: &FlowedTopology, b: &Boundary, alpha: f64, step: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let s = ft.topology.n_branch;
    let dim = b.dim();
    let place = |x: &[f64]| branch_opt::Placement {
        branch_positions: (0..s).map(|i| Point(x[i * dim..(i + 1) * dim].to_vec())).collect(),
    };
    if s == 0 {
        return branch_opt::energy(ft, b, &place(&[]), alpha);
    }
    let vars = s * dim;
    let per_axis: usize = match vars {
        0..=2 => 61,
        3..=4 => 13,
        _ => 7,
    };
    let mut center: Vec<f64> = (0..vars).map(|i| 0.5 * (lo[i % dim] + hi[i % dim])).collect();
    let mut half: Vec<f64> = (0..vars).map(|i| 0.5 * (hi[i % dim] - lo[i % dim]).max(step)).collect();
    let mut best = f64::INFINITY;
    loop {
        let spacing: Vec<f64> = half.iter().map(|h| 2.0 * h / (per_axis - 1) as f64).collect();
        let mut idx = vec![0usize; vars];
        let mut x = vec![0.0; vars];
        let mut arg = center.clone();
        loop {
            for i in 0..vars {
                x[i] = center[i] - half[i] + spacing[i] * idx[i] as f64;
            }
            let v = branch_opt::energy(ft, b, &place(&x), alpha);
            if v < best {
                best = v;
                arg.copy_from_slice(&x);
            }
            let mut k = 0;
            while k < vars {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == vars {
                break;
            }
        }
        if spacing.iter().all(|&sp| sp <= step) {
            return best;
        }
        center = arg;
        // keep two cells either side of the best point
        half = spacing.iter().map(|&sp| 2.0 * sp).collect();
    }
}
