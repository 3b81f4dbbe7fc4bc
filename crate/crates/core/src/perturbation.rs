//! Denting a transport path near chosen points, and the experiment that
//! checks whether the dented path becomes the unique optimum.
//!
//! Given a canonical chain `T`, points `p_i` in the relative interior of its
//! segments, an integer `k` and a radius `r`, the perturbed path is
//! `T − (1/k) Σ_i T⌊B_r(p_i)`: inside each ball the multiplicity drops by a
//! factor `1 − 1/k`, and two new atoms of mass `θ/k` appear on the sphere.

use num_traits::Zero;
use serde::Serialize;

use crate::currents::{Boundary, PolyhedralChain};
use crate::error::{Error, Result};
use crate::flat::{flat_norm, FlatWitness};
use crate::geometry::{segment_closest, Point, GEO_TOL};
use crate::local4::estimate_k0;
use crate::rational::Mult;
use crate::solver::{self, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub base: PolyhedralChain,
    pub points: Vec<Point>,
    pub k: u32,
    pub radius: f64,
}

impl PerturbationSpec {
    /// Checks that every ball is disjoint from the boundary atoms, the branch
    /// points, the other balls and every segment but the one carrying its
    /// center.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InadmissiblePoint(m));
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config("radius must be positive".into()));
        }
        if !self.base.is_canonical() {
            return Err(Error::NotCanonical);
        }
        let b = self.base.boundary();
        let branch = self.base.branch_points(&b)?;
        let r = self.radius;
        for (i, p) in self.points.iter().enumerate() {
            if p.dim() != self.base.dim() {
                return Err(Error::Dimension { expected: self.base.dim(), found: p.dim() });
            }
            let hosts: Vec<usize> = (0..self.base.segments().len())
                .filter(|&s| self.base.segments()[s].contains_interior(p, GEO_TOL))
                .collect();
            if hosts.len() != 1 {
                return bad(format!("point {:?} is not interior to exactly one segment", p.0));
            }
            let host = &self.base.segments()[hosts[0]];
            if host.start.dist(p) <= r || host.end.dist(p) <= r {
                return bad(format!("ball around {:?} reaches an endpoint of its segment", p.0));
            }
            if let Some(a) = b.atoms().iter().find(|a| a.point.dist(p) <= r) {
                return bad(format!("ball around {:?} contains boundary atom {:?}", p.0, a.point.0));
            }
            if let Some(q) = branch.iter().find(|q| q.dist(p) <= r) {
                return bad(format!("ball around {:?} contains branch point {:?}", p.0, q.0));
            }
            for (j, s) in self.base.segments().iter().enumerate() {
                if j != hosts[0] {
                    let (_, _, d) = segment_closest(p, p, &s.start, &s.end);
                    if d <= r {
                        return bad(format!("ball around {:?} meets another segment", p.0));
                    }
                }
            }
            if self.points[..i].iter().any(|q| q.dist(p) <= 2.0 * r) {
                return bad(format!("ball around {:?} overlaps another ball", p.0));
            }
        }
        Ok(())
    }
}

/// `(T_pert, ∂T_pert)`.
pub fn perturb(spec: &PerturbationSpec) -> Result<(PolyhedralChain, Boundary)> {
    spec.validate()?;
    let dent = Mult::new(-1, spec.k as i128);
    let mut out = spec.base.clone();
    for p in &spec.points {
        out = out.concat(&spec.base.restrict_ball(p, spec.radius).scale(dent));
    }
    let t = out.canonicalize();
    let b = t.boundary();
    Ok((t, b))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; nonnegative when the bound holds.
    pub margin: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn le(lhs: f64, rhs: f64, slack: f64) -> BoundCheck {
        BoundCheck { lhs, rhs, margin: rhs - lhs, holds: lhs <= rhs + slack }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationBounds {
    /// `M(b_pert) ≤ M(b)(1 + h/k)`.
    pub mass: BoundCheck,
    /// `F(b_pert − b) ≤ h r M(b) / k`.
    pub flat: BoundCheck,
    /// `M^α(T_pert) < M^α(T)`, strictly whenever the dent is nonempty.
    pub alpha_mass: BoundCheck,
    pub flat_witness: FlatWitness,
}

impl PerturbationBounds {
    pub fn all_hold(&self) -> bool {
        self.mass.holds && self.flat.holds && self.alpha_mass.holds
    }
}

pub fn verify_perturbation_bounds(
    spec: &PerturbationSpec,
    t_pert: &PolyhedralChain,
    b_pert: &Boundary,
    alpha: f64,
) -> Result<PerturbationBounds> {
    let b = spec.base.boundary();
    let h = spec.points.len() as f64;
    let k = spec.k as f64;
    let mb = b.mass();
    let mass = BoundCheck::le(b_pert.mass(), mb * (1.0 + h / k), 1e-12 * mb);
    let (fv, witness) = flat_norm(&b_pert.sub(&b));
    let flat = BoundCheck::le(fv, h * spec.radius * mb / k, 1e-12 * mb);
    let before = spec.base.alpha_mass(alpha)?;
    let after = t_pert.alpha_mass(alpha)?;
    let dented = spec.points.iter().any(|p| !spec.base.restrict_ball(p, spec.radius).is_empty());
    let mut alpha_mass = BoundCheck::le(after, before, 0.0);
    if dented {
        alpha_mass.holds = after < before;
    }
    Ok(PerturbationBounds { mass, flat, alpha_mass, flat_witness: witness })
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusOutcome {
    pub radius: f64,
    pub n_atoms: usize,
    pub best_value: f64,
    pub n_minimizers: usize,
    /// Mass of the canonical difference between the first minimizer and `T_pert`.
    pub distance_to_t_pert: f64,
    pub unique_is_t_pert: bool,
    pub gap: Option<f64>,
    pub bounds_hold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessExperiment {
    pub alpha: f64,
    pub k: u32,
    pub k0: u64,
    /// Set when `k < k0`: the hypotheses of the uniqueness argument fail.
    pub below_k0: bool,
    pub base_minimizers: usize,
    pub points: Vec<Point>,
    pub outcomes: Vec<RadiusOutcome>,
}

impl UniquenessExperiment {
    /// Whether the smallest radius yields the singleton `{T_pert}` with a
    /// strictly positive gap.
    pub fn settles(&self) -> bool {
        self.outcomes
            .iter()
            .min_by(|a, b| a.radius.total_cmp(&b.radius))
            .is_some_and(|o| o.unique_is_t_pert && o.gap.is_none_or(|g| g > 0.0))
    }
}

/// Midpoint of the longest segment, used when nothing needs distinguishing.
fn fallback_point(t: &PolyhedralChain) -> Option<Point> {
    t.segments().iter().max_by(|a, b| a.length().total_cmp(&b.length())).map(|s| s.midpoint())
}

/// Fixes the first minimizer `T` of `b`, dents it at its distinguishing
/// points for every radius, re-solves and records whether `T_pert` is the
/// only optimum.
pub fn end_to_end_uniqueness(
    b: &Boundary,
    k: u32,
    radii: &[f64],
    cfg: &SolverConfig,
) -> Result<UniquenessExperiment> {
    let report = solver::solve(b, cfg)?;
    let t = report.minimizers[0].chain.clone();
    let mut points = solver::magic_points(&report, 0)?;
    if points.is_empty() {
        points.extend(fallback_point(&t));
    }
    let k0 = estimate_k0(cfg.alpha);
    let mut outcomes = Vec::new();
    for &radius in radii {
        let spec = PerturbationSpec { base: t.clone(), points: points.clone(), k, radius };
        let (t_pert, b_pert) = perturb(&spec)?;
        let bounds = verify_perturbation_bounds(&spec, &t_pert, &b_pert, cfg.alpha)?;
        let mut local = cfg.clone();
        local.max_terminals = local.max_terminals.max(b_pert.len());
        let r = solver::solve(&b_pert, &local)?;
        let first = &r.minimizers[0].chain;
        let distance = first.difference_mass(&t_pert);
        outcomes.push(RadiusOutcome {
            radius,
            n_atoms: b_pert.len(),
            best_value: r.best_value,
            n_minimizers: r.minimizers.len(),
            distance_to_t_pert: distance,
            unique_is_t_pert: r.is_unique() && distance <= cfg.distinct_tol,
            gap: r.gap,
            bounds_hold: bounds.all_hold(),
        });
    }
    Ok(UniquenessExperiment {
        alpha: cfg.alpha,
        k,
        k0,
        below_k0: (k as u64) < k0,
        base_minimizers: report.minimizers.len(),
        points,
        outcomes,
    })
}

/// Total multiplicity removed by the dents, `Σ θ_i / k`.
pub fn dent_mass(spec: &PerturbationSpec) -> Mult {
    let mut total = Mult::zero();
    for p in &spec.points {
        for s in spec.base.restrict_ball(p, spec.radius).segments() {
            total += s.mult / Mult::from_integer(spec.k as i128);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::Segment;
    use crate::rational::{int, mult};

    fn unit() -> PolyhedralChain {
        PolyhedralChain::new(2, vec![Segment::new(Point::xy(0.0, 0.0), Point::xy(1.0, 0.0), int(1))])
            .unwrap()
            .canonicalize()
    }

    #[test]
    fn dented_unit_segment() {
        let spec = PerturbationSpec { base: unit(), points: vec![Point::xy(0.5, 0.0)], k: 4, radius: 0.1 };
        let (t, b) = perturb(&spec).unwrap();
        assert_eq!(b.mass_at(&Point::xy(1.0, 0.0), 1e-12), int(1));
        assert_eq!(b.mass_at(&Point::xy(0.0, 0.0), 1e-12), int(-1));
        assert_eq!(b.mass_at(&Point::xy(0.6, 0.0), 1e-9), mult(-1, 4));
        assert_eq!(b.mass_at(&Point::xy(0.4, 0.0), 1e-9), mult(1, 4));
        let mid = t.segments().iter().find(|s| s.contains(&Point::xy(0.5, 0.0), 1e-12)).unwrap();
        assert_eq!(mid.mult, mult(3, 4));
        let bounds = verify_perturbation_bounds(&spec, &t, &b, 0.5).unwrap();
        assert!(bounds.all_hold());
        assert!((bounds.flat.lhs - 0.2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn k_one_removes_the_dent() {
        let spec = PerturbationSpec { base: unit(), points: vec![Point::xy(0.5, 0.0)], k: 1, radius: 0.1 };
        let (t, b) = perturb(&spec).unwrap();
        assert_eq!(t.segments().len(), 2);
        assert_eq!(b.len(), 4);
        assert!(verify_perturbation_bounds(&spec, &t, &b, 0.5).unwrap().all_hold());
    }

    #[test]
    fn inadmissible_points() {
        let near_end = PerturbationSpec { base: unit(), points: vec![Point::xy(0.05, 0.0)], k: 2, radius: 0.1 };
        assert!(matches!(perturb(&near_end), Err(Error::InadmissiblePoint(_))));
        let off = PerturbationSpec { base: unit(), points: vec![Point::xy(0.5, 0.5)], k: 2, radius: 0.1 };
        assert!(matches!(perturb(&off), Err(Error::InadmissiblePoint(_))));
        let overlap = PerturbationSpec {
            base: unit(),
            points: vec![Point::xy(0.4, 0.0), Point::xy(0.55, 0.0)],
            k: 2,
            radius: 0.1,
        };
        assert!(matches!(perturb(&overlap), Err(Error::InadmissiblePoint(_))));
    }
}
