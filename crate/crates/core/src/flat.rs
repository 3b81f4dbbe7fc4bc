//! Flat norm of atomic 0-currents.
//!
//! For `b = Σ m_i δ_{x_i}` the flat norm is a partial transport problem:
//! moving a unit of mass from a positive atom to a negative one costs their
//! distance, leaving a unit unmatched costs 1. It is solved exactly as a
//! min-cost flow on integer capacities (masses scaled by their common
//! denominator), with a slack node absorbing the dropped mass.

use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::currents::Boundary;
use crate::geometry::Point;
use crate::mcf::{Cost, MinCostFlow};
use crate::rational::{self, Mult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportArc {
    pub source: Point,
    pub target: Point,
    #[serde(with = "rational::serde_mult")]
    pub flow: Mult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DroppedMass {
    pub point: Point,
    /// Signed residual left at the atom.
    #[serde(with = "rational::serde_mult")]
    pub mass: Mult,
}

/// An optimal filling, described by what it moves and what it leaves behind.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FlatWitness {
    pub transport_arcs: Vec<TransportArc>,
    pub dropped_mass: Vec<DroppedMass>,
}

impl FlatWitness {
    /// `Σ flow · |x - y| + Σ |dropped|`.
    pub fn objective(&self) -> f64 {
        let moved: f64 =
            self.transport_arcs.iter().map(|a| rational::to_f64(&a.flow) * a.source.dist(&a.target)).sum();
        let left: f64 = self.dropped_mass.iter().map(|d| rational::to_f64(&d.mass.abs())).sum();
        moved + left
    }

    /// Checks positivity of flows and exact mass conservation at every atom of `b`.
    pub fn is_feasible_for(&self, b: &Boundary) -> bool {
        if self.transport_arcs.iter().any(|a| !a.flow.is_positive()) {
            return false;
        }
        b.atoms().iter().all(|atom| {
            let out: Mult =
                self.transport_arcs.iter().filter(|a| a.source == atom.point).map(|a| a.flow).sum();
            let inc: Mult =
                self.transport_arcs.iter().filter(|a| a.target == atom.point).map(|a| a.flow).sum();
            let dropped: Mult =
                self.dropped_mass.iter().filter(|d| d.point == atom.point).map(|d| d.mass).sum();
            atom.mass == out - inc + dropped
        })
    }
}

/// Flat norm of `b` with an optimal witness. Exact ties between transporting
/// and dropping are resolved toward transport.
pub fn flat_norm(b: &Boundary) -> (f64, FlatWitness) {
    let atoms = b.atoms();
    if atoms.is_empty() {
        return (0.0, FlatWitness::default());
    }
    let scale: i128 = atoms.iter().fold(1i128, |l, a| l.lcm(a.mass.denom()));
    let units = |m: &Mult| (m * Mult::from_integer(scale)).to_integer();

    let pos: Vec<usize> = (0..atoms.len()).filter(|&i| atoms[i].mass.is_positive()).collect();
    let neg: Vec<usize> = (0..atoms.len()).filter(|&i| atoms[i].mass.is_negative()).collect();
    let supply: i128 = pos.iter().map(|&i| units(&atoms[i].mass)).sum();
    let demand: i128 = neg.iter().map(|&i| -units(&atoms[i].mass)).sum();

    // node layout: atoms, slack, source, sink
    let slack = atoms.len();
    let (s, t) = (slack + 1, slack + 2);
    let mut g = MinCostFlow::new(slack + 3);
    let drop_cost = Cost::new(1.0, 1);
    let mut moves = Vec::new();
    let mut drops_pos = Vec::new();
    let mut drops_neg = Vec::new();
    for &i in &pos {
        g.add_arc(s, i, units(&atoms[i].mass), Cost::ZERO);
        for &j in &neg {
            let d = atoms[i].point.dist(&atoms[j].point);
            moves.push((i, j, g.add_arc(i, j, supply, Cost::new(d, 0))));
        }
        drops_pos.push((i, g.add_arc(i, slack, supply, drop_cost)));
    }
    for &j in &neg {
        g.add_arc(j, t, -units(&atoms[j].mass), Cost::ZERO);
        drops_neg.push((j, g.add_arc(slack, j, demand, drop_cost)));
    }
    if demand > supply {
        g.add_arc(s, slack, demand - supply, Cost::ZERO);
    } else if supply > demand {
        g.add_arc(slack, t, supply - demand, Cost::ZERO);
    }
    let pushed = g.run(s, t);
    debug_assert_eq!(pushed, supply.max(demand));

    let to_mult = |u: i128| Mult::new(u, scale);
    let mut witness = FlatWitness::default();
    for (i, j, id) in moves {
        let f = g.flow(id);
        if f > 0 {
            witness.transport_arcs.push(TransportArc {
                source: atoms[i].point.clone(),
                target: atoms[j].point.clone(),
                flow: to_mult(f),
            });
        }
    }
    for (i, id) in drops_pos {
        let f = g.flow(id);
        if f > 0 {
            witness.dropped_mass.push(DroppedMass { point: atoms[i].point.clone(), mass: to_mult(f) });
        }
    }
    for (j, id) in drops_neg {
        let f = g.flow(id);
        if f > 0 {
            witness.dropped_mass.push(DroppedMass { point: atoms[j].point.clone(), mass: -to_mult(f) });
        }
    }
    debug_assert!(witness.dropped_mass.iter().all(|d| !d.mass.is_zero()));
    (witness.objective(), witness)
}

/// `flat_norm(b1 - b2)`.
pub fn flat_distance(b1: &Boundary, b2: &Boundary) -> f64 {
    flat_norm(&b1.sub(b2)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, mult};

    fn dipole(d: f64) -> Boundary {
        Boundary::planar(&[(0.0, 0.0, int(-1)), (d, 0.0, int(1))]).unwrap()
    }

    #[test]
    fn empty_is_zero() {
        let (v, w) = flat_norm(&Boundary::empty(2));
        assert_eq!(v, 0.0);
        assert!(w.transport_arcs.is_empty() && w.dropped_mass.is_empty());
    }

    #[test]
    fn short_dipole_transports() {
        let (v, w) = flat_norm(&dipole(1.0));
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(w.transport_arcs.len(), 1);
    }

    #[test]
    fn long_dipole_drops() {
        let (v, w) = flat_norm(&dipole(5.0));
        assert!((v - 2.0).abs() < 1e-12);
        assert!(w.transport_arcs.is_empty());
        assert_eq!(w.dropped_mass.len(), 2);
    }

    #[test]
    fn tie_prefers_transport() {
        let (v, w) = flat_norm(&dipole(2.0));
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(w.transport_arcs.len(), 1);
        assert!(w.dropped_mass.is_empty());
    }

    #[test]
    fn unbalanced_fractional() {
        let b = Boundary::planar(&[(0.0, 0.0, mult(3, 2)), (0.5, 0.0, mult(-1, 3))]).unwrap();
        let (v, w) = flat_norm(&b);
        // move 1/3 over distance 1/2, drop the remaining 7/6
        assert!((v - (1.0 / 6.0 + 7.0 / 6.0)).abs() < 1e-12);
        assert!(w.is_feasible_for(&b));
    }
}
