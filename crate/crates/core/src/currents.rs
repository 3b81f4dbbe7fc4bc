//! Atomic 0-currents and polyhedral 1-currents.
//!
//! Multiplicities are exact; coordinates are `f64`. Points closer than the
//! geometric tolerance are identified (the first one seen is kept as the
//! representative), so every operation here is stable under round-off in the
//! input coordinates but never moves an existing vertex.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, dist_to_line, segment_closest, Point, GEO_TOL};
use crate::rational::{self, Mult};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub mass: Mult,
}

/// Signed finite atomic measure.
///
/// Atoms have nonzero masses, pairwise distinct points and are kept sorted
/// lexicographically by point. A boundary of a 1-current additionally has
/// zero total mass; see [`Boundary::check_balanced`].
#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    dim: usize,
    atoms: Vec<Atom>,
}

impl Boundary {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Boundary> {
        for a in &atoms {
            if a.point.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: a.point.dim() });
            }
            if a.point.0.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite);
            }
            if a.mass.is_zero() {
                return Err(Error::ZeroAtom);
            }
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.point.close_to(&a.point, GEO_TOL)) {
                return Err(Error::DuplicatePoint(a.point.0.clone()));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.point.lex_cmp(&b.point));
        Ok(Boundary { dim, atoms })
    }

    /// Convenience constructor from `(x, y, mass)` triples in the plane.
    pub fn planar(atoms: &[(f64, f64, Mult)]) -> Result<Boundary> {
        Boundary::new(
            2,
            atoms.iter().map(|&(x, y, m)| Atom { point: Point::xy(x, y), mass: m }).collect(),
        )
    }

    pub fn empty(dim: usize) -> Boundary {
        Boundary { dim, atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> Mult {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn check_balanced(&self) -> Result<()> {
        let t = self.total();
        if t.is_zero() {
            Ok(())
        } else {
            Err(Error::NonzeroTotalMass(rational::format(&t)))
        }
    }

    /// Mass norm `Σ|m_i|`.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| rational::to_f64(&a.mass.abs())).sum()
    }

    pub fn exact_mass(&self) -> Mult {
        self.atoms.iter().map(|a| a.mass.abs()).sum()
    }

    pub fn mass_at(&self, p: &Point, tol: f64) -> Mult {
        self.atoms
            .iter()
            .find(|a| a.point.close_to(p, tol))
            .map(|a| a.mass)
            .unwrap_or_else(Mult::zero)
    }

    pub fn contains_point(&self, p: &Point, tol: f64) -> bool {
        self.atoms.iter().any(|a| a.point.close_to(p, tol))
    }

    pub fn scale(&self, c: Mult) -> Boundary {
        if c.is_zero() {
            return Boundary::empty(self.dim);
        }
        Boundary {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| Atom { point: a.point.clone(), mass: a.mass * c }).collect(),
        }
    }

    pub fn add(&self, other: &Boundary) -> Boundary {
        let mut acc = AtomAccumulator::new(self.dim, GEO_TOL);
        for a in self.atoms.iter().chain(&other.atoms) {
            acc.add(&a.point, a.mass);
        }
        acc.finish()
    }

    pub fn sub(&self, other: &Boundary) -> Boundary {
        self.add(&other.scale(-rational::int(1)))
    }

    /// Exact comparison of masses, tolerant comparison of positions.
    pub fn same_as(&self, other: &Boundary, tol: f64) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.atoms.iter().all(|a| {
                other.atoms.iter().any(|b| b.point.close_to(&a.point, tol) && b.mass == a.mass)
            })
    }

    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Boundary {
        let mut out = Boundary {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| Atom { point: f(&a.point), mass: a.mass }).collect(),
        };
        out.atoms.sort_by(|a, b| a.point.lex_cmp(&b.point));
        out
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                d = d.max(a.point.dist(&b.point));
            }
        }
        d
    }
}

/// Collects weighted Diracs, identifying points within `tol`.
pub(crate) struct AtomAccumulator {
    dim: usize,
    tol: f64,
    items: Vec<(Point, Mult)>,
}

impl AtomAccumulator {
    pub(crate) fn new(dim: usize, tol: f64) -> Self {
        AtomAccumulator { dim, tol, items: Vec::new() }
    }

    pub(crate) fn add(&mut self, p: &Point, m: Mult) {
        if let Some(e) = self.items.iter_mut().find(|(q, _)| q.close_to(p, self.tol)) {
            e.1 += m;
        } else {
            self.items.push((p.clone(), m));
        }
    }

    pub(crate) fn finish(self) -> Boundary {
        let mut atoms: Vec<Atom> = self
            .items
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(point, mass)| Atom { point, mass })
            .collect();
        atoms.sort_by(|a, b| a.point.lex_cmp(&b.point));
        Boundary { dim: self.dim, atoms }
    }
}

/// Oriented segment carrying a multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    pub mult: Mult,
}

impl Segment {
    pub fn new(start: Point, end: Point, mult: Mult) -> Segment {
        Segment { start, end, mult }
    }

    pub fn length(&self) -> f64 {
        self.start.dist(&self.end)
    }

    pub fn direction(&self) -> Vec<f64> {
        let d = self.end.sub(&self.start);
        let n = geometry::norm(&d);
        d.into_iter().map(|x| x / n).collect()
    }

    pub fn midpoint(&self) -> Point {
        self.start.midpoint(&self.end)
    }

    /// Parameter of the orthogonal projection of `p`, and the distance to the segment's line.
    pub fn project(&self, p: &Point) -> (f64, f64) {
        let d = self.end.sub(&self.start);
        let l2 = geometry::dot(&d, &d);
        let t = geometry::dot(&p.sub(&self.start), &d) / l2;
        let u: Vec<f64> = d.iter().map(|x| x / l2.sqrt()).collect();
        (t, dist_to_line(p, &self.start, &u))
    }

    /// Whether `p` lies on the segment strictly away from both endpoints.
    pub fn contains_interior(&self, p: &Point, tol: f64) -> bool {
        let (t, off) = self.project(p);
        let len = self.length();
        off <= tol && t * len > tol && (1.0 - t) * len > tol
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        let (t, off) = self.project(p);
        let len = self.length();
        off <= tol && t * len >= -tol && (1.0 - t) * len >= -tol
    }

    fn collinear_with(&self, o: &Segment, tol: f64) -> bool {
        let u = self.direction();
        let v = o.direction();
        dist_to_line(&o.start, &self.start, &u) <= tol
            && dist_to_line(&o.end, &self.start, &u) <= tol
            && dist_to_line(&self.start, &o.start, &v) <= tol
            && dist_to_line(&self.end, &o.start, &v) <= tol
    }
}

/// Polyhedral 1-current: a list of oriented weighted segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralChain {
    dim: usize,
    segments: Vec<Segment>,
    canonical: bool,
}

impl PolyhedralChain {
    pub fn new(dim: usize, segments: Vec<Segment>) -> Result<PolyhedralChain> {
        for s in &segments {
            for p in [&s.start, &s.end] {
                if p.dim() != dim {
                    return Err(Error::Dimension { expected: dim, found: p.dim() });
                }
                if p.0.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(PolyhedralChain { dim, segments, canonical: false })
    }

    pub fn empty(dim: usize) -> PolyhedralChain {
        PolyhedralChain { dim, segments: Vec::new(), canonical: true }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn boundary(&self) -> Boundary {
        let mut acc = AtomAccumulator::new(self.dim, GEO_TOL);
        for s in &self.segments {
            acc.add(&s.end, s.mult);
            acc.add(&s.start, -s.mult);
        }
        acc.finish()
    }

    /// `Σ |θ_i|^α · length(σ_i)`; requires canonical form.
    pub fn alpha_mass(&self, alpha: f64) -> Result<f64> {
        if !self.canonical {
            return Err(Error::NotCanonical);
        }
        Ok(self.raw_alpha_mass(alpha))
    }

    /// The same sum taken over the stored segments, overlapping or not.
    pub fn raw_alpha_mass(&self, alpha: f64) -> f64 {
        self.segments.iter().map(|s| rational::abs_pow(&s.mult, alpha) * s.length()).fold(0.0, |acc, x| acc + x)
    }

    pub fn mass(&self) -> Result<f64> {
        self.alpha_mass(1.0)
    }

    pub fn concat(&self, other: &PolyhedralChain) -> PolyhedralChain {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        PolyhedralChain { dim: self.dim, segments, canonical: false }
    }

    /// Canonical form of `self + other`.
    pub fn plus(&self, other: &PolyhedralChain) -> PolyhedralChain {
        self.concat(other).canonicalize()
    }

    pub fn minus(&self, other: &PolyhedralChain) -> PolyhedralChain {
        self.concat(&other.scale(-rational::int(1))).canonicalize()
    }

    pub fn scale(&self, c: Mult) -> PolyhedralChain {
        if c.is_zero() {
            return PolyhedralChain::empty(self.dim);
        }
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { start: s.start.clone(), end: s.end.clone(), mult: s.mult * c })
            .collect();
        PolyhedralChain { dim: self.dim, segments, canonical: self.canonical && c.is_positive() }
    }

    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> PolyhedralChain {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { start: f(&s.start), end: f(&s.end), mult: s.mult })
            .collect();
        PolyhedralChain { dim: self.dim, segments, canonical: false }
    }

    pub fn canonicalize(&self) -> PolyhedralChain {
        self.canonicalize_with(GEO_TOL)
    }

    /// Normal form with pairwise disjoint relative interiors.
    ///
    /// Collinear segments that overlap or touch (within `tol`) are resolved on
    /// their common line: multiplicities are summed per elementary interval,
    /// zero intervals dropped, and adjacent intervals with equal multiplicity
    /// merged. Output segments carry positive multiplicities and are sorted.
    pub fn canonicalize_with(&self, tol: f64) -> PolyhedralChain {
        // snap endpoints to representatives
        let mut reps: Vec<Point> = Vec::new();
        let rep_of = |p: &Point, reps: &mut Vec<Point>| -> usize {
            if let Some(i) = reps.iter().position(|q| q.close_to(p, tol)) {
                i
            } else {
                reps.push(p.clone());
                reps.len() - 1
            }
        };
        let mut segs: Vec<(usize, usize, Mult)> = Vec::new();
        for s in &self.segments {
            if s.mult.is_zero() {
                continue;
            }
            let i = rep_of(&s.start, &mut reps);
            let j = rep_of(&s.end, &mut reps);
            if i == j {
                continue;
            }
            segs.push((i, j, s.mult));
        }
        if segs.is_empty() {
            return PolyhedralChain::empty(self.dim);
        }

        // group collinear segments that overlap or touch
        let geo: Vec<Segment> =
            segs.iter().map(|&(i, j, m)| Segment::new(reps[i].clone(), reps[j].clone(), m)).collect();
        let mut uf = UnionFind::new(segs.len());
        for a in 0..segs.len() {
            for b in (a + 1)..segs.len() {
                if uf.find(a) == uf.find(b) {
                    continue;
                }
                if geo[a].collinear_with(&geo[b], tol) {
                    let u = geo[a].direction();
                    let t = |p: &Point| geometry::dot(&p.sub(&geo[a].start), &u);
                    let (a0, a1) = minmax(t(&geo[a].start), t(&geo[a].end));
                    let (b0, b1) = minmax(t(&geo[b].start), t(&geo[b].end));
                    if a0.max(b0) <= a1.min(b1) + tol {
                        uf.union(a, b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of_root: Vec<Option<usize>> = vec![None; segs.len()];
        for s in 0..segs.len() {
            let r = uf.find(s);
            match group_of_root[r] {
                Some(g) => groups[g].push(s),
                None => {
                    group_of_root[r] = Some(groups.len());
                    groups.push(vec![s]);
                }
            }
        }

        let mut out: Vec<Segment> = Vec::new();
        for g in &groups {
            if g.len() == 1 {
                let (i, j, m) = segs[g[0]];
                out.push(oriented(&reps[i], &reps[j], m));
                continue;
            }
            let first = &geo[g[0]];
            let u = first.direction();
            let origin = first.start.clone();
            let t = |p: &Point| geometry::dot(&p.sub(&origin), &u);
            let mut verts: Vec<usize> = g.iter().flat_map(|&s| [segs[s].0, segs[s].1]).collect();
            verts.sort_unstable();
            verts.dedup();
            verts.sort_by(|&a, &b| t(&reps[a]).total_cmp(&t(&reps[b])));
            let pos = |v: usize| verts.iter().position(|&w| w == v).unwrap();
            let mut interval = vec![Mult::zero(); verts.len().saturating_sub(1)];
            for &s in g {
                let (i, j, m) = segs[s];
                let (pi, pj) = (pos(i), pos(j));
                let (lo, hi, signed) = if pi < pj { (pi, pj, m) } else { (pj, pi, -m) };
                for slot in &mut interval[lo..hi] {
                    *slot += signed;
                }
            }
            let mut k = 0;
            while k < interval.len() {
                let m = interval[k];
                if m.is_zero() {
                    k += 1;
                    continue;
                }
                let mut e = k + 1;
                while e < interval.len() && interval[e] == m {
                    e += 1;
                }
                out.push(oriented(&reps[verts[k]], &reps[verts[e]], m));
                k = e;
            }
        }
        out.sort_by(cmp_segments);
        PolyhedralChain { dim: self.dim, segments: out, canonical: true }
    }

    /// Splits along the sphere `|x - center| = radius` into the parts inside
    /// and outside the ball. Clip points are computed once and shared, so the
    /// two parts add back up to `self` exactly.
    pub fn split_ball(&self, center: &Point, radius: f64) -> (PolyhedralChain, PolyhedralChain) {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for s in &self.segments {
            let d = s.end.sub(&s.start);
            let w = s.start.sub(center);
            let a = geometry::dot(&d, &d);
            let b = 2.0 * geometry::dot(&w, &d);
            let c = geometry::dot(&w, &w) - radius * radius;
            let disc = b * b - 4.0 * a * c;
            if a == 0.0 || disc <= 0.0 {
                outside.push(s.clone());
                continue;
            }
            let sq = disc.sqrt();
            let t0 = ((-b - sq) / (2.0 * a)).max(0.0);
            let t1 = ((-b + sq) / (2.0 * a)).min(1.0);
            if t1 <= t0 {
                outside.push(s.clone());
                continue;
            }
            let len = a.sqrt();
            let at = |t: f64| -> Point {
                if t * len <= GEO_TOL {
                    s.start.clone()
                } else if (1.0 - t) * len <= GEO_TOL {
                    s.end.clone()
                } else {
                    s.start.lerp(&s.end, t)
                }
            };
            let p0 = at(t0);
            let p1 = at(t1);
            if p0 != s.start {
                outside.push(Segment::new(s.start.clone(), p0.clone(), s.mult));
            }
            if p0 != p1 {
                inside.push(Segment::new(p0, p1.clone(), s.mult));
            }
            if p1 != s.end {
                outside.push(Segment::new(p1, s.end.clone(), s.mult));
            }
        }
        let mk = |segments| PolyhedralChain { dim: self.dim, segments, canonical: self.canonical };
        (mk(inside), mk(outside))
    }

    pub fn restrict_ball(&self, center: &Point, radius: f64) -> PolyhedralChain {
        self.split_ball(center, radius).0
    }

    pub fn restrict_complement(&self, center: &Point, radius: f64) -> PolyhedralChain {
        self.split_ball(center, radius).1
    }

    /// Distinct segment endpoints, sorted.
    pub fn vertices(&self) -> Vec<Point> {
        let mut v: Vec<Point> = Vec::new();
        for s in &self.segments {
            for p in [&s.start, &s.end] {
                if !v.iter().any(|q| q.close_to(p, GEO_TOL)) {
                    v.push(p.clone());
                }
            }
        }
        v.sort_by(|a, b| a.lex_cmp(b));
        v
    }

    /// Undirected support graph after subdividing at T-junctions and
    /// transversal crossings: `(vertices, edges)`.
    pub fn support_graph(&self, tol: f64) -> (Vec<Point>, Vec<(usize, usize)>) {
        let mut verts: Vec<Point> = Vec::new();
        let vid = |p: &Point, verts: &mut Vec<Point>| -> usize {
            if let Some(i) = verts.iter().position(|q| q.close_to(p, tol)) {
                i
            } else {
                verts.push(p.clone());
                verts.len() - 1
            }
        };
        for s in &self.segments {
            vid(&s.start, &mut verts);
            vid(&s.end, &mut verts);
        }
        // split parameters per segment
        let mut cuts: Vec<Vec<(f64, usize)>> = vec![Vec::new(); self.segments.len()];
        for (i, s) in self.segments.iter().enumerate() {
            let len = s.length();
            for (v, p) in verts.iter().enumerate() {
                if s.contains_interior(p, tol) {
                    cuts[i].push((s.project(p).0, v));
                }
            }
            for (j, o) in self.segments.iter().enumerate() {
                if j <= i {
                    continue;
                }
                let (ps, pt, d) = segment_closest(&s.start, &s.end, &o.start, &o.end);
                let olen = o.length();
                let interior_s = ps * len > tol && (1.0 - ps) * len > tol;
                let interior_o = pt * olen > tol && (1.0 - pt) * olen > tol;
                if d <= tol && interior_s && interior_o {
                    let p = s.start.lerp(&s.end, ps);
                    let v = vid(&p, &mut verts);
                    cuts[i].push((ps, v));
                    cuts[j].push((pt, v));
                }
            }
        }
        let mut edges = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            let a = vid(&s.start, &mut verts);
            let b = vid(&s.end, &mut verts);
            let mut c = std::mem::take(&mut cuts[i]);
            c.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut chain = vec![a];
            chain.extend(c.into_iter().map(|(_, v)| v));
            chain.push(b);
            chain.dedup();
            for w in chain.windows(2) {
                edges.push((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        (verts, edges)
    }

    /// Whether the support contains a closed circuit.
    pub fn has_loop(&self) -> bool {
        let (verts, edges) = self.support_graph(GEO_TOL);
        let mut uf = UnionFind::new(verts.len());
        edges.iter().any(|&(a, b)| a == b || !uf.union(a, b))
    }

    /// Vertices of the canonical representation outside `supp(b)`.
    pub fn branch_points(&self, b: &Boundary) -> Result<Vec<Point>> {
        if !self.canonical {
            return Err(Error::NotCanonical);
        }
        if !self.boundary().same_as(b, 10.0 * GEO_TOL) {
            return Err(Error::BoundaryMismatch);
        }
        Ok(self.vertices().into_iter().filter(|p| !b.contains_point(p, GEO_TOL)).collect())
    }

    /// Parameter intervals of `seg` not covered by segments of `self` lying on its line.
    pub fn uncovered_parts(&self, seg: &Segment, tol: f64) -> Vec<(f64, f64)> {
        let len = seg.length();
        let u = seg.direction();
        let mut covered: Vec<(f64, f64)> = Vec::new();
        for o in &self.segments {
            if seg.collinear_with(o, tol) {
                let t = |p: &Point| geometry::dot(&p.sub(&seg.start), &u) / len;
                let (a, b) = minmax(t(&o.start), t(&o.end));
                let (a, b) = (a.max(0.0), b.min(1.0));
                if b > a {
                    covered.push((a, b));
                }
            }
        }
        covered.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out = Vec::new();
        let mut cur = 0.0;
        let rel = tol / len;
        for (a, b) in covered {
            if a > cur + rel {
                out.push((cur, a));
            }
            cur = cur.max(b);
        }
        if cur < 1.0 - rel {
            out.push((cur, 1.0));
        }
        out
    }

    /// Whether both chains have the same support set (up to `tol`).
    pub fn same_support(&self, other: &PolyhedralChain, tol: f64) -> bool {
        let covered_by = |a: &PolyhedralChain, b: &PolyhedralChain| {
            a.segments.iter().all(|s| {
                let len = s.length();
                b.uncovered_parts(s, tol).iter().map(|(x, y)| (y - x) * len).sum::<f64>() <= tol
            })
        };
        covered_by(self, other) && covered_by(other, self)
    }

    /// `M(self - other)`, the mass of the canonical difference.
    pub fn difference_mass(&self, other: &PolyhedralChain) -> f64 {
        self.minus(other).raw_alpha_mass(1.0)
    }
}

/// On-disk form shared by boundaries and chains:
/// `{"dim", "atoms": [{"p", "m"}], "segments": [{"a", "b", "m"}]}` with
/// masses written as `"num/den"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentDoc {
    pub dim: usize,
    #[serde(default)]
    pub atoms: Vec<AtomDoc>,
    #[serde(default)]
    pub segments: Vec<SegmentDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub p: Vec<f64>,
    #[serde(with = "rational::serde_mult")]
    pub m: Mult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(with = "rational::serde_mult")]
    pub m: Mult,
}

impl CurrentDoc {
    pub fn from_boundary(b: &Boundary) -> CurrentDoc {
        CurrentDoc {
            dim: b.dim,
            atoms: b.atoms.iter().map(|a| AtomDoc { p: a.point.0.clone(), m: a.mass }).collect(),
            segments: Vec::new(),
        }
    }

    pub fn from_chain(c: &PolyhedralChain) -> CurrentDoc {
        CurrentDoc {
            dim: c.dim,
            atoms: Vec::new(),
            segments: c
                .segments
                .iter()
                .map(|s| SegmentDoc { a: s.start.0.clone(), b: s.end.0.clone(), m: s.mult })
                .collect(),
        }
    }

    pub fn to_boundary(&self) -> Result<Boundary> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok(Atom { point: Point::new(a.p.clone())?, mass: a.m }))
            .collect::<Result<Vec<_>>>()?;
        Boundary::new(self.dim, atoms)
    }

    /// The segments as a raw (not yet canonical) chain.
    pub fn to_chain(&self) -> Result<PolyhedralChain> {
        let segments = self
            .segments
            .iter()
            .map(|s| Ok(Segment::new(Point::new(s.a.clone())?, Point::new(s.b.clone())?, s.m)))
            .collect::<Result<Vec<_>>>()?;
        PolyhedralChain::new(self.dim, segments)
    }
}

impl Serialize for Boundary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurrentDoc::from_boundary(self).serialize(s)
    }
}

impl Serialize for PolyhedralChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurrentDoc::from_chain(self).serialize(s)
    }
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn oriented(a: &Point, b: &Point, m: Mult) -> Segment {
    if m.is_negative() {
        Segment::new(b.clone(), a.clone(), -m)
    } else {
        Segment::new(a.clone(), b.clone(), m)
    }
}

pub(crate) fn cmp_segments(a: &Segment, b: &Segment) -> Ordering {
    a.start.lex_cmp(&b.start).then_with(|| a.end.lex_cmp(&b.end)).then_with(|| a.mult.cmp(&b.mult))
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    /// Returns `false` when `a` and `b` were already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
