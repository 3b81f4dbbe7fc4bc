//! The four-point local problem behind the W/Z dichotomy.
//!
//! The boundary is `θ(δ_D − δ_A + (δ_B − δ_C)/k)`: a strong flow from `A` to
//! `D` and a weak one from `C` to `B`. Near-collinear configurations
//! `A, B, C, D` (in this order) should be solved by one of
//!
//! * `W = θ(AB + CD) + θ(k−1)/k · BC`, the weak flow cancelling part of the strong one;
//! * `Z = θ AD + (θ/k) CB`, the two flows kept apart.
//!
//! Every forest on the four terminals is one of 35 named cases; each is
//! evaluated with its forced flows and optimized branch points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branch_opt::{self, OptimizeConfig};
use crate::currents::{Boundary, PolyhedralChain, Segment};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::{Point, GEO_TOL};
use crate::rational::{self, Mult};
use crate::topology::{self, SteinerTopology};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalFourPointInstance {
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
    #[serde(with = "rational::serde_mult")]
    pub theta: Mult,
    pub k: u32,
}

impl LocalFourPointInstance {
    /// Planar instance with `θ = 1`.
    pub fn planar(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64), k: u32) -> Self {
        let p = |(x, y): (f64, f64)| Point::xy(x, y);
        LocalFourPointInstance { a: p(a), b: p(b), c: p(c), d: p(d), theta: rational::int(1), k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("k must be at least 2".into()));
        }
        if self.theta <= Mult::from_integer(0) {
            return Err(Error::Config("theta must be positive".into()));
        }
        let pts = self.points();
        for i in 0..4 {
            for j in 0..i {
                if pts[i].close_to(pts[j], GEO_TOL) {
                    return Err(Error::DuplicatePoint(pts[i].0.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> [&Point; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn delta(&self) -> Mult {
        self.theta / Mult::from_integer(self.k as i128)
    }

    pub fn boundary(&self) -> Result<Boundary> {
        self.validate()?;
        let dim = self.a.dim();
        let (t, w) = (self.theta, self.delta());
        Boundary::new(
            dim,
            vec![
                crate::Atom { point: self.a.clone(), mass: -t },
                crate::Atom { point: self.b.clone(), mass: w },
                crate::Atom { point: self.c.clone(), mass: -w },
                crate::Atom { point: self.d.clone(), mass: t },
            ],
        )
    }

    fn with_c(&self, c: Point) -> Self {
        LocalFourPointInstance { c, ..self.clone() }
    }
}

/// `(W, Z)`, both canonical.
pub fn build_wz(inst: &LocalFourPointInstance) -> Result<(PolyhedralChain, PolyhedralChain)> {
    inst.validate()?;
    let (t, w) = (inst.theta, inst.delta());
    let seg = |p: &Point, q: &Point, m: Mult| Segment::new(p.clone(), q.clone(), m);
    let dim = inst.a.dim();
    let wc = PolyhedralChain::new(
        dim,
        vec![seg(&inst.a, &inst.b, t), seg(&inst.c, &inst.d, t), seg(&inst.b, &inst.c, t - w)],
    )?;
    let zc = PolyhedralChain::new(dim, vec![seg(&inst.a, &inst.d, t), seg(&inst.c, &inst.b, w)])?;
    Ok((wc.canonicalize(), zc.canonicalize()))
}

/// A named support pattern; `E` and `F` are branch points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseDef {
    pub name: String,
    pub edges: Vec<(char, char)>,
}

impl CaseDef {
    fn new(name: impl Into<String>, edges: &str) -> CaseDef {
        let edges = edges
            .split_whitespace()
            .map(|e| {
                let mut c = e.chars();
                (c.next().unwrap(), c.next().unwrap())
            })
            .collect();
        CaseDef { name: name.into(), edges }
    }

    pub fn n_branch(&self) -> usize {
        let has = |l| self.edges.iter().any(|&(a, b)| a == l || b == l);
        has('E') as usize + has('F') as usize
    }
}

/// All 35 cases: 19 without branch points, 13 with one, 3 with two.
pub fn case_table() -> Vec<CaseDef> {
    let mut out: Vec<CaseDef> = [
        ("1a", "AB AC AD"),
        ("1b", "AB AC BD"),
        ("1c", "AB AC CD"),
        ("1d", "AB AD BC"),
        ("1e", "AB AD CD"),
        ("1f", "AB BC BD"),
        ("1g", "AB BC CD"),
        ("1h", "AB BD CD"),
        ("1i", "AB CD"),
        ("1j", "AC AD BC"),
        ("1k", "AC AD BD"),
        ("1l", "AC BC BD"),
        ("1m", "AC BC CD"),
        ("1n", "AC BD"),
        ("1o", "AC BD CD"),
        ("1p", "AD BC"),
        ("1q", "AD BC BD"),
        ("1r", "AD BC CD"),
        ("1s", "AD BD CD"),
    ]
    .into_iter()
    .map(|(n, e)| CaseDef::new(n, e))
    .collect();
    // three terminals on E, the fourth hung on one of them
    for (name, star, missing) in [("2a", "AE BE CE", 'D'), ("2b", "AE BE DE", 'C'), ("2c", "AE CE DE", 'B'), ("2d", "BE CE DE", 'A')]
    {
        for other in ['A', 'B', 'C', 'D'].into_iter().filter(|&l| l != missing) {
            let (x, y) = if other < missing { (other, missing) } else { (missing, other) };
            out.push(CaseDef::new(format!("{name}/{x}{y}"), &format!("{star} {x}{y}")));
        }
    }
    out.push(CaseDef::new("2e", "AE BE CE DE"));
    out.push(CaseDef::new("3a", "EF AE BE CF DF"));
    out.push(CaseDef::new("3b", "EF AE CE BF DF"));
    out.push(CaseDef::new("3c", "EF AE DE BF CF"));
    out
}

/// Maps the letters of a case to vertices of a topology over `b`.
fn case_topology(case: &CaseDef, inst: &LocalFourPointInstance, b: &Boundary) -> Result<SteinerTopology> {
    let idx = |p: &Point| {
        b.atoms()
            .iter()
            .position(|a| a.point.close_to(p, GEO_TOL))
            .ok_or_else(|| Error::Invariant("instance point missing from its boundary".into()))
    };
    let vertex = |l: char| -> Result<usize> {
        match l {
            'A' => idx(&inst.a),
            'B' => idx(&inst.b),
            'C' => idx(&inst.c),
            'D' => idx(&inst.d),
            'E' => Ok(4),
            'F' => Ok(5),
            _ => Err(Error::Invariant(format!("unknown vertex label {l}"))),
        }
    };
    let edges = case.edges.iter().map(|&(x, y)| Ok((vertex(x)?, vertex(y)?))).collect::<Result<_>>()?;
    Ok(SteinerTopology { n_terminals: 4, n_branch: case.n_branch(), edges })
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    /// False when no current on this support has the required boundary with
    /// nonzero multiplicity on every edge.
    pub feasible: bool,
    pub value: Option<f64>,
    #[serde(skip)]
    pub chain: Option<PolyhedralChain>,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Label {
    W,
    Z,
    Case(String),
    Other,
}

impl Label {
    pub fn is_wz(&self) -> bool {
        matches!(self, Label::W | Label::Z)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::W => f.write_str("W"),
            Label::Z => f.write_str("Z"),
            Label::Case(c) => write!(f, "CASE_{c}"),
            Label::Other => f.write_str("OTHER"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalClassification {
    pub label: Label,
    pub winner_case: String,
    pub value: f64,
    pub chain: PolyhedralChain,
    pub w_value: f64,
    pub z_value: f64,
    pub cases: Vec<CaseOutcome>,
}

impl LocalClassification {
    pub fn case(&self, name: &str) -> Option<&CaseOutcome> {
        self.cases.iter().find(|c| c.name == name)
    }

    pub fn value_of(&self, name: &str) -> Option<f64> {
        self.case(name).and_then(|c| c.value)
    }
}

fn evaluate_case(
    case: &CaseDef,
    inst: &LocalFourPointInstance,
    b: &Boundary,
    alpha: f64,
    cfg: &OptimizeConfig,
) -> Result<CaseOutcome> {
    let infeasible =
        || CaseOutcome { name: case.name.clone(), feasible: false, value: None, chain: None, residual: None };
    let t = case_topology(case, inst, b)?;
    let assigned = match topology::assign_flows(&t, b) {
        Ok(a) if !a.degenerate => a,
        Ok(_) | Err(Error::InfeasibleComponent) => return Ok(infeasible()),
        Err(e) => return Err(e),
    };
    let m = branch_opt::minimize(&assigned.flowed, b, alpha, cfg)?;
    let chain = branch_opt::realize(&m.flowed, b, &m.placement);
    let value = chain.alpha_mass(alpha)?;
    Ok(CaseOutcome {
        name: case.name.clone(),
        feasible: true,
        value: Some(value),
        chain: Some(chain),
        residual: Some(m.residual),
    })
}

/// Evaluates every case and classifies the cheapest. Exact ties (relative
/// 1e-9) go to the earlier case in [`case_table`] order; the label is `Z`
/// or `W` whenever the winning support is that of `Z` or `W`.
pub fn local4_solve(inst: &LocalFourPointInstance, alpha: f64) -> Result<LocalClassification> {
    local4_solve_with(inst, alpha, &OptimizeConfig::default())
}

pub fn local4_solve_with(
    inst: &LocalFourPointInstance,
    alpha: f64,
    cfg: &OptimizeConfig,
) -> Result<LocalClassification> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    let b = inst.boundary()?;
    let cases = case_table()
        .iter()
        .map(|c| evaluate_case(c, inst, &b, alpha, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<&CaseOutcome> = None;
    for c in cases.iter().filter(|c| c.feasible) {
        let v = c.value.unwrap();
        match best {
            Some(w) if v >= w.value.unwrap() - 1e-9 * (1.0 + v.abs()) => {}
            _ => best = Some(c),
        }
    }
    let best = best.ok_or_else(|| Error::Invariant("no feasible four-point case".into()))?;
    let chain = best.chain.clone().unwrap();
    let (w, z) = build_wz(inst)?;
    let label = if chain.same_support(&z, GEO_TOL) {
        Label::Z
    } else if chain.same_support(&w, GEO_TOL) {
        Label::W
    } else if best.value.is_some_and(f64::is_finite) {
        Label::Case(best.name.clone())
    } else {
        Label::Other
    };
    Ok(LocalClassification {
        label,
        winner_case: best.name.clone(),
        value: best.value.unwrap(),
        w_value: w.alpha_mass(alpha)?,
        z_value: z.alpha_mass(alpha)?,
        chain,
        cases,
    })
}

/// Exclusion margins of the competitors closest to `W` and `Z`; all positive
/// when the dichotomy argument applies.
#[derive(Clone, Debug, Serialize)]
pub struct ExclusionMargins {
    /// `value(1c) − value(W)`.
    pub choicek1: f64,
    /// `value(1h) − value(W)`.
    pub choicek2: f64,
    /// `value(1e) − value(Z)`.
    pub choicek3: f64,
    /// `value(1c) − value(W)` after moving `C` onto the line `AD`.
    pub choicek4: f64,
}

impl ExclusionMargins {
    pub fn all_positive(&self) -> bool {
        [self.choicek1, self.choicek2, self.choicek3, self.choicek4].iter().all(|m| *m > 0.0)
    }

    pub fn min(&self) -> f64 {
        self.choicek1.min(self.choicek2).min(self.choicek3).min(self.choicek4)
    }
}

fn case_value(inst: &LocalFourPointInstance, name: &str, alpha: f64) -> Result<f64> {
    let b = inst.boundary()?;
    let case = case_table().into_iter().find(|c| c.name == name).expect("known case");
    evaluate_case(&case, inst, &b, alpha, &OptimizeConfig::default())?
        .value
        .ok_or_else(|| Error::Invariant(format!("case {name} unexpectedly infeasible")))
}

pub fn exclusion_margins(inst: &LocalFourPointInstance, alpha: f64) -> Result<ExclusionMargins> {
    let (w, z) = build_wz(inst)?;
    let (wv, zv) = (w.alpha_mass(alpha)?, z.alpha_mass(alpha)?);
    let ad = inst.d.sub(&inst.a);
    let len2: f64 = ad.iter().map(|x| x * x).sum();
    let t: f64 = inst.c.sub(&inst.a).iter().zip(&ad).map(|(x, y)| x * y).sum::<f64>() / len2;
    let companion = inst.with_c(inst.a.lerp(&inst.d, t));
    let (cw, _) = build_wz(&companion)?;
    Ok(ExclusionMargins {
        choicek1: case_value(inst, "1c", alpha)? - wv,
        choicek2: case_value(inst, "1h", alpha)? - wv,
        choicek3: case_value(inst, "1e", alpha)? - zv,
        choicek4: case_value(&companion, "1c", alpha)? - cw.alpha_mass(alpha)?,
    })
}

fn k0_holds(alpha: f64, k: f64) -> bool {
    let a = (1.0 - 1.0 / k).powf(alpha);
    let s = k.powf(-alpha);
    a + s / 2.0 > 1.0 && a + s / 4.0 > 1.0
}

/// Smallest integer `k ≥ 2` with `(1 − 1/k)^α + k^{−α}/2 > 1` and
/// `(1 − 1/k)^α + k^{−α}/4 > 1`.
///
/// Both hold for all large `k` when `α < 1`, since `k^{−α}` dominates
/// `1 − (1 − 1/k)^α ≈ α/k`. The search scans, then doubles and bisects.
pub fn estimate_k0(alpha: f64) -> u64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    const SCAN: u64 = 1 << 16;
    if let Some(k) = (2..=SCAN).find(|&k| k0_holds(alpha, k as f64)) {
        return k;
    }
    let (mut lo, mut hi) = (SCAN, SCAN * 2);
    while !k0_holds(alpha, hi as f64) {
        lo = hi;
        hi = hi.checked_mul(2).expect("k0 overflow");
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if k0_holds(alpha, mid as f64) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Near-collinear shape: `A = (−4, 0)`, `D = (4, 0)`, `B = (−s, ρ u_b)`,
/// `C = (s, ρ u_c)` with `u_b, u_c ∈ [−1, 1]`.
///
/// The exclusion chains need `|BC|` small against `|AD| / 4`, `|AB| / 2` and
/// `|CD| / 2`, so `s` is kept in `[0.25, 0.75]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub s: f64,
    pub u_b: f64,
    pub u_c: f64,
}

impl Shape {
    pub fn instance(&self, rho: f64, k: u32) -> LocalFourPointInstance {
        LocalFourPointInstance::planar((-4.0, 0.0), (-self.s, rho * self.u_b), (self.s, rho * self.u_c), (4.0, 0.0), k)
    }

    /// Off-axis displacements over a few spacings. `u_b = u_c = 0` is left
    /// out: exactly collinear points make `W` and `Z` the same current.
    pub fn corners() -> Vec<Shape> {
        let mut out = Vec::new();
        for s in [0.25, 0.5, 0.75] {
            for u_b in [-1.0, -0.5, 0.5, 1.0] {
                for u_c in [-1.0, -0.5, 0.5, 1.0] {
                    out.push(Shape { s, u_b, u_c });
                }
            }
        }
        out
    }

    pub fn random(n: usize, seed: u64) -> Vec<Shape> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Shape { s: rng.gen_range(0.25..=0.75), u_b: rng.gen_range(-1.0..=1.0), u_c: rng.gen_range(-1.0..=1.0) })
            .collect()
    }
}

/// Whether every shape at displacement `rho` is won by `W` or `Z` with all
/// exclusion margins positive.
pub fn dichotomy_holds(shapes: &[Shape], rho: f64, k: u32, alpha: f64, exec: Execution) -> Result<bool> {
    let ok = exec::map(exec, shapes, |s| -> Result<bool> {
        let inst = s.instance(rho, k);
        Ok(local4_solve(&inst, alpha)?.label.is_wz() && exclusion_margins(&inst, alpha)?.all_positive())
    });
    ok.into_iter().try_fold(true, |acc, r| Ok(acc && r?))
}

/// Largest displacement in `[tol, rho_max]` at which [`dichotomy_holds`],
/// found by bisection down to `tol`. Returns 0 when it fails already at
/// `tol`. The collinear limit itself is excluded since there the margins
/// vanish identically.
pub fn bisect_rho(shapes: &[Shape], k: u32, alpha: f64, rho_max: f64, tol: f64, exec: Execution) -> Result<f64> {
    if dichotomy_holds(shapes, rho_max, k, alpha, exec)? {
        return Ok(rho_max);
    }
    if !dichotomy_holds(shapes, tol, k, alpha, exec)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (tol, rho_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if dichotomy_holds(shapes, mid, k, alpha, exec)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::enumerate_forests;

    fn collinear(k: u32) -> LocalFourPointInstance {
        LocalFourPointInstance::planar((-4.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (4.0, 0.0), k)
    }

    #[test]
    fn cases_are_all_forests() {
        let inst = LocalFourPointInstance::planar((0.0, 0.0), (1.0, 0.3), (2.0, -0.2), (3.0, 0.1), 3);
        let b = inst.boundary().unwrap();
        let mut ours: Vec<_> =
            case_table().iter().map(|c| case_topology(c, &inst, &b).unwrap().canonical()).collect();
        ours.sort_by(|a, b| (a.n_branch, &a.edges).cmp(&(b.n_branch, &b.edges)));
        assert_eq!(ours.len(), 35);
        assert_eq!(ours, enumerate_forests(4, 2));
    }

    #[test]
    fn wz_boundaries() {
        let inst = LocalFourPointInstance::planar((0.0, 0.0), (1.0, 0.5), (2.0, -0.3), (3.0, 0.2), 5);
        let (w, z) = build_wz(&inst).unwrap();
        let b = inst.boundary().unwrap();
        assert!(w.boundary().same_as(&b, 1e-12));
        assert!(z.boundary().same_as(&b, 1e-12));
    }

    #[test]
    fn collinear_w_equals_z() {
        let (w, z) = build_wz(&collinear(10)).unwrap();
        assert!(w.difference_mass(&z) < 1e-12);
        let expected = 6.0 + 2.0 * 0.9f64.sqrt();
        assert!((z.alpha_mass(0.5).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn collinear_winner_is_z() {
        let r = local4_solve(&collinear(10), 0.5).unwrap();
        assert_eq!(r.label, Label::Z);
        assert!((r.value - (6.0 + 2.0 * 0.9f64.sqrt())).abs() < 1e-7);
    }

    #[test]
    fn infeasible_cases_in_general_position() {
        let inst = LocalFourPointInstance::planar((-4.0, 0.0), (-1.0, 0.3), (1.0, -0.2), (4.0, 0.1), 6);
        let r = local4_solve(&inst, 0.5).unwrap();
        let infeasible: Vec<&str> = r.cases.iter().filter(|c| !c.feasible).map(|c| c.name.as_str()).collect();
        // a one-branch star hung on the strong pair, or on the weak pair,
        // would leave the edge to E without flow
        assert_eq!(infeasible, vec!["1d", "1i", "1j", "1n", "1q", "1r", "2a/AD", "2b/BC", "2c/BC", "2d/AD", "3c"]);
    }

    #[test]
    fn k0_scalar() {
        let a: f64 = 0.5;
        assert!(0.5f64.powf(a) + 2f64.powf(-a) / 4.0 < 1.0);
        let k0 = estimate_k0(a);
        assert!(k0_holds(a, k0 as f64) && !k0_holds(a, (k0 - 1) as f64));
        assert_eq!(k0, 5);
    }
}
