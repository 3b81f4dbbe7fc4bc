use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default geometric tolerance in instance units.
pub const GEO_TOL: f64 = 1e-9;

/// A point of the ambient space, dimension fixed per instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Point> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Point(coords))
    }

    pub fn xy(x: f64, y: f64) -> Point {
        Point(vec![x, y])
    }

    pub fn zero(dim: usize) -> Point {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn sub(&self, o: &Point) -> Vec<f64> {
        self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect()
    }

    pub fn dist(&self, o: &Point) -> f64 {
        dist(&self.0, &o.0)
    }

    /// `self + t * (o - self)`.
    pub fn lerp(&self, o: &Point, t: f64) -> Point {
        Point(self.0.iter().zip(&o.0).map(|(a, b)| a + t * (b - a)).collect())
    }

    pub fn midpoint(&self, o: &Point) -> Point {
        self.lerp(o, 0.5)
    }

    pub fn close_to(&self, o: &Point, tol: f64) -> bool {
        self.dist(o) <= tol
    }

    /// Total order on coordinates (lexicographic, `f64::total_cmp`).
    pub fn lex_cmp(&self, o: &Point) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&o.0) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&o.0.len())
    }

    pub fn translate(&self, v: &[f64]) -> Point {
        Point(self.0.iter().zip(v).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from `p` to the infinite line through `a` with unit direction `u`.
pub fn dist_to_line(p: &Point, a: &Point, u: &[f64]) -> f64 {
    let w = p.sub(a);
    let t = dot(&w, u);
    w.iter().zip(u).map(|(wi, ui)| (wi - t * ui).powi(2)).sum::<f64>().sqrt()
}

/// Closest-point parameters `(s, t)` of the segments `p0 + s (p1 - p0)` and
/// `q0 + t (q1 - q0)`, both clamped to `[0, 1]`, plus the distance between them.
pub fn segment_closest(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> (f64, f64, f64) {
    let d1 = p1.sub(p0);
    let d2 = q1.sub(q0);
    let r = p0.sub(q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (0.0, 0.0, p0.dist(q0));
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let ps = p0.lerp(p1, s);
    let qt = q0.lerp(q1, t);
    (s, t, ps.dist(&qt))
}

/// Angle at `v` between the rays toward `a` and `b`, in radians.
pub fn angle_at(v: &Point, a: &Point, b: &Point) -> f64 {
    let u = a.sub(v);
    let w = b.sub(v);
    let c = dot(&u, &w) / (norm(&u) * norm(&w));
    c.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_points_crossing() {
        let (s, t, d) = segment_closest(
            &Point::xy(-1.0, 0.0),
            &Point::xy(1.0, 0.0),
            &Point::xy(0.0, -1.0),
            &Point::xy(0.0, 1.0),
        );
        assert!((s - 0.5).abs() < 1e-12 && (t - 0.5).abs() < 1e-12 && d < 1e-12);
    }

    #[test]
    fn closest_points_parallel() {
        let (_, _, d) = segment_closest(
            &Point::xy(0.0, 0.0),
            &Point::xy(1.0, 0.0),
            &Point::xy(0.0, 2.0),
            &Point::xy(1.0, 2.0),
        );
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_distance_3d() {
        let a = Point(vec![0.0, 0.0, 0.0]);
        let d = dist_to_line(&Point(vec![1.0, 2.0, 2.0]), &a, &[1.0, 0.0, 0.0]);
        assert!((d - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn right_angle() {
        let a = angle_at(&Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0), &Point::xy(0.0, 3.0));
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
