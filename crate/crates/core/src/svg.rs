//! Plain SVG rendering of planar chains and boundaries.

use std::fmt::Write;

use crate::currents::{Boundary, PolyhedralChain};
use crate::error::{Error, Result};
use crate::rational;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// A chain to draw, with a legend label.
pub struct Layer<'a> {
    pub label: String,
    pub chain: &'a PolyhedralChain,
}

/// One `<polyline>` per segment, stroke width proportional to the
/// multiplicity; boundary atoms as dots, red for sinks and blue for sources.
pub fn render(layers: &[Layer<'_>], boundary: Option<&Boundary>) -> Result<String> {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for l in layers {
        if l.chain.dim() != 2 {
            return Err(Error::Dimension { expected: 2, found: l.chain.dim() });
        }
        for s in l.chain.segments() {
            pts.push([s.start.0[0], s.start.0[1]]);
            pts.push([s.end.0[0], s.end.0[1]]);
        }
    }
    if let Some(b) = boundary {
        if b.dim() != 2 {
            return Err(Error::Dimension { expected: 2, found: b.dim() });
        }
        pts.extend(b.atoms().iter().map(|a| [a.point.0[0], a.point.0[1]]));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    if pts.is_empty() {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    // y grows downward in SVG
    let map = |x: f64, y: f64| (MARGIN + (x - lo[0]) * scale, SIZE - MARGIN - (y - lo[1]) * scale);

    let max_mult = layers
        .iter()
        .flat_map(|l| l.chain.segments())
        .map(|s| rational::to_f64(&s.mult).abs())
        .fold(0.0, f64::max)
        .max(1e-12);

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, l) in layers.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(w, r#"<g id="layer{i}" stroke="{color}" fill="none" stroke-linecap="round" opacity="0.8">"#);
        let _ = writeln!(w, "<title>{}</title>", escape(&l.label));
        for s in l.chain.segments() {
            let (x0, y0) = map(s.start.0[0], s.start.0[1]);
            let (x1, y1) = map(s.end.0[0], s.end.0[1]);
            let width = 1.0 + 7.0 * rational::to_f64(&s.mult).abs() / max_mult;
            let _ = writeln!(
                w,
                r#"<polyline points="{x0:.3},{y0:.3} {x1:.3},{y1:.3}" stroke-width="{width:.2}"><title>{}</title></polyline>"#,
                rational::format(&s.mult)
            );
        }
        let _ = writeln!(w, "</g>");
        let _ = writeln!(
            w,
            r#"<text x="{MARGIN}" y="{:.1}" font-size="14" fill="{color}">{}</text>"#,
            18.0 + 16.0 * i as f64,
            escape(&l.label)
        );
    }
    if let Some(b) = boundary {
        for a in b.atoms() {
            let (x, y) = map(a.point.0[0], a.point.0[1]);
            let fill = if a.mass > rational::int(0) { "#c0392b" } else { "#2471a3" };
            let _ = writeln!(
                w,
                r#"<circle cx="{x:.3}" cy="{y:.3}" r="5" fill="{fill}"><title>{}</title></circle>"#,
                rational::format(&a.mass)
            );
        }
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
