use std::fmt::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::field::Field;
use crate::freeboundary::FreeBoundary;
use crate::geometry::Domain;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;
const POSITIVE: &str = "#f4c7a1";
const NEGATIVE: &str = "#a9c8e8";
const CURVE: &str = "#d62728";

struct Frame {
    xmin: f64,
    ymax: f64,
    scale: f64,
}

impl Frame {
    fn new(d: &Domain<f64>) -> Self {
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(a, b)| d.to_physical(a, b));
        let xmin = corners.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let xmax = corners.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let ymin = corners.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let ymax = corners.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let scale = (SIZE - 2.0 * MARGIN) / (xmax - xmin).max(ymax - ymin);
        Self { xmin, ymax, scale }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (MARGIN + (p.0 - self.xmin) * self.scale, MARGIN + (self.ymax - p.1) * self.scale)
    }

    fn point(&self, out: &mut String, p: (f64, f64)) {
        let (x, y) = self.map(p);
        let _ = write!(out, "{x:.3},{y:.3}");
    }
}

/// The plot as an SVG string: domain outline, the two sign regions in flat
/// colors (cells classified by their mean value) and the free boundary.
pub fn svg_document(fb: &FreeBoundary<f64>, f: &Field<f64>, d: &Domain<f64>) -> Result<String, Error> {
    f.matches(d)?;
    let fr = Frame::new(d);
    let n = d.n();
    let h = d.h();
    let positive = |i: usize, j: usize| (f.get(i, j) + f.get(i + 1, j) + f.get(i, j + 1) + f.get(i + 1, j + 1)) > 0.0;
    let count = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).filter(|&(i, j)| positive(i, j)).count();
    // background takes the majority sign, runs of the other sign are drawn on top
    let majority_positive = 2 * count >= n * n;
    let (bg, fg) = if majority_positive { (POSITIVE, NEGATIVE) } else { (NEGATIVE, POSITIVE) };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let outline = |s: &mut String, fill: &str, stroke: &str| {
        s.push_str("<polygon points=\"");
        for (k, c) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].into_iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            fr.point(s, d.to_physical(c.0, c.1));
        }
        let _ = writeln!(s, "\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>");
    };
    outline(&mut s, bg, "none");
    s.push_str("<g stroke=\"none\">\n");
    for j in 0..n {
        let mut i = 0;
        while i < n {
            if positive(i, j) == majority_positive {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && positive(i, j) != majority_positive {
                i += 1;
            }
            let (a0, a1) = (start as f64 * h, i as f64 * h);
            let (b0, b1) = (j as f64 * h, (j + 1) as f64 * h);
            s.push_str("<polygon points=\"");
            for (k, c) in [(a0, b0), (a1, b0), (a1, b1), (a0, b1)].into_iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                fr.point(&mut s, d.to_physical(c.0, c.1));
            }
            let _ = writeln!(s, "\" fill=\"{fg}\"/>");
        }
    }
    s.push_str("</g>\n");
    for p in &fb.polylines {
        s.push_str("<polyline points=\"");
        for (k, &q) in p.points.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            fr.point(&mut s, q);
        }
        let _ = writeln!(s, "\" fill=\"none\" stroke=\"{CURVE}\" stroke-width=\"2\"/>");
    }
    outline(&mut s, "none", "#000000");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg(fb: &FreeBoundary<f64>, f: &Field<f64>, d: &Domain<f64>, path: &Path) -> Result<(), Error> {
    let doc = svg_document(fb, f, d)?;
    super::write_text(path, &doc)
}
