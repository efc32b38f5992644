//! Zero-contour extraction by marching squares and terminal-point bookkeeping.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::field::Field;
use crate::geometry::{point_segment_distance, Domain, Side};
use crate::scalar::Real;

/// Where an open polyline ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTag {
    /// The Neumann side `xi = 0`.
    Xi0,
    /// The Neumann side `eta = 1`.
    Eta1,
    /// Any side carrying Dirichlet data (or another Neumann side of a
    /// non-default layout).
    Dirichlet,
    /// The polyline is closed.
    Closed,
}

impl EdgeTag {
    pub fn name(self) -> &'static str {
        match self {
            EdgeTag::Xi0 => "xi0",
            EdgeTag::Eta1 => "eta1",
            EdgeTag::Dirichlet => "dirichlet",
            EdgeTag::Closed => "closed",
        }
    }

    pub fn is_neumann(self) -> bool {
        matches!(self, EdgeTag::Xi0 | EdgeTag::Eta1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline<T> {
    /// Vertices in physical coordinates.
    pub points: Vec<(T, T)>,
    /// Vertices in lattice coordinates `(xi, eta)`.
    pub reference: Vec<(T, T)>,
    pub closed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalPoint<T> {
    pub polyline: usize,
    pub point: (T, T),
    pub reference: (T, T),
    pub tag: EdgeTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary<T> {
    pub polylines: Vec<Polyline<T>>,
    pub terminal_points: Vec<TerminalPoint<T>>,
    /// Distance from the Neumann corner to the nearest polyline segment;
    /// infinite when there is no contour or no corner.
    pub corner_distance: T,
}

impl<T: Real> FreeBoundary<T> {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(|p| p.points.len()).sum()
    }

    /// Terminal points on the Neumann boundary.
    pub fn neumann_terminals(&self) -> impl Iterator<Item = &TerminalPoint<T>> {
        self.terminal_points.iter().filter(|t| t.tag.is_neumann())
    }

    /// CSV with columns `polyline_id,vertex_index,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("polyline_id,vertex_index,x,y\n");
        for (id, p) in self.polylines.iter().enumerate() {
            for (k, (x, y)) in p.points.iter().enumerate() {
                s.push_str(&format!("{id},{k},{:.12e},{:.12e}\n", x.as_f64(), y.as_f64()));
            }
        }
        s
    }
}

/// A lattice edge, keyed by its lower-left node and direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EdgeKey {
    /// Between `(i, j)` and `(i + 1, j)`.
    H(usize, usize),
    /// Between `(i, j)` and `(i, j + 1)`.
    V(usize, usize),
}

/// Extracts `{v = 0}` as polylines. Nodes with `v <= 0` count as negative, so
/// exact zeros join the negative phase.
pub fn extract_zero_contour<T: Real>(f: &Field<T>, d: &Domain<T>) -> Result<FreeBoundary<T>, Error> {
    f.matches(d)?;
    if let Some((i, j)) = f.first_non_finite() {
        return Err(Error::NonFinite { i, j, step: 0 });
    }
    let n = d.n();
    let scale = T::one().max(f.max_abs());
    let tiny = T::epsilon() * scale;
    // nudged values: exact zeros move into the negative phase
    let val = |i: usize, j: usize| -> T {
        let v = f.get(i, j);
        if v == T::zero() {
            -tiny
        } else {
            v
        }
    };
    let pos = |i: usize, j: usize| val(i, j) > T::zero();

    let crossing = |e: EdgeKey| -> (T, T) {
        let (i0, j0, i1, j1) = match e {
            EdgeKey::H(i, j) => (i, j, i + 1, j),
            EdgeKey::V(i, j) => (i, j, i, j + 1),
        };
        let (a, b) = (val(i0, j0), val(i1, j1));
        let t = a / (a - b);
        let h = d.h();
        let xi = (T::from_usize_lossy(i0) + t * T::from_usize_lossy(i1 - i0)) * h;
        let eta = (T::from_usize_lossy(j0) + t * T::from_usize_lossy(j1 - j0)) * h;
        (xi, eta)
    };

    // segments per cell
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let bottom = EdgeKey::H(i, j);
            let top = EdgeKey::H(i, j + 1);
            let left = EdgeKey::V(i, j);
            let right = EdgeKey::V(i + 1, j);
            let s = [pos(i, j), pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1)];
            let code = s.iter().enumerate().fold(0u8, |c, (k, &p)| c | ((p as u8) << k));
            // corners: 0 = (i,j), 1 = (i+1,j), 2 = (i+1,j+1), 3 = (i,j+1)
            match code {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                4 | 11 => segments.push((right, top)),
                8 | 7 => segments.push((top, left)),
                3 | 12 => segments.push((left, right)),
                6 | 9 => segments.push((bottom, top)),
                5 | 10 => {
                    let center = (val(i, j) + val(i + 1, j) + val(i + 1, j + 1) + val(i, j + 1)) * T::lit(0.25);
                    // 5: corners 0 and 2 positive
                    let diagonal_02_connected = (center > T::zero()) == (code == 5);
                    if diagonal_02_connected {
                        // positive (or negative) band joins 0 and 2; cut off corners 1 and 3
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut adjacency: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let on_boundary = |e: EdgeKey| match e {
        EdgeKey::H(_, j) => j == 0 || j == n,
        EdgeKey::V(i, _) => i == 0 || i == n,
    };

    let mut used = vec![false; segments.len()];
    let mut chains: Vec<(Vec<EdgeKey>, bool)> = Vec::new();
    let walk = |start_edge: EdgeKey, first_seg: usize, used: &mut Vec<bool>| -> (Vec<EdgeKey>, bool) {
        let mut chain = vec![start_edge];
        let mut seg = first_seg;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            chain.push(next);
            if next == start_edge {
                return (chain, true);
            }
            let follow = adjacency[&next].iter().copied().find(|&s| !used[s]);
            match follow {
                Some(s) => {
                    seg = s;
                    at = next;
                }
                None => return (chain, false),
            }
        }
    };
    // open chains start at boundary edges, in deterministic edge order
    let mut starts: Vec<EdgeKey> = adjacency.keys().copied().filter(|&e| on_boundary(e)).collect();
    starts.sort();
    for e in starts {
        if let Some(s) = adjacency[&e].iter().copied().find(|&s| !used[s]) {
            chains.push(walk(e, s, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            chains.push(walk(segments[s].0, s, &mut used));
        }
    }

    let mut polylines = Vec::new();
    let mut terminal_points = Vec::new();
    for (id, (chain, closed)) in chains.into_iter().enumerate() {
        let reference: Vec<(T, T)> = chain.iter().map(|&e| crossing(e)).collect();
        let points: Vec<(T, T)> = reference.iter().map(|&(xi, eta)| d.to_physical(xi, eta)).collect();
        if !closed {
            for &end in &[0, reference.len() - 1] {
                let tag = classify(d, chain[end]);
                terminal_points.push(TerminalPoint { polyline: id, point: points[end], reference: reference[end], tag });
            }
        }
        polylines.push(Polyline { points, reference, closed });
    }

    let corner_distance = match d.neumann_corner_physical() {
        Some(c) => polylines
            .iter()
            .flat_map(|p| {
                let pts = &p.points;
                let single = if pts.len() == 1 { Some(distance(c, pts[0])) } else { None };
                pts.windows(2).map(move |w| point_segment_distance(c, w[0], w[1])).chain(single)
            })
            .fold(T::infinity(), T::min),
        None => T::infinity(),
    };
    Ok(FreeBoundary { polylines, terminal_points, corner_distance })
}

fn distance<T: Real>(a: (T, T), b: (T, T)) -> T {
    ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)).sqrt()
}

fn classify<T: Real>(d: &Domain<T>, e: EdgeKey) -> EdgeTag {
    let n = d.n();
    let side = match e {
        EdgeKey::H(_, 0) => Side::Eta0,
        EdgeKey::H(_, j) if j == n => Side::Eta1,
        EdgeKey::V(0, _) => Side::Xi0,
        EdgeKey::V(i, _) if i == n => Side::Xi1,
        _ => return EdgeTag::Closed,
    };
    match (d.neumann_corner().is_some(), side) {
        (true, Side::Xi0) => EdgeTag::Xi0,
        (true, Side::Eta1) => EdgeTag::Eta1,
        _ => EdgeTag::Dirichlet,
    }
}

/// Signed physical arclength from the Neumann corner: positive along
/// `eta = 1`, negative along `xi = 0`.
pub fn signed_arclength<T: Real>(t: &TerminalPoint<T>, d: &Domain<T>) -> Result<T, Error> {
    let (xi, eta) = t.reference;
    match t.tag {
        EdgeTag::Eta1 => Ok(xi * d.xi_step_length() / d.h()),
        EdgeTag::Xi0 => Ok(-(T::one() - eta) * d.eta_step_length() / d.h()),
        _ => Err(Error::NoNeumannTerminal),
    }
}

/// Signed arclength of the terminal point on `N`. When several open
/// polylines reach `N`, the terminal nearest the Neumann corner is used.
pub fn terminal_point_arclength<T: Real>(fb: &FreeBoundary<T>, d: &Domain<T>) -> Result<T, Error> {
    select_terminal(fb, d).map(|(_, s)| s)
}

/// The terminal on `N` nearest the Neumann corner, with its signed arclength.
pub fn select_terminal<'a, T: Real>(fb: &'a FreeBoundary<T>, d: &Domain<T>) -> Result<(&'a TerminalPoint<T>, T), Error> {
    d.neumann_corner().ok_or(Error::NoNeumannTerminal)?;
    let mut best: Option<(&TerminalPoint<T>, T)> = None;
    for t in fb.neumann_terminals() {
        let s = signed_arclength(t, d)?;
        if best.map_or(true, |(_, b)| s.abs() < b.abs()) {
            best = Some((t, s));
        }
    }
    best.ok_or(Error::NoNeumannTerminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn plane_contour_is_a_vertical_segment() {
        let d = Domain::new(PI / 2.0, 32).unwrap();
        let f = Field::from_reference_fn(&d, |xi, _| xi - 0.5);
        let fb = extract_zero_contour(&f, &d).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        let p = &fb.polylines[0];
        assert!(!p.closed);
        for &(x, _) in &p.points {
            assert!((x - 0.5).abs() <= d.h());
        }
        let ys: Vec<f64> = p.points.iter().map(|q| q.1).collect();
        assert!(ys.iter().cloned().fold(f64::INFINITY, f64::min) < 1e-12);
        assert!(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 1.0 - 1e-12);
        let mut tags: Vec<EdgeTag> = fb.terminal_points.iter().map(|t| t.tag).collect();
        tags.sort();
        assert_eq!(tags, vec![EdgeTag::Eta1, EdgeTag::Dirichlet]);
        assert_abs_diff_eq!(terminal_point_arclength(&fb, &d).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.corner_distance, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn one_sign_gives_empty_boundary() {
        let d = Domain::new(PI / 2.0, 16).unwrap();
        let fb = extract_zero_contour(&Field::constant(&d, 1.0), &d).unwrap();
        assert!(fb.is_empty());
        assert!(fb.terminal_points.is_empty());
        assert!(matches!(terminal_point_arclength(&fb, &d), Err(Error::NoNeumannTerminal)));
        // exact zeros are negative
        let fb = extract_zero_contour(&Field::zeros(&d), &d).unwrap();
        assert!(fb.is_empty());
    }

    #[test]
    fn circle_is_closed_and_accurate() {
        let d = Domain::new(PI / 2.0, 128).unwrap();
        let f = Field::from_reference_fn(&d, |xi, eta| (xi - 0.5).powi(2) + (eta - 0.5).powi(2) - 0.09);
        let fb = extract_zero_contour(&f, &d).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        let p = &fb.polylines[0];
        assert!(p.closed);
        assert_eq!(p.points.first(), p.points.last());
        for &(x, y) in &p.points {
            let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
            assert!((r - 0.3).abs() <= d.h());
        }
        // every analytic circle point is near the polyline too
        for k in 0..100 {
            let a = 2.0 * PI * k as f64 / 100.0;
            let c = (0.5 + 0.3 * a.cos(), 0.5 + 0.3 * a.sin());
            let dmin = p.points.windows(2).map(|w| point_segment_distance(c, w[0], w[1])).fold(f64::INFINITY, f64::min);
            assert!(dmin <= d.h());
        }
        assert!(fb.terminal_points.is_empty());
    }

    #[test]
    fn vertices_are_zeros_of_the_interpolant() {
        let d = Domain::new(PI / 3.0, 40).unwrap();
        let f = Field::from_physical_fn(&d, |x, y| (4.0 * x).sin() + y - 0.4);
        let fb = extract_zero_contour(&f, &d).unwrap();
        assert!(!fb.is_empty());
        for p in &fb.polylines {
            for &(xi, eta) in &p.reference {
                assert!(f.sample(xi, eta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn arclength_examples() {
        let d4 = Domain::new(PI / 4.0, 16).unwrap();
        let t = TerminalPoint { polyline: 0, point: d4.to_physical(0.0, 0.5), reference: (0.0, 0.5), tag: EdgeTag::Xi0 };
        assert_abs_diff_eq!(signed_arclength(&t, &d4).unwrap(), -0.5, epsilon = 1e-14);
        let c = TerminalPoint { polyline: 0, point: d4.to_physical(0.0, 1.0), reference: (0.0, 1.0), tag: EdgeTag::Eta1 };
        assert_eq!(signed_arclength(&c, &d4).unwrap(), 0.0);
    }

    #[test]
    fn every_open_end_has_a_boundary_tag() {
        let d = Domain::new(5.0 * PI / 4.0, 48).unwrap();
        let f = Field::from_reference_fn(&d, |xi, eta| (7.0 * xi).sin() * (5.0 * eta).cos() + 0.1);
        let fb = extract_zero_contour(&f, &d).unwrap();
        let open = fb.polylines.iter().filter(|p| !p.closed).count();
        assert_eq!(fb.terminal_points.len(), 2 * open);
        assert!(fb.terminal_points.iter().all(|t| t.tag != EdgeTag::Closed));
        assert!(fb.polylines.iter().filter(|p| p.closed).all(|p| p.points.first() == p.points.last()));
    }

    #[test]
    fn refinement_keeps_contours_close() {
        let g = |x: f64, y: f64| (3.0 * x).cos() - y - 0.2;
        let d1 = Domain::new(PI / 2.0, 32).unwrap();
        let d2 = Domain::new(PI / 2.0, 64).unwrap();
        let a = extract_zero_contour(&Field::from_physical_fn(&d1, g), &d1).unwrap();
        let b = extract_zero_contour(&Field::from_physical_fn(&d2, g), &d2).unwrap();
        let haus = |p: &Polyline<f64>, q: &Polyline<f64>| {
            p.points
                .iter()
                .map(|&c| q.points.windows(2).map(|w| point_segment_distance(c, w[0], w[1])).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let h = haus(&a.polylines[0], &b.polylines[0]).max(haus(&b.polylines[0], &a.polylines[0]));
        assert!(h <= 2.0 * d1.h());
    }

    #[test]
    fn saddle_cells_follow_the_center_value() {
        let d = Domain::new(PI / 2.0, 8).unwrap();
        // checkerboard cell at (3, 3) with positive center: positive corners connect
        let mut f = Field::constant(&d, -1.0);
        f.set(3, 3, 1.0);
        f.set(4, 4, 1.0);
        f.set(4, 3, -0.1);
        f.set(3, 4, -0.1);
        let fb = extract_zero_contour(&f, &d).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        assert!(fb.polylines[0].closed);
        // negative center: the two positive nodes are separate islands
        f.set(4, 3, -3.0);
        f.set(3, 4, -3.0);
        let fb = extract_zero_contour(&f, &d).unwrap();
        assert_eq!(fb.polylines.len(), 2);
    }

    #[test]
    fn csv_layout() {
        let d = Domain::new(PI / 2.0, 8).unwrap();
        let fb = extract_zero_contour(&Field::from_reference_fn(&d, |xi, _| xi - 0.5), &d).unwrap();
        let csv = fb.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("polyline_id,vertex_index,x,y"));
        assert_eq!(lines.count(), fb.vertex_count());
    }
}
