//! A-posteriori checks of a computed state against the structure theory:
//! the two-phase monotonicity functional, sector eigenvalues, the gradient
//! jump across the free boundary, the Neumann residual, the contact angle with
//! `N`, and the gradient bound.

use serde::{Deserialize, Serialize};

use crate::energy::nodal_gradient;
use crate::error::Error;
use crate::field::{CoefficientField, Field};
use crate::freeboundary::{EdgeTag, FreeBoundary, TerminalPoint};
use crate::geometry::{point_segment_distance, Domain, NodeKind, Side};
use crate::phase::PhaseModel;
use crate::scalar::{CompensatedSum, Real};
use crate::solver::{GradientFlow, SolverConfig};

/// Physical gradient of the bilinear interpolant at lattice point `(xi, eta)`.
pub fn interpolated_gradient<T: Real>(f: &Field<T>, d: &Domain<T>, xi: T, eta: T) -> (T, T) {
    let (i, j, s, t) = f.locate(xi, eta);
    let one = T::one();
    let h = d.h();
    let (v00, v10, v01, v11) = (f.get(i, j), f.get(i + 1, j), f.get(i, j + 1), f.get(i + 1, j + 1));
    let v_xi = ((v10 - v00) * (one - t) + (v11 - v01) * t) / h;
    let v_eta = ((v01 - v00) * (one - s) + (v11 - v10) * s) / h;
    (v_xi, (v_eta - d.cos_theta() * v_xi) / d.sin_theta())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityProbe<T> {
    pub center: (T, T),
    pub radii: Vec<T>,
    pub phi_values: Vec<T>,
    /// `int_{B_r} |grad u+|^2` per radius.
    pub plus_energy: Vec<T>,
    /// `int_{B_r} |grad u-|^2` per radius.
    pub minus_energy: Vec<T>,
}

impl<T: Real> MonotonicityProbe<T> {
    /// Largest drop `phi(r_k) - phi(r_{k+1})` relative to `max phi`; zero or
    /// negative when the sequence is nondecreasing.
    pub fn max_relative_drop(&self) -> T {
        let top = self.phi_values.iter().copied().fold(T::zero(), T::max);
        if top == T::zero() {
            return T::zero();
        }
        self.phi_values.windows(2).map(|w| (w[0] - w[1]) / top).fold(T::neg_infinity(), T::max).max(T::zero())
    }

    /// `phi(r_{k+1}) >= phi(r_k) - slack max(phi)` for all `k`.
    pub fn is_nondecreasing(&self, slack: T) -> bool {
        self.max_relative_drop() <= slack
    }
}

/// `phi(r) = r^-4 int_{B_r} |grad u+|^2 int_{B_r} |grad u-|^2` about a point of
/// `N`, with `B_r` intersected with the domain by 4 x 4 subsampling per cell.
pub fn monotonicity_phi<T: Real>(f: &Field<T>, d: &Domain<T>, center: (T, T), radii: &[T]) -> Result<MonotonicityProbe<T>, Error> {
    f.matches(d)?;
    if radii.is_empty() {
        return Err(Error::Diagnostic("no radii given".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Diagnostic("radii must be strictly increasing".into()));
    }
    let h = d.h();
    if radii[0] < T::lit(5.0) * h * (T::one() - T::lit(1e-9)) {
        return Err(Error::Diagnostic(format!("smallest radius {} is below 5h = {}", radii[0], T::lit(5.0) * h)));
    }
    let on_n = Side::ALL
        .iter()
        .filter(|&&s| d.is_neumann_side(s))
        .any(|&s| d.distance_to_side(center, s) <= T::lit(1e-9));
    if !on_n {
        return Err(Error::Diagnostic("center is not on the Neumann boundary".into()));
    }
    let r_max = *radii.last().unwrap();
    let to_s = d.distance_to_dirichlet(center);
    if r_max >= to_s {
        return Err(Error::Diagnostic(format!("largest radius {r_max} reaches S (distance {to_s})")));
    }
    let sub = 4usize;
    let sub_t = T::from_usize_lossy(sub);
    let weight = d.jacobian() * h * h / (sub_t * sub_t);
    let mut plus: Vec<CompensatedSum<T>> = radii.iter().map(|_| CompensatedSum::new()).collect();
    let mut minus: Vec<CompensatedSum<T>> = radii.iter().map(|_| CompensatedSum::new()).collect();
    let n = d.n();
    let half = T::lit(0.5);
    for j in 0..n {
        for i in 0..n {
            // cheap reject: cell farther than r_max from the center
            let (cx, cy) = d.to_physical((T::from_usize_lossy(i) + half) * h, (T::from_usize_lossy(j) + half) * h);
            if ((cx - center.0).powi(2) + (cy - center.1).powi(2)).sqrt() > r_max + T::lit(2.0) * h {
                continue;
            }
            for b in 0..sub {
                for a in 0..sub {
                    let xi = (T::from_usize_lossy(i) + (T::from_usize_lossy(a) + half) / sub_t) * h;
                    let eta = (T::from_usize_lossy(j) + (T::from_usize_lossy(b) + half) / sub_t) * h;
                    let (x, y) = d.to_physical(xi, eta);
                    let dist = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
                    if dist >= r_max {
                        continue;
                    }
                    let v = f.sample(xi, eta);
                    if v == T::zero() {
                        continue;
                    }
                    let (gx, gy) = interpolated_gradient(f, d, xi, eta);
                    let g2 = (gx * gx + gy * gy) * weight;
                    let target = if v > T::zero() { &mut plus } else { &mut minus };
                    for (k, &r) in radii.iter().enumerate() {
                        if dist < r {
                            target[k].add(g2);
                        }
                    }
                }
            }
        }
    }
    let plus_energy: Vec<T> = plus.iter().map(|s| s.value()).collect();
    let minus_energy: Vec<T> = minus.iter().map(|s| s.value()).collect();
    let phi_values = radii
        .iter()
        .zip(plus_energy.iter().zip(&minus_energy))
        .map(|(&r, (&p, &m))| p * m / r.powi(4))
        .collect();
    Ok(MonotonicityProbe { center, radii: radii.to_vec(), phi_values, plus_energy, minus_energy })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorEigenvalues<T> {
    pub theta_plus: T,
    pub theta_minus: T,
    /// `sqrt(lambda_+) = pi / (2 theta_+)` for unit radius.
    pub sqrt_lambda_plus: T,
    pub sqrt_lambda_minus: T,
    pub sqrt_sum: T,
}

/// First mixed Dirichlet-Neumann eigenvalues of two sectors of opening
/// `theta_+` and `theta_-` (Dirichlet on the shared ray).
pub fn sector_bound<T: Real>(theta_plus: T, theta_minus: T) -> Result<SectorEigenvalues<T>, Error> {
    if !(theta_plus > T::zero() && theta_minus > T::zero() && theta_plus.is_finite() && theta_minus.is_finite()) {
        return Err(Error::Diagnostic(format!("sector angles must be positive, got {theta_plus}, {theta_minus}")));
    }
    let half_pi = T::FRAC_PI_2();
    let p = half_pi / theta_plus;
    let m = half_pi / theta_minus;
    Ok(SectorEigenvalues { theta_plus, theta_minus, sqrt_lambda_plus: p, sqrt_lambda_minus: m, sqrt_sum: p + m })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexJump<T> {
    pub point: (T, T),
    pub plus_sq: T,
    pub minus_sq: T,
    /// `(|grad u+|^2 - |grad u-|^2) - (lambda1^2 - lambda2^2) Q^2`.
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpResiduals<T> {
    pub vertices: Vec<VertexJump<T>>,
    /// Vertices closer than `k h` to the boundary, or whose samples left the
    /// domain or did not straddle the contour.
    pub skipped: usize,
}

impl<T: Real> JumpResiduals<T> {
    pub fn median_abs(&self) -> Option<T> {
        median(self.vertices.iter().map(|v| v.residual.abs()).collect())
    }

    pub fn median_jump(&self) -> Option<T> {
        median(self.vertices.iter().map(|v| v.plus_sq - v.minus_sq).collect())
    }
}

pub fn median<T: Real>(mut xs: Vec<T>) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { (xs[m - 1] + xs[m]) * T::lit(0.5) })
}

/// One-sided gradients sampled `k h` off the contour along its normal.
pub fn gradient_jump_residual<T: Real>(
    f: &Field<T>,
    d: &Domain<T>,
    fb: &FreeBoundary<T>,
    q: &CoefficientField<T>,
    m: &PhaseModel<T>,
    k: T,
) -> Result<JumpResiduals<T>, Error> {
    f.matches(d)?;
    q.matches(d)?;
    if fb.is_empty() {
        return Err(Error::Diagnostic("free boundary is empty".into()));
    }
    let offset = k * d.h();
    let q2 = Field::from_values(d.n(), q.values().iter().map(|&v| v * v).collect())?;
    let mut vertices = Vec::new();
    let mut skipped = 0;
    for p in &fb.polylines {
        let pts = &p.points;
        let count = pts.len();
        for a in 0..count {
            let here = pts[a];
            if d.distance_to_boundary(here) < offset {
                skipped += 1;
                continue;
            }
            let (prev, next) = match (a, p.closed) {
                (0, true) => (pts[count - 2], pts[1]),
                (0, false) => (here, pts[(1).min(count - 1)]),
                (x, _) if x == count - 1 => (pts[x - 1], if p.closed { pts[1] } else { here }),
                (x, _) => (pts[x - 1], pts[x + 1]),
            };
            let (tx, ty) = (next.0 - prev.0, next.1 - prev.1);
            let len = (tx * tx + ty * ty).sqrt();
            if len == T::zero() {
                skipped += 1;
                continue;
            }
            let normal = (-ty / len, tx / len);
            let s1 = (here.0 + offset * normal.0, here.1 + offset * normal.1);
            let s2 = (here.0 - offset * normal.0, here.1 - offset * normal.1);
            let tol = T::lit(1e-12);
            if !d.contains_physical(s1, tol) || !d.contains_physical(s2, tol) {
                skipped += 1;
                continue;
            }
            let r1 = d.to_reference(s1.0, s1.1);
            let r2 = d.to_reference(s2.0, s2.1);
            let (v1, v2) = (f.sample(r1.0, r1.1), f.sample(r2.0, r2.1));
            let (rp, rm) = if v1 > T::zero() && v2 <= T::zero() {
                (r1, r2)
            } else if v2 > T::zero() && v1 <= T::zero() {
                (r2, r1)
            } else {
                skipped += 1;
                continue;
            };
            let gp = interpolated_gradient(f, d, rp.0, rp.1);
            let gm = interpolated_gradient(f, d, rm.0, rm.1);
            let plus_sq = gp.0 * gp.0 + gp.1 * gp.1;
            let minus_sq = gm.0 * gm.0 + gm.1 * gm.1;
            let rv = d.to_reference(here.0, here.1);
            let qv = q2.sample(rv.0.max(T::zero()).min(T::one()), rv.1.max(T::zero()).min(T::one()));
            vertices.push(VertexJump { point: here, plus_sq, minus_sq, residual: plus_sq - minus_sq - m.jump() * qv });
        }
    }
    Ok(JumpResiduals { vertices, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannResidual<T> {
    /// Largest weak normal-derivative residual on `N`.
    pub max: T,
    /// Lattice node where it occurs.
    pub node: (usize, usize),
}

/// Weak Neumann residual: the scheme's row residual on each `N` node divided
/// by twice the boundary length it represents, which for smooth fields tends
/// to the normal derivative. With `physics = None` only the diffusion rows
/// are used.
pub fn neumann_residual<T: Real>(
    f: &Field<T>,
    d: &Domain<T>,
    cfg: &SolverConfig<T>,
    physics: Option<(&PhaseModel<T>, &CoefficientField<T>)>,
) -> Result<NeumannResidual<T>, Error> {
    let flow = match physics {
        Some((m, q)) => GradientFlow::new(d, m, q, cfg, f)?,
        None => {
            let linear = PhaseModel { lambda1: T::one(), lambda2: T::one(), epsilon: cfg.epsilon(d) };
            GradientFlow::new(d, &linear, &CoefficientField::ones(d), cfg, f)?
        }
    };
    let rows = flow.row_residuals(f);
    let n = d.n();
    let two_h = T::lit(2.0) * d.h();
    let mut best = NeumannResidual { max: T::zero(), node: (0, 0) };
    for (r, &node) in flow.operator().free_nodes().iter().enumerate() {
        let (i, j) = (node % (n + 1), node / (n + 1));
        if !d.kind(i, j).is_neumann() {
            continue;
        }
        let v = rows[r].abs() / two_h;
        if v > best.max {
            best = NeumannResidual { max: v, node: (i, j) };
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactAngle<T> {
    pub terminal: TerminalPoint<T>,
    /// Angle in degrees between the contour tangent at the terminal and the edge, in `[0, 90]`.
    pub degrees: T,
    pub vertices_used: usize,
}

/// Angle between the free boundary and `N` at each terminal point on `N`.
/// The contour vertices within `10 h` of the terminal are fitted by a
/// parabola in the frame of their total-least-squares line, and the tangent
/// is taken at the terminal, so contour curvature does not tilt the result.
pub fn intersection_angle<T: Real>(fb: &FreeBoundary<T>, d: &Domain<T>) -> Result<Vec<ContactAngle<T>>, Error> {
    let terminals: Vec<&TerminalPoint<T>> = fb.neumann_terminals().collect();
    if terminals.is_empty() {
        return Err(Error::NoNeumannTerminal);
    }
    let window = T::lit(10.0) * d.h();
    let mut out = Vec::new();
    for t in terminals {
        let pts: Vec<(T, T)> = fb.polylines[t.polyline]
            .points
            .iter()
            .copied()
            .filter(|p| ((p.0 - t.point.0).powi(2) + (p.1 - t.point.1).powi(2)).sqrt() <= window)
            .collect();
        if pts.len() < 3 {
            return Err(Error::Diagnostic(format!("only {} contour vertices within 10h of the terminal", pts.len())));
        }
        let dir = terminal_tangent(&pts, t.point);
        let edge = match t.tag {
            EdgeTag::Eta1 => (T::one(), T::zero()),
            EdgeTag::Xi0 => (d.cos_theta(), d.sin_theta()),
            _ => unreachable!(),
        };
        let c = (dir.0 * edge.0 + dir.1 * edge.1).abs().min(T::one());
        out.push(ContactAngle { terminal: *t, degrees: c.acos().to_degrees(), vertices_used: pts.len() });
    }
    Ok(out)
}

/// Tangent at `origin` of the least-squares parabola `w = a + b u + c u^2`,
/// with `u` along the principal direction of `pts` and `w` normal to it.
/// Falls back to the principal direction when the fit is singular.
fn terminal_tangent<T: Real>(pts: &[(T, T)], origin: (T, T)) -> (T, T) {
    let (ex, ey) = principal_direction(pts);
    let mut m = [[T::zero(); 3]; 3];
    let mut r = [T::zero(); 3];
    for p in pts {
        let (dx, dy) = (p.0 - origin.0, p.1 - origin.1);
        let u = dx * ex + dy * ey;
        let w = -dx * ey + dy * ex;
        let basis = [T::one(), u, u * u];
        for a in 0..3 {
            r[a] = r[a] + basis[a] * w;
            for b in 0..3 {
                m[a][b] = m[a][b] + basis[a] * basis[b];
            }
        }
    }
    match (pts.len() >= 4).then(|| solve3(m, r)).flatten() {
        Some(c) => {
            let slope = c[1];
            let norm = (T::one() + slope * slope).sqrt();
            ((ex - slope * ey) / norm, (ey + slope * ex) / norm)
        }
        None => (ex, ey),
    }
}

fn solve3<T: Real>(mut m: [[T; 3]; 3], mut r: [T; 3]) -> Option<[T; 3]> {
    let scale = m.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    for k in 0..3 {
        let p = (k..3).max_by(|&a, &b| m[a][k].abs().partial_cmp(&m[b][k].abs()).unwrap())?;
        if m[p][k].abs() <= T::epsilon() * T::lit(1e3) * scale {
            return None;
        }
        m.swap(k, p);
        r.swap(k, p);
        for i in k + 1..3 {
            let f = m[i][k] / m[k][k];
            for j in k..3 {
                m[i][j] = m[i][j] - f * m[k][j];
            }
            r[i] = r[i] - f * r[k];
        }
    }
    let mut x = [T::zero(); 3];
    for k in (0..3).rev() {
        let s = (k + 1..3).fold(r[k], |s, j| s - m[k][j] * x[j]);
        x[k] = s / m[k][k];
    }
    Some(x)
}

fn principal_direction<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let nt = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / nt;
    let my = pts.iter().map(|p| p.1).sum::<T>() / nt;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in pts {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    let angle = T::lit(0.5) * (T::lit(2.0) * sxy).atan2(sxx - syy);
    (angle.cos(), angle.sin())
}

/// `max |grad v|` over the nodes.
pub fn max_gradient<T: Real>(f: &Field<T>, d: &Domain<T>) -> T {
    max_gradient_where(f, d, |_, _| true)
}

/// `max |grad v|` over the nodes accepted by `keep`.
pub fn max_gradient_where<T: Real>(f: &Field<T>, d: &Domain<T>, keep: impl Fn(usize, usize) -> bool) -> T {
    let mut best = T::zero();
    for j in 0..=d.n() {
        for i in 0..=d.n() {
            if keep(i, j) {
                let (gx, gy) = nodal_gradient(f, d, i, j);
                best = best.max((gx * gx + gy * gy).sqrt());
            }
        }
    }
    best
}

/// Nodes at least `margin` away from both the contour and the Dirichlet
/// boundary, for gradient bounds away from the layer and the data jump.
pub fn away_from_layer<'a, T: Real>(d: &'a Domain<T>, fb: &FreeBoundary<T>, margin: T) -> impl Fn(usize, usize) -> bool + 'a {
    let segments: Vec<((T, T), (T, T))> = fb
        .polylines
        .iter()
        .flat_map(|p| p.points.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>())
        .collect();
    move |i, j| {
        if matches!(d.kind(i, j), NodeKind::Dirichlet) {
            return false;
        }
        let p = d.node_physical(i, j);
        if d.distance_to_dirichlet(p) < margin {
            return false;
        }
        segments.iter().all(|&(a, b)| point_segment_distance(p, a, b) >= margin)
    }
}

/// One line of the diagnostic report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub check: String,
    pub parameters: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// CSV with columns `check,parameters,value,tolerance,pass`.
pub fn report_csv(records: &[DiagnosticRecord]) -> String {
    let mut s = String::from("check,parameters,value,tolerance,pass\n");
    for r in records {
        let params = if r.parameters.contains(',') || r.parameters.contains('"') {
            format!("\"{}\"", r.parameters.replace('"', "\"\""))
        } else {
            r.parameters.clone()
        };
        s.push_str(&format!("{},{},{:e},{:e},{}\n", r.check, params, r.value, r.tolerance, r.pass));
    }
    s
}
