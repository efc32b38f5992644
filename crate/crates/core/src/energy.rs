//! Discrete energies on the skewed lattice.
//!
//! The Dirichlet part is integrated cell by cell: each cell averages the
//! gradient norm over its four corners, where the corner gradient uses the two
//! cell edges meeting there. Its Hessian is exactly the centered nine-point
//! operator `-2 h^2 |sin| (a D_xixi + b D_xieta + c D_etaeta)` at interior nodes,
//! so the gradient flow built on it dissipates precisely this energy.
//!
//! The phase part is integrated either with nodal trapezoid weights or with a
//! tensor Gauss rule on the bilinear interpolant of each cell
//! ([`PotentialRule`]).

use serde::{Deserialize, Serialize};

use crate::field::{CoefficientField, Field};
use crate::geometry::Domain;
use crate::phase::PhaseModel;
use crate::scalar::{CompensatedSum, Real};

/// Quadrature for the `Q^2 phi(v)` term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "points")]
pub enum PotentialRule {
    /// Trapezoid weights at the nodes.
    Nodal,
    /// `p x p` Gauss-Legendre points per cell on the bilinear interpolant
    /// (`1 <= p <= 5`).
    Gauss(usize),
    /// Exact integration of the piecewise-linear interpolant on both
    /// diagonal triangulations of every cell, averaged. `Q^2` is taken as
    /// the vertex mean on each triangle. Unlike the nodal rule, the layer
    /// is felt even when the field jumps across it between two nodes.
    #[default]
    Exact,
}

impl PotentialRule {
    pub fn validate(self) -> Result<(), String> {
        match self {
            PotentialRule::Gauss(p) if !(1..=5).contains(&p) => {
                Err(format!("Gauss rule needs 1..=5 points per direction, got {p}"))
            }
            _ => Ok(()),
        }
    }
}

/// Gauss-Legendre nodes on `[0, 1]` and weights summing to one.
pub(crate) fn gauss_legendre_unit(p: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (&[f64], &[f64]) = match p {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (&[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]),
        4 => (
            &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
            &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
        ),
        5 => (
            &[-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664],
            &[0.236_926_885_056_189_1, 0.478_628_670_499_366_5, 0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1],
        ),
        _ => panic!("unsupported Gauss order {p}"),
    };
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|c| 0.5 * c).collect())
}

/// Lattice derivatives `(v_xi, v_eta)` at a node: centered in the interior,
/// second-order one-sided on the boundary.
pub fn lattice_derivatives<T: Real>(f: &Field<T>, d: &Domain<T>, i: usize, j: usize) -> (T, T) {
    let n = d.n();
    let two_h = T::lit(2.0) * d.h();
    let diff = |at: usize, get: &dyn Fn(usize) -> T| -> T {
        if at == 0 {
            (-T::lit(3.0) * get(0) + T::lit(4.0) * get(1) - get(2)) / two_h
        } else if at == n {
            (T::lit(3.0) * get(n) - T::lit(4.0) * get(n - 1) + get(n - 2)) / two_h
        } else {
            (get(at + 1) - get(at - 1)) / two_h
        }
    };
    let v_xi = diff(i, &|k| f.get(k, j));
    let v_eta = diff(j, &|k| f.get(i, k));
    (v_xi, v_eta)
}

/// Physical gradient `(v_x, v_y)` at a node.
pub fn nodal_gradient<T: Real>(f: &Field<T>, d: &Domain<T>, i: usize, j: usize) -> (T, T) {
    let (v_xi, v_eta) = lattice_derivatives(f, d, i, j);
    (v_xi, (v_eta - d.cos_theta() * v_xi) / d.sin_theta())
}

/// `|grad v|^2` at a node in physical units,
/// `csc^2 (v_xi^2 - 2 cos v_xi v_eta + v_eta^2)`.
pub fn gradient_sq<T: Real>(f: &Field<T>, d: &Domain<T>, i: usize, j: usize) -> T {
    let (v_xi, v_eta) = lattice_derivatives(f, d, i, j);
    d.coefficients().quadratic_form(v_xi, v_eta)
}

/// Trapezoid weight of a node (`|sin| h^2` times 1, 1/2 or 1/4).
#[inline]
pub fn node_weight<T: Real>(d: &Domain<T>, i: usize, j: usize) -> T {
    let n = d.n();
    let half = T::lit(0.5);
    let mut w = d.jacobian() * d.h() * d.h();
    if i == 0 || i == n {
        w = w * half;
    }
    if j == 0 || j == n {
        w = w * half;
    }
    w
}

/// Cell-corner Dirichlet energy `int |grad v|^2`.
pub fn dirichlet_energy<T: Real>(f: &Field<T>, d: &Domain<T>) -> T {
    let k = d.coefficients();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let n = d.n();
    let mut acc = CompensatedSum::new();
    for j in 0..n {
        for i in 0..n {
            let v00 = f.get(i, j);
            let v10 = f.get(i + 1, j);
            let v01 = f.get(i, j + 1);
            let v11 = f.get(i + 1, j + 1);
            let (dx0, dx1) = (v10 - v00, v11 - v01);
            let (dy0, dy1) = (v01 - v00, v11 - v10);
            let e = k.a * half * (dx0 * dx0 + dx1 * dx1)
                + k.b * quarter * (dx0 + dx1) * (dy0 + dy1)
                + k.c * half * (dy0 * dy0 + dy1 * dy1);
            acc.add(e);
        }
    }
    acc.value() * d.jacobian()
}

/// The discrete functional `int |grad v|^2 + Q^2 g(v)` for a pointwise phase
/// coefficient `g`, with the potential integrated by a [`PotentialRule`].
pub struct EnergyFunctional<'a, T> {
    domain: &'a Domain<T>,
    q: &'a CoefficientField<T>,
    model: &'a PhaseModel<T>,
    rule: PotentialRule,
    gauss: Option<(Vec<T>, Vec<T>)>,
}

impl<'a, T: Real> EnergyFunctional<'a, T> {
    pub fn new(domain: &'a Domain<T>, q: &'a CoefficientField<T>, model: &'a PhaseModel<T>, rule: PotentialRule) -> Self {
        let gauss = match rule {
            PotentialRule::Nodal | PotentialRule::Exact => None,
            PotentialRule::Gauss(p) => {
                let (x, w) = gauss_legendre_unit(p);
                Some((x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect()))
            }
        };
        Self { domain, q, model, rule, gauss }
    }

    pub fn rule(&self) -> PotentialRule {
        self.rule
    }

    pub fn domain(&self) -> &Domain<T> {
        self.domain
    }

    /// `J_eps[v]`.
    pub fn relaxed(&self, f: &Field<T>) -> T {
        dirichlet_energy(f, self.domain) + self.potential_relaxed(f)
    }

    /// `J[v]` with the sharp coefficient `lambda^2(v)`.
    pub fn sharp(&self, f: &Field<T>) -> T {
        dirichlet_energy(f, self.domain) + self.potential_sharp(f)
    }

    /// `int Q^2 phi_eps(v)`.
    pub fn potential_relaxed(&self, f: &Field<T>) -> T {
        match self.rule {
            PotentialRule::Exact => self.exact_potential(f, false),
            _ => self.potential(f, |v| self.model.phi(v)),
        }
    }

    /// `int Q^2 lambda^2(v)`.
    pub fn potential_sharp(&self, f: &Field<T>) -> T {
        match self.rule {
            PotentialRule::Exact => self.exact_potential(f, true),
            _ => self.potential(f, |v| self.model.lambda_sq(v)),
        }
    }

    /// `int Q^2 g(v)` for the nodal and Gauss rules. The exact rule only
    /// knows `phi_eps` and `lambda^2`, so it falls back to trapezoid weights.
    pub fn potential(&self, f: &Field<T>, g: impl Fn(T) -> T) -> T {
        let d = self.domain;
        let n = d.n();
        let mut acc = CompensatedSum::new();
        match &self.gauss {
            None => {
                for j in 0..=n {
                    for i in 0..=n {
                        let k = d.index(i, j);
                        acc.add(node_weight(d, i, j) * self.q.squared(k) * g(f.get(i, j)));
                    }
                }
            }
            Some((x, w)) => {
                let area = d.jacobian() * d.h() * d.h();
                for j in 0..n {
                    for i in 0..n {
                        let c = CellCorners::gather(f, self.q, d, i, j);
                        for (&s, &ws) in x.iter().zip(w) {
                            for (&t, &wt) in x.iter().zip(w) {
                                let (v, q2) = c.interpolate(s, t);
                                acc.add(area * ws * wt * q2 * g(v));
                            }
                        }
                    }
                }
            }
        }
        acc.value()
    }

    fn exact_potential(&self, f: &Field<T>, sharp: bool) -> T {
        let d = self.domain;
        let n = d.n();
        let m = self.model;
        let eps = m.epsilon;
        let quarter_cell = d.jacobian() * d.h() * d.h() * T::lit(0.25);
        let low = m.lambda_sq(-T::one());
        let jump = m.jump();
        let third = T::one() / T::lit(3.0);
        let mut acc = CompensatedSum::new();
        for j in 0..n {
            for i in 0..n {
                let c = CellCorners::gather(f, self.q, d, i, j);
                for tri in TRIANGLES {
                    let v = tri.map(|k| c.v[k]);
                    let q2 = (c.q2[tri[0]] + c.q2[tri[1]] + c.q2[tri[2]]) * third;
                    let frac = if sharp {
                        positive_fraction(v)
                    } else {
                        triangle_layer(v.map(|x| x / eps)).0
                    };
                    acc.add(quarter_cell * q2 * (low + jump * frac));
                }
            }
        }
        acc.value()
    }

    /// Adds `d/dv_k int Q^2 phi(v)` to `out[k]` for every node.
    pub fn accumulate_force(&self, f: &Field<T>, out: &mut [T]) {
        let d = self.domain;
        let n = d.n();
        let m = self.model;
        if m.is_linear() {
            return;
        }
        if self.rule == PotentialRule::Exact {
            let eps = m.epsilon;
            let scale = d.jacobian() * d.h() * d.h() * T::lit(0.25) * m.jump() / eps;
            let third = T::one() / T::lit(3.0);
            for j in 0..n {
                for i in 0..n {
                    let c = CellCorners::gather(f, self.q, d, i, j);
                    if !c.touches_layer(eps) {
                        continue;
                    }
                    let idx = [d.index(i, j), d.index(i + 1, j), d.index(i, j + 1), d.index(i + 1, j + 1)];
                    for tri in TRIANGLES {
                        let v = tri.map(|k| c.v[k]);
                        let q2 = (c.q2[tri[0]] + c.q2[tri[1]] + c.q2[tri[2]]) * third;
                        let (_, g) = triangle_layer(v.map(|x| x / eps));
                        for (a, &corner) in tri.iter().enumerate() {
                            let k = idx[corner];
                            out[k] = out[k] + scale * q2 * g[a];
                        }
                    }
                }
            }
            return;
        }
        match &self.gauss {
            None => {
                for j in 0..=n {
                    for i in 0..=n {
                        let v = f.get(i, j);
                        if m.in_layer(v) {
                            let k = d.index(i, j);
                            out[k] = out[k] + node_weight(d, i, j) * self.q.squared(k) * m.phi_prime(v);
                        }
                    }
                }
            }
            Some((x, w)) => {
                let area = d.jacobian() * d.h() * d.h();
                for j in 0..n {
                    for i in 0..n {
                        let c = CellCorners::gather(f, self.q, d, i, j);
                        if !c.touches_layer(m.epsilon) {
                            continue;
                        }
                        let mut acc = [T::zero(); 4];
                        for (&s, &ws) in x.iter().zip(w) {
                            for (&t, &wt) in x.iter().zip(w) {
                                let (v, q2) = c.interpolate(s, t);
                                let g = area * ws * wt * q2 * m.phi_prime(v);
                                if g == T::zero() {
                                    continue;
                                }
                                let one = T::one();
                                acc[0] = acc[0] + g * (one - s) * (one - t);
                                acc[1] = acc[1] + g * s * (one - t);
                                acc[2] = acc[2] + g * (one - s) * t;
                                acc[3] = acc[3] + g * s * t;
                            }
                        }
                        let idx = [d.index(i, j), d.index(i + 1, j), d.index(i, j + 1), d.index(i + 1, j + 1)];
                        for (k, a) in idx.into_iter().zip(acc) {
                            out[k] = out[k] + a;
                        }
                    }
                }
            }
        }
    }
}

/// The four triangles of the two diagonal splittings of a cell, as corner
/// indices into `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`.
const TRIANGLES: [[usize; 3]; 4] = [[0, 1, 3], [0, 3, 2], [0, 1, 2], [1, 3, 2]];

/// Area fraction of a linear triangle where `v > 0`.
fn positive_fraction<T: Real>(v: [T; 3]) -> T {
    let mut s = v;
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let [a, b, c] = s;
    if c <= T::zero() {
        T::zero()
    } else if a > T::zero() {
        T::one()
    } else if b <= T::zero() {
        c * c / ((c - a) * (c - b))
    } else {
        T::one() - a * a / ((b - a) * (c - a))
    }
}

/// Unit profile `s(t)` of the layer and its derivative.
#[inline]
fn unit_layer<T: Real>(t: T) -> (T, T) {
    if t <= T::zero() {
        (T::zero(), T::zero())
    } else if t >= T::one() {
        (T::one(), T::zero())
    } else {
        let half = T::lit(0.5);
        let pt = T::PI() * t;
        (half * (T::one() - pt.cos()), half * T::PI() * pt.sin())
    }
}

/// For a linear function with vertex values `t` on a triangle, returns the
/// triangle mean of `s(t)` and the means of `s'(t) lambda_k` for the three
/// barycentric coordinates.
///
/// The integral is reduced to one dimension: the distribution of `t` over
/// the triangle has a tent-shaped density, and the mean of each barycentric
/// coordinate along a level segment is linear in the level. Each smooth piece
/// is integrated with 8-point Gauss-Legendre.
fn triangle_layer<T: Real>(t: [T; 3]) -> (T, [T; 3]) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap_or(std::cmp::Ordering::Equal));
    let (p, q, r) = (order[0], order[1], order[2]);
    let (tp, tq, tr) = (t[p], t[q], t[r]);
    let zero = T::zero();
    let one = T::one();
    if tr <= zero {
        return (zero, [zero; 3]);
    }
    if tp >= one {
        return (one, [zero; 3]);
    }
    let span = tr - tp;
    if span <= T::epsilon() * (one + tp.abs()) {
        let (s, ds) = unit_layer((tp + tq + tr) / T::lit(3.0));
        let g = ds / T::lit(3.0);
        return (s, [g; 3]);
    }
    let (nodes, weights) = gauss8::<T>();
    let mut mean = zero;
    let mut force = [zero; 3];
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    // lower part [tp, tq] and upper part [tq, tr]
    for upper in [false, true] {
        let (lo, hi) = if upper { (tq, tr) } else { (tp, tq) };
        if hi <= lo {
            continue;
        }
        let mut cuts = [lo, hi, hi, hi];
        let mut nc = 1;
        for b in [zero, one] {
            if b > lo && b < hi {
                cuts[nc] = b;
                nc += 1;
            }
        }
        cuts[nc] = hi;
        for piece in 0..nc {
            let (a, b) = (cuts[piece], cuts[piece + 1]);
            let len = b - a;
            if len <= zero {
                continue;
            }
            let smooth = a >= zero && b <= one;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let s = a + len * x;
                let ww = w * len;
                let (val, der) = if smooth {
                    unit_layer(s)
                } else {
                    (if a >= one { one } else { zero }, zero)
                };
                let frac_all = (s - tp) / span;
                let (rho, lam) = if upper {
                    let y = (s - tq) / (tr - tq);
                    (two * (one - y) / span, [(one - frac_all) * half, (one - y) * half, (frac_all + y) * half])
                } else {
                    let xx = (s - tp) / (tq - tp);
                    (two * xx / span, [one - (frac_all + xx) * half, xx * half, frac_all * half])
                };
                mean = mean + ww * rho * val;
                if der != zero {
                    let c = ww * rho * der;
                    force[p] = force[p] + c * lam[0];
                    force[q] = force[q] + c * lam[1];
                    force[r] = force[r] + c * lam[2];
                }
            }
        }
    }
    (mean, force)
}

fn gauss8<T: Real>() -> ([T; 8], [T; 8]) {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329_0, 0.796_666_477_413_626_7, 0.960_289_856_497_536_2];
    const W: [f64; 4] = [0.362_683_783_378_362_0, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let mut nodes = [T::zero(); 8];
    let mut weights = [T::zero(); 8];
    for k in 0..4 {
        nodes[3 - k] = T::lit(0.5 * (1.0 - X[k]));
        nodes[4 + k] = T::lit(0.5 * (1.0 + X[k]));
        weights[3 - k] = T::lit(0.5 * W[k]);
        weights[4 + k] = T::lit(0.5 * W[k]);
    }
    (nodes, weights)
}

struct CellCorners<T> {
    v: [T; 4],
    q2: [T; 4],
}

impl<T: Real> CellCorners<T> {
    #[inline]
    fn gather(f: &Field<T>, q: &CoefficientField<T>, d: &Domain<T>, i: usize, j: usize) -> Self {
        let idx = [d.index(i, j), d.index(i + 1, j), d.index(i, j + 1), d.index(i + 1, j + 1)];
        let vals = f.values();
        Self { v: idx.map(|k| vals[k]), q2: idx.map(|k| q.squared(k)) }
    }

    #[inline]
    fn interpolate(&self, s: T, t: T) -> (T, T) {
        let one = T::one();
        let w = [(one - s) * (one - t), s * (one - t), (one - s) * t, s * t];
        let mut v = T::zero();
        let mut q2 = T::zero();
        for k in 0..4 {
            v = v + w[k] * self.v[k];
            q2 = q2 + w[k] * self.q2[k];
        }
        (v, q2)
    }

    #[inline]
    fn touches_layer(&self, eps: T) -> bool {
        let lo = self.v.iter().copied().fold(T::infinity(), T::min);
        let hi = self.v.iter().copied().fold(T::neg_infinity(), T::max);
        hi > T::zero() && lo < eps
    }
}

/// `J[v] = int (|grad v|^2 + Q^2 lambda^2(v))` with trapezoid weights.
pub fn energy_sharp<T: Real>(f: &Field<T>, d: &Domain<T>, q: &CoefficientField<T>, m: &PhaseModel<T>) -> T {
    EnergyFunctional::new(d, q, m, PotentialRule::Nodal).sharp(f)
}

/// `J_eps[v] = int (|grad v|^2 + Q^2 phi_eps(v))` with trapezoid weights.
pub fn energy_relaxed<T: Real>(f: &Field<T>, d: &Domain<T>, q: &CoefficientField<T>, m: &PhaseModel<T>) -> T {
    EnergyFunctional::new(d, q, m, PotentialRule::Nodal).relaxed(f)
}
