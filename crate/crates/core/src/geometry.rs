//! Parallelogram domains and the skewed-coordinate operator.
//!
//! The reference square `(xi, eta) in [0,1]^2` is mapped to the physical
//! parallelogram by `(x, y) = (xi + eta cos(theta), eta sin(theta))`. All grid
//! work happens on the reference lattice with uniform spacing `h = 1/n`; the
//! Laplacian and gradient norm pick up the constant coefficients returned by
//! [`Domain::coefficients`].

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Real;

/// Minimum number of cells per side. The relaxed layer is `2h` wide, so
/// coarser lattices cannot represent it at all.
pub const MIN_CELLS: usize = 8;

/// One of the four sides of the reference square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// `xi = 0`
    Xi0,
    /// `xi = 1`
    Xi1,
    /// `eta = 0`
    Eta0,
    /// `eta = 1`
    Eta1,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Xi0, Side::Xi1, Side::Eta0, Side::Eta1];

    /// True for the two sides on which `xi` is constant.
    pub fn is_xi_side(self) -> bool {
        matches!(self, Side::Xi0 | Side::Xi1)
    }

    /// Outward direction along the normal lattice axis (`-1` or `+1`).
    pub fn outward(self) -> isize {
        match self {
            Side::Xi0 | Side::Eta0 => -1,
            Side::Xi1 | Side::Eta1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Xi0 => "xi0",
            Side::Xi1 => "xi1",
            Side::Eta0 => "eta0",
            Side::Eta1 => "eta1",
        }
    }
}

/// Which sides carry the natural (Neumann) condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLayout {
    /// `N = {xi = 0} U {eta = 1}`, `S = {eta = 0} U {xi = 1}`; the two Neumann
    /// sides meet at the Neumann corner `(0, 1)`.
    #[default]
    NeumannCorner,
    /// `N = {eta = 0} U {eta = 1}`, `S = {xi = 0} U {xi = 1}`. Used for
    /// verification problems whose exact solution depends on `x` only.
    Channel,
}

impl BoundaryLayout {
    pub fn is_neumann(self, side: Side) -> bool {
        match self {
            BoundaryLayout::NeumannCorner => matches!(side, Side::Xi0 | Side::Eta1),
            BoundaryLayout::Channel => matches!(side, Side::Eta0 | Side::Eta1),
        }
    }
}

/// Classification of a lattice node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// On `S`, including every corner that touches `S`.
    Dirichlet,
    /// On the interior of one Neumann side.
    Neumann(Side),
    /// Where two Neumann sides meet (first side is the `xi` side).
    NeumannCorner(Side, Side),
}

impl NodeKind {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, NodeKind::Dirichlet)
    }

    pub fn is_neumann(self) -> bool {
        matches!(self, NodeKind::Neumann(_) | NodeKind::NeumannCorner(..))
    }
}

/// Constant coefficients of the physical Laplacian in lattice coordinates,
/// `Delta v = a v_xixi + b v_xieta + c v_etaeta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> OperatorCoefficients<T> {
    /// `b^2 - 4ac`; negative for every admissible angle.
    pub fn discriminant(&self) -> T {
        self.b * self.b - T::lit(4.0) * self.a * self.c
    }

    /// `|grad v|^2` from lattice derivatives.
    #[inline]
    pub fn quadratic_form(&self, v_xi: T, v_eta: T) -> T {
        self.a * v_xi * v_xi + self.b * v_xi * v_eta + self.c * v_eta * v_eta
    }
}

/// Parallelogram `Omega_theta` discretized with `(n+1) x (n+1)` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    theta: T,
    n: usize,
    h: T,
    sin: T,
    cos: T,
    layout: BoundaryLayout,
}

impl<T: Real> Domain<T> {
    /// Builds the domain with the default Neumann-corner layout.
    pub fn new(theta: T, n: usize) -> Result<Self, Error> {
        Self::with_layout(theta, n, BoundaryLayout::NeumannCorner)
    }

    pub fn with_layout(theta: T, n: usize, layout: BoundaryLayout) -> Result<Self, Error> {
        if !theta.is_finite() {
            return Err(Error::InvalidDomain(format!("theta = {theta} is not finite")));
        }
        let sin = theta.sin();
        if sin.abs() < T::lit(1e-12) {
            return Err(Error::InvalidDomain(format!(
                "degenerate parallelogram: |sin(theta)| = {} < 1e-12",
                sin.abs()
            )));
        }
        if n < MIN_CELLS {
            return Err(Error::InvalidDomain(format!(
                "n = {n} cells per side is below the minimum of {MIN_CELLS}"
            )));
        }
        let mut cos = theta.cos();
        if cos.abs() < T::epsilon() {
            // cos(pi/2) evaluates to ~6e-17; snap so the square case is exact.
            cos = T::zero();
        }
        let sin = if (sin.abs() - T::one()).abs() < T::epsilon() { sin.signum() } else { sin };
        Ok(Self { theta, n, h: T::one() / T::from_usize_lossy(n), sin, cos, layout })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice spacing in reference units.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn sin_theta(&self) -> T {
        self.sin
    }

    pub fn cos_theta(&self) -> T {
        self.cos
    }

    pub fn layout(&self) -> BoundaryLayout {
        self.layout
    }

    /// Nodes per side.
    pub fn points_per_side(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    /// Row-major index with `eta` rows: `j * (n + 1) + i`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Jacobian determinant of the map, `|sin(theta)|`.
    pub fn jacobian(&self) -> T {
        self.sin.abs()
    }

    pub fn area(&self) -> T {
        self.jacobian()
    }

    /// Lattice coordinates of node `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (T, T) {
        (T::from_usize_lossy(i) * self.h, T::from_usize_lossy(j) * self.h)
    }

    #[inline]
    pub fn to_physical(&self, xi: T, eta: T) -> (T, T) {
        (xi + eta * self.cos, eta * self.sin)
    }

    #[inline]
    pub fn to_reference(&self, x: T, y: T) -> (T, T) {
        let eta = y / self.sin;
        (x - eta * self.cos, eta)
    }

    #[inline]
    pub fn node_physical(&self, i: usize, j: usize) -> (T, T) {
        let (xi, eta) = self.node(i, j);
        self.to_physical(xi, eta)
    }

    /// `(a, b, c) = (csc^2, -2 cot csc, csc^2)`.
    pub fn coefficients(&self) -> OperatorCoefficients<T> {
        let csc = T::one() / self.sin;
        let cot = self.cos / self.sin;
        OperatorCoefficients { a: csc * csc, b: -(T::lit(2.0)) * cot * csc, c: csc * csc }
    }

    /// Physical length of a lattice step along `xi` (always `h`).
    pub fn xi_step_length(&self) -> T {
        self.h
    }

    /// Physical length of a lattice step along `eta` (`h`, since the edge
    /// direction `(cos, sin)` has unit length).
    pub fn eta_step_length(&self) -> T {
        self.h
    }

    pub fn is_neumann_side(&self, side: Side) -> bool {
        self.layout.is_neumann(side)
    }

    /// Sides the node lies on, in `Side::ALL` order.
    pub fn sides_of(&self, i: usize, j: usize) -> impl Iterator<Item = Side> {
        let n = self.n;
        Side::ALL.into_iter().filter(move |s| match s {
            Side::Xi0 => i == 0,
            Side::Xi1 => i == n,
            Side::Eta0 => j == 0,
            Side::Eta1 => j == n,
        })
    }

    /// Node classification; corners shared with `S` are Dirichlet.
    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        let mut neumann: [Option<Side>; 2] = [None, None];
        let mut count = 0;
        for side in self.sides_of(i, j) {
            if !self.is_neumann_side(side) {
                return NodeKind::Dirichlet;
            }
            neumann[count] = Some(side);
            count += 1;
        }
        match (neumann[0], neumann[1]) {
            (None, _) => NodeKind::Interior,
            (Some(s), None) => NodeKind::Neumann(s),
            (Some(s), Some(t)) => NodeKind::NeumannCorner(s, t),
        }
    }

    /// Lattice coordinates of the Neumann corner, if the layout has one.
    pub fn neumann_corner(&self) -> Option<(usize, usize)> {
        match self.layout {
            BoundaryLayout::NeumannCorner => Some((0, self.n)),
            BoundaryLayout::Channel => None,
        }
    }

    pub fn neumann_corner_physical(&self) -> Option<(T, T)> {
        self.neumann_corner().map(|(i, j)| self.node_physical(i, j))
    }

    /// Interior angle of the physical parallelogram at the Neumann corner, in
    /// radians. Equals `pi - theta` reduced to `(0, pi)`.
    pub fn neumann_corner_angle(&self) -> T {
        // Edges leaving (0,1): +xi direction (1,0) and -eta direction -(cos, sin).
        let (ex, ey) = (-self.cos, -self.sin);
        let dot = ex;
        let cross = ey;
        cross.abs().atan2(dot)
    }

    /// Euclidean distance from a physical point to the side's segment.
    pub fn distance_to_side(&self, p: (T, T), side: Side) -> T {
        let (a, b) = match side {
            Side::Xi0 => ((T::zero(), T::zero()), (T::zero(), T::one())),
            Side::Xi1 => ((T::one(), T::zero()), (T::one(), T::one())),
            Side::Eta0 => ((T::zero(), T::zero()), (T::one(), T::zero())),
            Side::Eta1 => ((T::zero(), T::one()), (T::one(), T::one())),
        };
        let pa = self.to_physical(a.0, a.1);
        let pb = self.to_physical(b.0, b.1);
        point_segment_distance(p, pa, pb)
    }

    /// Distance from a physical point to the closest Dirichlet side.
    pub fn distance_to_dirichlet(&self, p: (T, T)) -> T {
        Side::ALL
            .into_iter()
            .filter(|s| !self.is_neumann_side(*s))
            .map(|s| self.distance_to_side(p, s))
            .fold(T::infinity(), T::min)
    }

    /// Distance from a physical point to the boundary of the parallelogram.
    pub fn distance_to_boundary(&self, p: (T, T)) -> T {
        Side::ALL.into_iter().map(|s| self.distance_to_side(p, s)).fold(T::infinity(), T::min)
    }

    /// True if the physical point maps inside the closed reference square
    /// (with a relative slack of `tol`).
    pub fn contains_physical(&self, p: (T, T), tol: T) -> bool {
        let (xi, eta) = self.to_reference(p.0, p.1);
        xi >= -tol && xi <= T::one() + tol && eta >= -tol && eta <= T::one() + tol
    }
}

pub(crate) fn point_segment_distance<T: Real>(p: (T, T), a: (T, T), b: (T, T)) -> T {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > T::zero() {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx) * (p.0 - qx) + (p.1 - qy) * (p.1 - qy)).sqrt()
}
