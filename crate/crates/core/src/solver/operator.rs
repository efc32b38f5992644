//! Assembly of the spatial operator on the free (interior and Neumann) nodes.
//!
//! Both closures are stored in the same shape: a lumped mass `W` and a row
//! operator `S` with `v_t = -(S v)/W - Q^2 phi'(v)` on free nodes.
//!
//! * [`NeumannClosure::Natural`]: `S` is the Hessian of the cell-corner
//!   Dirichlet energy. Interior rows equal `-2 W (a D_xixi + b D_xieta + c D_etaeta)`;
//!   Neumann rows are the variational closure. Symmetric positive definite.
//! * [`NeumannClosure::Ghost`]: the centered stencil on every free node with
//!   ghost values beyond Neumann sides eliminated through the discrete Neumann
//!   conditions. Not symmetric unless `cos(theta) = 0`.

use serde::{Deserialize, Serialize};

use super::sparse::Csr;
use crate::energy::node_weight;
use crate::error::Error;
use crate::field::Field;
use crate::geometry::{Domain, NodeKind, Side};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeumannClosure {
    /// Variational rows from the discrete energy (exact gradient flow).
    #[default]
    Natural,
    /// Ghost-point elimination of the two discrete Neumann conditions.
    Ghost,
}

type Combo<T> = Vec<((isize, isize), T)>;

/// `2h` times the tangential derivative along `side` at tangential index `t`,
/// as a combination of lattice nodes.
fn tangential_2h<T: Real>(n: usize, side: Side, t: usize) -> Combo<T> {
    let along = |k: isize| -> (isize, isize) {
        let (n, k) = (n as isize, k);
        match side {
            Side::Xi0 => (0, k),
            Side::Xi1 => (n, k),
            Side::Eta0 => (k, 0),
            Side::Eta1 => (k, n),
        }
    };
    let t = t as isize;
    let last = n as isize;
    if t == 0 {
        vec![(along(0), -T::lit(3.0)), (along(1), T::lit(4.0)), (along(2), -T::one())]
    } else if t == last {
        vec![(along(last), T::lit(3.0)), (along(last - 1), -T::lit(4.0)), (along(last - 2), T::one())]
    } else {
        vec![(along(t + 1), T::one()), (along(t - 1), -T::one())]
    }
}

/// The ghost value one step beyond `side` at tangential index `t`.
fn ghost_combo<T: Real>(d: &Domain<T>, side: Side, t: usize) -> Combo<T> {
    let n = d.n() as isize;
    let sigma = side.outward();
    let scale = T::lit(sigma as f64) * d.cos_theta();
    let t_i = t as isize;
    let mirror = match side {
        Side::Xi0 => (1, t_i),
        Side::Xi1 => (n - 1, t_i),
        Side::Eta0 => (t_i, 1),
        Side::Eta1 => (t_i, n - 1),
    };
    let mut combo = vec![(mirror, T::one())];
    if scale != T::zero() {
        combo.extend(tangential_2h::<T>(d.n(), side, t).into_iter().map(|(p, w)| (p, w * scale)));
    }
    combo
}

/// Ghost values beyond a Neumann side, indexed by the tangential lattice
/// index (`j` for `xi` sides, `i` for `eta` sides). At a Neumann corner the
/// tangential derivative is one-sided, so both corner ghosts come from the
/// two conditions at once.
pub fn ghost_values<T: Real>(f: &Field<T>, d: &Domain<T>, side: Side) -> Result<Vec<T>, Error> {
    f.matches(d)?;
    if !d.is_neumann_side(side) {
        return Err(Error::InvalidBoundary(format!("side {} is not a Neumann side", side.name())));
    }
    Ok((0..=d.n())
        .map(|t| {
            ghost_combo(d, side, t)
                .into_iter()
                .fold(T::zero(), |s, ((i, j), w)| s + w * f.get(i as usize, j as usize))
        })
        .collect())
}

/// Ghost values `(v_{-1,n}, v_{0,n+1})` at the Neumann corner.
pub fn corner_ghosts<T: Real>(f: &Field<T>, d: &Domain<T>) -> Result<(T, T), Error> {
    let (_, jc) = d
        .neumann_corner()
        .ok_or_else(|| Error::InvalidBoundary("layout has no Neumann corner".into()))?;
    let left = ghost_values(f, d, Side::Xi0)?;
    let top = ghost_values(f, d, Side::Eta1)?;
    Ok((left[jc], top[0]))
}

/// Operator rows for the free nodes.
#[derive(Clone, Debug)]
pub struct SpatialOperator<T> {
    closure: NeumannClosure,
    free: Vec<usize>,
    slot: Vec<Option<usize>>,
    mass: Vec<T>,
    /// Rows over free nodes, columns over all nodes.
    full: Csr<T>,
    /// Rows and columns over free nodes.
    free_block: Csr<T>,
    symmetric: bool,
}

impl<T: Real> SpatialOperator<T> {
    pub fn assemble(d: &Domain<T>, closure: NeumannClosure) -> Self {
        let n = d.n();
        let nodes = d.node_count();
        let mut free = Vec::new();
        let mut slot = vec![None; nodes];
        for j in 0..=n {
            for i in 0..=n {
                if !d.kind(i, j).is_dirichlet() {
                    slot[d.index(i, j)] = Some(free.len());
                    free.push(d.index(i, j));
                }
            }
        }
        let mass: Vec<T> = free.iter().map(|&k| node_weight(d, k % (n + 1), k / (n + 1))).collect();
        let rows = match closure {
            NeumannClosure::Natural => natural_rows(d, &free),
            NeumannClosure::Ghost => ghost_rows(d, &free, &mass),
        };
        let full = Csr::from_rows(nodes, rows.clone());
        let block_rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter_map(|(c, v)| slot[c].map(|s| (s, v))).collect())
            .collect();
        let free_block = Csr::from_rows(free.len(), block_rows);
        let symmetric = closure == NeumannClosure::Natural || free_block.is_symmetric(T::lit(1e-12));
        Self { closure, free, slot, mass, full, free_block, symmetric }
    }

    pub fn closure(&self) -> NeumannClosure {
        self.closure
    }

    /// Node indices of the unknowns, in unknown order.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn slot(&self, node: usize) -> Option<usize> {
        self.slot[node]
    }

    /// Lumped mass per unknown.
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn free_block(&self) -> &Csr<T> {
        &self.free_block
    }

    /// `S v` on the free rows.
    pub fn apply(&self, v: &[T], out: &mut [T]) {
        self.full.mul_into(v, out);
    }

    /// `S v` restricted to the Dirichlet columns.
    pub fn dirichlet_load(&self, v: &[T]) -> Vec<T> {
        let mut masked = v.to_vec();
        for &k in &self.free {
            masked[k] = T::zero();
        }
        let mut out = vec![T::zero(); self.free.len()];
        self.full.mul_into(&masked, &mut out);
        out
    }
}

fn natural_rows<T: Real>(d: &Domain<T>, free: &[usize]) -> Vec<Vec<(usize, T)>> {
    let n = d.n();
    let k = d.coefficients();
    let s = d.jacobian();
    // corners in order (0,0), (1,0), (0,1), (1,1)
    let g0 = [-1.0, 1.0, 0.0, 0.0];
    let g1 = [0.0, 0.0, -1.0, 1.0];
    let e0 = [-1.0, 0.0, 1.0, 0.0];
    let e1 = [0.0, -1.0, 0.0, 1.0];
    let mut ke = [[T::zero(); 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let sx = |x: usize| T::lit(g0[x] + g1[x]);
            let sy = |x: usize| T::lit(e0[x] + e1[x]);
            let v = k.a * T::lit(g0[p] * g0[q] + g1[p] * g1[q])
                + k.b * T::lit(0.25) * (sx(p) * sy(q) + sy(p) * sx(q))
                + k.c * T::lit(e0[p] * e0[q] + e1[p] * e1[q]);
            ke[p][q] = v * s;
        }
    }
    let mut stencil: Vec<Vec<(usize, T)>> = vec![Vec::new(); d.node_count()];
    let offs = [(0, 0), (1, 0), (0, 1), (1, 1)];
    for j in 0..n {
        for i in 0..n {
            let idx = offs.map(|(di, dj)| d.index(i + di, j + dj));
            for p in 0..4 {
                for q in 0..4 {
                    stencil[idx[p]].push((idx[q], ke[p][q]));
                }
            }
        }
    }
    free.iter().map(|&node| std::mem::take(&mut stencil[node])).collect()
}

fn ghost_rows<T: Real>(d: &Domain<T>, free: &[usize], mass: &[T]) -> Vec<Vec<(usize, T)>> {
    let n = d.n();
    let ni = n as isize;
    let k = d.coefficients();
    let h2 = d.h() * d.h();
    let two = T::lit(2.0);
    free.iter()
        .zip(mass)
        .map(|(&node, &w)| {
            let (i, j) = (node % (n + 1), node / (n + 1));
            let kind = d.kind(i, j);
            let mut terms: Combo<T> = vec![
                ((-1, 0), k.a / h2),
                ((1, 0), k.a / h2),
                ((0, 0), -two * (k.a + k.c) / h2),
                ((0, -1), k.c / h2),
                ((0, 1), k.c / h2),
            ];
            if let NodeKind::NeumannCorner(sx, sy) = kind {
                let (ox, oy) = (sx.outward(), sy.outward());
                let c = k.b / (T::lit((ox * oy) as f64) * h2);
                terms.extend([((-ox, -oy), c), ((-ox, 0), -c), ((0, -oy), -c), ((0, 0), c)]);
            } else {
                let c = k.b / (T::lit(4.0) * h2);
                terms.extend([((1, 1), c), ((-1, -1), c), ((1, -1), -c), ((-1, 1), -c)]);
            }
            let mut row = Vec::with_capacity(16);
            let scale = -two * w;
            for ((di, dj), coef) in terms {
                let (pi, pj) = (i as isize + di, j as isize + dj);
                let out_xi = pi < 0 || pi > ni;
                let out_eta = pj < 0 || pj > ni;
                let combo: Combo<T> = match (out_xi, out_eta) {
                    (false, false) => vec![((pi, pj), T::one())],
                    (true, false) => {
                        let side = if pi < 0 { Side::Xi0 } else { Side::Xi1 };
                        debug_assert!(d.is_neumann_side(side));
                        ghost_combo(d, side, pj as usize)
                    }
                    (false, true) => {
                        let side = if pj < 0 { Side::Eta0 } else { Side::Eta1 };
                        debug_assert!(d.is_neumann_side(side));
                        ghost_combo(d, side, pi as usize)
                    }
                    (true, true) => unreachable!("diagonal ghost outside a Neumann corner"),
                };
                for ((gi, gj), gw) in combo {
                    row.push((d.index(gi as usize, gj as usize), scale * coef * gw));
                }
            }
            row
        })
        .collect()
}
