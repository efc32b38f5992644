//! Boundary data, the Crank-Nicolson IMEX gradient flow and the steady-state
//! driver.
//!
//! One step solves, on the free nodes,
//!
//! ```text
//! (W/dt + S/2) v+ = (W/dt - S/2) v - S_D v_D - F(v)
//! ```
//!
//! where `S` is the diffusion operator of the chosen [`NeumannClosure`], `W`
//! the lumped mass and `F` the potential force. With the natural closure the
//! scheme is the exact discrete gradient flow of [`EnergyFunctional`] and the
//! energy cannot increase while `dt <= 2 / max(Q^2 |phi''|)`.

mod operator;
mod sparse;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

pub use operator::{corner_ghosts, ghost_values, NeumannClosure, SpatialOperator};
pub use sparse::{bicgstab, pcg, Csr, SolveStats};

use crate::energy::{EnergyFunctional, PotentialRule};
use crate::error::Error;
use crate::field::{CoefficientField, Field};
use crate::geometry::Domain;
use crate::phase::PhaseModel;
use crate::scalar::Real;

/// Dirichlet profile `u0^A`: `-A` left of the band, `A sin^3(pi (x - x0) / (2 delta))`
/// inside it and `A` to the right, as a function of the physical `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData<T> {
    #[serde(rename = "A")]
    pub amplitude: T,
    pub x0: T,
    pub delta: T,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(amplitude: T, x0: T, delta: T) -> Result<Self, Error> {
        let b = Self { amplitude, x0, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (a, x0, delta) = (self.amplitude, self.x0, self.delta);
        if !(a.is_finite() && a > T::zero()) {
            return Err(Error::InvalidBoundary(format!("amplitude must be positive, got {a}")));
        }
        if !(delta.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidBoundary("x0 and delta must be finite".into()));
        }
        if !(T::zero() < delta && delta < x0 && x0 < T::one() + delta) {
            return Err(Error::InvalidBoundary(format!("need 0 < delta < x0 < 1 + delta, got delta = {delta}, x0 = {x0}")));
        }
        Ok(())
    }

    pub fn with_amplitude(self, amplitude: T) -> Result<Self, Error> {
        Self::new(amplitude, self.x0, self.delta)
    }

    /// `u0^A(x)`.
    pub fn profile(&self, x: T) -> T {
        let a = self.amplitude;
        if x <= self.x0 - self.delta {
            -a
        } else if x >= self.x0 + self.delta {
            a
        } else {
            let s = (T::PI() * (x - self.x0) / (T::lit(2.0) * self.delta)).sin();
            a * s * s * s
        }
    }

    /// Cold-start field `f(i, j) = u0^A(x(xi_i, eta_j))`.
    pub fn initial_data(&self, d: &Domain<T>) -> Field<T> {
        let columns = (T::lit(2.0) * self.delta / d.h()).floor().to_usize().unwrap_or(0);
        if columns < 4 {
            warn!("transition band 2 delta = {} spans only {columns} grid columns at n = {}", T::lit(2.0) * self.delta, d.n());
        }
        Field::from_physical_fn(d, |x, _| self.profile(x))
    }

    /// Overwrites the Dirichlet nodes with the profile.
    pub fn apply_dirichlet(&self, f: &mut Field<T>, d: &Domain<T>) {
        for j in 0..=d.n() {
            for i in 0..=d.n() {
                if d.kind(i, j).is_dirichlet() {
                    let (x, _) = d.node_physical(i, j);
                    f.set(i, j, self.profile(x));
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig<T> {
    /// Explicit time step; `dt_factor * h^2` when absent.
    pub dt: Option<T>,
    pub dt_factor: T,
    pub ss_tol: T,
    pub ss_window: usize,
    pub max_steps: usize,
    pub lin_tol: T,
    pub max_linear_iterations: usize,
    /// `epsilon / h`.
    pub slave_factor: T,
    /// When set, a steady state also needs the scaled Euler-Lagrange
    /// residual below this value; checked once per energy window.
    pub el_tol: Option<T>,
    pub closure: NeumannClosure,
    pub potential: PotentialRule,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            dt: None,
            dt_factor: T::lit(0.25),
            ss_tol: T::lit(1e-8),
            ss_window: 10,
            max_steps: 2_000_000,
            lin_tol: T::lit(1e-10),
            max_linear_iterations: 5000,
            slave_factor: T::lit(2.0),
            el_tol: None,
            closure: NeumannClosure::Natural,
            potential: PotentialRule::Exact,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidSolver(m));
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > T::zero()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.dt_factor.is_finite() && self.dt_factor > T::zero()) {
            return bad(format!("dt_factor must be positive, got {}", self.dt_factor));
        }
        if !(self.ss_tol.is_finite() && self.ss_tol > T::zero()) {
            return bad(format!("ss_tol must be positive, got {}", self.ss_tol));
        }
        if self.ss_window == 0 {
            return bad("ss_window must be at least 1".into());
        }
        if self.max_steps == 0 || self.max_linear_iterations == 0 {
            return bad("step and iteration caps must be positive".into());
        }
        if !(self.lin_tol > T::zero() && self.lin_tol < T::one()) {
            return bad(format!("lin_tol must lie in (0, 1), got {}", self.lin_tol));
        }
        if self.lin_tol < T::lit(10.0) * T::epsilon() {
            return bad(format!("lin_tol {} is below the precision of the scalar type", self.lin_tol));
        }
        if let Some(t) = self.el_tol {
            if !(t.is_finite() && t > T::zero()) {
                return bad(format!("el_tol must be positive, got {t}"));
            }
        }
        if !(self.slave_factor >= T::lit(2.0)) {
            return bad(format!("slave_factor must be at least 2, got {}", self.slave_factor));
        }
        self.potential.validate().map_err(Error::InvalidSolver)
    }

    pub fn time_step(&self, d: &Domain<T>) -> T {
        self.dt.unwrap_or(self.dt_factor * d.h() * d.h())
    }

    /// Layer width `epsilon = slave_factor * h`.
    pub fn epsilon(&self, d: &Domain<T>) -> T {
        self.slave_factor * d.h()
    }

    /// Phase model with the slaved layer width.
    pub fn model(&self, d: &Domain<T>, lambda1: T, lambda2: T) -> Result<PhaseModel<T>, Error> {
        PhaseModel::new(lambda1, lambda2, self.epsilon(d))
    }

    /// Largest step for which the IMEX scheme is guaranteed to dissipate energy.
    pub fn descent_limit(m: &PhaseModel<T>, q: &CoefficientField<T>) -> T {
        let curv = m.curvature_bound() * q.max() * q.max();
        if curv == T::zero() {
            T::infinity()
        } else {
            T::lit(2.0) / curv
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub step: usize,
    pub time: T,
    pub energy: T,
}

/// `J_eps` along the flow, starting with the initial state at step 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace<T> {
    pub entries: Vec<TraceEntry<T>>,
}

impl<T: Real> EnergyTrace<T> {
    pub fn push(&mut self, step: usize, time: T, energy: T) {
        debug_assert!(self.entries.last().map_or(true, |e| e.step < step));
        self.entries.push(TraceEntry { step, time, energy });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_energy(&self) -> Option<T> {
        self.entries.last().map(|e| e.energy)
    }

    /// Largest single-step increase, relative to `max(1, |J|)`.
    pub fn max_relative_increase(&self) -> T {
        self.entries
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / T::one().max(w[0].energy.abs()))
            .fold(T::zero(), T::max)
    }

    /// CSV with columns `step,time,J_eps`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,time,J_eps\n");
        for e in &self.entries {
            s.push_str(&format!("{},{:e},{:e}\n", e.step, e.time.as_f64(), e.energy.as_f64()));
        }
        s
    }
}

/// A step at which the energy rose by more than `10 lin_tol max(1, |J|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentViolation<T> {
    pub step: usize,
    pub increase: T,
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub field: Field<T>,
    pub trace: EnergyTrace<T>,
    pub converged: bool,
    pub steps: usize,
    pub violations: Vec<DescentViolation<T>>,
    pub linear_iterations: usize,
    /// Wall time of the run loop.
    pub elapsed: std::time::Duration,
}

/// Scheme residual on the free nodes, `max |-(S v)/W - F/W|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElResidual<T> {
    pub max_abs: T,
    /// `max(1, |(S v)/W|_inf, |F/W|_inf)`.
    pub scale: T,
}

impl<T: Real> ElResidual<T> {
    pub fn scaled(&self) -> T {
        self.max_abs / self.scale
    }
}

/// Assembled stepper for one domain, model and time step.
pub struct GradientFlow<T> {
    domain: Domain<T>,
    model: PhaseModel<T>,
    q: CoefficientField<T>,
    cfg: SolverConfig<T>,
    dt: T,
    op: SpatialOperator<T>,
    system: Csr<T>,
    inv_diag: Vec<T>,
    load: Vec<T>,
    dirichlet: Vec<(usize, T)>,
    /// Previous free values for the extrapolated initial guess.
    previous: Option<Vec<T>>,
    linear_iterations: usize,
}

impl<T: Real> GradientFlow<T> {
    /// Assembles the system; Dirichlet values are taken from `f0`.
    pub fn new(d: &Domain<T>, m: &PhaseModel<T>, q: &CoefficientField<T>, cfg: &SolverConfig<T>, f0: &Field<T>) -> Result<Self, Error> {
        cfg.validate()?;
        m.validate()?;
        f0.matches(d)?;
        q.matches(d)?;
        if let Some((i, j)) = f0.first_non_finite() {
            return Err(Error::NonFinite { i, j, step: 0 });
        }
        let dt = cfg.time_step(d);
        let limit = SolverConfig::descent_limit(m, q);
        if dt > limit {
            warn!("dt = {:e} exceeds the energy-descent limit {:e}; monotone decay is not guaranteed", dt.as_f64(), limit.as_f64());
        }
        let op = SpatialOperator::assemble(d, cfg.closure);
        let inv_dt = T::one() / dt;
        let half = T::lit(0.5);
        let rows: Vec<Vec<(usize, T)>> = (0..op.free_nodes().len())
            .map(|r| {
                let mut row: Vec<(usize, T)> = op.free_block().row(r).map(|(c, v)| (c, v * half)).collect();
                row.push((r, op.mass()[r] * inv_dt));
                row
            })
            .collect();
        let system = Csr::from_rows(op.free_nodes().len(), rows);
        let inv_diag = system.diagonal().into_iter().map(|v| T::one() / v).collect();
        let load = op.dirichlet_load(f0.values());
        let dirichlet = (0..d.node_count())
            .filter(|&k| op.slot(k).is_none())
            .map(|k| (k, f0.values()[k]))
            .collect();
        Ok(Self {
            domain: *d,
            model: *m,
            q: q.clone(),
            cfg: *cfg,
            dt,
            op,
            system,
            inv_diag,
            load,
            dirichlet,
            previous: None,
            linear_iterations: 0,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn operator(&self) -> &SpatialOperator<T> {
        &self.op
    }

    pub fn energy_functional(&self) -> EnergyFunctional<'_, T> {
        EnergyFunctional::new(&self.domain, &self.q, &self.model, self.cfg.potential)
    }

    pub fn energy(&self, f: &Field<T>) -> T {
        self.energy_functional().relaxed(f)
    }

    fn force(&self, f: &Field<T>) -> Vec<T> {
        let mut full = vec![T::zero(); self.domain.node_count()];
        self.energy_functional().accumulate_force(f, &mut full);
        self.op.free_nodes().iter().map(|&k| full[k]).collect()
    }

    /// Advances `f` by one step in place. `step_index` is only used in errors.
    pub fn advance(&mut self, f: &mut Field<T>, step_index: usize) -> Result<SolveStats<T>, Error> {
        let free = self.op.free_nodes();
        let nf = free.len();
        for &(k, v) in &self.dirichlet {
            f.values_mut()[k] = v;
        }
        let mut sv = vec![T::zero(); nf];
        self.op.apply(f.values(), &mut sv);
        let force = self.force(f);
        let inv_dt = T::one() / self.dt;
        let half = T::lit(0.5);
        let current: Vec<T> = free.iter().map(|&k| f.values()[k]).collect();
        // S v = S_ff v_f + load, so (W/dt - S_ff/2) v_f - load = W v_f/dt - (S v)/2 - load/2
        let rhs: Vec<T> = (0..nf)
            .map(|r| self.op.mass()[r] * inv_dt * current[r] - half * (sv[r] + self.load[r]) - force[r])
            .collect();
        let mut x: Vec<T> = match &self.previous {
            Some(prev) => current.iter().zip(prev).map(|(&c, &p)| c + c - p).collect(),
            None => current.clone(),
        };
        let tol = self.cfg.lin_tol;
        let cap = self.cfg.max_linear_iterations;
        let stats = if self.op.is_symmetric() {
            pcg(&self.system, &self.inv_diag, &rhs, &mut x, tol, cap)?
        } else {
            bicgstab(&self.system, &self.inv_diag, &rhs, &mut x, tol, cap)?
        };
        self.linear_iterations += stats.iterations;
        let vals = f.values_mut();
        for (r, &k) in free.iter().enumerate() {
            if !x[r].is_finite() {
                let n = self.domain.n();
                return Err(Error::NonFinite { i: k % (n + 1), j: k / (n + 1), step: step_index });
            }
            vals[k] = x[r];
        }
        self.previous = Some(current);
        Ok(stats)
    }

    /// Iterates until the energy change stays below `ss_tol dt max(1, |J|)`
    /// for `ss_window` consecutive steps (and the residual is below `el_tol`
    /// when set) or `max_steps` is exhausted.
    pub fn run(&mut self, f0: &Field<T>) -> Result<RunOutcome<T>, Error> {
        let start = std::time::Instant::now();
        let mut f = f0.clone();
        for &(k, v) in &self.dirichlet {
            f.values_mut()[k] = v;
        }
        self.previous = None;
        self.linear_iterations = 0;
        let mut trace = EnergyTrace::default();
        let mut energy = self.energy(&f);
        trace.push(0, T::zero(), energy);
        let mut violations = Vec::new();
        let mut quiet = 0;
        let ten = T::lit(10.0);
        let mut steps = 0;
        let mut converged = false;
        while steps < self.cfg.max_steps {
            steps += 1;
            self.advance(&mut f, steps)?;
            let next = self.energy(&f);
            if !next.is_finite() {
                let (i, j) = f.first_non_finite().unwrap_or((0, 0));
                return Err(Error::NonFinite { i, j, step: steps });
            }
            let scale = T::one().max(energy.abs());
            if next - energy > ten * self.cfg.lin_tol * scale {
                warn!("energy rose by {:e} at step {steps}", (next - energy).as_f64());
                violations.push(DescentViolation { step: steps, increase: next - energy });
            }
            if (next - energy).abs() <= self.cfg.ss_tol * self.dt * scale {
                quiet += 1;
            } else {
                quiet = 0;
            }
            energy = next;
            trace.push(steps, T::from_usize_lossy(steps) * self.dt, energy);
            if quiet >= self.cfg.ss_window {
                match self.cfg.el_tol {
                    Some(tol) if self.residual(&f).scaled() > tol => quiet = 0,
                    _ => {
                        converged = true;
                        break;
                    }
                }
            }
        }
        if converged {
            debug!("steady state after {steps} steps, J_eps = {energy}");
        } else {
            warn!("no steady state within {} steps", self.cfg.max_steps);
        }
        Ok(RunOutcome { field: f, trace, converged, steps, violations, linear_iterations: self.linear_iterations, elapsed: start.elapsed() })
    }

    /// Scheme residual `-(S v)/W - F/W` on the free nodes.
    pub fn residual(&self, f: &Field<T>) -> ElResidual<T> {
        let nf = self.op.free_nodes().len();
        let mut sv = vec![T::zero(); nf];
        self.op.apply(f.values(), &mut sv);
        let force = self.force(f);
        let mut max_abs = T::zero();
        let mut scale = T::one();
        for r in 0..nf {
            let w = self.op.mass()[r];
            let (a, b) = (sv[r] / w, force[r] / w);
            max_abs = max_abs.max((a + b).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
        ElResidual { max_abs, scale }
    }

    /// Per-node value of `(S v + F)` on the free nodes, in unknown order.
    pub fn row_residuals(&self, f: &Field<T>) -> Vec<T> {
        let nf = self.op.free_nodes().len();
        let mut sv = vec![T::zero(); nf];
        self.op.apply(f.values(), &mut sv);
        let force = self.force(f);
        sv.iter().zip(force).map(|(&a, b)| a + b).collect()
    }
}

/// One step from `f`, returning the new field.
pub fn step<T: Real>(f: &Field<T>, d: &Domain<T>, cfg: &SolverConfig<T>, m: &PhaseModel<T>, q: &CoefficientField<T>) -> Result<Field<T>, Error> {
    let mut flow = GradientFlow::new(d, m, q, cfg, f)?;
    let mut out = f.clone();
    flow.advance(&mut out, 1)?;
    Ok(out)
}

pub fn run_to_steady_state<T: Real>(
    f0: &Field<T>,
    d: &Domain<T>,
    cfg: &SolverConfig<T>,
    m: &PhaseModel<T>,
    q: &CoefficientField<T>,
) -> Result<RunOutcome<T>, Error> {
    GradientFlow::new(d, m, q, cfg, f0)?.run(f0)
}

/// Euler-Lagrange residual of `f` under the scheme's operator.
pub fn residual_el<T: Real>(f: &Field<T>, d: &Domain<T>, cfg: &SolverConfig<T>, m: &PhaseModel<T>, q: &CoefficientField<T>) -> Result<ElResidual<T>, Error> {
    Ok(GradientFlow::new(d, m, q, cfg, f)?.residual(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_relaxed;
    use crate::geometry::BoundaryLayout;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn profile_examples() {
        let b = BoundaryData::new(2.0, 0.5, 0.1).unwrap();
        assert_eq!(b.profile(0.5), 0.0);
        assert_eq!(b.profile(0.6), 2.0);
        assert_eq!(b.profile(0.3), -2.0);
        assert_abs_diff_eq!(b.profile(0.55), 2.0 * (0.5f64).sqrt().powi(3), epsilon = 1e-12);
        assert_abs_diff_eq!(b.profile(0.55), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(BoundaryData::new(1.0, 0.2, 0.3).is_err());
        assert!(BoundaryData::new(1.0, 1.2, 0.1).is_err());
        assert!(BoundaryData::new(-1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn apply_dirichlet_overwrites_only_s() {
        let d = Domain::new(PI / 2.0, 16).unwrap();
        let b = BoundaryData::new(1.5, 0.2, 0.05).unwrap();
        let mut f = Field::constant(&d, 9.0);
        b.apply_dirichlet(&mut f, &d);
        for i in 0..=16 {
            let (xi, _) = d.node(i, 0);
            assert_eq!(f.get(i, 0), b.profile(xi));
        }
        for j in 0..=16 {
            assert_eq!(f.get(16, j), b.profile(1.0));
        }
        assert_eq!(f.get(0, 16), 9.0);
        assert_eq!(f.get(5, 5), 9.0);
        let once = f.clone();
        b.apply_dirichlet(&mut f, &d);
        assert_eq!(once, f);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.slave_factor = 1.5;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> { dt: Some(-1.0), ..Default::default() };
        assert!(c.validate().is_err());
        let c = SolverConfig::<f32>::default();
        assert!(c.validate().is_err(), "1e-10 is not reachable in f32");
        let c = SolverConfig::<f32> { lin_tol: 1e-5, ..Default::default() };
        assert!(c.validate().is_ok());
    }

    fn quick_cfg() -> SolverConfig<f64> {
        SolverConfig { dt_factor: 1.0, ..Default::default() }
    }

    #[test]
    fn constant_state_is_stationary() {
        let d = Domain::new(PI / 3.0, 16).unwrap();
        let m = PhaseModel::standard(2.0 * d.h()).unwrap();
        let q = CoefficientField::ones(&d);
        for c in [-0.7, 0.5] {
            let f = Field::constant(&d, c);
            for closure in [NeumannClosure::Natural, NeumannClosure::Ghost] {
                let cfg = SolverConfig { closure, ..quick_cfg() };
                let g = step(&f, &d, &cfg, &m, &q).unwrap();
                assert!(g.max_diff(&f) < 1e-12);
                let out = run_to_steady_state(&f, &d, &cfg, &m, &q).unwrap();
                assert!(out.converged);
                assert!(out.steps <= cfg.ss_window);
                let r = residual_el(&f, &d, &cfg, &m, &q).unwrap();
                assert!(r.max_abs < 1e-9);
            }
        }
    }

    #[test]
    fn linear_steady_state_is_stationary() {
        // v = 2x - 1/2 is harmonic with zero normal derivative on the
        // channel walls eta = 0, 1: an exact equilibrium of both closures.
        let d = Domain::with_layout(PI / 3.0, 16, BoundaryLayout::Channel).unwrap();
        let m = PhaseModel::new(1.0, 1.0, 2.0 * d.h()).unwrap();
        let q = CoefficientField::ones(&d);
        let f = Field::from_physical_fn(&d, |x, _| 2.0 * x - 0.5);
        for closure in [NeumannClosure::Natural, NeumannClosure::Ghost] {
            let cfg = SolverConfig { closure, ..quick_cfg() };
            let g = step(&f, &d, &cfg, &m, &q).unwrap();
            assert!(g.max_diff(&f) < 1e-9, "{closure:?}");
        }
    }

    #[test]
    fn single_step_lowers_energy() {
        let d = Domain::new(5.0 * PI / 4.0, 32).unwrap();
        let cfg = SolverConfig::default();
        let m = cfg.model(&d, 0.0, 1.0).unwrap();
        let q = CoefficientField::ones(&d);
        let b = BoundaryData::new(1.5, 0.85, 0.05).unwrap();
        let f0 = b.initial_data(&d);
        let f1 = step(&f0, &d, &cfg, &m, &q).unwrap();
        assert!(energy_relaxed(&f1, &d, &q, &m) < energy_relaxed(&f0, &d, &q, &m));
    }

    #[test]
    fn short_run_descends_and_respects_bounds() {
        let d = Domain::new(PI / 4.0, 16).unwrap();
        let cfg = SolverConfig { max_steps: 300, ..quick_cfg() };
        let m = cfg.model(&d, 0.0, 1.0).unwrap();
        let q = CoefficientField::ones(&d);
        let b = BoundaryData::new(2.0, 0.4, 0.1).unwrap();
        let f0 = b.initial_data(&d);
        let out = run_to_steady_state(&f0, &d, &cfg, &m, &q).unwrap();
        assert!(out.violations.is_empty());
        assert!(out.trace.max_relative_increase() <= 10.0 * cfg.lin_tol);
        assert!(out.field.min_value() >= -2.0 - m.epsilon);
        assert!(out.field.max_value() <= 2.0 + m.epsilon);
        assert_eq!(out.trace.len(), out.steps + 1);
    }

    #[test]
    fn nan_input_is_rejected() {
        let d = Domain::new(PI / 2.0, 8).unwrap();
        let m = PhaseModel::standard(0.25).unwrap();
        let q = CoefficientField::ones(&d);
        let mut f = Field::zeros(&d);
        f.set(3, 3, f64::NAN);
        assert!(matches!(step(&f, &d, &SolverConfig::default(), &m, &q), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn residual_tolerance_extends_the_run() {
        let d = Domain::new(PI / 2.0, 16).unwrap();
        let base = SolverConfig { dt_factor: 1.0, ss_tol: 1e-4, ..Default::default() };
        let m = base.model(&d, 0.0, 1.0).unwrap();
        let q = CoefficientField::ones(&d);
        let f0 = BoundaryData::new(1.0, 0.5, 0.1).unwrap().initial_data(&d);
        let loose = run_to_steady_state(&f0, &d, &base, &m, &q).unwrap();
        let cfg = SolverConfig { el_tol: Some(1e-7), ..base };
        let tight = run_to_steady_state(&f0, &d, &cfg, &m, &q).unwrap();
        assert!(tight.converged);
        assert!(tight.steps > loose.steps);
        assert!(residual_el(&tight.field, &d, &cfg, &m, &q).unwrap().scaled() <= 1e-7);
    }

    #[test]
    fn trace_csv_has_header() {
        let mut t = EnergyTrace::default();
        t.push(0, 0.0, 2.0);
        t.push(1, 0.5, 1.5);
        let csv = t.to_csv();
        assert!(csv.starts_with("step,time,J_eps\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
