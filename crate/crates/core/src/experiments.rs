//! Amplitude sweeps, refinement ladders and the derived jump and
//! forbidden-region measurements.
//!
//! Every run is an independent cold start, so sweep points and mesh levels
//! run in parallel. Results are always merged in `(A, n)` order and each run
//! is single-threaded, which makes the output bitwise reproducible.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::intersection_angle;
use crate::error::Error;
use crate::field::CoefficientField;
use crate::freeboundary::{extract_zero_contour, select_terminal, EdgeTag};
use crate::geometry::{BoundaryLayout, Domain};
use crate::phase::PhaseModel;
use crate::scalar::Real;
use crate::solver::{run_to_steady_state, BoundaryData, RunOutcome, SolverConfig};

/// Worker count from `FBFLOW_THREADS`, or the available cores.
pub fn worker_count() -> usize {
    std::env::var("FBFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|k| k.get()).unwrap_or(1))
}

fn in_pool<R: Send>(job: impl FnOnce() -> R + Send) -> Result<R, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Experiment(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub amplitude: T,
    pub n: usize,
    pub h: T,
    pub converged: bool,
    pub steps: usize,
    pub energy: T,
    /// Edge of the selected terminal on `N`; `None` when the contour does not reach `N`.
    pub terminal: Option<EdgeTag>,
    pub arclength: Option<T>,
    pub corner_distance: T,
    /// Whether a contour vertex lies in the lattice cell at the Neumann corner.
    pub touches_corner_cell: bool,
    pub angle: Option<T>,
    /// Solver failure for this row; the other fields are then placeholders.
    pub error: Option<String>,
}

impl<T: Real> SweepRow<T> {
    fn failed(amplitude: T, d: &Domain<T>, e: &Error) -> Self {
        Self {
            amplitude,
            n: d.n(),
            h: d.h(),
            converged: false,
            steps: 0,
            energy: T::nan(),
            terminal: None,
            arclength: None,
            corner_distance: T::infinity(),
            touches_corner_cell: false,
            angle: None,
            error: Some(e.to_string()),
        }
    }

    pub fn usable(&self) -> bool {
        self.converged && self.error.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub rows: Vec<SweepRow<T>>,
}

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| format!("{}", x.as_f64())).unwrap_or_default()
}

impl<T: Real> SweepResult<T> {
    pub const CSV_HEADER: &'static str =
        "A,n,h,converged,steps,J_eps,terminal_edge,arclength,corner_distance,touches_corner_cell,angle_deg,error";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let err = r.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.amplitude.as_f64(),
                r.n,
                r.h.as_f64(),
                r.converged,
                r.steps,
                r.energy.as_f64(),
                r.terminal.map_or("none", EdgeTag::name),
                opt(r.arclength),
                r.corner_distance.as_f64(),
                r.touches_corner_cell,
                opt(r.angle),
                err
            ));
        }
        s
    }

    /// Mesh sizes present, ascending in `n`.
    pub fn levels(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    /// Rows of one mesh level, in amplitude order.
    pub fn level(&self, n: usize) -> SweepResult<T> {
        let mut rows: Vec<SweepRow<T>> = self.rows.iter().filter(|r| r.n == n).cloned().collect();
        rows.sort_by(|a, b| a.amplitude.partial_cmp(&b.amplitude).unwrap_or(std::cmp::Ordering::Equal));
        SweepResult { rows }
    }

    /// Adjacent converged rows on the same edge whose arclength moves against
    /// the direction of the majority of steps.
    pub fn knob_violations(&self) -> Vec<(T, T)> {
        let mut out = Vec::new();
        for n in self.levels() {
            let lvl = self.level(n);
            let pairs: Vec<(&SweepRow<T>, &SweepRow<T>)> = lvl
                .rows
                .windows(2)
                .filter(|w| w[0].usable() && w[1].usable() && w[0].terminal.is_some() && w[0].terminal == w[1].terminal)
                .map(|w| (&w[0], &w[1]))
                .collect();
            let diffs: Vec<T> = pairs.iter().map(|(a, b)| b.arclength.unwrap() - a.arclength.unwrap()).collect();
            let up = diffs.iter().filter(|&&x| x > T::zero()).count();
            let down = diffs.iter().filter(|&&x| x < T::zero()).count();
            let sign = if up >= down { T::one() } else { -T::one() };
            for ((a, b), dv) in pairs.iter().zip(diffs) {
                if dv * sign < T::zero() {
                    out.push((a.amplitude, b.amplitude));
                }
            }
        }
        out
    }

    /// Adjacent converged rows where the final energy decreases with `A`.
    pub fn energy_order_violations(&self) -> Vec<(T, T)> {
        let mut out = Vec::new();
        for n in self.levels() {
            let lvl = self.level(n);
            let good: Vec<&SweepRow<T>> = lvl.rows.iter().filter(|r| r.usable()).collect();
            for w in good.windows(2) {
                if w[1].energy < w[0].energy {
                    out.push((w[0].amplitude, w[1].amplitude));
                }
            }
        }
        out
    }
}

fn check_amplitudes<T: Real>(a_list: &[T]) -> Result<(), Error> {
    if a_list.is_empty() {
        return Err(Error::Experiment("amplitude list is empty".into()));
    }
    if a_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Experiment("amplitude list must be strictly increasing".into()));
    }
    Ok(())
}

/// `A0, A0 + dA, ..., A1` inclusive. When `1/dA` is an integer the values
/// are formed as `k / (1/dA)` so that `0.01` steps give `1.2`, not
/// `1.2000000000000002`.
pub fn amplitude_range<T: Real>(a0: T, a1: T, step: T) -> Result<Vec<T>, Error> {
    if !(step > T::zero()) || a1 < a0 {
        return Err(Error::Experiment(format!("bad amplitude range {a0}..{a1} step {step}")));
    }
    let count = ((a1 - a0) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let inv = (T::one() / step).round();
    let start = (a0 * inv).round();
    let exact = inv >= T::one() && ((T::one() / step) - inv).abs() < T::lit(1e-9) * inv && (a0 * inv - start).abs() < T::lit(1e-6);
    Ok((0..=count)
        .map(|k| {
            let k = T::from_usize_lossy(k);
            if exact {
                (start + k) / inv
            } else {
                a0 + k * step
            }
        })
        .collect())
}

/// Runs one cold start and measures the terminal point.
pub fn sweep_point<T: Real>(
    d: &Domain<T>,
    b: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
    m: &PhaseModel<T>,
    q: &CoefficientField<T>,
) -> (SweepRow<T>, Option<RunOutcome<T>>) {
    let f0 = b.initial_data(d);
    let out = match run_to_steady_state(&f0, d, cfg, m, q) {
        Ok(o) => o,
        Err(e) => {
            warn!("A = {} n = {}: {e}", b.amplitude, d.n());
            return (SweepRow::failed(b.amplitude, d, &e), None);
        }
    };
    let fb = match extract_zero_contour(&out.field, d) {
        Ok(fb) => fb,
        Err(e) => return (SweepRow::failed(b.amplitude, d, &e), Some(out)),
    };
    let selected = select_terminal(&fb, d).ok().map(|(t, s)| (*t, s));
    let angle = selected.and_then(|(t, _)| {
        intersection_angle(&fb, d).ok().and_then(|all| all.into_iter().find(|a| a.terminal == t).map(|a| a.degrees))
    });
    let h = d.h();
    let touches = d.neumann_corner().is_some()
        && fb.polylines.iter().flat_map(|p| p.reference.iter()).any(|&(xi, eta)| xi <= h && eta >= T::one() - h);
    let row = SweepRow {
        amplitude: b.amplitude,
        n: d.n(),
        h,
        converged: out.converged,
        steps: out.steps,
        energy: out.trace.last_energy().unwrap_or_else(T::nan),
        terminal: selected.map(|(t, _)| t.tag),
        arclength: selected.map(|(_, s)| s),
        corner_distance: fb.corner_distance,
        touches_corner_cell: touches,
        angle,
        error: None,
    };
    info!(
        "A = {} n = {}: {} steps, terminal {} at {}",
        row.amplitude,
        row.n,
        row.steps,
        row.terminal.map_or("none", EdgeTag::name),
        opt(row.arclength)
    );
    (row, Some(out))
}

/// Cold-start runs for each amplitude on one mesh.
pub fn sweep_amplitude<T: Real>(
    d: &Domain<T>,
    b_template: &BoundaryData<T>,
    a_list: &[T],
    cfg: &SolverConfig<T>,
    m: &PhaseModel<T>,
    q: &CoefficientField<T>,
) -> Result<SweepResult<T>, Error> {
    sweep_amplitude_with(d, b_template, a_list, cfg, m, q, |_, _| {})
}

/// As [`sweep_amplitude`], calling `on_run` with every finished run (from
/// worker threads, in no particular order).
pub fn sweep_amplitude_with<T: Real>(
    d: &Domain<T>,
    b_template: &BoundaryData<T>,
    a_list: &[T],
    cfg: &SolverConfig<T>,
    m: &PhaseModel<T>,
    q: &CoefficientField<T>,
    on_run: impl Fn(&SweepRow<T>, &RunOutcome<T>) + Sync,
) -> Result<SweepResult<T>, Error> {
    check_amplitudes(a_list)?;
    cfg.validate()?;
    let bs = a_list.iter().map(|&a| b_template.with_amplitude(a)).collect::<Result<Vec<_>, _>>()?;
    let rows = in_pool(|| {
        bs.par_iter()
            .map(|b| {
                let (row, out) = sweep_point(d, b, cfg, m, q);
                if let Some(o) = &out {
                    on_run(&row, o);
                }
                row
            })
            .collect::<Vec<_>>()
    })?;
    let res = SweepResult { rows };
    report_sweep_warnings(&res);
    Ok(res)
}

fn report_sweep_warnings<T: Real>(res: &SweepResult<T>) {
    for (a, b) in res.knob_violations() {
        warn!("terminal arclength is not monotone in A between A = {a} and A = {b}");
    }
    for (a, b) in res.energy_order_violations() {
        warn!("final energy decreases between A = {a} and A = {b}");
    }
}

/// A sweep over several meshes of one geometry with `epsilon = slave_factor h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan<T> {
    pub theta: T,
    pub layout: BoundaryLayout,
    pub n_list: Vec<usize>,
    pub boundary: BoundaryData<T>,
    pub amplitudes: Vec<T>,
    pub lambda1: T,
    pub lambda2: T,
    /// Uniform weight `Q`.
    pub q: T,
}

/// Runs every `(A, n)` pair of the plan; rows come back in `A`-then-`n` order.
pub fn sweep_levels<T: Real>(plan: &SweepPlan<T>, cfg: &SolverConfig<T>) -> Result<SweepResult<T>, Error> {
    sweep_levels_with(plan, cfg, |_, _| {})
}

pub fn sweep_levels_with<T: Real>(
    plan: &SweepPlan<T>,
    cfg: &SolverConfig<T>,
    on_run: impl Fn(&SweepRow<T>, &RunOutcome<T>) + Sync,
) -> Result<SweepResult<T>, Error> {
    check_amplitudes(&plan.amplitudes)?;
    if plan.n_list.is_empty() {
        return Err(Error::Experiment("mesh list is empty".into()));
    }
    cfg.validate()?;
    let mut setups = Vec::new();
    for &n in &plan.n_list {
        let d = Domain::with_layout(plan.theta, n, plan.layout)?;
        let m = cfg.model(&d, plan.lambda1, plan.lambda2)?;
        let q = CoefficientField::uniform(&d, plan.q)?;
        setups.push((d, m, q));
    }
    let mut jobs = Vec::new();
    for &a in &plan.amplitudes {
        let b = plan.boundary.with_amplitude(a)?;
        for k in 0..setups.len() {
            jobs.push((b, k));
        }
    }
    let rows = in_pool(|| {
        jobs.par_iter()
            .map(|(b, k)| {
                let (d, m, q) = &setups[*k];
                let (row, out) = sweep_point(d, b, cfg, m, q);
                if let Some(o) = &out {
                    on_run(&row, o);
                }
                row
            })
            .collect::<Vec<_>>()
    })?;
    let res = SweepResult { rows };
    report_sweep_warnings(&res);
    Ok(res)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult<T> {
    pub n: usize,
    pub h: T,
    pub converged: bool,
    pub steps: usize,
    pub energy: T,
    /// `|J(h) - J(2h)|` against the previous level.
    pub difference: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport<T> {
    pub levels: Vec<LevelResult<T>>,
    /// First level whose difference is within `tol_ref max(1, J)`.
    pub converged_at: Option<usize>,
    /// Level energies form a monotone sequence.
    pub monotone: bool,
}

impl<T: Real> RefinementReport<T> {
    pub fn differences(&self) -> Vec<T> {
        self.levels.iter().filter_map(|l| l.difference).collect()
    }

    pub fn differences_decrease(&self) -> bool {
        let d = self.differences();
        !d.is_empty() && d.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,converged,steps,J_eps,difference\n");
        for l in &self.levels {
            s.push_str(&format!("{},{},{},{},{},{}\n", l.n, l.h.as_f64(), l.converged, l.steps, l.energy.as_f64(), opt(l.difference)));
        }
        s
    }
}

/// Cold-start runs on each mesh of `n_list` with `epsilon` slaved to `h`.
/// With `tol_ref = inf` only the first level is run.
#[allow(clippy::too_many_arguments)]
pub fn refine_ladder<T: Real>(
    theta: T,
    layout: BoundaryLayout,
    b: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
    lambda1: T,
    lambda2: T,
    q: T,
    n_list: &[usize],
    tol_ref: T,
) -> Result<RefinementReport<T>, Error> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Experiment("mesh list must be nonempty and increasing".into()));
    }
    if !(tol_ref > T::zero()) {
        return Err(Error::Experiment(format!("tol_ref must be positive, got {tol_ref}")));
    }
    let ns: &[usize] = if tol_ref.is_infinite() { &n_list[..1] } else { n_list };
    let plan = SweepPlan { theta, layout, n_list: ns.to_vec(), boundary: *b, amplitudes: vec![b.amplitude], lambda1, lambda2, q };
    let res = sweep_levels(&plan, cfg)?;
    refinement_report(&res, tol_ref)
}

/// Level differences of a single-amplitude sweep, in increasing `n`.
pub fn refinement_report<T: Real>(res: &SweepResult<T>, tol_ref: T) -> Result<RefinementReport<T>, Error> {
    if res.rows.windows(2).any(|w| w[1].amplitude != w[0].amplitude || w[1].n <= w[0].n) {
        return Err(Error::Experiment("refinement needs one amplitude and increasing meshes".into()));
    }
    if let Some(r) = res.rows.iter().find(|r| r.error.is_some()) {
        return Err(Error::Experiment(format!("level n = {} failed: {}", r.n, r.error.as_deref().unwrap_or(""))));
    }
    let mut levels: Vec<LevelResult<T>> = Vec::new();
    let mut converged_at = None;
    for (k, r) in res.rows.iter().enumerate() {
        let difference = levels.last().map(|p: &LevelResult<T>| (r.energy - p.energy).abs());
        if let Some(dj) = difference {
            if converged_at.is_none() && dj <= tol_ref * T::one().max(r.energy.abs()) {
                converged_at = Some(k);
            }
        }
        levels.push(LevelResult { n: r.n, h: r.h, converged: r.converged, steps: r.steps, energy: r.energy, difference });
    }
    let e: Vec<T> = levels.iter().map(|l| l.energy).collect();
    let monotone = e.windows(2).all(|w| w[1] >= w[0]) || e.windows(2).all(|w| w[1] <= w[0]);
    if !monotone {
        warn!("level energies are not monotone under refinement");
    }
    Ok(RefinementReport { levels, converged_at, monotone })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Passage {
    /// Largest gap at most `10 dA`.
    Smooth,
    /// Largest gap at least `0.1`.
    Jump,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelGap<T> {
    pub n: usize,
    pub h: T,
    pub pair: (T, T),
    pub gap: T,
    pub edge_switch: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport<T> {
    /// Finest level's pair with the largest arclength gap.
    pub pair: (T, T),
    pub gap: T,
    pub edge_switch: bool,
    /// Every adjacent pair of the finest level whose terminal changes edge.
    pub switch_pairs: Vec<(T, T)>,
    pub per_mesh: Vec<LevelGap<T>>,
    /// Least-squares slope of `log gap` against `log h`, with two or more levels.
    pub slope: Option<T>,
}

impl<T: Real> JumpReport<T> {
    pub fn classify(&self, step: T) -> Passage {
        if self.gap <= T::lit(10.0) * step {
            Passage::Smooth
        } else if self.gap >= T::lit(0.1) {
            Passage::Jump
        } else {
            Passage::Indeterminate
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_f64()).expect("report serializes")
    }

    fn to_f64(&self) -> JumpReport<f64> {
        let p = |(a, b): (T, T)| (a.as_f64(), b.as_f64());
        JumpReport {
            pair: p(self.pair),
            gap: self.gap.as_f64(),
            edge_switch: self.edge_switch,
            switch_pairs: self.switch_pairs.iter().copied().map(p).collect(),
            per_mesh: self
                .per_mesh
                .iter()
                .map(|l| LevelGap { n: l.n, h: l.h.as_f64(), pair: p(l.pair), gap: l.gap.as_f64(), edge_switch: l.edge_switch })
                .collect(),
            slope: self.slope.map(T::as_f64),
        }
    }
}

fn level_gap<T: Real>(rows: &[SweepRow<T>]) -> Option<(LevelGap<T>, Vec<(T, T)>)> {
    let good: Vec<&SweepRow<T>> = rows.iter().filter(|r| r.usable()).collect();
    if good.len() < 2 {
        return None;
    }
    let mut best: Option<LevelGap<T>> = None;
    let mut switches = Vec::new();
    for w in good.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (Some(sa), Some(sb)) = (a.arclength, b.arclength) else { continue };
        let switch = a.terminal != b.terminal;
        if switch {
            switches.push((a.amplitude, b.amplitude));
        }
        let gap = (sb - sa).abs();
        if best.as_ref().map_or(true, |g| gap > g.gap) {
            best = Some(LevelGap { n: a.n, h: a.h, pair: (a.amplitude, b.amplitude), gap, edge_switch: switch });
        }
    }
    best.map(|g| (g, switches))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    let pts: Vec<(T, T)> = points.iter().filter(|p| p.0 > T::zero() && p.1 > T::zero()).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == T::zero() {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Largest adjacent arclength gap per mesh level and its trend in `h`.
pub fn detect_jump<T: Real>(sr: &SweepResult<T>) -> Result<JumpReport<T>, Error> {
    let mut per_mesh = Vec::new();
    let mut finest_switches = Vec::new();
    for n in sr.levels() {
        if let Some((g, s)) = level_gap(&sr.level(n).rows) {
            per_mesh.push(g);
            finest_switches = s;
        }
    }
    let Some(finest) = per_mesh.last().cloned() else {
        return Err(Error::Experiment("need at least two converged rows with a terminal on N".into()));
    };
    let slope = if per_mesh.len() >= 2 { log_log_slope(&per_mesh.iter().map(|g| (g.h, g.gap)).collect::<Vec<_>>()) } else { None };
    Ok(JumpReport {
        pair: finest.pair,
        gap: finest.gap,
        edge_switch: finest.edge_switch,
        switch_pairs: finest_switches,
        per_mesh,
        slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRadius<T> {
    pub n: usize,
    pub h: T,
    pub radius: T,
    /// Some contour entered the corner cell; the radius is reported as 0.
    pub touches_corner: bool,
    pub edge_switch: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenRegion<T> {
    pub levels: Vec<LevelRadius<T>>,
}

impl<T: Real> ForbiddenRegion<T> {
    /// Relative spread `|r_fine - r_coarse| / max(r)` of the two finest levels.
    pub fn relative_change(&self) -> Option<T> {
        let k = self.levels.len();
        if k < 2 {
            return None;
        }
        let (a, b) = (self.levels[k - 2].radius, self.levels[k - 1].radius);
        let top = a.max(b);
        (top > T::zero()).then(|| (a - b).abs() / top)
    }

    pub fn stabilized(&self, tol: T) -> Option<bool> {
        self.relative_change().map(|c| c <= tol)
    }
}

/// Minimum corner distance over the converged rows of each mesh level.
pub fn forbidden_region<T: Real>(sr: &SweepResult<T>) -> Result<ForbiddenRegion<T>, Error> {
    let mut levels = Vec::new();
    for n in sr.levels() {
        let lvl = sr.level(n);
        let good: Vec<&SweepRow<T>> = lvl.rows.iter().filter(|r| r.usable()).collect();
        if good.is_empty() {
            continue;
        }
        let touches = good.iter().any(|r| r.touches_corner_cell);
        let radius = if touches { T::zero() } else { good.iter().map(|r| r.corner_distance).fold(T::infinity(), T::min) };
        let edge_switch = good.windows(2).any(|w| w[0].terminal.is_some() && w[1].terminal.is_some() && w[0].terminal != w[1].terminal);
        if !edge_switch && good.len() > 1 {
            warn!("n = {n}: no edge switch in the sweep; the radius is only an upper bound");
        }
        levels.push(LevelRadius { n, h: good[0].h, radius, touches_corner: touches, edge_switch });
    }
    if levels.is_empty() {
        return Err(Error::Experiment("no converged rows".into()));
    }
    Ok(ForbiddenRegion { levels })
}

/// Closest approach to the corner of the rows before the first edge switch,
/// per level. Without a switch every converged row counts.
pub fn approach_before_switch<T: Real>(sr: &SweepResult<T>) -> Vec<(usize, T, T, bool)> {
    let mut out = Vec::new();
    for n in sr.levels() {
        let lvl = sr.level(n);
        let good: Vec<&SweepRow<T>> = lvl.rows.iter().filter(|r| r.usable()).collect();
        if good.is_empty() {
            continue;
        }
        let cut = good
            .windows(2)
            .position(|w| w[0].terminal.is_some() && w[1].terminal.is_some() && w[0].terminal != w[1].terminal)
            .map(|k| k + 1);
        let before = &good[..cut.unwrap_or(good.len())];
        let dist = before.iter().map(|r| r.corner_distance).fold(T::infinity(), T::min);
        out.push((n, good[0].h, dist, cut.is_some()));
    }
    out
}
