//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 8 10`.

use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use fbflow_core::diagnostics::{monotonicity_phi, sector_bound};
use fbflow_core::experiments::{
    amplitude_range, approach_before_switch, detect_jump, forbidden_region, refinement_report, sweep_levels_with, SweepPlan,
    SweepRow,
};
use fbflow_core::freeboundary::select_terminal;
use fbflow_core::{
    energy_relaxed, extract_zero_contour, gradient_jump_residual, residual_el, run_to_steady_state, BoundaryData, BoundaryLayout,
    CoefficientField, Domain, EdgeTag, Error, Field, PhaseModel, RunOutcome, SolverConfig, SweepResult,
};

#[derive(Clone, Copy)]
struct PaperCase {
    name: &'static str,
    theta: f64,
    x0: f64,
    delta: f64,
    amplitude: f64,
}

const OBTUSE: PaperCase = PaperCase { name: "obtuse", theta: 5.0 * PI / 4.0, x0: 0.85, delta: 0.01, amplitude: 1.28 };
const ACUTE: PaperCase = PaperCase { name: "acute", theta: PI / 4.0, x0: 0.2, delta: 0.01, amplitude: 3.02 };
const RIGHT: PaperCase = PaperCase { name: "right", theta: PI / 2.0, x0: 0.2, delta: 0.01, amplitude: 3.0 };
const CASES: [PaperCase; 3] = [OBTUSE, ACUTE, RIGHT];

fn solver() -> SolverConfig<f64> {
    SolverConfig { dt_factor: 1.5, ..SolverConfig::default() }
}

struct RunLog {
    label: String,
    n: usize,
    steps: usize,
    converged: bool,
    violations: usize,
    worst_increase: f64,
    seconds: f64,
}

struct SteadyState {
    case: PaperCase,
    domain: Domain<f64>,
    field: Field<f64>,
    converged: bool,
    residual: f64,
}

#[derive(Default)]
struct Suite {
    runs: Mutex<Vec<RunLog>>,
    steady: OnceLock<Result<Vec<SteadyState>, String>>,
    obtuse: OnceLock<Result<SweepResult<f64>, String>>,
    acute: OnceLock<Result<SweepResult<f64>, String>>,
    right: OnceLock<Result<SweepResult<f64>, String>>,
    ladder: OnceLock<Result<SweepResult<f64>, String>>,
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict, String> {
    Ok(Verdict { pass, detail })
}

fn err(e: Error) -> String {
    e.to_string()
}

impl Suite {
    fn log(&self, label: String, n: usize, out: &RunOutcome<f64>) {
        let worst = out.trace.max_relative_increase();
        self.runs.lock().unwrap().push(RunLog {
            label,
            n,
            steps: out.steps,
            converged: out.converged,
            violations: out.violations.len(),
            worst_increase: worst,
            seconds: out.elapsed.as_secs_f64(),
        });
    }

    fn single(&self, case: PaperCase, n: usize, cfg: &SolverConfig<f64>) -> Result<(Domain<f64>, PhaseModel<f64>, RunOutcome<f64>), Error> {
        let d = Domain::new(case.theta, n)?;
        let m = cfg.model(&d, 0.0, 1.0)?;
        let q = CoefficientField::ones(&d);
        let b = BoundaryData::new(case.amplitude, case.x0, case.delta)?;
        let out = run_to_steady_state(&b.initial_data(&d), &d, cfg, &m, &q)?;
        self.log(format!("{} A={} n={n}", case.name, case.amplitude), n, &out);
        Ok((d, m, out))
    }

    fn sweep(&self, case: PaperCase, amplitudes: Vec<f64>, n_list: Vec<usize>) -> Result<SweepResult<f64>, String> {
        let plan = SweepPlan {
            theta: case.theta,
            layout: BoundaryLayout::NeumannCorner,
            n_list,
            boundary: BoundaryData::new(case.amplitude, case.x0, case.delta).map_err(err)?,
            amplitudes,
            lambda1: 0.0,
            lambda2: 1.0,
            q: 1.0,
        };
        sweep_levels_with(&plan, &solver(), |row: &SweepRow<f64>, out: &RunOutcome<f64>| {
            self.log(format!("{} sweep A={} n={}", case.name, row.amplitude, row.n), row.n, out)
        })
        .map_err(err)
    }

    /// The three paper configurations at `n = 128`, run until the scaled
    /// Euler-Lagrange residual is also small. The tighter linear tolerance
    /// lowers the residual floor left by the inexact solves.
    fn steady(&self) -> Result<&Vec<SteadyState>, String> {
        self.steady
            .get_or_init(|| {
                let cfg = SolverConfig { el_tol: Some(5e-6), lin_tol: 1e-13, max_steps: 300_000, ..solver() };
                CASES
                    .iter()
                    .map(|&case| {
                        let (d, m, out) = self.single(case, 128, &cfg).map_err(err)?;
                        let q = CoefficientField::ones(&d);
                        let residual = residual_el(&out.field, &d, &cfg, &m, &q).map_err(err)?.scaled();
                        Ok(SteadyState { case, domain: d, field: out.field, converged: out.converged, residual })
                    })
                    .collect()
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn obtuse_sweep(&self) -> Result<&SweepResult<f64>, String> {
        self.obtuse
            .get_or_init(|| self.sweep(OBTUSE, amplitude_range(1.19, 1.33, 0.01).map_err(err)?, vec![128]))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn acute_sweep(&self) -> Result<&SweepResult<f64>, String> {
        self.acute
            .get_or_init(|| self.sweep(ACUTE, amplitude_range(3.01, 3.04, 0.01).map_err(err)?, vec![128, 256]))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn right_sweep(&self) -> Result<&SweepResult<f64>, String> {
        self.right
            .get_or_init(|| self.sweep(RIGHT, amplitude_range(2.6, 3.4, 0.1).map_err(err)?, vec![64, 128, 256]))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn ladder_sweep(&self) -> Result<&SweepResult<f64>, String> {
        self.ladder
            .get_or_init(|| self.sweep(OBTUSE, vec![OBTUSE.amplitude], vec![64, 128, 256]))
            .as_ref()
            .map_err(Clone::clone)
    }
}

// 1
fn energy_descent(s: &Suite) -> Result<Verdict, String> {
    let cfg = solver();
    for case in CASES {
        s.single(case, 64, &cfg).map_err(err)?;
    }
    let runs = s.runs.lock().unwrap();
    let bad: Vec<&RunLog> = runs.iter().filter(|r| r.violations > 0).collect();
    let slow: Vec<&RunLog> = runs.iter().filter(|r| r.n == 64 && r.seconds >= 60.0).collect();
    let worst = runs.iter().map(|r| r.worst_increase).fold(0.0, f64::max);
    let longest64 = runs.iter().filter(|r| r.n == 64).map(|r| r.seconds).fold(0.0, f64::max);
    let unconverged = runs.iter().filter(|r| !r.converged).count();
    let mut detail = format!(
        "{} runs, {} with an increase above 10 lin_tol, worst relative increase {worst:.2e}, slowest n=64 run {longest64:.1}s, {unconverged} without steady state",
        runs.len(),
        bad.len()
    );
    if let Some(r) = bad.first().or(slow.first()) {
        detail.push_str(&format!(", e.g. {} ({} steps, {:.1}s)", r.label, r.steps, r.seconds));
    }
    verdict(bad.is_empty() && slow.is_empty(), detail)
}

// 2
fn steady_state_consistency(s: &Suite) -> Result<Verdict, String> {
    let states = s.steady()?;
    let parts: Vec<String> = states.iter().map(|st| format!("{} {:.2e}{}", st.case.name, st.residual, if st.converged { "" } else { " (no steady state)" })).collect();
    let pass = states.iter().all(|st| st.converged && st.residual <= 1e-5);
    verdict(pass, format!("scaled residual at n=128: {}", parts.join(", ")))
}

fn row_at(sr: &SweepResult<f64>, a: f64) -> Option<&SweepRow<f64>> {
    sr.rows.iter().find(|r| (r.amplitude - a).abs() < 1e-9)
}

fn edge_name(r: Option<&SweepRow<f64>>) -> &'static str {
    r.and_then(|r| r.terminal).map_or("none", EdgeTag::name)
}

// 3
fn obtuse_reproduction(s: &Suite) -> Result<Verdict, String> {
    let sr = s.obtuse_sweep()?;
    let at128 = row_at(sr, 1.28);
    let at131 = row_at(sr, 1.31);
    let on_n = sr.rows.iter().filter(|r| r.usable() && r.terminal.is_some_and(EdgeTag::is_neumann)).count();
    let gap = detect_jump(sr).ok().map(|j| j.gap);
    let pass = at128.and_then(|r| r.terminal) == Some(EdgeTag::Eta1)
        && at131.and_then(|r| r.terminal) == Some(EdgeTag::Xi0)
        && on_n == sr.rows.len()
        && gap.is_some_and(|g| g <= 0.1);
    verdict(
        pass,
        format!(
            "A=1.28 on {}, A=1.31 on {}, {}/{} runs end on N, max adjacent gap {}",
            edge_name(at128),
            edge_name(at131),
            on_n,
            sr.rows.len(),
            gap.map_or("n/a".into(), |g| format!("{g:.4}"))
        ),
    )
}

fn switch_gaps(sr: &SweepResult<f64>, n: usize) -> Vec<f64> {
    let lvl = sr.level(n);
    let good: Vec<&SweepRow<f64>> = lvl.rows.iter().filter(|r| r.usable() && r.terminal.is_some_and(EdgeTag::is_neumann)).collect();
    good.windows(2)
        .filter(|w| w[0].terminal != w[1].terminal)
        .filter_map(|w| Some((w[1].arclength? - w[0].arclength?).abs()))
        .collect()
}

// 4
fn acute_forbidden_region(s: &Suite) -> Result<Verdict, String> {
    let sr = s.acute_sweep()?;
    let fr = forbidden_region(sr).map_err(err)?;
    let jumps: Vec<(usize, f64)> =
        [128, 256].iter().map(|&n| (n, switch_gaps(sr, n).into_iter().fold(0.0, f64::max))).collect();
    let jump_ok = jumps.iter().all(|&(_, g)| g >= 0.1);
    let radii: Vec<String> = fr.levels.iter().map(|l| format!("n={} r={:.4}", l.n, l.radius)).collect();
    let positive = fr.levels.len() == 2 && fr.levels.iter().all(|l| l.radius > 0.0 && l.radius.is_finite());
    let change = fr.relative_change();
    let pass = jump_ok && positive && change.is_some_and(|c| c <= 0.25);
    verdict(
        pass,
        format!(
            "edge-switch gap {}; {}; relative change {}",
            jumps.iter().map(|(n, g)| format!("n={n} {g:.4}")).collect::<Vec<_>>().join(", "),
            radii.join(", "),
            change.map_or("n/a".into(), |c| format!("{c:.3}"))
        ),
    )
}

// 5
fn right_angle_artifact(s: &Suite) -> Result<Verdict, String> {
    let sr = s.right_sweep()?;
    let approach = approach_before_switch(sr);
    let points: Vec<(f64, f64)> = approach.iter().map(|&(_, h, dist, _)| (h, dist)).collect();
    let slope = fbflow_core::experiments::log_log_slope(&points);
    let desc: Vec<String> =
        approach.iter().map(|(n, _, dist, sw)| format!("n={n} {dist:.4}{}", if *sw { "" } else { " (no switch)" })).collect();
    let pass = approach.len() == 3 && slope.is_some_and(|k| k > 0.5);
    verdict(pass, format!("closest approach {}; slope {}", desc.join(", "), slope.map_or("n/a".into(), |k| format!("{k:.3}"))))
}

// 6
fn orthogonality(s: &Suite) -> Result<Verdict, String> {
    let mut angles = Vec::new();
    for sr in [s.acute_sweep()?, s.right_sweep()?, s.ladder_sweep()?] {
        for r in sr.rows.iter().filter(|r| r.n == 256 && r.usable() && r.terminal.is_some_and(EdgeTag::is_neumann)) {
            if let Some(a) = r.angle {
                angles.push(a);
            }
        }
    }
    let worst = angles.iter().map(|a| (a - 90.0).abs()).fold(0.0, f64::max);
    verdict(!angles.is_empty() && worst <= 5.0, format!("{} terminals at n=256, worst deviation from 90 deg {worst:.2}", angles.len()))
}

// 7
fn monotonicity(s: &Suite) -> Result<Verdict, String> {
    let n = 128;
    let d = Domain::new(PI / 2.0, n).map_err(err)?;
    let h = d.h();
    let model = Field::from_physical_fn(&d, |x, _| x - 0.5);
    let radii = [0.1, 0.2, 0.3, 0.4];
    let probe = monotonicity_phi(&model, &d, (0.5, 1.0), &radii).map_err(err)?;
    let exact = PI * PI / 16.0;
    let model_err = probe.phi_values.iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max);
    let model_ok = model_err <= 5.0 * h / radii[0];
    let c = model_err / h;

    let mut probed = Vec::new();
    for st in s.steady()? {
        let d = &st.domain;
        let fb = extract_zero_contour(&st.field, d).map_err(err)?;
        let Ok((t, _)) = select_terminal(&fb, d) else { continue };
        let r0 = 5.0 * d.h();
        let reach = 0.9 * d.distance_to_dirichlet(t.point);
        if reach <= r0 {
            continue;
        }
        let radii: Vec<f64> = (0..8).map(|k| r0 + (reach - r0) * k as f64 / 7.0).collect();
        let p = monotonicity_phi(&st.field, d, t.point, &radii).map_err(err)?;
        probed.push((st.case.name, p.max_relative_drop()));
    }
    let slack = c * h;
    let steady_ok = !probed.is_empty() && probed.iter().all(|&(_, drop)| drop <= slack);
    verdict(
        model_ok && steady_ok,
        format!(
            "model error {model_err:.2e} (bound {:.2e}), C={c:.3}, steady drops {} vs slack {slack:.2e}",
            5.0 * h / radii[0],
            probed.iter().map(|(k, v)| format!("{k} {v:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// 8
fn sector(_: &Suite) -> Result<Verdict, String> {
    let mut min = f64::INFINITY;
    let mut equal = Vec::new();
    for i in 1..=10 {
        for j in 1..=10 {
            let (tp, tm) = (PI * i as f64 / 20.0, PI * j as f64 / 20.0);
            let e = sector_bound(tp, tm).map_err(err)?;
            // pi / (2 theta) with theta = k pi / 20 is 10 / k
            let oracle = 10.0 / i as f64 + 10.0 / j as f64;
            if (e.sqrt_sum - oracle).abs() > 1e-12 {
                return verdict(false, format!("sqrt_sum {} at ({tp}, {tm}) differs from {oracle}", e.sqrt_sum));
            }
            min = min.min(e.sqrt_sum);
            if (e.sqrt_sum - 2.0).abs() < 1e-12 {
                equal.push((i, j));
            }
        }
    }
    verdict(min >= 2.0 - 1e-12 && equal == [(10, 10)], format!("100 pairs, min sqrt_sum {min:.12}, equality at {equal:?}"))
}

/// Minimizer of `a^2/z + b^2/(1-z) + z` by golden section.
fn front_oracle(a: f64, b: f64) -> f64 {
    let e = |z: f64| a * a / z + b * b / (1.0 - z) + z;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    while hi - lo > 1e-13 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if e(m1) < e(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

// 9
fn gradient_jump(s: &Suite) -> Result<Verdict, String> {
    let (a, b) = (1.0, 1.0);
    let z = front_oracle(a, b);
    let (sm, sp) = (a / z, b / (1.0 - z));
    let oracle_jump = sp * sp - sm * sm;
    let cfg = SolverConfig { ss_tol: 1e-10, el_tol: Some(1e-7), ..solver() };
    let mut medians = Vec::new();
    let mut fronts = Vec::new();
    for n in [128, 256] {
        let d = Domain::with_layout(PI / 2.0, n, BoundaryLayout::Channel).map_err(err)?;
        let m = cfg.model(&d, 0.0, 1.0).map_err(err)?;
        let q = CoefficientField::ones(&d);
        let f0 = Field::from_physical_fn(&d, |x, _| -a + (a + b) * x);
        let out = run_to_steady_state(&f0, &d, &cfg, &m, &q).map_err(err)?;
        s.log(format!("channel n={n}"), n, &out);
        let fb = extract_zero_contour(&out.field, &d).map_err(err)?;
        let pts: Vec<(f64, f64)> = fb.polylines.iter().flat_map(|p| p.points.iter().copied()).collect();
        let zn = pts.iter().map(|p| p.0).sum::<f64>() / pts.len().max(1) as f64;
        fronts.push((n, zn - z, d.h()));
        let r = gradient_jump_residual(&out.field, &d, &fb, &q, &m, 3.0).map_err(err)?;
        medians.push((n, r.median_abs().unwrap_or(f64::INFINITY)));
    }
    let oracle_ok = (oracle_jump + 1.0).abs() < 1e-6;
    let fronts_ok = fronts.iter().all(|&(_, dz, h)| dz.abs() <= 5.0 * h);
    let (r128, r256) = (medians[0].1, medians[1].1);
    let pass = oracle_ok && fronts_ok && r256 <= 0.1 && r256 <= 0.5 * r128;
    verdict(
        pass,
        format!(
            "oracle z={z:.6} jump={oracle_jump:.8}; front offset {}; median residual n=128 {r128:.3e}, n=256 {r256:.3e} (ratio {:.3})",
            fronts.iter().map(|(n, dz, _)| format!("n={n} {dz:.2e}")).collect::<Vec<_>>().join(", "),
            r256 / r128
        ),
    )
}

// 10
fn initial_energy_scaling(_: &Suite) -> Result<Verdict, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in CASES {
        let d = Domain::new(case.theta, 128).map_err(err)?;
        let m = solver().model(&d, 0.0, 1.0).map_err(err)?;
        let q = CoefficientField::ones(&d);
        let j: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&a| {
                let bd = BoundaryData::new(a, case.x0, case.delta)?;
                Ok(energy_relaxed(&bd.initial_data(&d), &d, &q, &m))
            })
            .collect::<Result<_, Error>>()
            .map_err(err)?;
        let ratios = [j[1] / j[0], j[2] / j[0]];
        pass &= ((ratios[0] - 4.0) / 4.0).abs() <= 0.1 && ((ratios[1] - 16.0) / 16.0).abs() <= 0.1;
        parts.push(format!("{} {:.3}/{:.3}", case.name, ratios[0], ratios[1]));
    }
    verdict(pass, format!("ratios J(2)/J(1), J(4)/J(1): {}", parts.join(", ")))
}

// 11
fn refinement(s: &Suite) -> Result<Verdict, String> {
    let report = refinement_report(s.ladder_sweep()?, 1e-3).map_err(err)?;
    let diffs = report.differences();
    verdict(
        report.levels.iter().all(|l| l.converged) && report.differences_decrease(),
        format!(
            "J = {}; |dJ| = {}",
            report.levels.iter().map(|l| format!("{:.6}", l.energy)).collect::<Vec<_>>().join(", "),
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// 12
fn determinism(s: &Suite) -> Result<Verdict, String> {
    let first = s.obtuse_sweep()?.to_csv();
    let again = s.sweep(OBTUSE, amplitude_range(1.19, 1.33, 0.01).map_err(err)?, vec![128])?.to_csv();
    verdict(first.as_bytes() == again.as_bytes(), format!("{} bytes, identical: {}", first.len(), first == again))
}

type Criterion = fn(&Suite) -> Result<Verdict, String>;

fn main() {
    let criteria: [(usize, &str, Criterion); 12] = [
        (8, "sector bound", sector),
        (10, "initial energy scaling", initial_energy_scaling),
        (2, "steady-state consistency", steady_state_consistency),
        (7, "monotonicity diagnostic", monotonicity),
        (9, "gradient jump benchmark", gradient_jump),
        (3, "obtuse reproduction", obtuse_reproduction),
        (12, "determinism", determinism),
        (11, "refinement ladder", refinement),
        (4, "acute forbidden region", acute_forbidden_region),
        (5, "right-angle mesh artifact", right_angle_artifact),
        (6, "orthogonality", orthogonality),
        (1, "energy descent", energy_descent),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let suite = Suite::default();
    let mut results = Vec::new();
    for (k, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let v = run(&suite).unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") });
        let line = format!(
            "criterion {k:>2} {:<26} {}  {} [{:.0}s]",
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        eprintln!("{line}");
        results.push((k, v.pass, line));
    }
    results.sort_by_key(|r| r.0);
    println!("\nacceptance summary");
    for (_, _, line) in &results {
        println!("{line}");
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
