use std::f64::consts::PI;

use fbflow_core::diagnostics::neumann_residual;
use fbflow_core::experiments::{sweep_levels, SweepPlan};
use fbflow_core::io::parse_config;
use fbflow_core::*;

fn small_config() -> RunConfig {
    let text = r#"{
        "theta": 3.9269908169872414,
        "n": 128,
        "A": 1.28,
        "x0": 0.85,
        "delta": 0.01,
        "solver": { "dt_factor": 1.5 }
    }"#;
    parse_config(text, std::path::Path::new("inline.json")).unwrap()
}

#[test]
fn documented_config_parses_with_defaults() {
    let c = small_config();
    assert_eq!(c.meshes(), vec![128]);
    assert_eq!(c.amplitudes().unwrap(), vec![1.28]);
    let s = c.solver_config();
    assert_eq!(s.dt_factor, 1.5);
    assert_eq!(s.ss_window, 10);
    assert_eq!(s.potential, PotentialRule::Exact);
    assert!(s.el_tol.is_none());
}

#[test]
fn solve_checkpoint_and_diagnose() {
    let d = Domain::new(PI / 2.0, 24).unwrap();
    let cfg = SolverConfig { dt_factor: 1.0, ..SolverConfig::default() };
    let m = cfg.model(&d, 0.0, 1.0).unwrap();
    let q = CoefficientField::ones(&d);
    let b = BoundaryData::new(2.0, 0.4, 0.1).unwrap();
    let f0 = b.initial_data(&d);
    let out = run_to_steady_state(&f0, &d, &cfg, &m, &q).unwrap();
    assert!(out.converged);
    assert!(out.violations.is_empty());
    let e = &out.trace.entries;
    assert!(e.last().unwrap().energy < e[0].energy);

    // boundary data untouched by the flow
    for i in 0..=d.n() {
        assert_eq!(out.field.get(i, 0), f0.get(i, 0));
    }
    let r = residual_el(&out.field, &d, &cfg, &m, &q).unwrap();
    assert!(r.scaled() < 1e-2, "{}", r.scaled());
    let nr = neumann_residual(&out.field, &d, &cfg, Some((&m, &q))).unwrap();
    assert!(nr.max.is_finite());

    let fb = extract_zero_contour(&out.field, &d).unwrap();
    assert!(!fb.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    let meta = CheckpointMeta {
        theta: PI / 2.0,
        n: d.n(),
        h: d.h(),
        epsilon: m.epsilon,
        lambda1: 0.0,
        lambda2: 1.0,
        amplitude: 2.0,
        x0: 0.4,
        delta: 0.1,
        step: out.steps,
        time: out.steps as f64 * cfg.time_step(&d),
        layout: d.layout(),
    };
    save_checkpoint(&path, &out.field, &meta).unwrap();
    let (g, back) = load_checkpoint(&path).unwrap();
    assert_eq!(back, meta);
    assert_eq!(g.values(), out.field.values());
}

#[test]
fn single_precision_runs() {
    let d = Domain::<f32>::new(std::f32::consts::FRAC_PI_2, 16).unwrap();
    let cfg = SolverConfig::<f32> { dt_factor: 1.0, lin_tol: 1e-5, ss_tol: 1e-4, ..SolverConfig::default() };
    let m = cfg.model(&d, 0.0, 1.0).unwrap();
    let q = CoefficientField::ones(&d);
    let b = BoundaryData::new(2.0f32, 0.4, 0.1).unwrap();
    let out = run_to_steady_state(&b.initial_data(&d), &d, &cfg, &m, &q).unwrap();
    assert!(out.converged);
    assert!(out.field.values().iter().all(|v| v.is_finite()));
}

#[test]
fn sweep_rows_are_ordered_and_repeatable() {
    let plan = SweepPlan {
        theta: PI / 4.0,
        layout: BoundaryLayout::NeumannCorner,
        n_list: vec![12, 16],
        boundary: BoundaryData::new(1.0, 0.5, 0.1).unwrap(),
        amplitudes: vec![1.0, 2.0],
        lambda1: 0.0,
        lambda2: 1.0,
        q: 1.0,
    };
    let cfg = SolverConfig { dt_factor: 1.0, ss_tol: 1e-6, ..SolverConfig::default() };
    let a = sweep_levels(&plan, &cfg).unwrap();
    let keys: Vec<(f64, usize)> = a.rows.iter().map(|r| (r.amplitude, r.n)).collect();
    assert_eq!(keys, vec![(1.0, 12), (1.0, 16), (2.0, 12), (2.0, 16)]);
    assert!(a.rows.iter().all(|r| r.usable()));
    let b = sweep_levels(&plan, &cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.to_csv().starts_with(SweepResult::<f64>::CSV_HEADER));
}
