use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use fbflow_core::diagnostics::{
    away_from_layer, gradient_jump_residual, intersection_angle, max_gradient_where, monotonicity_phi, neumann_residual,
    report_csv, DiagnosticRecord,
};
use fbflow_core::experiments::{detect_jump, refine_ladder, sweep_levels_with, SweepRow};
use fbflow_core::freeboundary::select_terminal;
use fbflow_core::io::{load_checkpoint, load_config, render_svg, save_checkpoint, write_text, CheckpointMeta, RunConfig};
use fbflow_core::{extract_zero_contour, CoefficientField, Domain, Error, Field, PhaseModel, RunOutcome, SolverConfig};

#[derive(Parser)]
#[command(name = "fbflow", version, about = "Relaxed gradient-flow solver for a two-phase free boundary problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Only log warnings and errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One run: checkpoint, energy trace, contour and optional plot.
    Solve(Common),
    /// Amplitude sweep over every `(A, n)` of the config.
    Sweep(Common),
    /// Mesh refinement ladder at a single amplitude.
    Refine(Common),
    /// A-posteriori checks on a checkpoint.
    Diagnose {
        checkpoint: PathBuf,
        /// Solver settings and `Q` to use; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        check: Check,
        /// Write `diagnostics.csv` here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    All,
    Monotonicity,
    Jump,
    Angle,
    Neumann,
    Gradient,
}

enum Failure {
    Config(Error),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse { .. } => Failure::Config(e),
            Error::Io { .. } => Failure::Config(e),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Solve(c) | Command::Sweep(c) | Command::Refine(c) => c.quiet,
        Command::Diagnose { quiet, .. } => *quiet,
    };
    init_logging(quiet);
    let result = match cli.command {
        Command::Solve(c) => solve(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Refine(c) => refine(&c),
        Command::Diagnose { checkpoint, config, check, out, .. } => diagnose(&checkpoint, config.as_deref(), check, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(m)) => {
            error!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn load(c: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let cfg = load_config(&c.config)?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    Ok((cfg, out))
}

fn single<T: Copy>(values: &[T], key: &str) -> Result<T, Failure> {
    match values {
        [v] => Ok(*v),
        _ => Err(Failure::Config(Error::Config { key: key.into(), message: "this command takes a single value".into() })),
    }
}

fn meta_for(cfg: &RunConfig, d: &Domain<f64>, m: &PhaseModel<f64>, amplitude: f64, out: &RunOutcome<f64>, dt: f64) -> CheckpointMeta {
    CheckpointMeta {
        theta: cfg.theta,
        n: d.n(),
        h: d.h(),
        epsilon: m.epsilon,
        lambda1: m.lambda1,
        lambda2: m.lambda2,
        amplitude,
        x0: cfg.x0,
        delta: cfg.delta,
        step: out.steps,
        time: out.steps as f64 * dt,
        layout: d.layout(),
    }
}

/// Trace, contour, checkpoint and plot of one finished run.
fn write_run(dir: &Path, cfg: &RunConfig, d: &Domain<f64>, m: &PhaseModel<f64>, amplitude: f64, out: &RunOutcome<f64>, svg: bool) -> Result<(), Error> {
    write_text(&dir.join("trace.csv"), &out.trace.to_csv())?;
    let fb = extract_zero_contour(&out.field, d)?;
    write_text(&dir.join("contour.csv"), &fb.to_csv())?;
    let dt = cfg.solver_config().time_step(d);
    save_checkpoint(&dir.join("state.ckpt"), &out.field, &meta_for(cfg, d, m, amplitude, out, dt))?;
    if svg {
        render_svg(&fb, &out.field, d, &dir.join("plot.svg"))?;
    }
    Ok(())
}

fn solve(c: &Common) -> Result<(), Failure> {
    let (cfg, dir) = load(c)?;
    let n = single(&cfg.meshes(), "n_list")?;
    let a = single(&cfg.amplitudes()?, "A_list")?;
    let d = cfg.domain(n)?;
    let m = cfg.model(&d)?;
    let q = cfg.q_field(&d)?;
    let scfg = cfg.solver_config();
    let b = cfg.boundary(a)?;
    let f0 = b.initial_data(&d);
    let out = fbflow_core::run_to_steady_state(&f0, &d, &scfg, &m, &q)?;
    write_run(&dir, &cfg, &d, &m, a, &out, c.svg || cfg.output.svg)?;
    let fb = extract_zero_contour(&out.field, &d)?;
    match select_terminal(&fb, &d) {
        Ok((t, s)) => info!("terminal on {} at signed arclength {s:.6}", t.tag.name()),
        Err(_) => info!("free boundary does not reach the Neumann boundary"),
    }
    info!(
        "{} after {} steps, J_eps = {:.10}, outputs in {}",
        if out.converged { "steady state" } else { "no steady state" },
        out.steps,
        out.trace.last_energy().unwrap_or(f64::NAN),
        dir.display()
    );
    if out.converged {
        Ok(())
    } else {
        Err(Failure::Solver(format!("no steady state within {} steps", scfg.max_steps)))
    }
}

fn sweep(c: &Common) -> Result<(), Failure> {
    let (cfg, dir) = load(c)?;
    let plan = cfg.sweep_plan()?;
    let scfg = cfg.solver_config();
    let svg = c.svg || cfg.output.svg;
    let on_run = |row: &SweepRow<f64>, out: &RunOutcome<f64>| {
        let sub = dir.join(format!("A{}_n{}", row.amplitude, row.n));
        let res = cfg
            .domain(row.n)
            .and_then(|d| cfg.model(&d).map(|m| (d, m)))
            .and_then(|(d, m)| write_run(&sub, &cfg, &d, &m, row.amplitude, out, svg));
        if let Err(e) = res {
            warn!("could not write {}: {e}", sub.display());
        }
    };
    let res = sweep_levels_with(&plan, &scfg, on_run)?;
    write_text(&dir.join("sweep.csv"), &res.to_csv())?;
    match detect_jump(&res) {
        Ok(j) => write_text(&dir.join("jump.json"), &j.to_json())?,
        Err(e) => warn!("no jump report: {e}"),
    }
    let bad = res.rows.iter().filter(|r| !r.usable()).count();
    info!("{} runs, {} without steady state, results in {}", res.rows.len(), bad, dir.display());
    if bad == 0 {
        Ok(())
    } else {
        Err(Failure::Solver(format!("{bad} sweep runs did not reach a steady state")))
    }
}

fn refine(c: &Common) -> Result<(), Failure> {
    let (cfg, dir) = load(c)?;
    let a = single(&cfg.amplitudes()?, "A_list")?;
    let b = cfg.boundary(a)?;
    let r = refine_ladder(cfg.theta, cfg.layout, &b, &cfg.solver_config(), cfg.lambda1, cfg.lambda2, cfg.q, &cfg.meshes(), cfg.tol_ref)?;
    write_text(&dir.join("refine.csv"), &r.to_csv())?;
    match r.converged_at {
        Some(k) => info!("energy converged at n = {}", r.levels[k].n),
        None => info!("energy not converged to tol_ref = {}", cfg.tol_ref),
    }
    if r.levels.iter().all(|l| l.converged) {
        Ok(())
    } else {
        Err(Failure::Solver("a ladder level did not reach a steady state".into()))
    }
}

fn diagnose(path: &Path, config: Option<&Path>, check: Check, out: Option<&Path>) -> Result<(), Failure> {
    let (f, meta) = load_checkpoint(path)?;
    let d = Domain::with_layout(meta.theta, meta.n, meta.layout)?;
    let run_cfg = config.map(load_config).transpose()?;
    let mut scfg = run_cfg.as_ref().map(RunConfig::solver_config).unwrap_or_default();
    scfg.slave_factor = meta.epsilon / meta.h;
    let m = PhaseModel::new(meta.lambda1, meta.lambda2, meta.epsilon)?;
    let q = match &run_cfg {
        Some(c) => c.q_field(&d)?,
        None => CoefficientField::ones(&d),
    };
    let records = run_checks(&f, &d, &scfg, &m, &q, check, &format!("n={} A={}", meta.n, meta.amplitude))?;
    let csv = report_csv(&records);
    match out {
        Some(dir) => write_text(&dir.join("diagnostics.csv"), &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_checks(
    f: &Field<f64>,
    d: &Domain<f64>,
    cfg: &SolverConfig<f64>,
    m: &PhaseModel<f64>,
    q: &CoefficientField<f64>,
    check: Check,
    params: &str,
) -> Result<Vec<DiagnosticRecord>, Error> {
    let fb = extract_zero_contour(f, d)?;
    let h = d.h();
    let want = |c: Check| check == Check::All || check == c;
    let rec = |name: &str, value: f64, tolerance: f64, pass: bool| DiagnosticRecord {
        check: name.into(),
        parameters: params.into(),
        value,
        tolerance,
        pass,
    };
    let mut out = Vec::new();
    if want(Check::Monotonicity) {
        match select_terminal(&fb, d) {
            Ok((t, _)) => {
                let center = nearest_neumann_node(d, t.point);
                let reach = 0.9 * d.distance_to_dirichlet(center);
                let r0 = 5.0 * h;
                if reach > r0 {
                    let radii: Vec<f64> = (0..6).map(|k| r0 + (reach - r0) * k as f64 / 5.0).collect();
                    let probe = monotonicity_phi(f, d, center, &radii)?;
                    let slack = 5.0 * h / r0;
                    out.push(rec("monotonicity", probe.max_relative_drop(), slack, probe.is_nondecreasing(slack)));
                } else {
                    warn!("terminal is too close to S for the monotonicity probe");
                }
            }
            Err(_) => warn!("no terminal on N: monotonicity probe skipped"),
        }
    }
    if want(Check::Jump) {
        match gradient_jump_residual(f, d, &fb, q, m, 3.0)?.median_abs() {
            Some(v) => out.push(rec("jump", v, 0.1, v <= 0.1)),
            None => warn!("no contour vertex far enough from the boundary for the jump check"),
        }
    }
    if want(Check::Angle) {
        match intersection_angle(&fb, d) {
            Ok(angles) => {
                let worst = angles.iter().map(|a| (a.degrees - 90.0).abs()).fold(0.0, f64::max);
                out.push(rec("angle", worst, 5.0, worst <= 5.0));
            }
            Err(e) => warn!("angle check skipped: {e}"),
        }
    }
    if want(Check::Neumann) {
        let r = neumann_residual(f, d, cfg, Some((m, q)))?;
        let tol = 10.0 * cfg.lin_tol * f.max_abs() / h;
        out.push(rec("neumann", r.max, tol, r.max <= tol));
    }
    if want(Check::Gradient) {
        let g = max_gradient_where(f, d, away_from_layer(d, &fb, 3.0 * h));
        out.push(rec("gradient", g, f64::INFINITY, g.is_finite()));
    }
    Ok(out)
}

fn nearest_neumann_node(d: &Domain<f64>, p: (f64, f64)) -> (f64, f64) {
    let n = d.n();
    let mut best = (f64::INFINITY, p);
    for j in 0..=n {
        for i in 0..=n {
            if d.kind(i, j).is_neumann() {
                let q = d.node_physical(i, j);
                let dist = (q.0 - p.0).hypot(q.1 - p.1);
                if dist < best.0 {
                    best = (dist, q);
                }
            }
        }
    }
    best.1
}
