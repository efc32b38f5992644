//! Relaxed gradient-flow solver for a two-phase free boundary problem on
//! parallelograms with mixed Dirichlet and Neumann sides.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the scalar to `f64`, which is what the
//! experiment drivers and file formats use.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod field;
pub mod freeboundary;
pub mod geometry;
pub mod io;
pub mod phase;
pub mod scalar;
pub mod solver;

pub use diagnostics::{gradient_jump_residual, intersection_angle, monotonicity_phi, neumann_residual, sector_bound};
pub use energy::{energy_relaxed, energy_sharp, gradient_sq, EnergyFunctional, PotentialRule};
pub use error::{Error, Result};
pub use experiments::{detect_jump, forbidden_region, refine_ladder, sweep_amplitude, JumpReport, SweepResult};
pub use field::{CoefficientField, Field};
pub use freeboundary::{extract_zero_contour, terminal_point_arclength, EdgeTag, FreeBoundary};
pub use geometry::{BoundaryLayout, Domain, NodeKind, OperatorCoefficients, Side};
pub use io::{load_checkpoint, load_config, render_svg, save_checkpoint, CheckpointMeta, RunConfig};
pub use phase::PhaseModel;
pub use scalar::Real;
pub use solver::{
    residual_el, run_to_steady_state, step, BoundaryData, EnergyTrace, GradientFlow, NeumannClosure, RunOutcome,
    SolverConfig,
};

pub type Domain64 = Domain<f64>;
pub type Field64 = Field<f64>;
pub type CoefficientField64 = CoefficientField<f64>;
pub type PhaseModel64 = PhaseModel<f64>;
pub type BoundaryData64 = BoundaryData<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type FreeBoundary64 = FreeBoundary<f64>;
pub type Domain32 = Domain<f32>;
pub type Field32 = Field<f32>;
