//! Generalized hydrodynamics through its fixed-point formulation.
//!
//! The solution at `(t, x)` is obtained from the seed occupation `n₀` by
//! iterating the contracting map `X̂ ↦ x + T̂N̂₀(X̂ − v t)`; see [`Solver`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod dressing;
pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod kernel;
pub mod reference;
pub mod scenario;
pub mod seed;

pub use diagnostics::{
    check_assumptions, conserved_charge, entropy, weak_form_residual, weak_form_residuals, AssumptionReport,
    ConservationSeries, NamedFunction, Rectangle, WeakFormResult,
};
pub use dressing::{check_1dr_bounds, compute_r, DressingBounds, DressingMethod, DressingProblem};
pub use error::{GhdError, Result};
pub use fixed_point::{DerivativeCheck, Solver, SolverConfig, StateSlice, Sweep, WarmStart};
pub use grid::{GridFunction, MomentumGrid, QuadratureRule};
pub use kernel::{KernelModel, KernelOperator, ScatteringKernel, SignClass, TabulatedKernel, Velocity, VelocityFn};
pub use reference::{convergence_study, l1_gap, Boundary, ConvergenceStudy, FieldState, UpwindSolver};
pub use scenario::{Profile, Scenario, ScenarioKind, TabulatedXY};
pub use seed::{build_seed, SeedGridSpec, SeedTables};
