//! Simulator and measurement toolkit for the random lattice reversible
//! Selkov system: implicit backward Euler-Maruyama time stepping on the
//! integer lattice, numerical invariant measures by time averaging, and
//! bounded-Lipschitz distances between the resulting empirical measures.

pub mod error;
pub mod field;
pub mod linalg;
pub mod measure;
pub mod noise;
pub mod ops;
pub mod opscheck;
pub mod params;
pub mod pool;
pub mod report;
pub mod scheme;
pub mod stats;
pub mod study;

pub use error::{CoreError, Result};
pub use field::{Boundary, LatticeField, PairState, WeightedGeometry};
pub use measure::{bl_distance, krylov_bogolyubov_measure, BlDistanceResult, BlMethod, EmpiricalMeasure};
pub use noise::{NoiseCoefficient, NoiseStream, SigmaFamily};
pub use params::ModelParams;
pub use scheme::{
    assemble_rhs, bem_step, implicit_operator, jacobian, simulate_coupled_pair,
    simulate_trajectory, solve_implicit, RightHandSide, SchemeConfig, SchemeContext,
    StepDiagnostics, Trajectory,
};
pub use study::{
    check_moment_bound, check_tail_bound, double_limit_study, dt_refinement_study,
    invariant_measure, n_refinement_study, CoupledGapProbe, MeasureProtocol, MomentReport,
    StudyReport, StudyRow, TailReport,
};
