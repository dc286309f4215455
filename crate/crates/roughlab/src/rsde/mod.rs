//! Rough stochastic integration and rough SDEs with jumps.

mod coeffs;
mod experiments;
mod integral;
mod norms;
mod solver;

pub use coeffs::{CoefficientBounds, CoefficientSet, Field, JumpField};
pub use experiments::{
    consistency_check, jump_moment_check, skorokhod_convergence_experiment, skorokhod_counterexample,
    stability_experiment, stability_table, ConsistencyLevel, ConsistencyReport, ConsistencySpec,
    DeterministicJump, EnsembleSpec, JumpMomentReport, NoiseSpec, SkorokhodPoint, SkorokhodReport,
    SkorokhodSpec, StabilityReport, StabilityRow, StabilitySpec,
};
pub use integral::rough_stochastic_integral;
pub use norms::{ensemble_norms, ensemble_pq_seminorm, EnsembleNorms, MomentOrder};
pub use solver::{
    solve_doubly_sde, solve_doubly_sde_with, solve_rsde, solve_rsde_with, ControlledSolution,
    DyadicLevelDiag, SolverOptions,
};
