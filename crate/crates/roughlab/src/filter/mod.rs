//! Monte Carlo robust filter for jump-diffusion signal-observation models.
//!
//! Each particle solves the rough SDE for `(X, Y)` driven by the lifted observation
//! `G` together with the log-likelihood `I = I¹ + I²`; the filter is the weighted
//! ratio `Θ^F = E[F exp(I)] / E[exp(I)]`.

mod model;
mod observation;
mod particles;
mod robustness;
mod split;

pub use model::{
    FilterModel, GammaField, InitialLaw, KappaField, MarkField, TestFunction, XyField, XyJumpField, YField, FD_STEP,
};
pub use observation::{
    observation_from_driver, simulate_observation, simulate_signal_and_observation, y_from_driver,
    ObservationMeasure, ObservationRealization,
};
pub use particles::{
    oracle_filter, robust_filter, run_route, CheckpointEstimate, FilterOptions, FilterRun, ParticleRecord, Route,
    NORMALIZATION_FLOOR,
};
pub use robustness::{
    bump_direction, dyadic_coarsening, measure_change_check, model_uncertainty_lm, reparametrization_gap,
    robustness_pvar, scaled_brownian_block, LmReport, LmSpec, MartingaleCheck, MartingalePoint, ObservationSampler,
    ReparametrizationReport, RobustnessReport, RobustnessRow,
};
pub use split::{split_observation, split_observation_sequence, DetectionReport, SplitObservation};
