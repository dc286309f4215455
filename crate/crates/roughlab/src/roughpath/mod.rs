//! Piecewise-constant càdlàg paths, level-2 rough paths, p-variation, time changes.

mod control;
mod grid;
mod io;
mod path;
mod pvar;
mod rough;
mod timechange;

pub use control::{Control, GridControl};
pub use grid::TimeGrid;
pub use io::{fmt17, path_from_csv, path_to_csv, Provenance, RoughPathEnvelope};
pub use path::GridPath;
pub use pvar::{
    coarsen, p_variation, p_variation_partition, pvar_all_windows, pvar_dp, rough_distance,
    rough_norm, rough_norm_pow, Closure, IncrementDiff, Increments, Level2, Level2Diff,
    PVarSolution, Table, TwoParam, Window,
};
pub use rough::{ChenSweep, RoughPath};
pub use timechange::{
    apply_time_change, skorokhod_distance_upper, skorokhod_objective, SkorokhodBound,
    SkorokhodSearch, TimeChange,
};

use crate::error::Result;
use crate::scalar::Scalar;

pub fn ito_lift<S: Scalar>(path: &GridPath<S>) -> RoughPath<S> {
    RoughPath::ito_lift(path)
}

pub fn chen_reconstruct<S: Scalar>(rp: &RoughPath<S>, i: usize, j: usize) -> Result<Vec<S>> {
    rp.chen_reconstruct(i, j)
}

pub fn slice_rough_path<S: Scalar>(rp: &RoughPath<S>, tau1: S, tau2: S) -> Result<RoughPath<S>> {
    rp.slice(tau1, tau2)
}

pub fn jump_profile<S: Scalar>(rp: &RoughPath<S>) -> Vec<(S, S, S)> {
    rp.jump_profile()
}
