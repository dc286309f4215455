//! Reproducible Brownian and marked Poisson drivers.

mod brownian;
mod poisson;
mod rng;

pub use brownian::{sample_brownian, sample_brownian_with_max, MartingaleSample};
pub use poisson::{
    compensated_integral, events_to_csv, left_limit_at, sample_poisson_measure, thin_by_intensity,
    Atom, Event, Intensity, IntensityFn, MarkMeasure, MarkedEventStream,
};
pub use rng::RngStream;
