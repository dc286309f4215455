use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::{invalid, Error, Result};
use crate::roughpath::fmt17;
use crate::{GridPath64, TimeGrid64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub weight: f64,
}

/// Finite mark measure `ν = Σ w_a δ_{u_a}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct MarkMeasure {
    pub atoms: Vec<Atom>,
}

impl MarkMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms.first().map(|a| a.mark.len()).unwrap_or(0);
        for a in &atoms {
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(invalid("weight", format!("atom weight {} not finite nonnegative", a.weight)));
            }
            if a.mark.len() != dim {
                return Err(invalid("mark", "atoms of different dimension"));
            }
        }
        Ok(Self { atoms })
    }

    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    /// Convenience for scalar marks.
    pub fn scalar(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(u, w)| Atom {
                    mark: vec![u],
                    weight: w,
                })
                .collect(),
        )
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mark_dim(&self) -> usize {
        self.atoms.first().map(|a| a.mark.len()).unwrap_or(0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    mark: a.mark.clone(),
                    weight: a.weight * c,
                })
                .collect(),
        }
    }

    /// Draw a mark from `ν / ν(U)`.
    pub fn sample_mark<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let total = self.total_mass();
        let mut u = rng.gen::<f64>() * total;
        for a in &self.atoms {
            if u < a.weight {
                return a.mark.clone();
            }
            u -= a.weight;
        }
        self.atoms
            .iter()
            .rev()
            .find(|a| a.weight > 0.0)
            .expect("positive mass")
            .mark
            .clone()
    }
}

pub type IntensityFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// State-dependent intensity `λ(t, x, u)` with declared bounds.
#[derive(Clone)]
pub struct Intensity {
    pub func: IntensityFn,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl std::fmt::Debug for Intensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Intensity")
            .field("lambda_min", &self.lambda_min)
            .field("lambda_max", &self.lambda_max)
            .finish()
    }
}

impl Intensity {
    pub fn new(func: IntensityFn, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !lambda_max.is_finite() {
            return Err(invalid("intensity", "need 0 < lambda_min <= lambda_max < inf"));
        }
        Ok(Self {
            func,
            lambda_min,
            lambda_max,
        })
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        (self.func)(t, x, u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub mark: Vec<f64>,
}

/// Sorted marked events with their compensator `λ(t, x, u) ν(du) dt`.
#[derive(Clone, Debug)]
pub struct MarkedEventStream {
    pub horizon: f64,
    pub events: Vec<Event>,
    pub measure: MarkMeasure,
    pub intensity: Option<Intensity>,
    /// Events removed by thinning, kept for export.
    pub rejected: Vec<Event>,
}

impl MarkedEventStream {
    pub fn empty(horizon: f64, measure: MarkMeasure) -> Self {
        Self {
            horizon,
            events: Vec::new(),
            measure,
            intensity: None,
            rejected: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Grid with all event times inserted.
    pub fn insert_into(&self, grid: &TimeGrid64) -> Result<TimeGrid64> {
        grid.with_times(&self.times())
    }

    /// Error if some event time is not a grid point.
    pub fn check_grid(&self, grid: &TimeGrid64) -> Result<()> {
        for e in &self.events {
            if grid.position(e.time).is_none() {
                return Err(Error::GridContract { time: e.time });
            }
        }
        Ok(())
    }

    /// Intensity at `(t, x, u)`, 1 when the stream has none.
    pub fn rate(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        self.intensity.as_ref().map_or(1.0, |i| i.eval(t, x, u))
    }

    /// Events sitting exactly at grid index `k`, as a slice range, given a cursor.
    pub(crate) fn at_time(&self, cursor: &mut usize, t: f64) -> std::ops::Range<usize> {
        let start = *cursor;
        while *cursor < self.events.len() && self.events[*cursor].time <= t {
            *cursor += 1;
        }
        start..*cursor
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.measure != other.measure || self.horizon != other.horizon {
            return Err(invalid("events", "cannot merge streams with different compensators"));
        }
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        Ok(Self {
            horizon: self.horizon,
            events,
            measure: self.measure.clone(),
            intensity: self.intensity.clone(),
            rejected: Vec::new(),
        })
    }
}

/// Count `~ Poisson(ν(U) T)`, times uniform on `(0, T]`, marks iid from `ν / ν(U)`.
pub fn sample_poisson_measure(stream: &RngStream, grid: &TimeGrid64, nu: &MarkMeasure) -> MarkedEventStream {
    let horizon = grid.horizon();
    let mass = nu.total_mass() * horizon;
    let mut out = MarkedEventStream::empty(horizon, nu.clone());
    if mass <= 0.0 {
        return out;
    }
    let mut rng = stream.rng();
    let count = Poisson::new(mass).expect("positive mean").sample(&mut rng) as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| horizon * (1.0 - rng.gen::<f64>()))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    out.events = times
        .into_iter()
        .map(|time| Event {
            time,
            mark: nu.sample_mark(&mut rng),
        })
        .collect();
    out
}

/// `x(t-)`: the value just before `t`.
pub fn left_limit_at(path: &GridPath64, t: f64) -> &[f64] {
    let g = path.grid();
    let i = g.index_at(t);
    if g.time(i) == t {
        path.left_limit(i)
    } else {
        path.value(i)
    }
}

/// Keep each base event with probability `λ(t, x(t-), u) / λ_max`.
///
/// `base` must have been sampled from `λ_max ν`; the result carries compensator
/// `λ(t, x(t-), u) ν(du) dt`.
pub fn thin_by_intensity(
    base: &MarkedEventStream,
    intensity: &Intensity,
    x_path: &GridPath64,
    stream: &RngStream,
) -> Result<MarkedEventStream> {
    let mut rng = stream.rng();
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for e in &base.events {
        let lam = intensity.eval(e.time, left_limit_at(x_path, e.time), &e.mark);
        if !(lam <= intensity.lambda_max * (1.0 + 1e-12)) || !(lam >= intensity.lambda_min * (1.0 - 1e-12)) {
            return Err(Error::IntensityBoundViolation {
                time: e.time,
                value: lam,
                bound: if lam > intensity.lambda_max {
                    intensity.lambda_max
                } else {
                    intensity.lambda_min
                },
            });
        }
        let u: f64 = rng.gen();
        if u * intensity.lambda_max < lam {
            kept.push(e.clone());
        } else {
            rejected.push(e.clone());
        }
    }
    Ok(MarkedEventStream {
        horizon: base.horizon,
        events: kept,
        measure: base.measure.scaled(1.0 / intensity.lambda_max),
        intensity: Some(intensity.clone()),
        rejected,
    })
}

/// `Σ_{τ <= t} g(τ, x(τ-), u) - ∫_0^t ∫ g(s, x(s-), u) λ(s, x(s-), u) ν(du) ds`.
///
/// The time integral uses left-point quadrature on `grid`, the mark integral is the
/// exact atom sum. `grid` must contain every event time.
pub fn compensated_integral(
    events: &MarkedEventStream,
    integrand: &dyn Fn(f64, &[f64], &[f64]) -> Vec<f64>,
    out_dim: usize,
    state_path: &GridPath64,
    grid: &TimeGrid64,
) -> Result<GridPath64> {
    events.check_grid(grid)?;
    let n = grid.len();
    let mut values = vec![0.0; n * out_dim];
    let mut cursor = 0usize;
    for k in 0..grid.cells() {
        let (t, t1) = (grid.time(k), grid.time(k + 1));
        let dt = t1 - t;
        let x = state_path.eval(t);
        let mut acc: Vec<f64> = values[k * out_dim..(k + 1) * out_dim].to_vec();
        for a in &events.measure.atoms {
            let w = a.weight * events.rate(t, x, &a.mark) * dt;
            let g = integrand(t, x, &a.mark);
            for c in 0..out_dim {
                acc[c] -= w * g[c];
            }
        }
        for e in &events.events[events.at_time(&mut cursor, t1)] {
            let g = integrand(e.time, left_limit_at(state_path, e.time), &e.mark);
            for c in 0..out_dim {
                acc[c] += g[c];
            }
        }
        values[(k + 1) * out_dim..(k + 2) * out_dim].copy_from_slice(&acc);
    }
    GridPath64::new(grid.clone(), out_dim, values)
}

/// `time,u0,...,kept` with kept events first in time order, then rejected ones.
pub fn events_to_csv(stream: &MarkedEventStream) -> String {
    let dim = stream.measure.mark_dim();
    let mut out = String::from("time");
    for c in 0..dim {
        let _ = write!(out, ",u{}", c);
    }
    out.push_str(",kept\n");
    let mut rows: Vec<(&Event, bool)> = stream
        .events
        .iter()
        .map(|e| (e, true))
        .chain(stream.rejected.iter().map(|e| (e, false)))
        .collect();
    rows.sort_by(|a, b| a.0.time.partial_cmp(&b.0.time).unwrap());
    for (e, kept) in rows {
        out.push_str(&fmt17(e.time));
        for u in &e.mark {
            out.push(',');
            out.push_str(&fmt17(*u));
        }
        let _ = writeln!(out, ",{}", kept as u8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> TimeGrid64 {
        TimeGrid64::uniform(1.0, 10).unwrap()
    }

    #[test]
    fn empty_measure_gives_no_events() {
        let s = sample_poisson_measure(&RngStream::new(1), &unit_grid(), &MarkMeasure::empty());
        assert!(s.is_empty());
    }

    #[test]
    fn single_event_hand_computation() {
        let nu = MarkMeasure::scalar(&[(2.0, 0.5)]).unwrap();
        let mut s = MarkedEventStream::empty(1.0, nu);
        s.events.push(Event {
            time: 0.35,
            mark: vec![2.0],
        });
        let grid = s.insert_into(&unit_grid()).unwrap();
        let zero = GridPath64::zeros(grid.clone(), 1);
        let path = compensated_integral(&s, &|_, _, u| vec![u[0]], 1, &zero, &grid).unwrap();
        // Compensator slope is 2 * 0.5 = 1.
        let i = grid.position(0.35).unwrap();
        assert!((path.value(i - 1)[0] + 0.3).abs() < 1e-15);
        assert!((path.value(i)[0] - (2.0 - 0.35)).abs() < 1e-15);
        assert!((path.last()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_event_time_is_a_contract_violation() {
        let nu = MarkMeasure::scalar(&[(1.0, 1.0)]).unwrap();
        let mut s = MarkedEventStream::empty(1.0, nu);
        s.events.push(Event {
            time: 0.33,
            mark: vec![1.0],
        });
        let g = unit_grid();
        let zero = GridPath64::zeros(g.clone(), 1);
        let err = compensated_integral(&s, &|_, _, _| vec![1.0], 1, &zero, &g).unwrap_err();
        assert_eq!(err, Error::GridContract { time: 0.33 });
    }

    #[test]
    fn thinning_at_max_keeps_all_and_checks_bounds() {
        let nu = MarkMeasure::scalar(&[(1.0, 3.0)]).unwrap();
        let base = sample_poisson_measure(&RngStream::new(4), &unit_grid(), &nu.scaled(2.0));
        let x = GridPath64::zeros(unit_grid(), 1);
        let full = Intensity::new(Arc::new(|_, _, _| 2.0), 1.0, 2.0).unwrap();
        let kept = thin_by_intensity(&base, &full, &x, &RngStream::new(5)).unwrap();
        assert_eq!(kept.events, base.events);
        let bad = Intensity::new(Arc::new(|_, _, _| 3.0), 1.0, 2.0).unwrap();
        if !base.is_empty() {
            assert!(matches!(
                thin_by_intensity(&base, &bad, &x, &RngStream::new(5)),
                Err(Error::IntensityBoundViolation { .. })
            ));
        }
    }
}
