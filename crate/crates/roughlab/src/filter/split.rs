use serde::{Deserialize, Serialize};

use super::model::FilterModel;
use crate::error::{Error, Result};
use crate::noise::MarkedEventStream;
use crate::roughpath::{GridPath, RoughPath};
use crate::{GridPath64, RoughPath64};

/// Threshold detection scored against the simulated event record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub true_events: usize,
    pub detected: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub missed: usize,
    pub recall: f64,
    pub precision: f64,
    /// Every true event found and nothing else.
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct SplitObservation {
    pub cutoff: f64,
    /// `Y - Y_0 - Y^d`.
    pub y_c: GridPath64,
    /// Super-threshold increments minus the compensator `∫∫ f3 dν2 ds`.
    pub y_d: GridPath64,
    /// Itô lift of `(Y^c, Y^d)`.
    pub lift: RoughPath64,
    /// Times of the increments classified as jumps.
    pub jump_times: Vec<f64>,
    pub detection: Option<DetectionReport>,
}

/// Splits an additive observation into continuous and compensated jump parts by
/// thresholding increments at `cutoff`.
pub fn split_observation(
    model: &FilterModel,
    y: &GridPath64,
    cutoff: f64,
    truth: Option<&MarkedEventStream>,
) -> Result<SplitObservation> {
    if !model.additive_observation {
        return Err(Error::UnsupportedMode(
            "jump splitting needs an observation with state-independent jump coefficient".into(),
        ));
    }
    let (dy, k3) = (model.dy, model.k3);
    if y.dim() != dy {
        return Err(crate::error::invalid("y", "dimension differs from the model's"));
    }
    let grid = y.grid();
    let n = grid.len();
    let mut yd = vec![0.0; n * dy];
    let mut h3 = vec![0.0; dy * k3];
    let mut g3 = vec![0.0; k3];
    let mut comp = vec![0.0; dy];
    let mut jump_times = Vec::new();
    for k in 0..grid.cells() {
        let (t, t1) = (grid.time(k), grid.time(k + 1));
        let dt = t1 - t;
        comp.fill(0.0);
        (model.h3)(t, &model.y0, &mut h3);
        for a in &model.nu2.atoms {
            (model.g3)(t, &a.mark, &mut g3);
            for i in 0..dy {
                for j in 0..k3 {
                    comp[i] += a.weight * h3[i * k3 + j] * g3[j];
                }
            }
        }
        let inc = y.increment(k, k + 1);
        let size = inc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let is_jump = size > cutoff;
        if is_jump {
            jump_times.push(t1);
        }
        for i in 0..dy {
            let mut v = yd[k * dy + i] - comp[i] * dt;
            if is_jump {
                v += inc[i];
            }
            yd[(k + 1) * dy + i] = v;
        }
    }
    let y_d = GridPath64::new(grid.clone(), dy, yd)?;
    let y0 = y.value(0).to_vec();
    let y_c = GridPath::from_rows(
        grid.clone(),
        &(0..n)
            .map(|i| (0..dy).map(|c| y.value(i)[c] - y0[c] - y_d.value(i)[c]).collect())
            .collect::<Vec<Vec<f64>>>(),
    )?;
    let lift = RoughPath::ito_lift(&GridPath::stack(&[&y_c, &y_d])?);
    let detection = truth.map(|ev| {
        let truth_times = ev.times();
        let tp = jump_times.iter().filter(|t| truth_times.contains(t)).count();
        let fp = jump_times.len() - tp;
        DetectionReport {
            true_events: truth_times.len(),
            detected: jump_times.len(),
            true_positives: tp,
            false_positives: fp,
            missed: truth_times.len() - tp,
            recall: if truth_times.is_empty() { 1.0 } else { tp as f64 / truth_times.len() as f64 },
            precision: if jump_times.is_empty() { 1.0 } else { tp as f64 / jump_times.len() as f64 },
            exact: tp == truth_times.len() && fp == 0,
        }
    });
    Ok(SplitObservation {
        cutoff,
        y_c,
        y_d,
        lift,
        jump_times,
        detection,
    })
}

/// [`split_observation`] at cutoffs `1/n` for each `n`.
pub fn split_observation_sequence(
    model: &FilterModel,
    y: &GridPath64,
    ns: &[usize],
    truth: Option<&MarkedEventStream>,
) -> Result<Vec<SplitObservation>> {
    ns.iter()
        .map(|&n| split_observation(model, y, 1.0 / n as f64, truth))
        .collect()
}
