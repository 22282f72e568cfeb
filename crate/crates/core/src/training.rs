//! Full-batch Adam training, finite-difference gradient checks and checkpoint files.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::losses::{loss, LossConfig, NetworkObjective};
use crate::network::{read_f64s, read_header, write_f64s, write_header};
use crate::problems::PdeProblem;

/// Loss growth over the initial value that aborts training.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Loss history stride.
    pub record_every: usize,
    /// Stride of checkpoint callbacks (step 0 and the final step always fire).
    pub checkpoint_every: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            steps: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            record_every: 1,
            checkpoint_every: 500,
        }
    }
}

impl Schedule {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(Error::InvalidArgument(
                "Adam needs beta1, beta2 in [0, 1) and epsilon > 0".into(),
            ));
        }
        if self.record_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::InvalidArgument(
                "record and checkpoint strides must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub step: usize,
    pub params: Vec<f64>,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// `(step, loss)`, steps strictly increasing.
    pub history: Vec<(usize, f64)>,
    pub seed: u64,
}

impl TrainState {
    pub fn new(params: Vec<f64>, seed: u64) -> Self {
        let n = params.len();
        TrainState {
            step: 0,
            params,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            history: Vec::new(),
            seed,
        }
    }

    /// Loss history as `step,loss` CSV.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (s, l) in &self.history {
            out.push_str(&format!("{s},{l}\n"));
        }
        out
    }
}

/// Snapshot handed to the checkpoint callback.
#[derive(Debug)]
pub struct Checkpoint<'a> {
    pub step: usize,
    pub loss: f64,
    pub params: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Ansatz with the lowest-loss parameters seen.
    pub best: AnsatzSpec,
    pub best_loss: f64,
    pub best_step: usize,
}

pub fn train(
    spec: &AnsatzSpec,
    problem: &PdeProblem,
    cfg: &LossConfig,
    schedule: &Schedule,
) -> Result<TrainOutcome> {
    train_with(spec, problem, cfg, schedule, |_| Ok(()))
}

/// Trains with a callback at every checkpoint step.
pub fn train_with<F>(
    spec: &AnsatzSpec,
    problem: &PdeProblem,
    cfg: &LossConfig,
    schedule: &Schedule,
    mut on_checkpoint: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Checkpoint<'_>) -> Result<()>,
{
    schedule.validate()?;
    let objective = NetworkObjective::new(spec, problem, cfg)?;
    let mut state = TrainState::new(spec.params.flatten(), schedule.seed);
    let mut limit = f64::INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut best_params = state.params.clone();
    let mut best_step = 0;

    for step in 0..=schedule.steps {
        state.step = step;
        let last = step == schedule.steps;
        let (value, grad) = if last {
            (objective.value(&state.params)?, Vec::new())
        } else {
            objective.value_and_grad(&state.params)?
        };
        if step == 0 {
            limit = DIVERGENCE_FACTOR * value.max(f64::MIN_POSITIVE);
        }
        if !value.is_finite() || value > limit {
            return Err(Error::Divergence {
                step,
                loss: value,
                limit,
            });
        }
        if value < best_loss {
            best_loss = value;
            best_params.copy_from_slice(&state.params);
            best_step = step;
        }
        if step % schedule.record_every == 0 || last {
            state.history.push((step, value));
        }
        if step % schedule.checkpoint_every == 0 || last {
            on_checkpoint(&Checkpoint {
                step,
                loss: value,
                params: &state.params,
            })?;
        }
        if last {
            break;
        }
        adam_update(&mut state, &grad, schedule, step + 1);
    }

    Ok(TrainOutcome {
        best: spec.with_flat(&best_params)?,
        state,
        best_loss,
        best_step,
    })
}

fn adam_update(state: &mut TrainState, grad: &[f64], s: &Schedule, t: usize) {
    let c1 = 1.0 - s.beta1.powi(t as i32);
    let c2 = 1.0 - s.beta2.powi(t as i32);
    for (((p, m), v), g) in state
        .params
        .iter_mut()
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
        .zip(grad)
    {
        *m = s.beta1 * *m + (1.0 - s.beta1) * g;
        *v = s.beta2 * *v + (1.0 - s.beta2) * g * g;
        *p -= s.learning_rate * (*m / c1) / ((*v / c2).sqrt() + s.epsilon);
    }
}

/// Exact gradient of the loss selected by `cfg` with respect to the network parameters.
pub fn loss_gradient(
    spec: &AnsatzSpec,
    problem: &PdeProblem,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    let objective = NetworkObjective::new(spec, problem, cfg)?;
    Ok(objective.value_and_grad(spec.params.as_flat())?.1)
}

/// Below this gradient magnitude the check switches to an absolute criterion.
pub const FD_NEAR_ZERO: f64 = 1e-3;
pub const FD_RELATIVE_TOL: f64 = 1e-5;
pub const FD_ABSOLUTE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl FdEntry {
    pub fn near_zero(&self) -> bool {
        self.analytic.abs().max(self.numeric.abs()) < FD_NEAR_ZERO
    }

    pub fn abs_error(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    pub fn rel_error(&self) -> f64 {
        self.abs_error() / self.analytic.abs().max(self.numeric.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    /// Largest relative discrepancy among coordinates with a non-negligible gradient.
    pub max_relative: f64,
    /// Largest absolute discrepancy among near-zero gradient coordinates.
    pub max_absolute: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_relative < FD_RELATIVE_TOL && self.max_absolute < FD_ABSOLUTE_TOL
    }
}

/// Compares the analytic gradient with fourth-order central differences of
/// the loss value on `n_coords` randomly chosen coordinates. The loss values
/// are taken from the generic field evaluation path, not the cached network
/// path the gradient uses.
pub fn fd_check(
    spec: &AnsatzSpec,
    problem: &PdeProblem,
    cfg: &LossConfig,
    n_coords: usize,
    seed: u64,
) -> Result<FdReport> {
    let theta = spec.params.flatten();
    if n_coords > theta.len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {n_coords} coordinates of a {}-parameter network",
            theta.len()
        )));
    }
    let grad = loss_gradient(spec, problem, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, theta.len(), n_coords).into_vec();
    indices.sort_unstable();
    let eval = |i: usize, delta: f64| -> Result<f64> {
        let mut t = theta.clone();
        t[i] += delta;
        loss(&spec.with_flat(&t)?, problem, cfg)
    };
    let mut entries = Vec::with_capacity(n_coords);
    for i in indices {
        let h = 1e-4 * (1.0 + theta[i].abs());
        let numeric = (-eval(i, 2.0 * h)? + 8.0 * eval(i, h)? - 8.0 * eval(i, -h)?
            + eval(i, -2.0 * h)?)
            / (12.0 * h);
        entries.push(FdEntry {
            index: i,
            analytic: grad[i],
            numeric,
        });
    }
    let max_relative = entries
        .iter()
        .filter(|e| !e.near_zero())
        .map(FdEntry::rel_error)
        .fold(0.0, f64::max);
    let max_absolute = entries
        .iter()
        .filter(|e| e.near_zero())
        .map(FdEntry::abs_error)
        .fold(0.0, f64::max);
    Ok(FdReport {
        entries,
        max_relative,
        max_absolute,
    })
}

/// Writes a checkpoint: the parameter header (with `step` and section names)
/// followed by parameters, first moments and second moments as little-endian f64.
pub fn write_checkpoint<W: Write>(mut w: W, spec: &AnsatzSpec, state: &TrainState) -> Result<()> {
    let extra = vec![
        ("step".to_string(), state.step.to_string()),
        ("train_seed".to_string(), state.seed.to_string()),
        (
            "sections".to_string(),
            "params,first_moment,second_moment".to_string(),
        ),
    ];
    write_header(&mut w, spec.params.widths(), spec.params.seed(), &extra)?;
    write_f64s(&mut w, &state.params)?;
    write_f64s(&mut w, &state.first_moment)?;
    write_f64s(&mut w, &state.second_moment)?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`]; the loss history is not stored.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Vec<usize>, TrainState)> {
    let header = read_header(&mut r)?;
    let lookup = |key: &str| {
        header
            .extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Format(format!("checkpoint lacks {key}")))
    };
    let step = lookup("step")?
        .parse()
        .map_err(|_| Error::Format("bad step".into()))?;
    let seed = lookup("train_seed")?
        .parse()
        .map_err(|_| Error::Format("bad train_seed".into()))?;
    let params = read_f64s(&mut r, header.count)?;
    let first_moment = read_f64s(&mut r, header.count)?;
    let second_moment = read_f64s(&mut r, header.count)?;
    Ok((
        header.widths,
        TrainState {
            step,
            params,
            first_moment,
            second_moment,
            history: Vec::new(),
            seed,
        },
    ))
}
