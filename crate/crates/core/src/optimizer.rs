//! Alternating optimizer: closed-form relation weights, then a full-batch
//! gradient ascent step on `P`, `Q`, `B`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::hetgraph::HeteroGraph;
use crate::model::{self, Gradients, ModelParams, TrainConfig};
use crate::sampler::SampleSet;
use crate::seed;

/// Halvings tried by the backtracking search before a step is declared stalled.
pub const MAX_HALVINGS: usize = 30;
/// Quiet epochs in a row needed to stop early.
pub const CONVERGENCE_PATIENCE: usize = 5;

/// Relation weights minimizing `sum_r w_r L_r` subject to `prod_r w_r = 1`:
/// `w_r = (prod_s L_s)^(1/R) / L_r`, evaluated in log space.
pub fn update_weights(losses: &[f64]) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::Validation("no relation losses".into()));
    }
    for (relation, &loss) in losses.iter().enumerate() {
        if !(loss > 0.0 && loss.is_finite()) {
            return Err(Error::DegenerateLoss { relation, loss });
        }
    }
    let logs: Vec<f64> = losses.iter().map(|l| l.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(logs.iter().map(|l| (mean_log - l).exp()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    /// Completed epochs.
    pub epoch: usize,
    /// Objective at the initial parameters and after every epoch.
    pub objective_history: Vec<f64>,
    pub weight_history: Vec<Vec<f64>>,
    pub loss_history: Vec<Vec<f64>>,
    /// Step size taken in each epoch; the initial entry is 0.
    pub step_history: Vec<f64>,
    pub converged: bool,
    /// Epochs in which the line search found no acceptable step.
    pub stalls: usize,
}

impl TrainState {
    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history is never empty")
    }

    /// Per-epoch TSV: epoch, objective, one loss and one weight column per relation, step size.
    pub fn write_log<W: Write>(&self, relation_names: &[String], mut out: W) -> std::io::Result<()> {
        write!(out, "epoch\tobjective")?;
        for name in relation_names {
            write!(out, "\tL_{name}")?;
        }
        for name in relation_names {
            write!(out, "\tw_{name}")?;
        }
        writeln!(out, "\tstep_size")?;
        for e in 0..self.objective_history.len() {
            write!(out, "{}\t{}", e, self.objective_history[e])?;
            for l in &self.loss_history[e] {
                write!(out, "\t{l}")?;
            }
            for w in &self.weight_history[e] {
                write!(out, "\t{w}")?;
            }
            writeln!(out, "\t{}", self.step_history[e])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub objective_before: f64,
    pub objective_after: f64,
    pub step_size: f64,
    pub stalled: bool,
}

struct Accepted {
    objective: f64,
    losses: Vec<f64>,
    step_size: f64,
    stalled: bool,
}

fn apply_step(params: &ModelParams, grads: &Gradients, lr: f64) -> ModelParams {
    let mut next = params.clone();
    for (v, g) in next
        .ideology
        .as_mut_slice()
        .iter_mut()
        .zip(grads.ideology.as_slice())
    {
        *v += lr * g;
    }
    for (q, gq) in next.images.iter_mut().zip(&grads.images) {
        for (v, g) in q.as_mut_slice().iter_mut().zip(gq.as_slice()) {
            *v += lr * g;
        }
    }
    for (b, gb) in next.biases.iter_mut().zip(&grads.biases) {
        for (v, g) in b.iter_mut().zip(gb) {
            *v += lr * g;
        }
    }
    next
}

fn ascend(
    params: &mut ModelParams,
    grads: &Gradients,
    samples: &SampleSet,
    config: &TrainConfig,
    current: f64,
    current_losses: &[f64],
) -> Result<Accepted> {
    let mut lr = config.learning_rate;
    let tries = if config.line_search { MAX_HALVINGS + 1 } else { 1 };
    for _ in 0..tries {
        let candidate = apply_step(params, grads, lr);
        let losses = model::relation_losses(&candidate, samples, config.threads)?;
        let objective = model::objective_from_losses(&candidate, &losses, config.mu);
        if !config.line_search {
            if !objective.is_finite() {
                return Err(Error::NonFinite("objective diverged; lower the learning rate"));
            }
            *params = candidate;
            return Ok(Accepted {
                objective,
                losses,
                step_size: lr,
                stalled: false,
            });
        }
        if objective.is_finite() && objective >= current {
            *params = candidate;
            return Ok(Accepted {
                objective,
                losses,
                step_size: lr,
                stalled: false,
            });
        }
        lr *= 0.5;
    }
    Ok(Accepted {
        objective: current,
        losses: current_losses.to_vec(),
        step_size: 0.0,
        stalled: true,
    })
}

/// One gradient ascent step on `P`, `Q`, `B` with the weights held fixed.
pub fn gradient_step(
    params: &mut ModelParams,
    samples: &SampleSet,
    config: &TrainConfig,
) -> Result<StepOutcome> {
    let passes = model::relation_passes(params, samples, true, config.threads)?;
    let losses: Vec<f64> = passes.iter().map(|p| -p.loglik / p.total).collect();
    let before = model::objective_from_losses(params, &losses, config.mu);
    let grads = Gradients::combine(params, &passes, config.mu);
    let acc = ascend(params, &grads, samples, config, before, &losses)?;
    Ok(StepOutcome {
        objective_before: before,
        objective_after: acc.objective,
        step_size: acc.step_size,
        stalled: acc.stalled,
    })
}

fn check_samples(g: &HeteroGraph, samples: &SampleSet) -> Result<()> {
    if samples.num_relations() != g.num_relations() {
        return Err(Error::DimensionMismatch {
            expected: g.num_relations(),
            got: samples.num_relations(),
        });
    }
    for (r, rs) in samples.relations().iter().enumerate() {
        if rs.total_count() == 0 {
            return Err(Error::EmptyRelationSample(r));
        }
    }
    Ok(())
}

/// Runs one optimization from `params`.
pub fn train_from<F>(
    mut params: ModelParams,
    samples: &SampleSet,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainState>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    config.validate()?;
    if config.fixed_weights {
        params.weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let losses = model::relation_losses(&params, samples, config.threads)?;
    let initial = model::objective_from_losses(&params, &losses, config.mu);
    let mut state = TrainState {
        weight_history: vec![params.weights.clone()],
        params,
        epoch: 0,
        objective_history: vec![initial],
        loss_history: vec![losses],
        step_history: vec![0.0],
        converged: false,
        stalls: 0,
    };
    let mut quiet = 0;
    while state.epoch < config.epochs {
        let passes = model::relation_passes(&state.params, samples, true, config.threads)?;
        let losses: Vec<f64> = passes.iter().map(|p| -p.loglik / p.total).collect();
        if !config.fixed_weights {
            state.params.weights = update_weights(&losses)?;
        }
        let current = model::objective_from_losses(&state.params, &losses, config.mu);
        let grads = Gradients::combine(&state.params, &passes, config.mu);
        let acc = ascend(&mut state.params, &grads, samples, config, current, &losses)?;

        let previous = state.final_objective();
        state.epoch += 1;
        state.objective_history.push(acc.objective);
        state.weight_history.push(state.params.weights.clone());
        state.loss_history.push(acc.losses);
        state.step_history.push(acc.step_size);
        if acc.stalled {
            state.stalls += 1;
        }
        on_epoch(&state)?;

        if (acc.objective - previous).abs() < config.convergence_tol * (1.0 + acc.objective.abs()) {
            quiet += 1;
            if quiet >= CONVERGENCE_PATIENCE {
                state.converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(state)
}

/// Trains with `config.restarts` random initializations and keeps the run
/// with the highest final objective. Restart 0 uses `config.seed` directly.
pub fn train(g: &HeteroGraph, samples: &SampleSet, config: &TrainConfig) -> Result<TrainState> {
    train_with(g, samples, config, |_, _| Ok(()))
}

/// As [`train`], calling `on_epoch(restart, state)` after every epoch.
pub fn train_with<F>(
    g: &HeteroGraph,
    samples: &SampleSet,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainState>
where
    F: FnMut(usize, &TrainState) -> Result<()>,
{
    config.validate()?;
    check_samples(g, samples)?;
    let mut best: Option<TrainState> = None;
    for restart in 0..config.restarts {
        let init_seed = restart_seed(config.seed, restart);
        let params = ModelParams::for_graph(g, config, init_seed);
        let state = train_from(params, samples, config, |s| on_epoch(restart, s))?;
        let better = best
            .as_ref()
            .is_none_or(|b| state.final_objective() > b.final_objective());
        if better {
            best = Some(state);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

pub fn restart_seed(base: u64, restart: usize) -> u64 {
    if restart == 0 {
        base
    } else {
        seed::derive(base, &[restart as u64])
    }
}
