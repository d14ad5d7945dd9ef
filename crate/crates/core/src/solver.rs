//! Per-instance training and rounding.
//!
//! [`train`] fits a fresh network to one instance with Adam, stopping early
//! once the monitored loss stops improving. [`sample_assignments`] turns the
//! resulting probabilities into Boolean assignments and keeps the best of
//! `k` draws. [`solve`] chains the two.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DenseMatrix, Tape};
use crate::error::{Error, Result};
use crate::hypergraph::{build_hypergraph, HypergraphMode};
use crate::model::{
    init_params, DropoutSite, DropoutState, ModelConfig, ModelParameters, Network, ParamVars,
};
use crate::objective::{ClauseTable, LossBreakdown, DEFAULT_LAMBDA};
use crate::rng::{stream_rng, Stream};
use crate::wcnf::{evaluate, Assignment, WcnfInstance};

/// Loss watched by early stopping and best-parameter selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    #[default]
    Total,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub early_stop_tolerance: f64,
    pub early_stop_patience: usize,
    pub lambda: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub mode: HypergraphMode,
    pub use_transformer: bool,
    pub attention_dropout: f64,
    pub dropout_site: DropoutSite,
    pub monitor: Monitor,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            learning_rate: 7e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 300,
            early_stop_tolerance: 1e-4,
            early_stop_patience: 50,
            lambda: DEFAULT_LAMBDA,
            num_samples: 5,
            seed: 0,
            mode: HypergraphMode::Literal,
            use_transformer: true,
            attention_dropout: 0.1,
            dropout_site: DropoutSite::AttentionProbs,
            monitor: Monitor::Total,
        }
    }
}

impl SolveConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolveConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate > 0.0) {
            return bad(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("Adam eps must be > 0".into());
        }
        if self.early_stop_patience == 0 {
            return bad("patience must be >= 1".into());
        }
        if self.num_samples == 0 {
            return bad("num_samples must be >= 1".into());
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.early_stop_tolerance >= 0.0) {
            return bad("tolerance must be >= 0".into());
        }
        Ok(())
    }

    /// Network configuration for an `n`-variable instance.
    pub fn model_config(&self, num_vars: usize) -> ModelConfig {
        ModelConfig {
            mode: self.mode,
            use_transformer: self.use_transformer,
            attention_dropout: self.attention_dropout,
            dropout_site: self.dropout_site,
            ..ModelConfig::for_vars(num_vars, self.seed)
        }
    }
}

/// First and second moment estimates, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<DenseMatrix>,
    pub second: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(params: &[&DenseMatrix]) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .iter()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut [&mut DenseMatrix],
    grads: &[DenseMatrix],
    state: &mut AdamState,
    t: u64,
    config: &SolveConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidArgument("Adam step index starts at 1".into()));
    }
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Length {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let correction1 = 1.0 - b1.powi(t as i32);
    let correction2 = 1.0 - b2.powi(t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.first[i].shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("tensor {i}: {:?} vs {:?}", p.shape(), g.shape()),
            ));
        }
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (k, (w, &gk)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
    Ok(())
}

/// Early-stopping bookkeeping: an epoch improves when the monitored loss
/// drops more than `tolerance` below the best seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    tolerance: f64,
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(tolerance: f64, patience: usize) -> Self {
        EarlyStopping {
            tolerance,
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records `loss`; returns `true` once `patience` consecutive epochs
    /// have passed without improvement.
    pub fn update(&mut self, loss: f64) -> bool {
        if loss < self.best - self.tolerance {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.best = self.best.min(loss);
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters with the lowest monitored training loss.
    pub params: ModelParameters,
    /// Dropout-off probabilities from `params`.
    pub probabilities: Vec<f64>,
    /// Training loss per epoch (dropout on, before that epoch's update).
    pub loss_trace: Vec<LossBreakdown>,
    /// Dropout-off loss of `params`.
    pub final_loss: LossBreakdown,
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct Objective {
    net: Network,
    table: Arc<ClauseTable>,
    lambda: f64,
}

impl Objective {
    fn evaluate(
        &self,
        params: &ModelParameters,
        state: &DropoutState,
    ) -> Result<(LossBreakdown, Vec<DenseMatrix>, Vec<f64>)> {
        let mut tape = Tape::new();
        let vars = ParamVars::record(&mut tape, params);
        let out = self.net.record(&mut tape, &vars, state)?;
        let task = tape.custom(self.table.clone(), out.y)?;
        let (total, shared) = match out.penultimate {
            Some((pos, neg)) => {
                let sum = tape.add(pos, neg)?;
                let shared = tape.frobenius_sq(sum);
                let scaled = tape.scale(shared, self.lambda);
                (tape.add(task, scaled)?, tape.value(shared).item())
            }
            None => (task, 0.0),
        };
        let breakdown = LossBreakdown::new(tape.value(task).item(), shared, self.lambda)?;
        let y = tape.value(out.y).data().to_vec();
        let grads = tape.backward(total)?;
        Ok((
            breakdown,
            vars.all().iter().map(|&v| grads.get(v)).collect(),
            y,
        ))
    }
}

/// Fits a freshly initialized network to `instance`.
pub fn train(instance: &WcnfInstance, config: &SolveConfig) -> Result<TrainOutput> {
    config.validate()?;
    if instance.num_vars() == 0 {
        return Err(Error::InvalidInstance("instance has no variables".into()));
    }
    let model_config = config.model_config(instance.num_vars());
    let hg = build_hypergraph(instance, config.mode);
    let objective = Objective {
        net: Network::new(&hg, model_config)?,
        table: Arc::new(ClauseTable::new(instance)),
        lambda: config.lambda,
    };
    let mut params = init_params(&model_config)?;
    let mut adam = AdamState::new(&params.tensors());
    let mut stopper = EarlyStopping::new(config.early_stop_tolerance, config.early_stop_patience);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut trace = Vec::with_capacity(config.max_epochs);
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let state = DropoutState::training(config.seed, epoch as u64);
        let (loss, grads, _) = objective.evaluate(&params, &state)?;
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: loss.total,
            });
        }
        trace.push(loss);
        let monitored = match config.monitor {
            Monitor::Total => loss.total,
            Monitor::Task => loss.task,
        };
        if monitored < best.0 {
            best = (monitored, params.clone(), epoch);
        }
        if stopper.update(monitored) {
            stopped_early = true;
            break;
        }
        adam_step(
            &mut params.tensors_mut(),
            &grads,
            &mut adam,
            epoch as u64,
            config,
        )?;
    }

    let (_, params, best_epoch) = best;
    let (final_loss, _, probabilities) = objective.evaluate(&params, &DropoutState::inference())?;
    Ok(TrainOutput {
        params,
        probabilities,
        epochs_run: trace.len(),
        loss_trace: trace,
        final_loss,
        best_epoch,
        stopped_early,
    })
}

/// Draws `k` assignments with `x_i ~ Bernoulli(y_i)` and returns the one
/// with the least unsatisfied weight (earliest on ties).
pub fn sample_assignments(
    y: &[f64],
    instance: &WcnfInstance,
    k: usize,
    seed: u64,
) -> Result<(Assignment, u64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if y.len() != instance.num_vars() {
        return Err(Error::Length {
            expected: instance.num_vars(),
            actual: y.len(),
        });
    }
    let mut rng = stream_rng(seed, Stream::Sampling);
    let mut best: Option<(Assignment, u64)> = None;
    for _ in 0..k {
        let values = y.iter().map(|&p| rng.random::<f64>() < p).collect();
        let assignment = Assignment::new(values);
        let unsat = evaluate(instance, &assignment)?.unsat_weight;
        if best.as_ref().is_none_or(|(_, b)| unsat < *b) {
            best = Some((assignment, unsat));
        }
    }
    Ok(best.expect("k >= 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub instance: String,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub assignment: Assignment,
    pub unsat_weight: u64,
    pub sat_weight: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub final_loss: LossBreakdown,
    pub loss_trace: Vec<LossBreakdown>,
    pub probabilities: Vec<f64>,
    pub config: SolveConfig,
}

/// Trains on `instance` and rounds the result.
pub fn solve(instance: &WcnfInstance, config: &SolveConfig) -> Result<SolveResult> {
    let trained = train(instance, config)?;
    let (assignment, _) = sample_assignments(
        &trained.probabilities,
        instance,
        config.num_samples,
        config.seed,
    )?;
    let eval = evaluate(instance, &assignment)?;
    Ok(SolveResult {
        instance: instance.name.clone(),
        num_vars: instance.num_vars(),
        num_clauses: instance.num_clauses(),
        assignment,
        unsat_weight: eval.unsat_weight,
        sat_weight: eval.sat_weight,
        epochs_run: trained.epochs_run,
        best_epoch: trained.best_epoch,
        stopped_early: trained.stopped_early,
        final_loss: trained.final_loss,
        loss_trace: trained.loss_trace,
        probabilities: trained.probabilities,
        config: *config,
    })
}
