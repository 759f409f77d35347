use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, LossBreakdown, LossWeights, SelfRepModel};
use crate::error::{Error, Result};
use crate::patching::PatchSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs of plain autoencoder training before the joint objective.
    pub pretrain_epochs: usize,
    pub learning_rate: f64,
    /// Step size for `Θs`; defaults to `learning_rate` when `None`.
    pub theta_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub loss_weights: LossWeights,
    pub arch: ArchConfig,
    pub seed: u64,
    /// Relative loss improvement below which an epoch counts as stalled.
    pub tolerance: f64,
    /// Consecutive stalled epochs that end training.
    pub patience: usize,
    /// Step-size schedule over the joint phase.
    pub lr_schedule: LrSchedule,
}

/// Multiplier applied to every step size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from 1 down to `floor` across the joint-phase epochs.
    Cosine { floor: f64 },
}

impl LrSchedule {
    /// Factor for joint-phase step `t` of `total`.
    pub fn factor(&self, t: usize, total: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { floor } => {
                let progress = if total <= 1 {
                    0.0
                } else {
                    t as f64 / (total - 1) as f64
                };
                floor + (1.0 - floor) * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress))
            }
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            pretrain_epochs: 0,
            learning_rate: 1e-3,
            theta_learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            loss_weights: LossWeights::default(),
            arch: ArchConfig::default(),
            seed: 0,
            tolerance: 1e-6,
            patience: 50,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.loss_weights;
        let bad = if self.epochs == 0 {
            Some("epochs must be at least 1")
        } else if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            Some("learning_rate must be positive")
        } else if self
            .theta_learning_rate
            .is_some_and(|lr| !(lr > 0.0 && lr.is_finite()))
        {
            Some("theta_learning_rate must be positive")
        } else if w.eps_norm.is_nan() || w.eps_norm <= 0.0 {
            Some("eps_norm must be positive")
        } else if [w.lambda1, w.lambda2, w.lambda3]
            .iter()
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            Some("loss weights must be finite and non-negative")
        } else if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            Some("adam betas must lie in [0, 1)")
        } else if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            Some("adam eps must be positive")
        } else if matches!(self.lr_schedule, LrSchedule::Cosine { floor } if !(0.0..=1.0).contains(&floor))
        {
            Some("cosine floor must lie in [0, 1]")
        } else {
            None
        };
        match bad {
            Some(msg) => Err(Error::InvalidConfig(msg.into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at the start of each executed epoch.
    pub trace: Vec<LossBreakdown>,
    pub wall_time_secs: f64,
    pub final_grad_norm: f64,
    pub stopped_early: bool,
}

/// Adam with bias correction over a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    /// One update; `lrs[t]` is the step size of tensor `t`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lrs: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for (t, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            let lr = lrs[t];
            let (m, v) = (&mut self.m[t], &mut self.v[t]);
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}

/// Full-batch Adam over encoder, `Θs` and decoder. The diagonal of `Θs` is
/// projected to zero after every step.
pub fn train(patches: &PatchSet, config: &TrainConfig) -> Result<(SelfRepModel, TrainReport)> {
    train_with_clock(patches, config, || 0.0)
}

/// As [`train`], reading wall time in seconds from `clock`.
pub fn train_with_clock(
    patches: &PatchSet,
    config: &TrainConfig,
    clock: impl Fn() -> f64,
) -> Result<(SelfRepModel, TrainReport)> {
    config.validate()?;
    let n = patches.len();
    if n < 4 {
        return Err(Error::TooFewPatches {
            required: 4,
            found: n,
        });
    }
    if patches.dim() == 0 {
        return Err(Error::EmptyInput);
    }
    let start = clock();
    let data = &patches.patches;
    let mut model = SelfRepModel::init(
        patches.dim(),
        n,
        &config.arch,
        config.loss_weights,
        config.seed,
    )?;

    let sizes: Vec<usize> = model.tensors_mut().iter().map(|t| t.len()).collect();
    let theta_index = model.encoder.layers().len() * 3;
    let mut base_lrs = vec![config.learning_rate; sizes.len()];
    base_lrs[theta_index] = config.theta_learning_rate.unwrap_or(config.learning_rate);
    let joint_epochs = config.epochs.saturating_sub(config.pretrain_epochs);
    let mut lrs = base_lrs.clone();
    let mut adam = Adam::new(&sizes, config.beta1, config.beta2, config.adam_eps);

    let mut trace: Vec<LossBreakdown> = Vec::with_capacity(config.epochs);
    let mut stalled = 0usize;
    let mut stopped_early = false;
    let mut grad_norm = 0.0;
    for epoch in 0..config.epochs {
        let pretraining = epoch < config.pretrain_epochs;
        let (loss, grad) = if pretraining {
            model.autoencoder_loss_and_grad(data)?
        } else {
            model.loss_and_grad(data)?
        };
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        grad_norm = grad.norm();
        let factor = if pretraining {
            1.0
        } else {
            config
                .lr_schedule
                .factor(epoch - config.pretrain_epochs, joint_epochs)
        };
        for (lr, base) in lrs.iter_mut().zip(&base_lrs) {
            *lr = base * factor;
        }
        if !grad_norm.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        {
            let grads = grad.tensors();
            let mut params = model.tensors_mut();
            adam.step(&mut params, &grads, &lrs);
        }
        model.zero_diagonal();

        if let Some(prev) = trace
            .last()
            .filter(|_| !pretraining && epoch > config.pretrain_epochs)
        {
            let improvement = (prev.total - loss.total) / prev.total.abs().max(f64::MIN_POSITIVE);
            if improvement < config.tolerance {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        trace.push(loss);
        if stalled >= config.patience.max(1) {
            stopped_early = epoch + 1 < config.epochs;
            break;
        }
    }
    if !model.theta_s.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: trace.len() });
    }
    Ok((
        model,
        TrainReport {
            trace,
            wall_time_secs: clock() - start,
            final_grad_norm: grad_norm,
            stopped_early,
        },
    ))
}
