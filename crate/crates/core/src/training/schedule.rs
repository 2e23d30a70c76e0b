use serde::{Deserialize, Serialize};

/// Minimum change that counts as an improvement for the plateau scheduler.
pub const PLATEAU_THRESHOLD: f64 = 1e-8;

/// Which quantity the plateau scheduler watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// Evaluation accuracy or mAP; higher is better.
    #[default]
    EvalMetric,
    /// Mean training total loss; lower is better.
    TrainLoss,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_patience() -> usize {
    10
}

/// Learning-rate schedule, stepped once per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerSpec {
    #[default]
    Constant,
    /// `lr0 * gamma^(milestones <= epoch)`.
    Step {
        #[serde(default = "default_gamma")]
        gamma: f64,
        milestones: Vec<usize>,
    },
    /// Multiply by `factor` after `patience` epochs without improvement.
    Plateau {
        #[serde(default = "default_gamma")]
        factor: f64,
        #[serde(default = "default_patience")]
        patience: usize,
        #[serde(default)]
        monitor: Monitor,
    },
}

impl SchedulerSpec {
    pub fn monitor(&self) -> Option<Monitor> {
        match self {
            SchedulerSpec::Plateau { monitor, .. } => Some(*monitor),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            SchedulerSpec::Constant => Ok(()),
            SchedulerSpec::Step { gamma, milestones } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(format!("gamma must be positive, got {gamma}"));
                }
                if milestones.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("milestones must be strictly increasing".into());
                }
                Ok(())
            }
            SchedulerSpec::Plateau {
                factor, patience, ..
            } => {
                if !(*factor > 0.0 && *factor < 1.0) {
                    return Err(format!("factor must lie in (0, 1), got {factor}"));
                }
                if *patience == 0 {
                    return Err("patience must be at least 1".into());
                }
                Ok(())
            }
        }
    }
}

/// `lr0 * gamma^k` where `k` counts milestones `<= epoch`.
///
/// When `1 / gamma` is an integer the rate is computed as `lr0 / (1/gamma)^k`,
/// which gives the correctly rounded decimal (`0.1 / 100 == 0.001`), whereas
/// `0.1 * 0.1 * 0.1` drifts in the last bit.
pub fn step_schedule(lr0: f64, gamma: f64, milestones: &[usize], epoch: usize) -> f64 {
    let passed = milestones.iter().filter(|&&m| m <= epoch).count();
    decayed_lr(lr0, gamma, passed)
}

/// `lr0 * factor^drops`, with the same exact-decimal handling as [`step_schedule`].
pub fn decayed_lr(lr0: f64, factor: f64, drops: usize) -> f64 {
    let inverse = 1.0 / factor;
    let k = drops as i32;
    if inverse.fract() == 0.0 {
        lr0 / inverse.powi(k)
    } else {
        lr0 * factor.powi(k)
    }
}

/// Counter state of the reduce-on-plateau rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauState {
    pub lr0: f64,
    pub lr: f64,
    pub best: Option<f64>,
    pub bad_epochs: usize,
    pub drops: usize,
    pub higher_is_better: bool,
}

impl PlateauState {
    pub fn new(lr: f64, higher_is_better: bool) -> Self {
        Self {
            lr0: lr,
            lr,
            best: None,
            bad_epochs: 0,
            drops: 0,
            higher_is_better,
        }
    }
}

/// Feeds one epoch's monitored value and returns the learning rate for the next epoch.
pub fn plateau_schedule(
    state: &mut PlateauState,
    metric: f64,
    factor: f64,
    patience: usize,
) -> f64 {
    let improved = match state.best {
        None => true,
        Some(best) if state.higher_is_better => metric > best + PLATEAU_THRESHOLD,
        Some(best) => metric < best - PLATEAU_THRESHOLD,
    };
    if improved {
        state.best = Some(metric);
        state.bad_epochs = 0;
    } else {
        state.bad_epochs += 1;
        if state.bad_epochs >= patience {
            state.drops += 1;
            state.lr = decayed_lr(state.lr0, factor, state.drops);
            state.bad_epochs = 0;
        }
    }
    state.lr
}

/// Runtime view of a [`SchedulerSpec`].
#[derive(Debug, Clone)]
pub struct LrScheduler {
    lr0: f64,
    spec: SchedulerSpec,
    plateau: PlateauState,
}

impl LrScheduler {
    pub fn new(lr0: f64, spec: SchedulerSpec) -> Self {
        let higher = spec.monitor() != Some(Monitor::TrainLoss);
        Self {
            lr0,
            spec,
            plateau: PlateauState::new(lr0, higher),
        }
    }

    /// Learning rate used throughout `epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        match &self.spec {
            SchedulerSpec::Constant => self.lr0,
            SchedulerSpec::Step { gamma, milestones } => {
                step_schedule(self.lr0, *gamma, milestones, epoch)
            }
            SchedulerSpec::Plateau { .. } => self.plateau.lr,
        }
    }

    /// End-of-epoch hook; only the plateau rule has state.
    pub fn observe(&mut self, eval_metric: f64, train_loss: f64) {
        if let SchedulerSpec::Plateau {
            factor,
            patience,
            monitor,
        } = &self.spec
        {
            let value = match monitor {
                Monitor::EvalMetric => eval_metric,
                Monitor::TrainLoss => train_loss,
            };
            plateau_schedule(&mut self.plateau, value, *factor, *patience);
        }
    }
}
