//! Loss-agnostic trainers: a full-batch gradient-descent linear
//! classifier and a second-order gradient-boosted-tree booster, both
//! consuming [`LossBundle`](crate::losses::LossBundle) callbacks.

mod gbt;
mod linear;

pub use gbt::{train_gbt, GbtConfig, GbtTrainer, Node, Tree, TreeEnsemble};
pub use linear::{train_linear, LinearModel, LinearTrainer};

/// Which loss component an early-stopping rule watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchedLoss {
    /// The utility loss L_o.
    Utility,
    /// The combined loss L_f.
    Combined,
}

/// Which dataset the watched loss is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsSet {
    TrainSet,
    Holdout,
}

/// Stop after `patience` consecutive evaluations without improvement.
#[derive(Debug, Clone, Copy)]
pub struct StoppingRule {
    pub watched: WatchedLoss,
    pub set: EsSet,
    pub patience: usize,
}

impl StoppingRule {
    pub fn new(watched: WatchedLoss, set: EsSet, patience: usize) -> StoppingRule {
        assert!(patience >= 1, "patience must be at least 1");
        StoppingRule { watched, set, patience }
    }
}

/// Improvement must beat the best seen value by more than this margin.
pub const IMPROVEMENT_DELTA: f64 = 1e-9;

/// Patience bookkeeping for a single training phase.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    wait: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        assert!(patience >= 1);
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Record an evaluation; returns true when training should stop.
    pub fn update(&mut self, value: f64) -> bool {
        if value < self.best - IMPROVEMENT_DELTA {
            self.best = value;
            self.wait = 0;
            false
        } else {
            self.wait += 1;
            self.wait >= self.patience
        }
    }
}
