//! Full-batch gradient descent on a logistic-form linear classifier.
//! Parameter gradients come from probability-space loss bundles via the
//! sigmoid chain rule.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};
use crate::losses::LossBundle;

use super::{EarlyStopper, StoppingRule};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn zeros(n_features: usize) -> LinearModel {
        LinearModel {
            weights: vec![0.0; n_features],
            intercept: 0.0,
        }
    }

    pub fn raw_scores(&self, x: &Matrix) -> Vec<f64> {
        x.matvec(&self.weights)
            .into_iter()
            .map(|s| s + self.intercept)
            .collect()
    }

    /// Probability scores sigmoid(w·x + c).
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        self.raw_scores(x).into_iter().map(sigmoid).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "linear").map_err(|e| Error::io(path, e))?;
        writeln!(f, "intercept {:.17e}", self.intercept).map_err(|e| Error::io(path, e))?;
        for w in &self.weights {
            writeln!(f, "weight {w:.17e}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut intercept = 0.0;
        let mut weights = Vec::new();
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("linear") | None => {}
                Some(key) => {
                    let v: f64 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            path: path.into(),
                            line: idx + 1,
                            msg: "expected a number".into(),
                        })?;
                    match key {
                        "intercept" => intercept = v,
                        "weight" => weights.push(v),
                        other => {
                            return Err(Error::Parse {
                                path: path.into(),
                                line: idx + 1,
                                msg: format!("unknown field {other:?}"),
                            })
                        }
                    }
                }
            }
        }
        Ok(LinearModel { weights, intercept })
    }
}

/// One-step driver around a model: applies a gradient step with the
/// current step size, halving it whenever the loss would increase.
#[derive(Debug)]
pub struct LinearTrainer<'a> {
    x: &'a Matrix,
    pub model: LinearModel,
    step_size: f64,
    iteration: usize,
}

impl<'a> LinearTrainer<'a> {
    pub fn new(x: &'a Matrix, model: LinearModel, step_size: f64) -> LinearTrainer<'a> {
        assert_eq!(x.n_cols(), model.weights.len());
        LinearTrainer {
            x,
            model,
            step_size,
            iteration: 0,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.model.scores(self.x)
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// One full-batch step. `loss_fn` maps probability scores on the
    /// training matrix to a probability-space bundle. Returns the loss
    /// after the accepted move (equal to the incoming loss when the
    /// gradient vanishes or no decrease is achievable).
    pub fn step<F>(&mut self, loss_fn: &mut F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<LossBundle>,
    {
        self.iteration += 1;
        let scores = self.scores();
        let bundle = loss_fn(&scores)?;
        if !bundle.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                context: "linear training".into(),
                iteration: self.iteration,
            });
        }
        // chain rule through the sigmoid
        let margin_grad: Vec<f64> = bundle
            .grad
            .iter()
            .zip(&scores)
            .map(|(g, &p)| g * p * (1.0 - p))
            .collect();
        let grad_w = self.x.t_matvec(&margin_grad);
        let grad_c: f64 = margin_grad.iter().sum();
        if grad_w.iter().all(|g| *g == 0.0) && grad_c == 0.0 {
            return Ok(bundle.loss);
        }
        for _ in 0..=MAX_HALVINGS {
            let candidate = LinearModel {
                weights: self
                    .model
                    .weights
                    .iter()
                    .zip(&grad_w)
                    .map(|(w, g)| w - self.step_size * g)
                    .collect(),
                intercept: self.model.intercept - self.step_size * grad_c,
            };
            let new_loss = loss_fn(&candidate.scores(self.x))?.loss;
            if !new_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    context: "linear training".into(),
                    iteration: self.iteration,
                });
            }
            if new_loss <= bundle.loss {
                self.model = candidate;
                return Ok(new_loss);
            }
            self.step_size *= 0.5;
        }
        // gradient points uphill at machine scale; stay put
        Ok(bundle.loss)
    }
}

/// Run gradient descent until the watched value stalls for
/// `stop.patience` consecutive evaluations (one per step), or
/// `max_iters` is reached. `watch_fn` evaluates the watched loss for the
/// current model on the early-stopping set named by `stop.set`.
pub fn train_linear<L, W>(
    x: &Matrix,
    init: LinearModel,
    step: f64,
    stop: &StoppingRule,
    max_iters: usize,
    mut loss_fn: L,
    mut watch_fn: W,
) -> Result<(LinearModel, usize)>
where
    L: FnMut(&[f64]) -> Result<LossBundle>,
    W: FnMut(&LinearModel) -> Result<f64>,
{
    let mut trainer = LinearTrainer::new(x, init, step);
    let mut stopper = EarlyStopper::new(stop.patience);
    let mut iters = 0;
    for _ in 0..max_iters {
        trainer.step(&mut loss_fn)?;
        iters += 1;
        let watched = watch_fn(&trainer.model)?;
        if stopper.update(watched) {
            break;
        }
    }
    Ok((trainer.model, iters))
}
