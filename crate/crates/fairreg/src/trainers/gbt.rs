//! Second-order gradient boosting with exact greedy splits. Loss
//! callbacks supply mean-normalized margin-space derivatives (see
//! [`to_margin_space`](crate::losses::to_margin_space)); the booster
//! rescales them to per-example sums so `reg_lambda` acts on the
//! conventional scale.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{logit, sigmoid, Matrix};
use crate::losses::LossBundle;

use super::{EarlyStopper, StoppingRule};

#[derive(Debug, Clone, Copy)]
pub struct GbtConfig {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    /// Safety bound on boosting rounds per training phase.
    pub max_rounds: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            max_depth: 2,
            learning_rate: 0.1,
            reg_lambda: 10.0,
            max_rounds: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn margins(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.margin_row(x.row(i))).collect()
    }

    /// Probability scores sigmoid(base + η·Σ tree outputs).
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        self.margins(x).into_iter().map(sigmoid).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "gbt").map_err(|e| Error::io(path, e))?;
        writeln!(f, "base_score {:.17e}", self.base_score).map_err(|e| Error::io(path, e))?;
        writeln!(f, "learning_rate {:.17e}", self.learning_rate).map_err(|e| Error::io(path, e))?;
        for tree in &self.trees {
            writeln!(f, "tree").map_err(|e| Error::io(path, e))?;
            for node in &tree.nodes {
                match node {
                    Node::Leaf { value } => {
                        writeln!(f, "node leaf {value:.17e}").map_err(|e| Error::io(path, e))?
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(f, "node split {feature} {threshold:.17e} {left} {right}")
                        .map_err(|e| Error::io(path, e))?,
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TreeEnsemble> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |idx: usize, msg: &str| Error::Parse {
            path: path.into(),
            line: idx + 1,
            msg: msg.into(),
        };
        let mut ensemble = TreeEnsemble {
            base_score: 0.0,
            learning_rate: 0.1,
            trees: Vec::new(),
        };
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["gbt"] | [] => {}
                ["base_score", v] => {
                    ensemble.base_score = v.parse().map_err(|_| parse_err(idx, "bad base_score"))?
                }
                ["learning_rate", v] => {
                    ensemble.learning_rate =
                        v.parse().map_err(|_| parse_err(idx, "bad learning_rate"))?
                }
                ["tree"] => ensemble.trees.push(Tree { nodes: Vec::new() }),
                ["node", "leaf", v] => {
                    let tree = ensemble
                        .trees
                        .last_mut()
                        .ok_or_else(|| parse_err(idx, "node before tree"))?;
                    tree.nodes.push(Node::Leaf {
                        value: v.parse().map_err(|_| parse_err(idx, "bad leaf"))?,
                    });
                }
                ["node", "split", feat, thr, left, right] => {
                    let tree = ensemble
                        .trees
                        .last_mut()
                        .ok_or_else(|| parse_err(idx, "node before tree"))?;
                    tree.nodes.push(Node::Split {
                        feature: feat.parse().map_err(|_| parse_err(idx, "bad feature"))?,
                        threshold: thr.parse().map_err(|_| parse_err(idx, "bad threshold"))?,
                        left: left.parse().map_err(|_| parse_err(idx, "bad left"))?,
                        right: right.parse().map_err(|_| parse_err(idx, "bad right"))?,
                    });
                }
                _ => return Err(parse_err(idx, "unrecognized line")),
            }
        }
        Ok(ensemble)
    }
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Incremental booster holding cached margins for the training matrix
/// and an optional early-stopping matrix. Feature orderings are sorted
/// once up front; split search walks them with a node-membership mask.
pub struct GbtTrainer<'a> {
    x: &'a Matrix,
    pub ensemble: TreeEnsemble,
    margins: Vec<f64>,
    es: Option<(&'a Matrix, Vec<f64>)>,
    cfg: GbtConfig,
    round: usize,
    sorted_rows: Vec<Vec<u32>>,
    membership: Vec<bool>,
}

impl<'a> GbtTrainer<'a> {
    /// `y` sets the base score to the logit of the label mean.
    pub fn new(x: &'a Matrix, y: &[u8], cfg: GbtConfig, es_x: Option<&'a Matrix>) -> GbtTrainer<'a> {
        assert!(cfg.max_depth >= 1);
        let mean = (y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
        let base = logit(mean);
        let ensemble = TreeEnsemble {
            base_score: base,
            learning_rate: cfg.learning_rate,
            trees: Vec::new(),
        };
        let margins = vec![base; x.n_rows()];
        let es = es_x.map(|m| (m, vec![base; m.n_rows()]));
        let sorted_rows = (0..x.n_cols())
            .map(|j| {
                let mut order: Vec<u32> = (0..x.n_rows() as u32).collect();
                order.sort_by(|&a, &b| {
                    x.get(a as usize, j).partial_cmp(&x.get(b as usize, j)).unwrap()
                });
                order
            })
            .collect();
        let membership = vec![false; x.n_rows()];
        GbtTrainer {
            x,
            ensemble,
            margins,
            es,
            cfg,
            round: 0,
            sorted_rows,
            membership,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.margins.iter().map(|&m| sigmoid(m)).collect()
    }

    pub fn es_scores(&self) -> Option<Vec<f64>> {
        self.es
            .as_ref()
            .map(|(_, margins)| margins.iter().map(|&m| sigmoid(m)).collect())
    }

    pub fn n_rounds(&self) -> usize {
        self.ensemble.trees.len()
    }

    /// Drop boosting rounds past `n_rounds` and rebuild the cached
    /// margins, restoring early-stopping's best iteration.
    pub fn truncate_to(&mut self, n_rounds: usize) {
        if n_rounds >= self.ensemble.trees.len() {
            return;
        }
        self.ensemble.trees.truncate(n_rounds);
        self.margins = self.ensemble.margins(self.x);
        if let Some((es_x, es_margins)) = &mut self.es {
            *es_margins = self.ensemble.margins(es_x);
        }
    }

    /// Fit one tree on the current gradients and append it.
    pub fn boost_round<F>(&mut self, loss_fn: &mut F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<LossBundle>,
    {
        self.round += 1;
        let scores = self.scores();
        let bundle = loss_fn(&scores)?;
        if !bundle.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                context: "boosting".into(),
                iteration: self.round,
            });
        }
        let n = self.margins.len() as f64;
        // mean-normalized derivatives -> per-example sums
        let grad: Vec<f64> = bundle.grad.iter().map(|g| g * n).collect();
        let hess: Vec<f64> = bundle.hess.iter().map(|h| h * n).collect();
        if hess.iter().all(|&h| h == 0.0) {
            return Err(Error::ZeroHessian);
        }
        let mut tree = Tree { nodes: Vec::new() };
        let all_rows: Vec<usize> = (0..self.margins.len()).collect();
        let mut membership = std::mem::take(&mut self.membership);
        self.grow(&mut tree, &all_rows, 0, &grad, &hess, &mut membership);
        self.membership = membership;
        // update cached margins
        for (i, m) in self.margins.iter_mut().enumerate() {
            *m += self.cfg.learning_rate * tree.predict_row(self.x.row(i));
        }
        if let Some((es_x, es_margins)) = &mut self.es {
            for (i, m) in es_margins.iter_mut().enumerate() {
                *m += self.cfg.learning_rate * tree.predict_row(es_x.row(i));
            }
        }
        self.ensemble.trees.push(tree);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &self,
        tree: &mut Tree,
        rows: &[usize],
        depth: usize,
        grad: &[f64],
        hess: &[f64],
        membership: &mut [bool],
    ) -> usize {
        let g_sum: f64 = rows.iter().map(|&i| grad[i]).sum();
        let h_sum: f64 = rows.iter().map(|&i| hess[i]).sum();
        let node_idx = tree.nodes.len();
        if depth >= self.cfg.max_depth {
            tree.nodes.push(Node::Leaf {
                value: leaf_value(g_sum, h_sum, self.cfg.reg_lambda),
            });
            return node_idx;
        }
        match self.best_split(rows, grad, hess, g_sum, h_sum, membership) {
            None => {
                tree.nodes.push(Node::Leaf {
                    value: leaf_value(g_sum, h_sum, self.cfg.reg_lambda),
                });
                node_idx
            }
            Some(choice) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| self.x.get(i, choice.feature) < choice.threshold);
                tree.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let left = self.grow(tree, &left_rows, depth + 1, grad, hess, membership);
                let right = self.grow(tree, &right_rows, depth + 1, grad, hess, membership);
                tree.nodes[node_idx] = Node::Split {
                    feature: choice.feature,
                    threshold: choice.threshold,
                    left,
                    right,
                };
                node_idx
            }
        }
    }

    /// Exact greedy search over all features and midpoints between
    /// consecutive distinct values, walking the presorted orderings.
    /// Ties keep the lowest feature index, then the lowest threshold.
    fn best_split(
        &self,
        rows: &[usize],
        grad: &[f64],
        hess: &[f64],
        g_sum: f64,
        h_sum: f64,
        membership: &mut [bool],
    ) -> Option<SplitChoice> {
        if rows.len() < 2 {
            return None;
        }
        for &i in rows {
            membership[i] = true;
        }
        let lambda = self.cfg.reg_lambda;
        let parent = g_sum * g_sum / (h_sum + lambda);
        let mut best: Option<SplitChoice> = None;
        for (feature, order) in self.sorted_rows.iter().enumerate() {
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            let mut seen = 0usize;
            let mut prev_value = f64::NAN;
            for &r in order {
                let i = r as usize;
                if !membership[i] {
                    continue;
                }
                let v = self.x.get(i, feature);
                if seen > 0 && v > prev_value {
                    let g_right = g_sum - g_left;
                    let h_right = h_sum - h_left;
                    let gain = 0.5
                        * (g_left * g_left / (h_left + lambda)
                            + g_right * g_right / (h_right + lambda)
                            - parent);
                    if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(SplitChoice {
                            gain,
                            feature,
                            threshold: 0.5 * (prev_value + v),
                        });
                    }
                }
                g_left += grad[i];
                h_left += hess[i];
                seen += 1;
                prev_value = v;
            }
        }
        for &i in rows {
            membership[i] = false;
        }
        best
    }
}

#[inline]
fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Boost until the watched value stalls for `stop.patience` consecutive
/// rounds, or the round cap is reached. `loss_fn` returns mean-normalized
/// margin-space bundles for the training scores.
pub fn train_gbt<L, W>(
    x: &Matrix,
    y: &[u8],
    cfg: GbtConfig,
    stop: &StoppingRule,
    es_x: Option<&Matrix>,
    mut loss_fn: L,
    mut watch_fn: W,
) -> Result<(TreeEnsemble, usize)>
where
    L: FnMut(&[f64]) -> Result<LossBundle>,
    W: FnMut(&GbtTrainer) -> Result<f64>,
{
    let mut trainer = GbtTrainer::new(x, y, cfg, es_x);
    let mut stopper = EarlyStopper::new(stop.patience);
    let mut rounds = 0;
    for _ in 0..cfg.max_rounds {
        trainer.boost_round(&mut loss_fn)?;
        rounds += 1;
        let watched = watch_fn(&trainer)?;
        if stopper.update(watched) {
            break;
        }
    }
    Ok((trainer.ensemble, rounds))
}
