//! Balancing scores b(X) = P(Z=1|X) estimated with L1-regularized
//! logistic regression. The inverse penalty C is selected by k-fold
//! cross-validation scored by accuracy, ties broken toward stronger
//! regularization. Predictions are clipped into [ε, 1−ε] so overlap
//! holds numerically.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};

pub const DEFAULT_C_GRID: [f64; 5] = [1e-2, 1e-1, 1.0, 10.0, 1e2];
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_CLIP: f64 = 1e-6;
pub const DEFAULT_CV_SEED: u64 = 123;

const MAX_ITERS: usize = 10_000;
const TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PropensityModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Selected inverse penalty.
    pub c: f64,
    /// Clip epsilon enforcing overlap.
    pub epsilon: f64,
}

impl PropensityModel {
    /// Clipped sigmoid of the linear score.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.predict_matrix(&ds.features)
    }

    pub fn predict_matrix(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.n_cols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "propensity features".into(),
                expected: self.weights.len(),
                found: features.n_cols(),
            });
        }
        Ok(features
            .matvec(&self.weights)
            .into_iter()
            .map(|s| sigmoid(s + self.intercept).clamp(self.epsilon, 1.0 - self.epsilon))
            .collect())
    }

    pub fn n_nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    /// Persist as a small text artifact so sweeps can reuse one fit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "c,{:.17e}", self.c).map_err(|e| Error::io(path, e))?;
        writeln!(f, "epsilon,{:.17e}", self.epsilon).map_err(|e| Error::io(path, e))?;
        writeln!(f, "intercept,{:.17e}", self.intercept).map_err(|e| Error::io(path, e))?;
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(f, "w{i},{w:.17e}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PropensityModel> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut c = None;
        let mut epsilon = None;
        let mut intercept = None;
        let mut weights = Vec::new();
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(',').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: idx + 1,
                msg: "expected key,value".into(),
            })?;
            let v: f64 = value.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: idx + 1,
                msg: format!("bad number {value:?}"),
            })?;
            match key {
                "c" => c = Some(v),
                "epsilon" => epsilon = Some(v),
                "intercept" => intercept = Some(v),
                _ => weights.push(v),
            }
        }
        match (c, epsilon, intercept) {
            (Some(c), Some(epsilon), Some(intercept)) => Ok(PropensityModel {
                weights,
                intercept,
                c,
                epsilon,
            }),
            _ => Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "missing c/epsilon/intercept rows".into(),
            }),
        }
    }
}

/// Result of a single L1 logistic fit.
#[derive(Debug, Clone)]
pub struct L1Fit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

/// FISTA (proximal gradient with momentum and gradient restart) on
/// mean log-loss + l1_penalty·‖w‖₁. The intercept is unpenalized.
pub fn fit_l1_logistic(features: &Matrix, targets: &[u8], l1_penalty: f64) -> Result<L1Fit> {
    let n = features.n_rows();
    let p = features.n_cols();
    assert_eq!(targets.len(), n);
    let t: Vec<f64> = targets.iter().map(|&v| v as f64).collect();

    // Lipschitz constant of the smooth part: λmax([X 1]ᵀ[X 1]) / (4n)
    let lip = {
        let mut v = vec![1.0; p + 1];
        let mut lambda = 1.0;
        for _ in 0..60 {
            // u = [X 1] v
            let mut u = features.matvec(&v[..p]);
            for ui in u.iter_mut() {
                *ui += v[p];
            }
            // v' = [X 1]ᵀ u
            let mut next = features.t_matvec(&u);
            next.push(u.iter().sum());
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            for (a, b) in v.iter_mut().zip(&next) {
                *a = b / norm;
            }
        }
        (lambda / (4.0 * n as f64)).max(1e-12)
    };
    let step = 1.0 / lip;

    let mut w = vec![0.0; p];
    let mut c = 0.0;
    let mut w_prev = w.clone();
    let mut c_prev = c;
    let mut momentum = 1.0;
    for iter in 0..MAX_ITERS {
        // extrapolated point
        let coef = (momentum - 1.0) / next_momentum(momentum);
        let yw: Vec<f64> = w.iter().zip(&w_prev).map(|(a, b)| a + coef * (a - b)).collect();
        let yc = c + coef * (c - c_prev);

        let mut margins = features.matvec(&yw);
        for m in margins.iter_mut() {
            *m = sigmoid(*m + yc);
        }
        let resid: Vec<f64> = margins.iter().zip(&t).map(|(pi, ti)| (pi - ti) / n as f64).collect();
        let grad_w = features.t_matvec(&resid);
        let grad_c: f64 = resid.iter().sum();

        let mut new_w = Vec::with_capacity(p);
        for j in 0..p {
            new_w.push(soft_threshold(yw[j] - step * grad_w[j], step * l1_penalty));
        }
        let new_c = yc - step * grad_c;

        // gradient restart: momentum reset when the update turns back
        let mut turn = (yc - new_c) * (new_c - c);
        for j in 0..p {
            turn += (yw[j] - new_w[j]) * (new_w[j] - w[j]);
        }
        let delta = new_w
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold((new_c - c).abs(), f64::max);

        w_prev = std::mem::replace(&mut w, new_w);
        c_prev = std::mem::replace(&mut c, new_c);
        momentum = if turn > 0.0 { 1.0 } else { next_momentum(momentum) };

        if delta < TOL {
            return Ok(L1Fit {
                weights: w,
                intercept: c,
                iterations: iter + 1,
            });
        }
    }
    let delta = w.iter().zip(&w_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Err(Error::NonConvergence {
        iters: MAX_ITERS,
        last_change: delta,
    })
}

#[inline]
fn next_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

#[inline]
fn soft_threshold(x: f64, level: f64) -> f64 {
    if x > level {
        x - level
    } else if x < -level {
        x + level
    } else {
        0.0
    }
}

/// Deterministic fold assignment: shuffled indices in contiguous chunks.
fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Fit balancing scores with cross-validated penalty selection.
pub fn fit_propensity(train: &Dataset, c_grid: &[f64], folds: usize, seed: u64) -> Result<PropensityModel> {
    train.validate()?;
    if c_grid.is_empty() || folds < 2 {
        return Err(Error::InvalidArgument(
            "need a nonempty C grid and at least two folds".into(),
        ));
    }
    let n = train.n_rows();
    let fold_sets = fold_indices(n, folds, seed);
    let mut grid: Vec<f64> = c_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // per-fold training matrices, shared across the grid
    let splits: Vec<(Matrix, Vec<u8>, Matrix, Vec<u8>)> = fold_sets
        .iter()
        .map(|held| {
            let held_set: std::collections::HashSet<usize> = held.iter().copied().collect();
            let rest: Vec<usize> = (0..n).filter(|i| !held_set.contains(i)).collect();
            (
                train.features.select_rows(&rest),
                rest.iter().map(|&i| train.z[i]).collect(),
                train.features.select_rows(held),
                held.iter().map(|&i| train.z[i]).collect(),
            )
        })
        .collect();

    let mut best: Option<(f64, f64)> = None; // (accuracy, c)
    for &c in &grid {
        let accuracies: Vec<Result<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = splits
                .iter()
                .map(|(fit_x, fit_z, held_x, held_z)| {
                    scope.spawn(move || -> Result<f64> {
                        let alpha = 1.0 / (c * fit_x.n_rows() as f64);
                        let fit = fit_l1_logistic(fit_x, fit_z, alpha)?;
                        let mut correct = 0usize;
                        let scores = held_x.matvec(&fit.weights);
                        for (s, &zi) in scores.iter().zip(held_z.iter()) {
                            let pred = u8::from(sigmoid(s + fit.intercept) > 0.5);
                            correct += usize::from(pred == zi);
                        }
                        Ok(correct as f64 / held_z.len() as f64)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fold thread")).collect()
        });
        let mut mean = 0.0;
        for acc in accuracies {
            mean += acc?;
        }
        mean /= folds as f64;
        // strict improvement required, so ties keep the smaller C
        if best.map_or(true, |(best_acc, _)| mean > best_acc) {
            best = Some((mean, c));
        }
    }
    let (_, c) = best.expect("nonempty grid");
    let alpha = 1.0 / (c * n as f64);
    let fit = fit_l1_logistic(&train.features, &train.z, alpha)?;
    Ok(PropensityModel {
        weights: fit.weights,
        intercept: fit.intercept,
        c,
        epsilon: DEFAULT_CLIP,
    })
}
