//! Evaluation: statistical parity on outcomes and scores, accuracy,
//! precision, and the test-set surrogate coefficients used as
//! convergence diagnostics.

use crate::error::{Error, Result};
use crate::surrogate::{build_design, fit_ols, FairTargetCoeffs, SurrogateFit};

fn check_groups(z: &[u8]) -> Result<(usize, usize)> {
    let n1 = z.iter().filter(|&&v| v == 1).count();
    let n0 = z.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateGroup(
            "parity metrics need both protected groups".into(),
        ));
    }
    Ok((n0, n1))
}

/// |P[ŷ=1|z=1] − P[ŷ=1|z=0]| with ŷ = I(score > threshold).
pub fn spd_outcomes(scores: &[f64], z: &[u8], threshold: f64) -> Result<f64> {
    assert_eq!(scores.len(), z.len());
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    let (n0, n1) = check_groups(z)?;
    let (mut pos1, mut pos0) = (0usize, 0usize);
    for (&s, &zi) in scores.iter().zip(z) {
        if s > threshold {
            if zi == 1 {
                pos1 += 1;
            } else {
                pos0 += 1;
            }
        }
    }
    Ok((pos1 as f64 / n1 as f64 - pos0 as f64 / n0 as f64).abs())
}

/// |E[score|z=1] − E[score|z=0]|; its square is exactly the
/// statistical-parity penalty.
pub fn spd_scores(scores: &[f64], z: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), z.len());
    let (n0, n1) = check_groups(z)?;
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&s, &zi) in scores.iter().zip(z) {
        if zi == 1 {
            s1 += s;
        } else {
            s0 += s;
        }
    }
    Ok((s1 / n1 as f64 - s0 / n0 as f64).abs())
}

pub fn accuracy(scores: &[f64], y: &[u8], threshold: f64) -> f64 {
    assert_eq!(scores.len(), y.len());
    let correct = scores
        .iter()
        .zip(y)
        .filter(|(&s, &yi)| u8::from(s > threshold) == yi)
        .count();
    correct as f64 / y.len() as f64
}

/// Precision at a threshold; `None` marks the undefined case of no
/// positive predictions.
pub fn precision(scores: &[f64], y: &[u8], threshold: f64) -> Option<f64> {
    assert_eq!(scores.len(), y.len());
    let (mut tp, mut predicted_pos) = (0usize, 0usize);
    for (&s, &yi) in scores.iter().zip(y) {
        if s > threshold {
            predicted_pos += 1;
            tp += usize::from(yi == 1);
        }
    }
    if predicted_pos == 0 {
        None
    } else {
        Some(tp as f64 / predicted_pos as f64)
    }
}

/// Refit the score surrogate on held-out scores, for plotting the
/// coefficients against their fair targets.
pub fn surrogate_diagnostics(
    scores: &[f64],
    b: &[f64],
    z: &[u8],
    gamma: &FairTargetCoeffs,
) -> Result<SurrogateFit> {
    let design = build_design(b, z, gamma.n1, gamma.n2);
    fit_ols(&design, scores)
}

/// One row of the sweep report.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub spd_outcome: f64,
    pub spd_scores: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl MetricsRow {
    pub fn compute(
        lambda: f64,
        scores: &[f64],
        y: &[u8],
        z: &[u8],
        b: &[f64],
        gamma: &FairTargetCoeffs,
        threshold: f64,
    ) -> Result<MetricsRow> {
        let fit = surrogate_diagnostics(scores, b, z, gamma)?;
        Ok(MetricsRow {
            lambda,
            accuracy: accuracy(scores, y, threshold),
            precision: precision(scores, y, threshold),
            spd_outcome: spd_outcomes(scores, z, threshold)?,
            spd_scores: spd_scores(scores, z)?,
            alpha: fit.alpha,
            beta: fit.beta,
            gamma: gamma.gamma.clone(),
        })
    }

    pub fn csv_header(n1: usize, n2: usize) -> String {
        let m = n1.max(n2);
        let mut cols = vec![
            "lambda".to_string(),
            "accuracy".to_string(),
            "precision".to_string(),
            "spd_outcome".to_string(),
            "spd_scores".to_string(),
        ];
        cols.extend((0..=m).map(|k| format!("alpha_{k}")));
        cols.extend((0..=n2).map(|k| format!("beta_{k}")));
        cols.extend((0..=m).map(|k| format!("gamma_{k}")));
        cols.join(",")
    }

    pub fn csv_line(&self) -> String {
        let mut fields = vec![
            format!("{:.8e}", self.lambda),
            format!("{:.8e}", self.accuracy),
            self.precision.map_or("undefined".to_string(), |p| format!("{p:.8e}")),
            format!("{:.8e}", self.spd_outcome),
            format!("{:.8e}", self.spd_scores),
        ];
        for block in [&self.alpha, &self.beta, &self.gamma] {
            fields.extend(block.iter().map(|v| format!("{v:.8e}")));
        }
        fields.join(",")
    }
}
