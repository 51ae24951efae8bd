//! Differentiable loss assembly: binary cross-entropy utility, the
//! statistical-parity penalty and the controlled-direct-effect penalty,
//! each with per-example gradients and diagonal Hessians in probability
//! space, plus the chain rule into margin space for the booster.

use crate::error::{Error, Result};
use crate::surrogate::{build_design, influence_matrix, FairTargetCoeffs, InfluenceMatrix, SurrogateFit};

/// Probability clip for the cross-entropy.
const BCE_CLIP: f64 = 1e-12;
/// Floor applied to margin-space Hessians so boosting stays stable.
const HESS_FLOOR: f64 = 1e-16;

/// Scalar loss with per-example first and second derivatives.
#[derive(Debug, Clone)]
pub struct LossBundle {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl LossBundle {
    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.loss.is_finite()
            || self.grad.iter().any(|v| !v.is_finite())
            || self.hess.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteLoss {
                context: "loss bundle".into(),
                iteration: 0,
            });
        }
        Ok(())
    }
}

/// Mean binary cross-entropy of probability scores against 0/1 labels.
pub fn bce(scores: &[f64], y: &[u8]) -> LossBundle {
    assert_eq!(scores.len(), y.len());
    let n = scores.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    let mut hess = Vec::with_capacity(scores.len());
    for (&s, &yi) in scores.iter().zip(y) {
        let p = s.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        let yf = yi as f64;
        loss -= yf * p.ln() + (1.0 - yf) * (1.0 - p).ln();
        grad.push((p - yf) / (n * p * (1.0 - p)));
        hess.push((yf / (p * p) + (1.0 - yf) / ((1.0 - p) * (1.0 - p))) / n);
    }
    LossBundle {
        loss: loss / n,
        grad,
        hess,
    }
}

/// Squared gap between the group means of the scores.
pub fn spd_reg(scores: &[f64], z: &[u8]) -> Result<LossBundle> {
    assert_eq!(scores.len(), z.len());
    let n1 = z.iter().filter(|&&v| v == 1).count();
    let n0 = z.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateGroup(
            "statistical-parity penalty needs both groups".into(),
        ));
    }
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&s, &zi) in scores.iter().zip(z) {
        if zi == 1 {
            s1 += s;
        } else {
            s0 += s;
        }
    }
    let delta = s1 / n1 as f64 - s0 / n0 as f64;
    let grad = z
        .iter()
        .map(|&zi| {
            if zi == 1 {
                2.0 * delta / n1 as f64
            } else {
                -2.0 * delta / n0 as f64
            }
        })
        .collect();
    let hess = z
        .iter()
        .map(|&zi| {
            let ng = if zi == 1 { n1 } else { n0 } as f64;
            2.0 / (ng * ng)
        })
        .collect();
    Ok(LossBundle {
        loss: delta * delta,
        grad,
        hess,
    })
}

/// The controlled-direct-effect penalty. Holds the per-dataset caches:
/// the fair-target coefficients, the design matrix over (b, z) and its
/// influence matrix, which together make every evaluation a pair of
/// small matrix-vector products.
#[derive(Debug, Clone)]
pub struct CdeRegularizer {
    gamma: FairTargetCoeffs,
    influence: InfluenceMatrix,
    n1: usize,
    n2: usize,
}

impl CdeRegularizer {
    pub fn new(gamma: FairTargetCoeffs, b: &[f64], z: &[u8], n1: usize, n2: usize) -> Result<Self> {
        let design = build_design(b, z, n1, n2);
        let influence = influence_matrix(&design)?;
        Ok(CdeRegularizer {
            gamma,
            influence,
            n1,
            n2,
        })
    }

    pub fn gamma(&self) -> &FairTargetCoeffs {
        &self.gamma
    }

    pub fn n_examples(&self) -> usize {
        self.influence.n_examples()
    }

    /// The fitted surrogate coefficients for a score vector.
    pub fn surrogate_fit(&self, scores: &[f64]) -> SurrogateFit {
        let zeta = self.influence.apply(scores);
        let m = self.n1.max(self.n2);
        SurrogateFit {
            alpha: zeta[..=m].to_vec(),
            beta: zeta[m + 1..].to_vec(),
            condition: self.influence.condition(),
        }
    }

    /// Σ_{k≥1} I(|α̃_k| > |γ_k|)(α̃_k − γ_k)² + Σ_k β̃_k², with the
    /// indicator frozen at the current coefficients. Points exactly on
    /// the boundary take the inactive branch.
    pub fn bundle(&self, scores: &[f64]) -> Result<LossBundle> {
        if scores.len() != self.influence.n_examples() {
            return Err(Error::DimensionMismatch {
                what: "cde penalty scores".into(),
                expected: self.influence.n_examples(),
                found: scores.len(),
            });
        }
        let zeta = self.influence.apply(scores);
        let m = self.n1.max(self.n2);
        let mut loss = 0.0;
        // dR/dzeta and the diagonal of d²R/dzeta² (R is separable)
        let mut d1 = vec![0.0; zeta.len()];
        let mut d2 = vec![0.0; zeta.len()];
        for k in 1..=m {
            let alpha_k = zeta[k];
            let gamma_k = self.gamma.gamma[k];
            if alpha_k.abs() > gamma_k.abs() {
                let diff = alpha_k - gamma_k;
                loss += diff * diff;
                d1[k] = 2.0 * diff;
                d2[k] = 2.0;
            }
        }
        for k in 0..=self.n2 {
            let beta_k = zeta[m + 1 + k];
            loss += beta_k * beta_k;
            d1[m + 1 + k] = 2.0 * beta_k;
            d2[m + 1 + k] = 2.0;
        }
        let grad = self.influence.apply_transposed(&d1);
        let n = scores.len();
        let mut hess = vec![0.0; n];
        let mat = self.influence.matrix();
        for (j, &curv) in d2.iter().enumerate() {
            if curv == 0.0 {
                continue;
            }
            for (i, h) in hess.iter_mut().enumerate() {
                let m_ji = mat.get(j, i);
                *h += curv * m_ji * m_ji;
            }
        }
        Ok(LossBundle { loss, grad, hess })
    }
}

/// (1−λ)·utility + λ·penalty, componentwise.
pub fn combine(lo: &LossBundle, rf: &LossBundle, lambda: f64) -> LossBundle {
    assert_eq!(lo.len(), rf.len());
    let w0 = 1.0 - lambda;
    LossBundle {
        loss: w0 * lo.loss + lambda * rf.loss,
        grad: lo
            .grad
            .iter()
            .zip(&rf.grad)
            .map(|(a, b)| w0 * a + lambda * b)
            .collect(),
        hess: lo
            .hess
            .iter()
            .zip(&rf.hess)
            .map(|(a, b)| w0 * a + lambda * b)
            .collect(),
    }
}

/// Chain rule from probability space to raw-score space, with the
/// booster's Hessian floor applied.
pub fn to_margin_space(bundle: &LossBundle, scores: &[f64]) -> LossBundle {
    assert_eq!(bundle.len(), scores.len());
    let mut grad = Vec::with_capacity(scores.len());
    let mut hess = Vec::with_capacity(scores.len());
    for i in 0..scores.len() {
        let p = scores[i];
        let d = p * (1.0 - p); // dp/ds for p = sigmoid(s)
        let g = bundle.grad[i] * d;
        let h = bundle.hess[i] * d * d + bundle.grad[i] * d * (1.0 - 2.0 * p);
        grad.push(g);
        hess.push(h.max(HESS_FLOOR));
    }
    LossBundle {
        loss: bundle.loss,
        grad,
        hess,
    }
}
