//! Polynomial-in-b OLS machinery: the design matrix over balancing-score
//! powers, the coefficient solve, the fair-target coefficients and the
//! influence matrix that differentiates coefficients with respect to the
//! regression target.

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, Cholesky, Matrix};

/// Ridge added to non-intercept diagonal entries of the normal equations
/// to guard near-collinear score powers. Small enough to stay below all
/// test tolerances.
const RIDGE: f64 = 1e-10;

/// Design matrix with rows [1, b, b², …, b^M, Z, Z·b, …, Z·b^{N2}] where
/// M = max(N1, N2).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    matrix: Matrix,
    n1: usize,
    n2: usize,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    /// Degree of the intercept block: max(N1, N2).
    pub fn alpha_degree(&self) -> usize {
        self.n1.max(self.n2)
    }

    pub fn beta_degree(&self) -> usize {
        self.n2
    }
}

/// Coefficients of the score surrogate: the alpha block multiplies
/// [1, b, …, b^M] and the beta block multiplies Z·[1, b, …, b^{N2}].
#[derive(Debug, Clone)]
pub struct SurrogateFit {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Condition estimate of the normal-equations matrix.
    pub condition: f64,
}

impl SurrogateFit {
    pub fn coefficients(&self) -> Vec<f64> {
        let mut zeta = self.alpha.clone();
        zeta.extend_from_slice(&self.beta);
        zeta
    }

    /// Evaluate the Z-coefficient polynomial Σ β_k b^k, which equals the
    /// fitted group contrast at fixed b.
    pub fn beta_poly(&self, b: f64) -> f64 {
        poly_eval(&self.beta, b)
    }

    pub fn alpha_poly(&self, b: f64) -> f64 {
        poly_eval(&self.alpha, b)
    }
}

/// Coefficients γ of the fair target's conditional expectation, together
/// with the source fit on the true labels.
#[derive(Debug, Clone)]
pub struct FairTargetCoeffs {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
}

impl FairTargetCoeffs {
    pub fn gamma_poly(&self, b: f64) -> f64 {
        poly_eval(&self.gamma, b)
    }
}

/// Matrix M★ with ζ = M★ · target, so ∂ζ_j/∂target_i = M★[j][i].
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    /// (M + N2 + 2) × n.
    matrix: Matrix,
    condition: f64,
}

impl InfluenceMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn n_coeffs(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_examples(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// ζ = M★ · target.
    pub fn apply(&self, target: &[f64]) -> Vec<f64> {
        self.matrix.matvec(target)
    }

    /// M★ᵀ · v, used to push coefficient-space gradients back to examples.
    pub fn apply_transposed(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.t_matvec(v)
    }
}

fn poly_eval(coeffs: &[f64], b: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * b + c;
    }
    acc
}

/// Build the regression design over balancing scores and the protected
/// attribute. Powers are exact, with no recentering.
pub fn build_design(b: &[f64], z: &[u8], n1: usize, n2: usize) -> DesignMatrix {
    assert_eq!(b.len(), z.len(), "b and z must be aligned");
    let m = n1.max(n2);
    let cols = m + n2 + 2;
    let mut matrix = Matrix::zeros(b.len(), cols);
    for (i, (&bi, &zi)) in b.iter().zip(z).enumerate() {
        let mut pow = 1.0;
        for k in 0..=m {
            matrix.set(i, k, pow);
            pow *= bi;
        }
        if zi == 1 {
            let mut pow = 1.0;
            for k in 0..=n2 {
                matrix.set(i, m + 1 + k, pow);
                pow *= bi;
            }
        }
    }
    DesignMatrix { matrix, n1, n2 }
}

fn normal_equations(design: &DesignMatrix) -> Result<(Cholesky, f64)> {
    let mut gram = design.matrix.gram();
    for j in 1..gram.n_cols() {
        let v = gram.get(j, j);
        gram.set(j, j, v + RIDGE);
    }
    let condition = condition_estimate(&gram);
    let factor = Cholesky::factor(&gram).map_err(|_| Error::SingularSystem { condition })?;
    Ok((factor, condition))
}

/// Solve the (lightly ridged) normal equations for the surrogate
/// coefficients.
pub fn fit_ols(design: &DesignMatrix, target: &[f64]) -> Result<SurrogateFit> {
    if target.len() != design.n_rows() {
        return Err(Error::DimensionMismatch {
            what: "regression target".into(),
            expected: design.n_rows(),
            found: target.len(),
        });
    }
    if design.n_rows() < design.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "need at least {} rows to fit {} coefficients",
            design.n_cols(),
            design.n_cols()
        )));
    }
    let (factor, condition) = normal_equations(design)?;
    let rhs = design.matrix.t_matvec(target);
    let zeta = factor.solve(&rhs);
    let m = design.alpha_degree();
    Ok(SurrogateFit {
        alpha: zeta[..=m].to_vec(),
        beta: zeta[m + 1..].to_vec(),
        condition,
    })
}

/// Fit the true-label regression and apply the indicator rule
/// γ_k = α_k·I(k ≤ N1) + ½·β_k·I(k ≤ N2).
pub fn fair_target_coeffs(
    train_y: &[u8],
    b: &[f64],
    z: &[u8],
    n1: usize,
    n2: usize,
) -> Result<FairTargetCoeffs> {
    let design = build_design(b, z, n1, n2);
    let target: Vec<f64> = train_y.iter().map(|&v| v as f64).collect();
    let fit = fit_ols(&design, &target)?;
    let m = n1.max(n2);
    let mut gamma = vec![0.0; m + 1];
    for (k, g) in gamma.iter_mut().enumerate() {
        let a = if k <= n1 { fit.alpha[k] } else { 0.0 };
        let bk = if k <= n2 { 0.5 * fit.beta[k] } else { 0.0 };
        *g = a + bk;
    }
    Ok(FairTargetCoeffs {
        gamma,
        alpha: fit.alpha,
        beta: fit.beta,
        n1,
        n2,
    })
}

/// M★ = (ΓᵀΓ + δI)⁻¹Γᵀ. Because OLS is linear in the target, column i of
/// M★ is exactly ∂ζ/∂target_i.
pub fn influence_matrix(design: &DesignMatrix) -> Result<InfluenceMatrix> {
    let (factor, condition) = normal_equations(design)?;
    let k = design.n_cols();
    let n = design.n_rows();
    let mut matrix = Matrix::zeros(k, n);
    for i in 0..n {
        let col = factor.solve(design.matrix.row(i));
        for j in 0..k {
            matrix.set(j, i, col[j]);
        }
    }
    Ok(InfluenceMatrix { matrix, condition })
}
