//! Synthetic data following the assumed causal graph: Z influences the
//! label directly and through indirect-effect covariates, proxy
//! covariates carry Z only, and safe covariates are independent of Z.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};

use super::{Dataset, FeatureRole};

pub const DEFAULT_N_SAFE: usize = 10;
pub const DEFAULT_N_INDIRECT: usize = 4;
pub const DEFAULT_N_PROXY: usize = 2;

/// Generate `n_rows` samples:
/// Z ~ Bernoulli(0.5); safe columns ~ N(0,1); indirect and proxy columns
/// ~ N(Z,1); label log-odds 0.25·(Σ indirect + Σ safe) + 1.25·Z.
///
/// Column order is safe, indirect, proxy; roles are tagged accordingly.
pub fn generate_synthetic(
    n_rows: usize,
    seed: u64,
    n_safe: usize,
    n_indirect: usize,
    n_proxy: usize,
) -> Result<Dataset> {
    if n_rows == 0 {
        return Err(Error::InvalidArgument("n_rows must be positive".into()));
    }
    let p = n_safe + n_indirect + n_proxy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Matrix::zeros(n_rows, p);
    let mut y = Vec::with_capacity(n_rows);
    let mut z = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let zi: u8 = if rng.gen_bool(0.5) { 1 } else { 0 };
        let mut log_odds = 1.25 * zi as f64;
        for j in 0..n_safe {
            let v: f64 = StandardNormal.sample(&mut rng);
            features.set(i, j, v);
            log_odds += 0.25 * v;
        }
        for j in 0..n_indirect {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let v = zi as f64 + noise;
            features.set(i, n_safe + j, v);
            log_odds += 0.25 * v;
        }
        for j in 0..n_proxy {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.set(i, n_safe + n_indirect + j, zi as f64 + noise);
        }
        let yi: u8 = if rng.gen_bool(sigmoid(log_odds)) { 1 } else { 0 };
        y.push(yi);
        z.push(zi);
    }
    let mut names = Vec::with_capacity(p);
    let mut roles = Vec::with_capacity(p);
    for j in 0..n_safe {
        names.push(format!("safe_{j}"));
        roles.push(FeatureRole::Safe);
    }
    for j in 0..n_indirect {
        names.push(format!("indirect_{j}"));
        roles.push(FeatureRole::Indirect);
    }
    for j in 0..n_proxy {
        names.push(format!("proxy_{j}"));
        roles.push(FeatureRole::Proxy);
    }
    Dataset::new(features, y, z, names, Some(roles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rows() {
        assert!(matches!(
            generate_synthetic(0, 1, 10, 4, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn default_shape_is_sixteen_features() {
        let ds = generate_synthetic(50, 1, DEFAULT_N_SAFE, DEFAULT_N_INDIRECT, DEFAULT_N_PROXY)
            .unwrap();
        assert_eq!(ds.n_features(), 16);
        assert_eq!(ds.n_rows(), 50);
        let roles = ds.feature_roles.as_ref().unwrap();
        assert_eq!(roles.iter().filter(|r| **r == FeatureRole::Safe).count(), 10);
        assert_eq!(roles.iter().filter(|r| **r == FeatureRole::Indirect).count(), 4);
        assert_eq!(roles.iter().filter(|r| **r == FeatureRole::Proxy).count(), 2);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(100, 11, 3, 2, 1).unwrap();
        let b = generate_synthetic(100, 11, 3, 2, 1).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
        assert_eq!(a.features.data(), b.features.data());
    }

    #[test]
    fn no_covariates_gives_closed_form_group_means() {
        // with no covariates the log-odds are 1.25·Z, so
        // E[Y|Z=1] = sigmoid(1.25), E[Y|Z=0] = 0.5
        let ds = generate_synthetic(200_000, 3, 0, 0, 0).unwrap();
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..ds.n_rows() {
            if ds.z[i] == 1 {
                s1 += ds.y[i] as f64;
                n1 += 1.0;
            } else {
                s0 += ds.y[i] as f64;
                n0 += 1.0;
            }
        }
        assert!((s1 / n1 - sigmoid(1.25)).abs() < 0.01);
        assert!((s0 / n0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn group_balance_and_column_means() {
        let ds = generate_synthetic(100_000, 21, 10, 4, 2).unwrap();
        let frac_z1 = ds.z.iter().map(|&v| v as f64).sum::<f64>() / ds.n_rows() as f64;
        assert!((0.49..=0.51).contains(&frac_z1), "P(Z=1) = {frac_z1}");
        // proxy and indirect columns track their group's Z value
        let roles = ds.feature_roles.clone().unwrap();
        for (j, role) in roles.iter().enumerate() {
            if matches!(role, FeatureRole::Indirect | FeatureRole::Proxy) {
                for group in [0u8, 1u8] {
                    let (mut s, mut n) = (0.0, 0.0);
                    for i in 0..ds.n_rows() {
                        if ds.z[i] == group {
                            s += ds.features.get(i, j);
                            n += 1.0;
                        }
                    }
                    assert!(
                        (s / n - group as f64).abs() < 0.02,
                        "column {j} group {group} mean {}",
                        s / n
                    );
                }
            }
        }
    }
}
