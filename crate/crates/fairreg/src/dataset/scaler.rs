//! Column standardization fit on the training split only. Constant
//! columns cannot be standardized and are dropped with a warning record.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::Dataset;

#[derive(Debug, Clone)]
pub struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
    kept: Vec<usize>,
    dropped_names: Vec<String>,
}

impl Scaler {
    /// Estimate per-column mean and (population) standard deviation.
    pub fn fit(train: &Dataset) -> Scaler {
        let n = train.n_rows() as f64;
        let p = train.n_features();
        let mut mean = vec![0.0; p];
        let mut std = vec![0.0; p];
        let mut kept = Vec::with_capacity(p);
        let mut dropped_names = Vec::new();
        for j in 0..p {
            let mut s = 0.0;
            for i in 0..train.n_rows() {
                s += train.features.get(i, j);
            }
            let m = s / n;
            let mut sq = 0.0;
            for i in 0..train.n_rows() {
                let d = train.features.get(i, j) - m;
                sq += d * d;
            }
            let var = sq / n;
            mean[j] = m;
            std[j] = var.sqrt();
            if var <= 1e-24 {
                dropped_names.push(train.feature_names[j].clone());
            } else {
                kept.push(j);
            }
        }
        Scaler {
            mean,
            std,
            kept,
            dropped_names,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.kept
    }

    /// Names of training columns dropped because they were constant.
    pub fn dropped_names(&self) -> &[String] {
        &self.dropped_names
    }

    /// Standardize a dataset with the fitted parameters, dropping the
    /// columns that were constant on the training split.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "scaler input features".into(),
                expected: self.mean.len(),
                found: ds.n_features(),
            });
        }
        let n = ds.n_rows();
        let mut out = Matrix::zeros(n, self.kept.len());
        for i in 0..n {
            for (jj, &j) in self.kept.iter().enumerate() {
                out.set(i, jj, (ds.features.get(i, j) - self.mean[j]) / self.std[j]);
            }
        }
        Dataset::new(
            out,
            ds.y.clone(),
            ds.z.clone(),
            self.kept.iter().map(|&j| ds.feature_names[j].clone()).collect(),
            ds.feature_roles
                .as_ref()
                .map(|roles| self.kept.iter().map(|&j| roles[j]).collect()),
        )
    }

    /// Map a standardized feature matrix back to the original units of
    /// the kept columns.
    pub fn inverse_transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.n_cols() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                what: "scaler inverse input".into(),
                expected: self.kept.len(),
                found: features.n_cols(),
            });
        }
        let mut out = Matrix::zeros(features.n_rows(), self.kept.len());
        for i in 0..features.n_rows() {
            for (jj, &j) in self.kept.iter().enumerate() {
                out.set(i, jj, features.get(i, jj) * self.std[j] + self.mean[j]);
            }
        }
        Ok(out)
    }
}

/// Fit on the training split; see [`Scaler::fit`].
pub fn fit_scaler(train: &Dataset) -> Scaler {
    Scaler::fit(train)
}

/// Apply a fitted scaler; see [`Scaler::transform`].
pub fn apply_scaler(scaler: &Scaler, ds: &Dataset) -> Result<Dataset> {
    scaler.transform(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_synthetic;

    fn col_mean_var(ds: &Dataset, j: usize) -> (f64, f64) {
        let n = ds.n_rows() as f64;
        let m = (0..ds.n_rows()).map(|i| ds.features.get(i, j)).sum::<f64>() / n;
        let v = (0..ds.n_rows())
            .map(|i| {
                let d = ds.features.get(i, j) - m;
                d * d
            })
            .sum::<f64>()
            / n;
        (m, v)
    }

    #[test]
    fn three_point_column_standardizes_exactly() {
        let ds = Dataset::new(
            Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]),
            vec![0, 1, 0],
            vec![0, 1, 1],
            vec!["x".into()],
            None,
        )
        .unwrap();
        let scaler = Scaler::fit(&ds);
        let t = scaler.transform(&ds).unwrap();
        let (m, v) = col_mean_var(&t, 0);
        assert!(m.abs() < 1e-10);
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn train_columns_have_zero_mean_unit_variance() {
        let ds = generate_synthetic(20_000, 4, 10, 4, 2).unwrap();
        let scaler = Scaler::fit(&ds);
        let t = scaler.transform(&ds).unwrap();
        for j in 0..t.n_features() {
            let (m, v) = col_mean_var(&t, j);
            assert!(m.abs() < 1e-10, "column {j} mean {m}");
            assert!((v - 1.0).abs() < 1e-8, "column {j} var {v}");
        }
    }

    #[test]
    fn safe_column_mean_concentrates_near_zero() {
        let ds = generate_synthetic(100_000, 8, 10, 4, 2).unwrap();
        let scaler = Scaler::fit(&ds);
        assert!(scaler.mean()[0].abs() < 0.02);
    }

    #[test]
    fn constant_column_is_dropped_with_warning() {
        let ds = Dataset::new(
            Matrix::from_rows(vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]),
            vec![0, 1, 0],
            vec![0, 1, 1],
            vec!["const".into(), "x".into()],
            None,
        )
        .unwrap();
        let scaler = Scaler::fit(&ds);
        assert_eq!(scaler.dropped_names(), &["const".to_string()]);
        let t = scaler.transform(&ds).unwrap();
        assert_eq!(t.n_features(), 1);
        assert_eq!(t.feature_names, vec!["x".to_string()]);
    }

    #[test]
    fn round_trip_recovers_original() {
        let ds = generate_synthetic(500, 13, 4, 2, 1).unwrap();
        let scaler = Scaler::fit(&ds);
        let t = scaler.transform(&ds).unwrap();
        let back = scaler.inverse_transform(&t.features).unwrap();
        for i in 0..ds.n_rows() {
            for j in 0..ds.n_features() {
                assert!((back.get(i, j) - ds.features.get(i, j)).abs() < 1e-10);
            }
        }
    }
}
