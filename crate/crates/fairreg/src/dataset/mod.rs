//! Dataset representation, synthetic causal data generation, UCI Adult
//! ingestion and preprocessing (one-hot encoding, standardization, splits).

mod adult;
mod scaler;
mod synthetic;

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use adult::load_adult;
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use synthetic::{
    generate_synthetic, DEFAULT_N_INDIRECT, DEFAULT_N_PROXY, DEFAULT_N_SAFE,
};

/// Role a feature plays in the generating process, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureRole {
    /// Independent of the protected attribute.
    Safe,
    /// Caused by the protected attribute and predictive of the label.
    Indirect,
    /// Caused by the protected attribute only.
    Proxy,
    /// Observational data without a known causal tag.
    RealData,
}

impl fmt::Display for FeatureRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureRole::Safe => "safe",
            FeatureRole::Indirect => "indirect",
            FeatureRole::Proxy => "proxy",
            FeatureRole::RealData => "real-data",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for FeatureRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "safe" => Ok(FeatureRole::Safe),
            "indirect" => Ok(FeatureRole::Indirect),
            "proxy" => Ok(FeatureRole::Proxy),
            "real-data" => Ok(FeatureRole::RealData),
            other => Err(Error::InvalidArgument(format!("unknown feature role {other:?}"))),
        }
    }
}

/// A binary-classification dataset with a binary protected attribute.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
    pub feature_names: Vec<String>,
    pub feature_roles: Option<Vec<FeatureRole>>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        y: Vec<u8>,
        z: Vec<u8>,
        feature_names: Vec<String>,
        feature_roles: Option<Vec<FeatureRole>>,
    ) -> Result<Dataset> {
        let ds = Dataset {
            features,
            y,
            z,
            feature_names,
            feature_roles,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Check the structural invariants: binary y/z, both groups present,
    /// finite features, role list aligned with names.
    pub fn validate(&self) -> Result<()> {
        let n = self.features.n_rows();
        if self.y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "label vector".into(),
                expected: n,
                found: self.y.len(),
            });
        }
        if self.z.len() != n {
            return Err(Error::DimensionMismatch {
                what: "protected-attribute vector".into(),
                expected: n,
                found: self.z.len(),
            });
        }
        if self.feature_names.len() != self.features.n_cols() {
            return Err(Error::DimensionMismatch {
                what: "feature names".into(),
                expected: self.features.n_cols(),
                found: self.feature_names.len(),
            });
        }
        if let Some(roles) = &self.feature_roles {
            if roles.len() != self.feature_names.len() {
                return Err(Error::DimensionMismatch {
                    what: "feature roles".into(),
                    expected: self.feature_names.len(),
                    found: roles.len(),
                });
            }
        }
        if self.y.iter().any(|&v| v > 1) || self.z.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("y and z entries must be 0 or 1".into()));
        }
        if !self.z.contains(&0) || !self.z.contains(&1) {
            return Err(Error::DegenerateGroup(
                "both protected groups must be nonempty".into(),
            ));
        }
        if self.features.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("features contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn select_rows(&self, keep: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(keep),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            z: keep.iter().map(|&i| self.z[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_roles: self.feature_roles.clone(),
        }
    }

    /// Write the dataset as CSV: feature columns, then `y` and `z`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut header = self.feature_names.join(",");
        header.push_str(",y,z");
        writeln!(f, "{header}").map_err(|e| Error::io(path, e))?;
        let mut line = String::new();
        for i in 0..self.n_rows() {
            line.clear();
            for v in self.features.row(i) {
                line.push_str(&format!("{v:.8e},"));
            }
            line.push_str(&format!("{},{}", self.y[i], self.z[i]));
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Read a dataset previously written by [`Dataset::to_csv`].
    pub fn from_csv(path: &Path) -> Result<Dataset> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: path.into(),
                line: 1,
                msg: "empty file".into(),
            })?
            .1
            .map_err(|e| Error::io(path, e))
            .map(|h| (0, h))?;
        let cols: Vec<String> = header.split(',').map(str::to_string).collect();
        if cols.len() < 3 || cols[cols.len() - 2] != "y" || cols[cols.len() - 1] != "z" {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "expected header ending in y,z".into(),
            });
        }
        let p = cols.len() - 2;
        let feature_names = cols[..p].to_vec();
        let mut data = Vec::new();
        let mut y = Vec::new();
        let mut z = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != p + 2 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("expected {} fields, found {}", p + 2, parts.len()),
                });
            }
            for part in &parts[..p] {
                data.push(part.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg: e.to_string(),
                })?);
            }
            let parse_bit = |s: &str| -> Result<u8> {
                match s {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::Parse {
                        path: path.into(),
                        line: idx + 1,
                        msg: format!("expected 0/1, found {other:?}"),
                    }),
                }
            };
            y.push(parse_bit(parts[p])?);
            z.push(parse_bit(parts[p + 1])?);
        }
        let n = y.len();
        Dataset::new(Matrix::from_vec(n, p, data), y, z, feature_names, None)
    }
}

/// Deterministically split off a holdout part with `floor(fraction * n)`
/// rows. Returns `(main, holdout)`.
pub fn holdout_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = ds.n_rows();
    let n_holdout = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (holdout_idx, main_idx) = order.split_at(n_holdout);
    let mut main_idx = main_idx.to_vec();
    let mut holdout_idx = holdout_idx.to_vec();
    main_idx.sort_unstable();
    holdout_idx.sort_unstable();
    let main = ds.select_rows(&main_idx);
    let holdout = ds.select_rows(&holdout_idx);
    for (part, tag) in [(&main, "main"), (&holdout, "holdout")] {
        if let Err(e) = part.validate() {
            return Err(Error::DegenerateSplit(format!("{tag} part: {e}")));
        }
    }
    Ok((main, holdout))
}

/// Manifest describing feature roles and scaler parameters for a
/// preprocessed dataset, so experiments can be reproduced exactly.
#[derive(Debug, Clone)]
pub struct Manifest {
    /// `(column, role, mean, std)` for retained columns.
    pub columns: Vec<(String, String, f64, f64)>,
    /// Columns dropped during standardization (constant on train).
    pub dropped: Vec<String>,
}

impl Manifest {
    pub fn from_parts(ds: &Dataset, scaler: &Scaler) -> Manifest {
        let columns = ds
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let role = ds
                    .feature_roles
                    .as_ref()
                    .map_or("real-data".to_string(), |r| r[j].to_string());
                (name.clone(), role, scaler.mean()[j], scaler.std()[j])
            })
            .collect();
        Manifest {
            columns,
            dropped: scaler.dropped_names().to_vec(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "column,role,mean,std").map_err(|e| Error::io(path, e))?;
        for (name, role, mean, std) in &self.columns {
            writeln!(f, "{name},{role},{mean:.8e},{std:.8e}").map_err(|e| Error::io(path, e))?;
        }
        for name in &self.dropped {
            writeln!(f, "{name},dropped-constant,0.0,0.0").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}
