//! UCI Adult (census income) ingestion.
//!
//! The label is income > 50K, the protected attribute is gender
//! (z = 1 for Male). Race, marital-status, native-country and
//! relationship are excluded as additional sensitive attributes, and the
//! fnlwgt sampling weight is dropped. Remaining categoricals are one-hot
//! encoded against the categories seen in the training file; a category
//! unseen at training time encodes to an all-zero block. Missing values
//! ("?") are a category of their own.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{Dataset, FeatureRole};

const N_RAW_FIELDS: usize = 15;

/// Raw covariate fields retained from the census record, in file order.
#[derive(Debug, Clone, Copy)]
enum Field {
    Numeric(usize, &'static str),
    Categorical(usize, &'static str),
}

const KEPT_FIELDS: [Field; 8] = [
    Field::Numeric(0, "age"),
    Field::Categorical(1, "workclass"),
    Field::Categorical(3, "education"),
    Field::Numeric(4, "education-num"),
    Field::Categorical(6, "occupation"),
    Field::Numeric(10, "capital-gain"),
    Field::Numeric(11, "capital-loss"),
    Field::Numeric(12, "hours-per-week"),
];

const SEX_FIELD: usize = 9;
const INCOME_FIELD: usize = 14;

struct RawRows {
    rows: Vec<Vec<String>>,
    y: Vec<u8>,
    z: Vec<u8>,
}

fn read_raw(path: &Path) -> Result<RawRows> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        // the official test file begins with a "|1x3 Cross validator" line
        if trimmed.is_empty() || trimmed.starts_with('|') {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != N_RAW_FIELDS {
            return Err(Error::Parse {
                path: path.into(),
                line: idx + 1,
                msg: format!("expected {N_RAW_FIELDS} fields, found {}", fields.len()),
            });
        }
        // test-file labels carry a trailing period
        let label = fields[INCOME_FIELD].trim_end_matches('.');
        let yi = match label {
            ">50K" => 1,
            "<=50K" => 0,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("unrecognized income label {other:?}"),
                })
            }
        };
        let zi = match fields[SEX_FIELD].as_str() {
            "Male" => 1,
            "Female" => 0,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("unrecognized sex value {other:?}"),
                })
            }
        };
        for field in KEPT_FIELDS {
            if let Field::Numeric(col, name) = field {
                if fields[col].parse::<f64>().is_err() {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: idx + 1,
                        msg: format!("field {name} is not numeric: {:?}", fields[col]),
                    });
                }
            }
        }
        y.push(yi);
        z.push(zi);
        rows.push(fields);
    }
    Ok(RawRows { rows, y, z })
}

/// Category vocabulary per categorical field, learned from training rows.
struct Encoder {
    categories: Vec<Vec<String>>,
}

impl Encoder {
    fn fit(rows: &[Vec<String>]) -> Encoder {
        let categories = KEPT_FIELDS
            .iter()
            .map(|field| match field {
                Field::Categorical(col, _) => {
                    let set: BTreeSet<String> = rows.iter().map(|r| r[*col].clone()).collect();
                    set.into_iter().collect()
                }
                Field::Numeric(..) => Vec::new(),
            })
            .collect();
        Encoder { categories }
    }

    fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (k, field) in KEPT_FIELDS.iter().enumerate() {
            match field {
                Field::Numeric(_, name) => names.push((*name).to_string()),
                Field::Categorical(_, name) => {
                    for cat in &self.categories[k] {
                        names.push(format!("{name}={cat}"));
                    }
                }
            }
        }
        names
    }

    fn encode(&self, raw: RawRows) -> Result<Dataset> {
        let names = self.feature_names();
        let p = names.len();
        let mut features = Matrix::zeros(raw.rows.len(), p);
        for (i, row) in raw.rows.iter().enumerate() {
            let mut j = 0;
            for (k, field) in KEPT_FIELDS.iter().enumerate() {
                match field {
                    Field::Numeric(col, _) => {
                        features.set(i, j, row[*col].parse::<f64>().expect("validated"));
                        j += 1;
                    }
                    Field::Categorical(col, _) => {
                        // unseen categories leave the whole block at zero
                        if let Ok(pos) = self.categories[k].binary_search(&row[*col]) {
                            features.set(i, j + pos, 1.0);
                        }
                        j += self.categories[k].len();
                    }
                }
            }
        }
        Dataset::new(
            features,
            raw.y,
            raw.z,
            names,
            Some(vec![FeatureRole::RealData; p]),
        )
    }
}

/// Load the official train/test files. Returns unstandardized
/// `(train, test)` datasets sharing one encoding fit on the train file.
pub fn load_adult(train_path: &Path, test_path: &Path) -> Result<(Dataset, Dataset)> {
    let raw_train = read_raw(train_path)?;
    let raw_test = read_raw(test_path)?;
    let encoder = Encoder::fit(&raw_train.rows);
    let train = encoder.encode(raw_train)?;
    let test = encoder.encode(raw_test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const ROW_A: &str = "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K";
    const ROW_B: &str = "50, Self-emp-not-inc, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 13, United-States, >50K";
    const ROW_C: &str = "38, Private, 215646, HS-grad, 9, Divorced, Handlers-cleaners, Not-in-family, White, Female, 0, 0, 40, United-States, <=50K";
    const ROW_D: &str = "28, ?, 338409, Bachelors, 13, Married-civ-spouse, Prof-specialty, Wife, Black, Female, 0, 0, 40, Cuba, <=50K";

    fn write_file(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn parses_labels_and_gender() {
        let dir = tempfile::tempdir().unwrap();
        let train = write_file(dir.path(), "train", &[ROW_A, ROW_B, ROW_C, ROW_D]);
        let test = write_file(
            dir.path(),
            "test",
            &[
                "|1x3 Cross validator",
                "25, Private, 226802, 11th, 7, Never-married, Machine-op-inspct, Own-child, Black, Male, 0, 0, 40, United-States, <=50K.",
                "44, Private, 160323, Some-college, 10, Married-civ-spouse, Machine-op-inspct, Husband, Black, Female, 7688, 0, 40, United-States, >50K.",
            ],
        );
        let (tr, te) = load_adult(&train, &test).unwrap();
        assert_eq!(tr.y, vec![0, 1, 0, 0]);
        assert_eq!(tr.z, vec![1, 1, 0, 0]);
        // trailing '.' stripped, comment line skipped
        assert_eq!(te.y, vec![0, 1]);
        assert_eq!(te.z, vec![1, 0]);
    }

    #[test]
    fn education_block_sums_to_one_on_train_zero_on_unseen() {
        let dir = tempfile::tempdir().unwrap();
        let train = write_file(dir.path(), "train", &[ROW_A, ROW_B, ROW_C, ROW_D]);
        let test = write_file(
            dir.path(),
            "test",
            &[
                // "Masters" never appears in the tiny train file
                "30, Private, 1000, Masters, 14, Never-married, Sales, Not-in-family, White, Male, 0, 0, 40, United-States, <=50K.",
                "31, Private, 1000, Doctorate, 16, Never-married, Sales, Not-in-family, White, Female, 0, 0, 40, United-States, <=50K.",
            ],
        );
        let (tr, te) = load_adult(&train, &test).unwrap();
        let edu_cols: Vec<usize> = tr
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with("education="))
            .map(|(j, _)| j)
            .collect();
        for i in 0..tr.n_rows() {
            let s: f64 = edu_cols.iter().map(|&j| tr.features.get(i, j)).sum();
            assert_eq!(s, 1.0);
        }
        let s: f64 = edu_cols.iter().map(|&j| te.features.get(0, j)).sum();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sensitive_and_weight_columns_are_absent() {
        let dir = tempfile::tempdir().unwrap();
        let train = write_file(dir.path(), "train", &[ROW_A, ROW_B, ROW_C, ROW_D]);
        let test = write_file(dir.path(), "test", &[ROW_A, ROW_C]);
        let (tr, _) = load_adult(&train, &test).unwrap();
        for name in &tr.feature_names {
            for banned in ["race", "marital", "native", "relationship", "fnlwgt", "sex"] {
                assert!(!name.contains(banned), "unexpected column {name}");
            }
        }
        // missing values become their own category
        assert!(tr.feature_names.iter().any(|n| n == "workclass=?"));
    }

    #[test]
    fn malformed_row_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let train = write_file(dir.path(), "train", &[ROW_A, "1, 2, 3"]);
        let test = write_file(dir.path(), "test", &[ROW_C]);
        match load_adult(&train, &test) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let test = write_file(dir.path(), "test", &[ROW_C]);
        assert!(matches!(
            load_adult(&dir.path().join("absent"), &test),
            Err(Error::Io { .. })
        ));
    }
}
