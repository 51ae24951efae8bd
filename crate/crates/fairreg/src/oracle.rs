//! Exact causal-effect computation on small finite structural models:
//! the protected attribute Z is a parent of both the covariates and the
//! outcome, so every effect is a finite sum over the covariate support.
//! Serves as the ground-truth oracle for the balancing-score machinery.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for grouping covariate points into equal-balancing-score
/// level sets. Exact ties are the common case; the tolerance only guards
/// against float noise in hand-built tables.
const LEVEL_TOL: f64 = 1e-12;

/// A discrete structural model over a finite covariate support.
#[derive(Debug, Clone)]
pub struct DiscreteScm {
    /// P(Z = 1).
    pub p_z1: f64,
    /// P(X = x_j | Z = 0), one entry per support point.
    pub p_x_given_z0: Vec<f64>,
    /// P(X = x_j | Z = 1).
    pub p_x_given_z1: Vec<f64>,
    /// E[Y | Z = 0, X = x_j], in [0, 1].
    pub e_y_z0: Vec<f64>,
    /// E[Y | Z = 1, X = x_j], in [0, 1].
    pub e_y_z1: Vec<f64>,
}

/// One balancing-score level set: the score value, the member points and
/// their total marginal mass.
#[derive(Debug, Clone)]
pub struct BLevel {
    pub b: f64,
    pub points: Vec<usize>,
    pub mass: f64,
}

/// Deviations from the exact identities, reported by
/// [`DiscreteScm::verify_theorem2`].
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// |E_x[CDE] - ∫ MFCDE(b) p(b) db|
    pub averaging_dev: f64,
    /// |NDE(z*) - (-1)^(z*-1) ∫ MFCDE(b) p(b|z*) db| for z* = 0, 1
    pub nde_dev: [f64; 2],
    /// |(E[Y_f|Z=1] - E[Y_f|Z=0]) - (NIE(1) - NIE(0)) / 2|
    pub fair_target_dev: f64,
    /// |ATE - (NIE(1) - NDE(0))| and |ATE - (NDE(1) - NIE(0))|
    pub pearl_dev: [f64; 2],
}

impl IdentityReport {
    pub fn max_deviation(&self) -> f64 {
        [
            self.averaging_dev,
            self.nde_dev[0],
            self.nde_dev[1],
            self.fair_target_dev,
            self.pearl_dev[0],
            self.pearl_dev[1],
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl DiscreteScm {
    pub fn new(
        p_z1: f64,
        p_x_given_z0: Vec<f64>,
        p_x_given_z1: Vec<f64>,
        e_y_z0: Vec<f64>,
        e_y_z1: Vec<f64>,
    ) -> Result<DiscreteScm> {
        let scm = DiscreteScm {
            p_z1,
            p_x_given_z0,
            p_x_given_z1,
            e_y_z0,
            e_y_z1,
        };
        scm.validate()?;
        Ok(scm)
    }

    pub fn n_points(&self) -> usize {
        self.p_x_given_z0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_points();
        if k == 0 {
            return Err(Error::InvalidScm("empty covariate support".into()));
        }
        for (name, v) in [
            ("P(X|Z=0)", &self.p_x_given_z0),
            ("P(X|Z=1)", &self.p_x_given_z1),
            ("E[Y|Z=0,x]", &self.e_y_z0),
            ("E[Y|Z=1,x]", &self.e_y_z1),
        ] {
            if v.len() != k {
                return Err(Error::InvalidScm(format!("{name} has wrong length")));
            }
            if v.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidScm(format!("{name} entries must lie in [0,1]")));
            }
        }
        if !(0.0 < self.p_z1 && self.p_z1 < 1.0) {
            return Err(Error::InvalidScm("P(Z=1) must lie strictly in (0,1)".into()));
        }
        for (name, v) in [("P(X|Z=0)", &self.p_x_given_z0), ("P(X|Z=1)", &self.p_x_given_z1)] {
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidScm(format!("{name} sums to {s}, expected 1")));
            }
        }
        // overlap: every point with positive marginal mass must be
        // reachable from both groups
        for j in 0..k {
            if self.marginal(j) > 0.0 {
                let b = self.balancing_score(j);
                if !(b > 0.0 && b < 1.0) {
                    return Err(Error::InvalidScm(format!(
                        "support point {j} violates overlap (P(Z=1|x) = {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Marginal mass p(x_j).
    pub fn marginal(&self, j: usize) -> f64 {
        self.p_z1 * self.p_x_given_z1[j] + (1.0 - self.p_z1) * self.p_x_given_z0[j]
    }

    /// Exact propensity b(x_j) = P(Z=1 | X=x_j) by Bayes' rule.
    pub fn balancing_score(&self, j: usize) -> f64 {
        let joint1 = self.p_z1 * self.p_x_given_z1[j];
        joint1 / self.marginal(j)
    }

    /// E[Y | Z = z].
    pub fn e_y_given_z(&self, z: u8) -> f64 {
        let (p_x, e_y) = if z == 1 {
            (&self.p_x_given_z1, &self.e_y_z1)
        } else {
            (&self.p_x_given_z0, &self.e_y_z0)
        };
        p_x.iter().zip(e_y).map(|(p, e)| p * e).sum()
    }

    /// Average treatment effect E[Y|Z=1] - E[Y|Z=0].
    pub fn ate(&self) -> f64 {
        self.e_y_given_z(1) - self.e_y_given_z(0)
    }

    /// Controlled direct effect at support point `j`.
    pub fn cde(&self, j: usize) -> f64 {
        self.e_y_z1[j] - self.e_y_z0[j]
    }

    /// Natural direct effect with baseline `z_star`, following the sign
    /// convention NDE(z*) = (-1)^(z*-1) Σ_x CDE(x) P(x|Z=z*).
    pub fn nde(&self, z_star: u8) -> f64 {
        let p_x = if z_star == 1 { &self.p_x_given_z1 } else { &self.p_x_given_z0 };
        let sum: f64 = (0..self.n_points()).map(|j| self.cde(j) * p_x[j]).sum();
        if z_star == 1 {
            sum
        } else {
            -sum
        }
    }

    /// Natural indirect effect with baseline `z_star`:
    /// E[Y|Z=z*] - Σ_x E[Y|z*,x] P(x|Z=1-z*).
    pub fn nie(&self, z_star: u8) -> f64 {
        let e_y = if z_star == 1 { &self.e_y_z1 } else { &self.e_y_z0 };
        let p_other = if z_star == 1 { &self.p_x_given_z0 } else { &self.p_x_given_z1 };
        let crossed: f64 = e_y.iter().zip(p_other).map(|(e, p)| e * p).sum();
        self.e_y_given_z(z_star) - crossed
    }

    /// Group support points into balancing-score level sets.
    pub fn b_levels(&self) -> Vec<BLevel> {
        let mut levels: Vec<BLevel> = Vec::new();
        let mut order: Vec<usize> = (0..self.n_points()).collect();
        order.sort_by(|&a, &b| {
            self.balancing_score(a)
                .partial_cmp(&self.balancing_score(b))
                .unwrap()
        });
        for j in order {
            let b = self.balancing_score(j);
            let mass = self.marginal(j);
            match levels.last_mut() {
                Some(level) if (level.b - b).abs() <= LEVEL_TOL => {
                    level.points.push(j);
                    level.mass += mass;
                }
                _ => levels.push(BLevel {
                    b,
                    points: vec![j],
                    mass,
                }),
            }
        }
        levels
    }

    /// Mean-field CDE at a balancing-score value: the mass-weighted
    /// average of the CDE over the level set {x : b(x) = b_value}.
    pub fn mfcde(&self, b_value: f64) -> Result<f64> {
        let level = self
            .b_levels()
            .into_iter()
            .find(|l| (l.b - b_value).abs() <= LEVEL_TOL)
            .ok_or(Error::UnattainedLevel(b_value))?;
        Ok(self.mfcde_of_level(&level))
    }

    fn mfcde_of_level(&self, level: &BLevel) -> f64 {
        let weighted: f64 = level.points.iter().map(|&j| self.marginal(j) * self.cde(j)).sum();
        weighted / level.mass
    }

    /// E[Y | Z = z, b = level]. By the balancing property the within-level
    /// weights are the marginal masses for either group.
    fn e_y_given_z_level(&self, z: u8, level: &BLevel) -> f64 {
        let e_y = if z == 1 { &self.e_y_z1 } else { &self.e_y_z0 };
        let weighted: f64 = level.points.iter().map(|&j| self.marginal(j) * e_y[j]).sum();
        weighted / level.mass
    }

    /// P(level | Z = z).
    fn level_mass_given_z(&self, z: u8, level: &BLevel) -> f64 {
        let p_x = if z == 1 { &self.p_x_given_z1 } else { &self.p_x_given_z0 };
        level.points.iter().map(|&j| p_x[j]).sum()
    }

    /// Check the exact identities relating the mean-field CDE to the
    /// population effects, and the fair-target identity built from the
    /// saturated (per-level) fair target. Reports absolute deviations.
    pub fn verify_theorem2(&self) -> IdentityReport {
        let levels = self.b_levels();
        // averaging identity: ∫ MFCDE p(b) = E_x[CDE]
        let lhs_avg: f64 = levels.iter().map(|l| l.mass * self.mfcde_of_level(l)).sum();
        let rhs_avg: f64 = (0..self.n_points()).map(|j| self.marginal(j) * self.cde(j)).sum();
        let averaging_dev = (lhs_avg - rhs_avg).abs();

        // NDE(z*) = (-1)^(z*-1) ∫ MFCDE(b) p(b|z*) db
        let mut nde_dev = [0.0; 2];
        for z_star in [0u8, 1u8] {
            let sum: f64 = levels
                .iter()
                .map(|l| self.level_mass_given_z(z_star, l) * self.mfcde_of_level(l))
                .sum();
            let signed = if z_star == 1 { sum } else { -sum };
            nde_dev[z_star as usize] = (self.nde(z_star) - signed).abs();
        }

        // fair target: per-level E[Y_f|Z,b] = E[Y|Z,b] + (-1)^Z/2 MFCDE(b),
        // which is Z-independent and equals the symmetric group mean
        let e_yf = |z: u8| -> f64 {
            levels
                .iter()
                .map(|l| {
                    let f = 0.5 * (self.e_y_given_z_level(1, l) + self.e_y_given_z_level(0, l));
                    self.level_mass_given_z(z, l) * f
                })
                .sum()
        };
        let lhs_fair = e_yf(1) - e_yf(0);
        let rhs_fair = 0.5 * (self.nie(1) - self.nie(0));
        let fair_target_dev = (lhs_fair - rhs_fair).abs();

        let ate = self.ate();
        let pearl_dev = [
            (ate - (self.nie(1) - self.nde(0))).abs(),
            (ate - (self.nde(1) - self.nie(0))).abs(),
        ];

        IdentityReport {
            averaging_dev,
            nde_dev,
            fair_target_dev,
            pearl_dev,
        }
    }

    /// Draw `(x index, z, y)` samples from the model.
    pub fn sample(&self, n: usize, seed: u64) -> (Vec<usize>, Vec<u8>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let z: u8 = if rng.gen_bool(self.p_z1) { 1 } else { 0 };
            let p_x = if z == 1 { &self.p_x_given_z1 } else { &self.p_x_given_z0 };
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = p_x.len() - 1;
            for (j, &p) in p_x.iter().enumerate() {
                acc += p;
                if u < acc {
                    x = j;
                    break;
                }
            }
            let e_y = if z == 1 { self.e_y_z1[x] } else { self.e_y_z0[x] };
            let y: u8 = if rng.gen_bool(e_y) { 1 } else { 0 };
            xs.push(x);
            zs.push(z);
            ys.push(y);
        }
        (xs, zs, ys)
    }

    /// Serialize as a small text table for regression-test fixtures.
    pub fn to_text(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "p_z1,{:.17e}", self.p_z1).map_err(|e| Error::io(path, e))?;
        writeln!(f, "point,p_x_z0,p_x_z1,e_y_z0,e_y_z1").map_err(|e| Error::io(path, e))?;
        for j in 0..self.n_points() {
            writeln!(
                f,
                "{j},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.p_x_given_z0[j], self.p_x_given_z1[j], self.e_y_z0[j], self.e_y_z1[j]
            )
            .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn from_text(path: &Path) -> Result<DiscreteScm> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut p_z1 = None;
        let mut cols: [Vec<f64>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() || line.starts_with("point,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg: format!("bad number {s:?}"),
                })
            };
            if parts[0] == "p_z1" {
                p_z1 = Some(parse(parts[1])?);
            } else {
                for (c, part) in cols.iter_mut().zip(&parts[1..]) {
                    c.push(parse(part)?);
                }
            }
        }
        let [p0, p1, e0, e1] = cols;
        DiscreteScm::new(
            p_z1.ok_or_else(|| Error::Parse {
                path: path.into(),
                line: 1,
                msg: "missing p_z1 row".into(),
            })?,
            p0,
            p1,
            e0,
            e1,
        )
    }
}

/// Random well-conditioned model: conditionals bounded away from zero so
/// overlap holds comfortably, outcome means in [0.05, 0.95].
pub fn random_scm(rng: &mut ChaCha8Rng, max_points: usize) -> DiscreteScm {
    let k = rng.gen_range(2..=max_points.max(2));
    let p_z1 = rng.gen_range(0.2..0.8);
    let simplex = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    };
    let means = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..k).map(|_| rng.gen_range(0.05..0.95)).collect() };
    DiscreteScm::new(p_z1, simplex(rng), simplex(rng), means(rng), means(rng))
        .expect("generator respects invariants")
}

/// Random model whose support collapses onto exactly two well-separated
/// balancing-score levels, so a saturated degree-1 surrogate is exact.
pub fn random_two_level_scm(rng: &mut ChaCha8Rng) -> DiscreteScm {
    loop {
        let scm = random_scm(rng, 2);
        let levels = scm.b_levels();
        if levels.len() == 2 && (levels[0].b - levels[1].b).abs() > 0.1 {
            return scm;
        }
    }
}

/// Aggregate result of the identity property suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub instances: usize,
    pub max_deviation: f64,
    pub max_averaging_dev: f64,
    pub max_nde_dev: f64,
    pub max_fair_target_dev: f64,
    pub max_pearl_dev: f64,
}

/// Run the identity checks over `instances` random models.
pub fn identity_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        instances,
        max_deviation: 0.0,
        max_averaging_dev: 0.0,
        max_nde_dev: 0.0,
        max_fair_target_dev: 0.0,
        max_pearl_dev: 0.0,
    };
    for _ in 0..instances {
        let scm = random_scm(&mut rng, 6);
        let r = scm.verify_theorem2();
        report.max_deviation = report.max_deviation.max(r.max_deviation());
        report.max_averaging_dev = report.max_averaging_dev.max(r.averaging_dev);
        report.max_nde_dev = report.max_nde_dev.max(r.nde_dev[0].max(r.nde_dev[1]));
        report.max_fair_target_dev = report.max_fair_target_dev.max(r.fair_target_dev);
        report.max_pearl_dev = report.max_pearl_dev.max(r.pearl_dev[0].max(r.pearl_dev[1]));
    }
    report
}
