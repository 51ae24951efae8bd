//! The λ-annealed double-early-stopping procedure: train on the warm
//! weight until the utility loss stalls, ramp the weight linearly over
//! fifty steps, then train at the target weight until the combined loss
//! stalls on the early-stopping set.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::dataset::{holdout_split, Dataset};
use crate::error::{Error, Result};
use crate::losses::{bce, combine, spd_reg, to_margin_space, CdeRegularizer, LossBundle};
use crate::metrics::MetricsRow;
use crate::propensity::PropensityModel;
use crate::surrogate::{fair_target_coeffs, FairTargetCoeffs};
use crate::trainers::{
    train_linear, EarlyStopper, EsSet, GbtConfig, GbtTrainer, LinearModel, LinearTrainer,
    StoppingRule, WatchedLoss,
};

pub const RAMP_STEPS: usize = 50;
pub const WARM_PATIENCE: usize = 5;
pub const FINAL_PATIENCE: usize = 20;
/// Patience while holding one ramp increment, and the per-increment
/// round cap. The weight moves to the next increment once the combined
/// loss stalls, so the model tracks the λ* path instead of racing
/// through it.
pub const RAMP_PATIENCE: usize = 5;
pub const RAMP_INCREMENT_CAP: usize = 200;
pub const WARM_CAP: f64 = 0.3;
/// Safety bound on gradient steps within each early-stopped phase of the
/// linear trainer. Full-batch descent stalls naturally well before this.
pub const MAX_PHASE_ITERS: usize = 10_000;
/// Safety bound on boosting rounds per phase.
pub const MAX_PHASE_ROUNDS: usize = 1000;
/// Holdout fraction and seed for the booster's early-stopping set.
pub const ES_FRACTION: f64 = 0.33;
pub const ES_SEED: u64 = 123;

/// The 40-point regularization grid 0, 0.025, …, 0.975.
pub fn lambda_grid() -> Vec<f64> {
    (0..40).map(|i| i as f64 * 0.025).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warm,
    Ramp,
    Final,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Warm => "warm",
            Phase::Ramp => "ramp",
            Phase::Final => "final",
        };
        f.write_str(s)
    }
}

/// Plan for a single annealed run.
#[derive(Debug, Clone, Copy)]
pub struct AnnealPlan {
    pub lambda: f64,
    pub warm_lambda: f64,
    pub ramp_steps: usize,
    pub warm_patience: usize,
    pub final_patience: usize,
    pub es_set: EsSet,
    pub max_phase_iters: usize,
}

impl AnnealPlan {
    pub fn new(lambda: f64, es_set: EsSet) -> Result<AnnealPlan> {
        AnnealPlan::with_cap(lambda, es_set, MAX_PHASE_ITERS)
    }

    pub fn with_cap(lambda: f64, es_set: EsSet, max_phase_iters: usize) -> Result<AnnealPlan> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must lie in [0, 1), got {lambda}"
            )));
        }
        Ok(AnnealPlan {
            lambda,
            warm_lambda: lambda.min(WARM_CAP),
            ramp_steps: RAMP_STEPS,
            warm_patience: WARM_PATIENCE,
            final_patience: FINAL_PATIENCE,
            es_set,
            max_phase_iters,
        })
    }

    pub fn warm_rule(&self) -> StoppingRule {
        StoppingRule::new(WatchedLoss::Utility, self.es_set, self.warm_patience)
    }

    pub fn final_rule(&self) -> StoppingRule {
        StoppingRule::new(WatchedLoss::Combined, self.es_set, self.final_patience)
    }
}

/// Which fairness penalty the combined loss carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Spd,
    Cde,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::Spd => "spd",
            PenaltyKind::Cde => "cde",
        })
    }
}

/// Per-dataset loss assembly: labels, groups and the cached
/// controlled-direct-effect machinery when that penalty is active.
pub struct LossAssembly {
    y: Vec<u8>,
    z: Vec<u8>,
    kind: PenaltyKind,
    cde: Option<CdeRegularizer>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossValues {
    pub l_o: f64,
    pub r_f: f64,
    pub l_f: f64,
}

impl LossAssembly {
    pub fn spd(y: Vec<u8>, z: Vec<u8>) -> LossAssembly {
        LossAssembly {
            y,
            z,
            kind: PenaltyKind::Spd,
            cde: None,
        }
    }

    pub fn cde(y: Vec<u8>, z: Vec<u8>, regularizer: CdeRegularizer) -> LossAssembly {
        LossAssembly {
            y,
            z,
            kind: PenaltyKind::Cde,
            cde: Some(regularizer),
        }
    }

    pub fn penalty_bundle(&self, scores: &[f64]) -> Result<LossBundle> {
        match self.kind {
            PenaltyKind::Spd => spd_reg(scores, &self.z),
            PenaltyKind::Cde => self.cde.as_ref().expect("cde cache").bundle(scores),
        }
    }

    /// Probability-space bundle of (1−λ)L_o + λR_f.
    pub fn bundle(&self, scores: &[f64], lambda: f64) -> Result<LossBundle> {
        let lo = bce(scores, &self.y);
        let rf = self.penalty_bundle(scores)?;
        Ok(combine(&lo, &rf, lambda))
    }

    pub fn values(&self, scores: &[f64], lambda: f64) -> Result<LossValues> {
        let l_o = bce(scores, &self.y).loss;
        let r_f = self.penalty_bundle(scores)?.loss;
        Ok(LossValues {
            l_o,
            r_f,
            l_f: (1.0 - lambda) * l_o + lambda * r_f,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub lambda: f64,
    pub phase: Phase,
    pub iteration: usize,
    pub lambda_star: f64,
    pub l_o: f64,
    pub r_f: f64,
    pub l_f: f64,
    pub es_value: f64,
    pub es_best: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "lambda,phase,iteration,lambda_star,l_o,r_f,l_f,es_value,es_best")
            .map_err(|e| Error::io(path, e))?;
        for r in &self.rows {
            writeln!(
                f,
                "{:.8e},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                r.lambda, r.phase, r.iteration, r.lambda_star, r.l_o, r.r_f, r.l_f, r.es_value, r.es_best
            )
            .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// One optimization step of either trainer under the annealing loop,
/// with best-state bookkeeping for early-stopping restoration.
pub trait AnnealStepper {
    fn step(&mut self, assembly: &LossAssembly, lambda: f64) -> Result<()>;
    fn train_scores(&self) -> Vec<f64>;
    /// Scores on the early-stopping set (the training set itself when no
    /// holdout is registered).
    fn es_scores(&self) -> Vec<f64>;
    /// Remember the current state as the best seen in this phase.
    fn mark_best(&mut self);
    /// Roll back to the last marked state.
    fn restore_best(&mut self);
}

/// Gradient-descent stepper consuming probability-space bundles.
pub struct LinearStepper<'a> {
    trainer: LinearTrainer<'a>,
    best: Option<LinearModel>,
}

impl<'a> LinearStepper<'a> {
    pub fn new(x: &'a crate::linalg::Matrix, init: LinearModel, step: f64) -> LinearStepper<'a> {
        LinearStepper {
            trainer: LinearTrainer::new(x, init, step),
            best: None,
        }
    }

    pub fn model(&self) -> &LinearModel {
        &self.trainer.model
    }

    pub fn into_model(self) -> LinearModel {
        self.trainer.model
    }
}

impl AnnealStepper for LinearStepper<'_> {
    fn step(&mut self, assembly: &LossAssembly, lambda: f64) -> Result<()> {
        self.trainer.step(&mut |scores: &[f64]| assembly.bundle(scores, lambda))?;
        Ok(())
    }

    fn train_scores(&self) -> Vec<f64> {
        self.trainer.scores()
    }

    fn es_scores(&self) -> Vec<f64> {
        self.trainer.scores()
    }

    fn mark_best(&mut self) {
        self.best = Some(self.trainer.model.clone());
    }

    fn restore_best(&mut self) {
        if let Some(best) = &self.best {
            self.trainer.model = best.clone();
        }
    }
}

/// Boosting stepper: converts probability-space bundles to margin space.
pub struct GbtStepper<'a> {
    trainer: GbtTrainer<'a>,
    best_rounds: usize,
}

impl<'a> GbtStepper<'a> {
    pub fn new(
        x: &'a crate::linalg::Matrix,
        y: &[u8],
        cfg: GbtConfig,
        es_x: Option<&'a crate::linalg::Matrix>,
    ) -> GbtStepper<'a> {
        GbtStepper {
            trainer: GbtTrainer::new(x, y, cfg, es_x),
            best_rounds: 0,
        }
    }

    pub fn ensemble(&self) -> &crate::trainers::TreeEnsemble {
        &self.trainer.ensemble
    }

    pub fn into_ensemble(self) -> crate::trainers::TreeEnsemble {
        self.trainer.ensemble
    }
}

impl AnnealStepper for GbtStepper<'_> {
    fn step(&mut self, assembly: &LossAssembly, lambda: f64) -> Result<()> {
        self.trainer.boost_round(&mut |scores: &[f64]| {
            let bundle = assembly.bundle(scores, lambda)?;
            Ok(to_margin_space(&bundle, scores))
        })
    }

    fn train_scores(&self) -> Vec<f64> {
        self.trainer.scores()
    }

    fn es_scores(&self) -> Vec<f64> {
        self.trainer.es_scores().unwrap_or_else(|| self.trainer.scores())
    }

    fn mark_best(&mut self) {
        self.best_rounds = self.trainer.n_rounds();
    }

    fn restore_best(&mut self) {
        self.trainer.truncate_to(self.best_rounds);
    }
}

/// Execute the four-step procedure: warm training watched on the utility
/// loss, a fifty-step linear ramp of the penalty weight, then training at
/// the target weight watched on the combined loss. Each early-stopped
/// phase ends by restoring the best state it saw on the watched loss,
/// the usual early-stopping semantics.
pub fn anneal_train(
    stepper: &mut dyn AnnealStepper,
    train_assembly: &LossAssembly,
    es_assembly: &LossAssembly,
    plan: &AnnealPlan,
) -> Result<Trace> {
    let mut trace = Trace::default();
    let mut iteration = 0usize;

    let mut record = |stepper: &dyn AnnealStepper,
                      phase: Phase,
                      iteration: usize,
                      lambda_star: f64,
                      es_best: f64|
     -> Result<(f64, f64)> {
        let train_vals = train_assembly.values(&stepper.train_scores(), lambda_star)?;
        let es_vals = es_assembly.values(&stepper.es_scores(), lambda_star)?;
        let es_value = match phase {
            Phase::Warm => es_vals.l_o,
            _ => es_vals.l_f,
        };
        trace.rows.push(TraceRow {
            lambda: plan.lambda,
            phase,
            iteration,
            lambda_star,
            l_o: train_vals.l_o,
            r_f: train_vals.r_f,
            l_f: train_vals.l_f,
            es_value,
            es_best: es_best.min(es_value),
        });
        Ok((es_value, es_best.min(es_value)))
    };

    // phase 1: warm weight until L_o stalls on the early-stopping set;
    // the best state seen on the watched loss is restored at the end
    let mut stopper = EarlyStopper::new(plan.warm_patience);
    let mut es_best = f64::INFINITY;
    for _ in 0..plan.max_phase_iters {
        stepper
            .step(train_assembly, plan.warm_lambda)
            .map_err(|e| e.in_phase(Phase::Warm.to_string()))?;
        iteration += 1;
        let (es_value, best) = record(stepper, Phase::Warm, iteration, plan.warm_lambda, es_best)?;
        if es_value < es_best {
            stepper.mark_best();
        }
        es_best = best;
        if stopper.update(es_value) {
            break;
        }
    }
    stepper.restore_best();

    // from here on, track the early-stopping combined loss at the
    // target weight; the procedure ends by restoring its minimizer
    let mut target_best = f64::INFINITY;
    let track_target = |stepper: &mut dyn AnnealStepper, target_best: &mut f64| -> Result<f64> {
        let vals = es_assembly.values(&stepper.es_scores(), plan.lambda)?;
        if vals.l_f < *target_best {
            *target_best = vals.l_f;
            stepper.mark_best();
        }
        Ok(*target_best)
    };

    // phase 2: ramp the weight linearly over exactly `ramp_steps`
    // increments, training at each increment until the combined loss
    // stalls so the model tracks the λ* path
    for t in 1..=plan.ramp_steps {
        let lambda_star = plan.warm_lambda
            + (plan.lambda - plan.warm_lambda) * t as f64 / plan.ramp_steps as f64;
        let mut stopper = EarlyStopper::new(RAMP_PATIENCE);
        for _ in 0..RAMP_INCREMENT_CAP {
            stepper
                .step(train_assembly, lambda_star)
                .map_err(|e| e.in_phase(Phase::Ramp.to_string()))?;
            iteration += 1;
            let best = track_target(stepper, &mut target_best)?;
            let (es_value, _) = record(stepper, Phase::Ramp, iteration, lambda_star, best)?;
            if stopper.update(es_value) {
                break;
            }
        }
    }

    // phase 3: target weight until L_f stalls
    let mut stopper = EarlyStopper::new(plan.final_patience);
    for _ in 0..plan.max_phase_iters {
        stepper
            .step(train_assembly, plan.lambda)
            .map_err(|e| e.in_phase(Phase::Final.to_string()))?;
        iteration += 1;
        let best = track_target(stepper, &mut target_best)?;
        let (es_value, _) = record(stepper, Phase::Final, iteration, plan.lambda, best)?;
        if stopper.update(es_value) {
            break;
        }
    }
    stepper.restore_best();
    Ok(trace)
}

/// Model family for an experiment run.
#[derive(Debug, Clone, Copy)]
pub enum ModelKind {
    Linear { step: f64 },
    Gbt(GbtConfig),
}

/// Everything shared across the λ points of one experiment: standardized
/// splits, balancing scores, fair-target coefficients and the baseline
/// initialization.
pub struct Experiment {
    pub kind: PenaltyKind,
    pub model: ModelKind,
    pub n1: usize,
    pub n2: usize,
    pub threshold: f64,
    /// Rows the optimizer trains on (excludes the booster holdout).
    pub fit: Dataset,
    /// Early-stopping rows for the booster; `None` for the linear model.
    pub es: Option<Dataset>,
    pub test: Dataset,
    pub b_fit: Vec<f64>,
    pub b_es: Option<Vec<f64>>,
    pub b_test: Vec<f64>,
    pub gamma: FairTargetCoeffs,
    pub baseline: Option<LinearModel>,
}

impl Experiment {
    pub fn new(
        train: &Dataset,
        test: &Dataset,
        propensity: &PropensityModel,
        kind: PenaltyKind,
        model: ModelKind,
        n1: usize,
        n2: usize,
        threshold: f64,
    ) -> Result<Experiment> {
        let (fit, es) = match model {
            ModelKind::Linear { .. } => (train.clone(), None),
            ModelKind::Gbt(_) => {
                let (main, holdout) = holdout_split(train, ES_FRACTION, ES_SEED)?;
                (main, Some(holdout))
            }
        };
        let b_fit = propensity.predict(&fit)?;
        let b_es = es.as_ref().map(|ds| propensity.predict(ds)).transpose()?;
        let b_test = propensity.predict(test)?;
        let gamma = fair_target_coeffs(&fit.y, &b_fit, &fit.z, n1, n2)?;
        let baseline = match model {
            ModelKind::Linear { step } => {
                let stop = StoppingRule::new(WatchedLoss::Utility, EsSet::TrainSet, WARM_PATIENCE);
                let (model, _) = train_linear(
                    &fit.features,
                    LinearModel::zeros(fit.n_features()),
                    step,
                    &stop,
                    MAX_PHASE_ITERS,
                    |scores| Ok(bce(scores, &fit.y)),
                    |m| Ok(bce(&m.scores(&fit.features), &fit.y).loss),
                )?;
                Some(model)
            }
            ModelKind::Gbt(_) => None,
        };
        Ok(Experiment {
            kind,
            model,
            n1,
            n2,
            threshold,
            fit,
            es,
            test: test.clone(),
            b_fit,
            b_es,
            b_test,
            gamma,
            baseline,
        })
    }

    fn assembly_for(&self, y: &[u8], z: &[u8], b: &[f64]) -> Result<LossAssembly> {
        match self.kind {
            PenaltyKind::Spd => Ok(LossAssembly::spd(y.to_vec(), z.to_vec())),
            PenaltyKind::Cde => {
                let reg = CdeRegularizer::new(self.gamma.clone(), b, z, self.n1, self.n2)?;
                Ok(LossAssembly::cde(y.to_vec(), z.to_vec(), reg))
            }
        }
    }

    pub fn train_assembly(&self) -> Result<LossAssembly> {
        self.assembly_for(&self.fit.y, &self.fit.z, &self.b_fit)
    }

    pub fn es_assembly(&self) -> Result<LossAssembly> {
        match (&self.es, &self.b_es) {
            (Some(ds), Some(b)) => self.assembly_for(&ds.y, &ds.z, b),
            _ => self.train_assembly(),
        }
    }

    pub fn es_set(&self) -> EsSet {
        if self.es.is_some() {
            EsSet::Holdout
        } else {
            EsSet::TrainSet
        }
    }
}

/// A trained λ point: the model (one of the two families), its trace and
/// its test metrics.
pub struct SweepPoint {
    pub lambda: f64,
    pub metrics: MetricsRow,
    pub trace: Trace,
    pub linear: Option<LinearModel>,
    pub ensemble: Option<crate::trainers::TreeEnsemble>,
}

/// Train one λ end to end and evaluate on the test split.
pub fn run_lambda(exp: &Experiment, lambda: f64) -> Result<SweepPoint> {
    let cap = match exp.model {
        ModelKind::Linear { .. } => MAX_PHASE_ITERS,
        ModelKind::Gbt(_) => MAX_PHASE_ROUNDS,
    };
    let plan = AnnealPlan::with_cap(lambda, exp.es_set(), cap)?;
    let train_assembly = exp.train_assembly()?;
    let es_assembly = exp.es_assembly()?;
    let (trace, test_scores, linear, ensemble) = match exp.model {
        ModelKind::Linear { step } => {
            let init = exp.baseline.clone().expect("baseline fit");
            let mut stepper = LinearStepper::new(&exp.fit.features, init, step);
            let trace = anneal_train(&mut stepper, &train_assembly, &es_assembly, &plan)?;
            let model = stepper.into_model();
            let scores = model.scores(&exp.test.features);
            (trace, scores, Some(model), None)
        }
        ModelKind::Gbt(cfg) => {
            let es_features = exp.es.as_ref().map(|ds| &ds.features);
            let mut stepper = GbtStepper::new(&exp.fit.features, &exp.fit.y, cfg, es_features);
            let trace = anneal_train(&mut stepper, &train_assembly, &es_assembly, &plan)?;
            let ensemble = stepper.into_ensemble();
            let scores = ensemble.scores(&exp.test.features);
            (trace, scores, None, Some(ensemble))
        }
    };
    let metrics = MetricsRow::compute(
        lambda,
        &test_scores,
        &exp.test.y,
        &exp.test.z,
        &exp.b_test,
        &exp.gamma,
        exp.threshold,
    )?;
    Ok(SweepPoint {
        lambda,
        metrics,
        trace,
        linear,
        ensemble,
    })
}

/// Sweep outcome: trained points plus any per-λ failures, which do not
/// abort the remaining grid.
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<(f64, String)>,
}

pub fn sweep(exp: &Experiment, grid: &[f64]) -> SweepOutcome {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &lambda in grid {
        match run_lambda(exp, lambda) {
            Ok(point) => points.push(point),
            Err(e) => failures.push((lambda, e.to_string())),
        }
    }
    SweepOutcome { points, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, Scaler};
    use crate::propensity::fit_propensity;

    fn small_experiment(kind: PenaltyKind, model: ModelKind) -> Experiment {
        let raw = generate_synthetic(1200, 31, 4, 2, 1).unwrap();
        let (train_raw, test_raw) = holdout_split(&raw, 0.33, 7).unwrap();
        let scaler = Scaler::fit(&train_raw);
        let train = scaler.transform(&train_raw).unwrap();
        let test = scaler.transform(&test_raw).unwrap();
        let prop = fit_propensity(&train, &[1.0, 10.0], 3, 5).unwrap();
        Experiment::new(&train, &test, &prop, kind, model, 1, 0, 0.5).unwrap()
    }

    #[test]
    fn grid_has_forty_points() {
        let grid = lambda_grid();
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], 0.0);
        assert!((grid[39] - 0.975).abs() < 1e-12);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn plan_rejects_bad_lambda() {
        assert!(AnnealPlan::new(1.0, EsSet::TrainSet).is_err());
        assert!(AnnealPlan::new(-0.1, EsSet::TrainSet).is_err());
        let plan = AnnealPlan::new(0.2, EsSet::TrainSet).unwrap();
        // min(λ, 0.3) = λ here, so the ramp is a no-op on the weight
        assert_eq!(plan.warm_lambda, 0.2);
        let plan = AnnealPlan::new(0.9, EsSet::TrainSet).unwrap();
        assert!((plan.warm_lambda - 0.3).abs() < 1e-15);
    }

    #[test]
    fn trace_phases_are_well_formed() {
        let exp = small_experiment(PenaltyKind::Spd, ModelKind::Linear { step: 0.1 });
        let point = run_lambda(&exp, 0.8).unwrap();
        let rows = &point.trace.rows;
        let warm: Vec<_> = rows.iter().filter(|r| r.phase == Phase::Warm).collect();
        let ramp: Vec<_> = rows.iter().filter(|r| r.phase == Phase::Ramp).collect();
        let fin: Vec<_> = rows.iter().filter(|r| r.phase == Phase::Final).collect();
        assert!(!warm.is_empty());
        assert!(!fin.is_empty());
        // warm lambda constant at min(λ, 0.3)
        for r in &warm {
            assert!((r.lambda_star - 0.3).abs() < 1e-15);
        }
        // ramp weight non-decreasing through exactly 50 linear
        // increments, ending at λ
        for pair in ramp.windows(2) {
            assert!(pair[1].lambda_star >= pair[0].lambda_star);
        }
        let mut distinct: Vec<f64> = Vec::new();
        for r in &ramp {
            if distinct.last().map_or(true, |l| r.lambda_star > *l) {
                distinct.push(r.lambda_star);
            }
        }
        assert_eq!(distinct.len(), RAMP_STEPS);
        for (t, l) in distinct.iter().enumerate() {
            let expect = 0.3 + (0.8 - 0.3) * (t + 1) as f64 / RAMP_STEPS as f64;
            assert!((l - expect).abs() < 1e-12);
        }
        assert!((ramp.last().unwrap().lambda_star - 0.8).abs() < 1e-12);
        for r in &fin {
            assert!((r.lambda_star - 0.8).abs() < 1e-12);
        }
        // iterations are consecutive from 1
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.iteration, i + 1);
        }
    }

    #[test]
    fn lambda_zero_degenerates_to_utility_training() {
        let exp = small_experiment(PenaltyKind::Spd, ModelKind::Linear { step: 0.1 });
        let point = run_lambda(&exp, 0.0).unwrap();
        for r in &point.trace.rows {
            assert_eq!(r.lambda_star, 0.0);
            // L_f == L_o at λ = 0
            assert!((r.l_f - r.l_o).abs() < 1e-15);
        }
    }

    #[test]
    fn anneal_is_deterministic() {
        let exp = small_experiment(PenaltyKind::Cde, ModelKind::Linear { step: 0.1 });
        let a = run_lambda(&exp, 0.5).unwrap();
        let b = run_lambda(&exp, 0.5).unwrap();
        assert_eq!(a.trace.rows.len(), b.trace.rows.len());
        for (ra, rb) in a.trace.rows.iter().zip(&b.trace.rows) {
            assert_eq!(ra.l_f, rb.l_f);
            assert_eq!(ra.es_value, rb.es_value);
        }
        let (ma, mb) = (a.linear.unwrap(), b.linear.unwrap());
        assert_eq!(ma.weights, mb.weights);
    }

    #[test]
    fn gbt_run_produces_trace_and_metrics() {
        let exp = small_experiment(
            PenaltyKind::Cde,
            ModelKind::Gbt(GbtConfig {
                max_rounds: 60,
                ..GbtConfig::default()
            }),
        );
        assert_eq!(exp.es_set(), EsSet::Holdout);
        let point = run_lambda(&exp, 0.5).unwrap();
        assert!(point.ensemble.is_some());
        assert!(point.metrics.accuracy > 0.4);
        assert!(!point.trace.rows.is_empty());
    }

    #[test]
    fn sweep_covers_the_grid_and_records_failures() {
        let exp = small_experiment(PenaltyKind::Spd, ModelKind::Linear { step: 0.1 });
        let out = sweep(&exp, &[0.0, 0.5]);
        assert_eq!(out.points.len(), 2);
        assert!(out.failures.is_empty());
        assert!(out.points[0].lambda < out.points[1].lambda);
    }
}
