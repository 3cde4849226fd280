//! Model selection and repeated-split experiments.
//!
//! Accuracy is always binary accuracy of `sign(h)` over the positive and
//! negative samples of a set; ambiguous samples and the rejector are never
//! looked at when scoring.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datasets::{generate_toy, split, Dataset, ToyConfig};
use crate::error::{Error, Result};
use crate::losses::Label;
use crate::models::{Hyperparams, Method, TrainedModel, Trainer};
use crate::seed;

/// Candidate values for every hyperparameter. Each method searches only
/// the axes it uses; the others stay at their first value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperGrid {
    pub lambda: Vec<f64>,
    pub lambda_rej: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_graph: Vec<f64>,
    pub tau: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        let widths = vec![10f64.powf(0.5), 10f64.powf(0.75), 10.0];
        HyperGrid {
            lambda: vec![1e-3, 1e-5, 1e-7],
            lambda_rej: vec![1e-3, 1e-5, 1e-7],
            sigma: widths.clone(),
            sigma_graph: widths,
            tau: vec![1e-1, 1e-2, 1e-3],
            c: vec![0.03, 0.06, 0.20, 0.45],
            d: vec![0.03, 0.06, 0.20, 0.50],
        }
    }
}

impl HyperGrid {
    /// A grid holding exactly one point.
    pub fn single(hp: &Hyperparams) -> Self {
        HyperGrid {
            lambda: vec![hp.lambda],
            lambda_rej: vec![hp.lambda_rej],
            sigma: vec![hp.sigma],
            sigma_graph: vec![hp.sigma_graph],
            tau: vec![hp.tau],
            c: vec![hp.c],
            d: vec![hp.d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in self.axes() {
            if axis.is_empty() {
                return Err(Error::invalid(format!("hyperparameter grid for {name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("hyperparameter grid for {name} has a non-finite value")));
            }
        }
        Ok(())
    }

    fn axes(&self) -> [(&'static str, &Vec<f64>); 7] {
        [
            ("lambda", &self.lambda),
            ("lambda_rej", &self.lambda_rej),
            ("sigma", &self.sigma),
            ("sigma_graph", &self.sigma_graph),
            ("tau", &self.tau),
            ("c", &self.c),
            ("d", &self.d),
        ]
    }

    /// Grid points searched for `method`, in nested order
    /// λ, λ′, σ, σ′, τ, c, d (last varies fastest).
    pub fn points(&self, method: Method) -> Vec<Hyperparams> {
        let used = used_axes(method);
        let axis = |k: usize, values: &Vec<f64>| -> Vec<f64> {
            if used[k] {
                values.clone()
            } else {
                vec![values[0]]
            }
        };
        let mut out = Vec::new();
        for &lambda in &axis(0, &self.lambda) {
            for &lambda_rej in &axis(1, &self.lambda_rej) {
                for &sigma in &axis(2, &self.sigma) {
                    for &sigma_graph in &axis(3, &self.sigma_graph) {
                        for &tau in &axis(4, &self.tau) {
                            for &c in &axis(5, &self.c) {
                                for &d in &axis(6, &self.d) {
                                    out.push(Hyperparams {
                                        lambda,
                                        lambda_rej,
                                        sigma,
                                        sigma_graph,
                                        tau,
                                        c,
                                        d,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Which of (λ, λ′, σ, σ′, τ, c, d) a method reads.
fn used_axes(method: Method) -> [bool; 7] {
    match method {
        Method::Svm | Method::SvmRl => [true, false, true, false, false, false, false],
        Method::LapSvm => [true, false, true, true, true, false, false],
        Method::TwoStep | Method::CadSvm => [true, true, true, false, false, true, true],
        Method::CroSvm | Method::CroSvmRl => [true, true, true, false, false, true, false],
    }
}

/// Fraction of positive and negative samples whose label matches `sign(h)`
/// (with `h = 0` read as negative). `None` when the set has no such samples.
pub fn accuracy(model: &TrainedModel, data: &Dataset) -> Result<Option<f64>> {
    let binary = data.binary_part();
    if binary.is_empty() {
        return Ok(None);
    }
    let (h, _) = model.decision_values(&binary.features())?;
    let correct = binary
        .labels()
        .iter()
        .zip(h.iter())
        .filter(|(y, &hv)| Label::from_sign(hv) == **y)
        .count();
    Ok(Some(correct as f64 / binary.len() as f64))
}

/// Stratified fold index of every sample: within each label, samples are
/// shuffled and dealt round-robin, continuing the count across labels.
pub fn stratified_folds(data: &Dataset, folds: usize, seed_value: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.samples().iter().enumerate() {
        by_label.entry(s.y).or_default().push(i);
    }
    let mut rng = seed::rng(seed_value);
    let mut assignment = vec![0; data.len()];
    let mut next = 0;
    for indices in by_label.values_mut() {
        indices.shuffle(&mut rng);
        for &i in indices.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Result of a cross-validated grid search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub hyper: Hyperparams,
    /// Mean validation accuracy of the chosen point; `None` when the grid
    /// had a single point and nothing was trained.
    pub score: Option<f64>,
    pub folds_used: usize,
}

/// Picks the grid point with the best mean validation accuracy over
/// stratified folds. Ties go to the earlier grid point. Grid points whose
/// training fails on some fold are not eligible.
pub fn cross_validate(
    trainer: &Trainer,
    method: Method,
    train: &Dataset,
    grid: &HyperGrid,
    folds: usize,
    seed_value: u64,
) -> Result<CvOutcome> {
    grid.validate()?;
    let points = grid.points(method);
    if points.len() == 1 {
        return Ok(CvOutcome {
            hyper: points[0],
            score: None,
            folds_used: 0,
        });
    }
    let counts = train.counts();
    if counts.positive + counts.negative < folds {
        return Err(Error::data(format!(
            "cross-validation needs at least {folds} positive or negative samples, found {}",
            counts.positive + counts.negative
        )));
    }
    let assignment = stratified_folds(train, folds, seed_value)?;
    let mut totals = vec![0.0; points.len()];
    let mut failed = vec![false; points.len()];
    let mut first_error = None;
    let mut folds_used = 0;
    for fold in 0..folds {
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| assignment[i] == fold);
        let validation = train.subset(&inside);
        if validation.binary_part().is_empty() {
            continue;
        }
        folds_used += 1;
        let fit_set = train.subset(&outside);
        let fold_seed = seed::derive_seed(seed_value, fold as u64 + 1);
        for (k, hp) in points.iter().enumerate() {
            if failed[k] {
                continue;
            }
            let scored = trainer
                .train(method, &fit_set, hp, fold_seed)
                .and_then(|model| accuracy(&model, &validation));
            match scored {
                Ok(Some(acc)) => totals[k] += acc,
                Ok(None) => unreachable!("validation fold has binary samples"),
                Err(e) => {
                    failed[k] = true;
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    if folds_used == 0 {
        return Err(Error::data("no cross-validation fold has positive or negative samples"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, total) in totals.iter().enumerate() {
        if failed[k] {
            continue;
        }
        let score = total / folds_used as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    match best {
        Some((k, score)) => Ok(CvOutcome {
            hyper: points[k],
            score: Some(score),
            folds_used,
        }),
        None => Err(first_error.unwrap_or_else(|| Error::data("every grid point failed"))),
    }
}

/// Where each run's data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// One fixed dataset, split afresh in every run.
    Fixed(Dataset),
    /// A toy dataset regenerated from the run seed in every run.
    Toy { r: f64, total: usize },
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::Fixed(d) => d.name().to_string(),
            DataSource::Toy { r, .. } => format!("toy-r{r}"),
        }
    }

    fn for_run(&self, run_seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Fixed(d) => Ok(d.clone()),
            DataSource::Toy { r, total } => generate_toy(&ToyConfig {
                r: *r,
                total: *total,
                seed: seed::derive_named_seed(run_seed, "toy"),
            }),
        }
    }
}

/// Settings of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub runs: usize,
    /// Fraction of each dataset used for training.
    pub train_ratio: f64,
    pub grid: HyperGrid,
    pub folds: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the machine's parallelism.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            runs: 50,
            train_ratio: 1.0 / 3.0,
            grid: HyperGrid::default(),
            folds: 5,
            seed: 0,
            jobs: None,
        }
    }
}

/// One method in one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub method: Method,
    pub accuracy: Option<f64>,
    pub hyper: Option<Hyperparams>,
    pub fallback: bool,
    pub error: Option<String>,
}

/// Aggregate accuracy of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub failed: usize,
    /// More than 10% of the runs failed.
    pub invalid: bool,
    pub best: bool,
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub runs: usize,
    pub seed: u64,
    pub summaries: Vec<MethodSummary>,
    /// `significant[i][j]`: methods `i` and `j` differ at the 5% level.
    pub significant: Vec<Vec<bool>>,
    pub records: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Columns `method,mean,sd,n,failed,best`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean,sd,n,failed,best\n");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{},{}",
                s.method.tag(),
                s.mean,
                s.sd,
                s.n,
                s.failed,
                u8::from(s.best)
            );
        }
        out
    }

    /// Columns `run,method,accuracy,lambda,lambda_rej,sigma,sigma_graph,tau,c,d,error`.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("run,method,accuracy,lambda,lambda_rej,sigma,sigma_graph,tau,c,d,error\n");
        for r in &self.records {
            let acc = r.accuracy.map_or(String::new(), |a| format!("{a:.6}"));
            let hp = r.hyper.map_or(",,,,,,".to_string(), |h| {
                format!(
                    "{:e},{:e},{:e},{:e},{:e},{},{}",
                    h.lambda, h.lambda_rej, h.sigma, h.sigma_graph, h.tau, h.c, h.d
                )
            });
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(out, "{},{},{acc},{hp},{err}", r.run, r.method.tag());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn run_one(source: &DataSource, config: &ExperimentConfig, run: usize) -> Vec<RunRecord> {
    let run_seed = seed::derive_seed(config.seed, run as u64);
    let trainer = Trainer::default();
    let prepared = source
        .for_run(run_seed)
        .and_then(|data| split(&data, config.train_ratio, seed::derive_named_seed(run_seed, "split")));
    let (train, test) = match prepared {
        Ok(parts) => parts,
        Err(e) => {
            return config
                .methods
                .iter()
                .map(|&method| RunRecord {
                    run,
                    method,
                    accuracy: None,
                    hyper: None,
                    fallback: false,
                    error: Some(e.to_string()),
                })
                .collect()
        }
    };
    config
        .methods
        .iter()
        .map(|&method| {
            let method_seed = seed::derive_named_seed(run_seed, method.tag());
            let mut record = RunRecord {
                run,
                method,
                accuracy: None,
                hyper: None,
                fallback: false,
                error: None,
            };
            let outcome = cross_validate(&trainer, method, &train, &config.grid, config.folds, method_seed)
                .and_then(|cv| {
                    record.hyper = Some(cv.hyper);
                    trainer.train(method, &train, &cv.hyper, method_seed)
                })
                .and_then(|model| {
                    record.fallback = model.used_fallback();
                    accuracy(&model, &test)
                });
            match outcome {
                Ok(Some(acc)) => record.accuracy = Some(acc),
                Ok(None) => record.error = Some("test split has no positive or negative samples".into()),
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect()
}

/// Repeated random splits: per run and method, grid search by
/// cross-validation on the training part, retrain on all of it, and score on
/// the test part. Runs execute in parallel and are merged in run order.
pub fn run_experiment(source: &DataSource, config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.runs < 2 {
        return Err(Error::invalid(format!(
            "an experiment needs at least 2 runs for the t-tests, got {}",
            config.runs
        )));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    config.grid.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder.build().map_err(|e| Error::invalid(e.to_string()))?;
    let per_run: Vec<Vec<RunRecord>> =
        pool.install(|| (0..config.runs).into_par_iter().map(|run| run_one(source, config, run)).collect());
    let records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    Ok(summarize(source.name(), config, records))
}

fn summarize(dataset: String, config: &ExperimentConfig, records: Vec<RunRecord>) -> ExperimentReport {
    let samples: Vec<Vec<f64>> = config
        .methods
        .iter()
        .map(|&m| records.iter().filter(|r| r.method == m).filter_map(|r| r.accuracy).collect())
        .collect();
    let mut summaries: Vec<MethodSummary> = config
        .methods
        .iter()
        .zip(&samples)
        .map(|(&method, acc)| {
            let failed = config.runs - acc.len();
            MethodSummary {
                method,
                mean: mean(acc),
                sd: sample_sd(acc),
                n: acc.len(),
                failed,
                invalid: failed * 10 > config.runs,
                best: false,
            }
        })
        .collect();
    let k = samples.len();
    let mut significant = vec![vec![false; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let sig = welch_t_test(&samples[i], &samples[j]).map(|t| t.significant).unwrap_or(false);
            significant[i][j] = sig;
            significant[j][i] = sig;
        }
    }
    let top = summaries
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.invalid && s.n > 0)
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, m)) if m >= s.mean => best,
            _ => Some((i, s.mean)),
        });
    if let Some((t, _)) = top {
        for (i, s) in summaries.iter_mut().enumerate() {
            s.best = !s.invalid && s.n > 0 && (i == t || !significant[t][i]);
        }
    }
    ExperimentReport {
        dataset,
        runs: config.runs,
        seed: config.seed,
        summaries,
        significant,
        records,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Standard deviation with the `n − 1` denominator.
fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Result of a two-sided Welch t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub dof: f64,
    pub p_value: f64,
    /// `p < 0.05`.
    pub significant: bool,
}

/// Two-sided Welch t-test at the 5% level, with Welch–Satterthwaite degrees
/// of freedom. Two constant lists are significantly different exactly when
/// their values differ.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "the t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_sd(a).powi(2) / na, sample_sd(b).powi(2) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let differ = ma != mb;
        return Ok(WelchTest {
            t: if differ { f64::INFINITY.copysign(ma - mb) } else { 0.0 },
            dof: na + nb - 2.0,
            p_value: if differ { 0.0 } else { 1.0 },
            significant: differ,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::invalid(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchTest {
        t,
        dof,
        p_value,
        significant: p_value < 0.05,
    })
}

/// Experiments for several datasets, gathered into one long table.
pub fn table_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("dataset,method,mean,sd,n,failed,best\n");
    for report in reports {
        for s in &report.summaries {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{}",
                report.dataset,
                s.method.tag(),
                s.mean,
                s.sd,
                s.n,
                s.failed,
                u8::from(s.best)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        let g = HyperGrid::default();
        assert_eq!(g.points(Method::Svm).len(), 9);
        assert_eq!(g.points(Method::LapSvm).len(), 81);
        assert_eq!(g.points(Method::CroSvm).len(), 108);
        assert_eq!(g.points(Method::CadSvm).len(), 432);
        assert_eq!(g.points(Method::TwoStep).len(), 432);
    }

    #[test]
    fn grid_order_is_nested() {
        let g = HyperGrid::default();
        let pts = g.points(Method::CroSvm);
        assert_eq!((pts[0].lambda, pts[0].c), (1e-3, 0.03));
        assert_eq!(pts[1].c, 0.06);
        assert_eq!(pts[4].sigma, 10f64.powf(0.75));
    }

    #[test]
    fn empty_axis_is_rejected() {
        let g = HyperGrid { tau: vec![], ..Default::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn welch_examples() {
        let a = [0.8, 0.82, 0.79, 0.81];
        assert!(!welch_t_test(&a, &a).unwrap().significant);
        assert!(!welch_t_test(&[0.5, 0.5], &[0.5, 0.5]).unwrap().significant);
        assert!(welch_t_test(&[0.5, 0.5], &[0.6, 0.6]).unwrap().significant);
        assert!(welch_t_test(&[0.5], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn welch_reference_value() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4];
        let w = welch_t_test(&a, &b).unwrap();
        assert!((w.t - -2.455356398286006).abs() < 1e-9, "{}", w.t);
        assert!((w.p_value - 0.021378001462866985).abs() < 1e-9, "{}", w.p_value);
    }

    #[test]
    fn sd_uses_n_minus_one() {
        assert!((sample_sd(&[1.0, 2.0, 3.0, 4.0]) - 1.2909944487358056).abs() < 1e-15);
    }
}
