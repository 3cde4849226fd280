use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::rows::{assemble_dense, hinge_rows, mh_rows, mha_rows, LossRows};
use super::spectral::KernelCache;
use super::{Hyperparams, Method, TrainedModel};
use crate::datasets::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::kernels::{design_matrix, graph_laplacian, BasisSet};
use crate::losses::{Label, LossParams};
use crate::qp::{solve_qp, solve_slack_qp, CoefBlock, QpSettings, QpSolution, SlackQp, SlackRow};
use crate::seed;

/// How the training QP is set up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Kernel eigen-coordinates with negligible directions dropped, slacks
    /// eliminated inside the solver.
    #[default]
    Structured,
    /// The full `(w, u, ξ)` problem in the original basis.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub backend: Backend,
    pub qp: QpSettings,
    /// Replaces the calibrated `η` of CAD-SVM.
    pub eta_override: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            backend: Backend::Structured,
            qp: QpSettings::default(),
            eta_override: None,
        }
    }
}

/// A training problem before it is handed to a QP backend.
struct Problem<'a> {
    basis: &'a BasisSet,
    /// Basis point behind each slack; row `i` of the loss rows is sample `slack_points[i]`.
    slack_points: Vec<usize>,
    rows: LossRows,
    lambda: f64,
    /// `Some(λ′)` when the problem has a rejector block.
    lambda_rej: Option<f64>,
    /// `(τ, L)` adds `τ·fᵀLf` with `f = Φw` over all basis points.
    laplacian: Option<(f64, DMatrix<f64>)>,
}

/// Trainer with shared options and kernel cache.
#[derive(Debug, Clone, Default)]
pub struct Trainer {
    pub options: TrainOptions,
    pub cache: KernelCache,
}

fn require_binary(data: &Dataset) -> Result<()> {
    let counts = data.counts();
    if counts.positive == 0 || counts.negative == 0 {
        return Err(Error::data(format!(
            "training needs positive and negative samples (got {} and {})",
            counts.positive, counts.negative
        )));
    }
    Ok(())
}

fn check_cost(c: f64) -> Result<()> {
    if c > 0.0 && c < 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rejection cost c = {c} must lie in (0, 0.5)")))
    }
}

/// Replaces every ambiguous label by ±1 with probability ½ each.
pub fn relabel_ambiguous(data: &Dataset, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let samples = data
        .samples()
        .iter()
        .map(|s| LabeledSample {
            x: s.x.clone(),
            y: match s.y {
                Label::Ambiguous if rng.gen_bool(0.5) => Label::Positive,
                Label::Ambiguous => Label::Negative,
                y => y,
            },
        })
        .collect();
    data.with_samples(samples)
}

fn converged(sol: QpSolution) -> Result<QpSolution> {
    if sol.is_converged() {
        Ok(sol)
    } else {
        Err(Error::Solver {
            status: sol.status,
            residual: sol.kkt_residual,
        })
    }
}

impl Trainer {
    pub fn new(options: TrainOptions) -> Self {
        Trainer {
            options,
            cache: KernelCache::new(),
        }
    }

    /// Trains `method` on `data`. `seed` drives the random relabelling of the
    /// RL variants and is ignored by the others.
    pub fn train(&self, method: Method, data: &Dataset, hp: &Hyperparams, seed: u64) -> Result<TrainedModel> {
        match method {
            Method::Svm => self.svm(&data.binary_part(), hp.lambda, hp.sigma),
            Method::SvmRl => self.svm_rl(data, hp.lambda, hp.sigma, seed),
            Method::LapSvm => self.lapsvm(data, hp.lambda, hp.sigma, hp.sigma_graph, hp.tau),
            Method::TwoStep => self.two_step(data, hp.lambda, hp.lambda_rej, hp.sigma, hp.c, hp.d),
            Method::CroSvm => self.cro_svm(data, hp.lambda, hp.lambda_rej, hp.sigma, hp.c),
            Method::CroSvmRl => self.cro_svm_rl(data, hp.lambda, hp.lambda_rej, hp.sigma, hp.c, seed),
            Method::CadSvm => self.cad_svm(data, hp.lambda, hp.lambda_rej, hp.sigma, hp.c, hp.d),
        }
    }

    /// Solves a problem and returns `(w, u)` over the whole basis.
    fn solve(&self, problem: &Problem<'_>) -> Result<(DVector<f64>, DVector<f64>)> {
        if !(problem.lambda > 0.0) || problem.lambda_rej.is_some_and(|l| !(l > 0.0)) {
            return Err(Error::invalid("regularization parameters must be positive"));
        }
        match self.options.backend {
            Backend::Structured => self.solve_structured(problem),
            Backend::Dense => self.solve_dense(problem),
        }
    }

    fn solve_structured(&self, problem: &Problem<'_>) -> Result<(DVector<f64>, DVector<f64>)> {
        let basis = problem.basis;
        let spectrum = self
            .cache
            .spectrum(basis.centers(), basis.sigma(), || {
                design_matrix(basis, basis.centers()).expect("basis centers match their own dimension")
            });
        let kept_w = spectrum.kept(problem.lambda);
        let k_w = kept_w.len();
        let mut curv_w = DMatrix::identity(k_w, k_w) * problem.lambda;
        if let Some((tau, lap)) = &problem.laplacian {
            let s = spectrum.scaled_vectors(&kept_w);
            curv_w += (s.transpose() * lap * &s) * (2.0 * tau);
            curv_w = (&curv_w + curv_w.transpose()) * 0.5;
        }
        let mut blocks = vec![CoefBlock {
            features: spectrum.features(&problem.slack_points, &kept_w),
            curvature: curv_w,
        }];
        let kept_u = problem.lambda_rej.map(|l| spectrum.kept(l));
        if let (Some(kept), Some(l)) = (&kept_u, problem.lambda_rej) {
            blocks.push(CoefBlock {
                features: spectrum.features(&problem.slack_points, kept),
                curvature: DMatrix::identity(kept.len(), kept.len()) * l,
            });
        }
        let with_u = kept_u.is_some();
        let rows = problem
            .rows
            .rows
            .iter()
            .map(|r| SlackRow {
                sample: r.sample,
                coefs: if with_u { vec![r.h_coef, r.r_coef] } else { vec![r.h_coef] },
                rhs: -r.offset,
            })
            .collect();
        let qp = SlackQp::new(blocks, DVector::from_column_slice(&problem.rows.slack_cost), rows)?;
        let sol = converged(solve_slack_qp(&qp, self.options.qp))?;
        let w = spectrum.expand(&kept_w, &qp.block_of(&sol.z, 0));
        let u = match &kept_u {
            Some(kept) => spectrum.expand(kept, &qp.block_of(&sol.z, 1)),
            None => DVector::zeros(basis.len()),
        };
        Ok((w, u))
    }

    fn solve_dense(&self, problem: &Problem<'_>) -> Result<(DVector<f64>, DVector<f64>)> {
        let basis = problem.basis;
        let n = basis.len();
        let phi = design_matrix(basis, basis.centers())?;
        let design = phi.select_rows(&problem.slack_points);
        let extra = problem
            .laplacian
            .as_ref()
            .map(|(tau, lap)| (phi.transpose() * lap * &phi) * (2.0 * tau));
        let n_u = if problem.lambda_rej.is_some() { n } else { 0 };
        let qp = assemble_dense(
            &design,
            &problem.rows,
            n_u,
            problem.lambda,
            problem.lambda_rej.unwrap_or(0.0),
            extra.as_ref(),
        )?;
        let sol = converged(solve_qp(&qp, self.options.qp.tol, self.options.qp.max_iter))?;
        let w = sol.z.rows(0, n).into_owned();
        let u = if n_u > 0 {
            sol.z.rows(n, n).into_owned()
        } else {
            DVector::zeros(n)
        };
        Ok((w, u))
    }

    /// Hinge-loss SVM on positive and negative samples.
    pub fn svm(&self, data: &Dataset, lambda: f64, sigma: f64) -> Result<TrainedModel> {
        if data.counts().ambiguous > 0 {
            return Err(Error::data("the SVM takes positive and negative samples only"));
        }
        require_binary(data)?;
        let basis = BasisSet::new(data.features(), sigma)?;
        let n = data.len();
        let rows = weighted_hinge(data.samples().iter().map(|s| (s.y.as_f64(), 1.0)), n);
        let problem = Problem {
            basis: &basis,
            slack_points: (0..n).collect(),
            rows,
            lambda,
            lambda_rej: None,
            laplacian: None,
        };
        let (w, u) = self.solve(&problem)?;
        let hp = Hyperparams { lambda, sigma, ..Hyperparams::default() };
        TrainedModel::new(Method::Svm, basis, w, u, hp, None)
    }

    /// SVM after relabelling every ambiguous sample at random.
    pub fn svm_rl(&self, data: &Dataset, lambda: f64, sigma: f64, seed: u64) -> Result<TrainedModel> {
        let model = self.svm(&relabel_ambiguous(data, seed)?, lambda, sigma)?;
        Ok(TrainedModel { method: Method::SvmRl, ..model })
    }

    /// Laplacian-regularized SVM; ambiguous samples are unlabelled points that
    /// enter the basis and the graph but not the hinge term. The objective is
    /// `λ/2‖w‖² + τ/N²·fᵀLf + (1/N_labelled)·Σ hinge` with `f` the values of
    /// `h` at all `N` training points.
    pub fn lapsvm(&self, data: &Dataset, lambda: f64, sigma: f64, sigma_graph: f64, tau: f64) -> Result<TrainedModel> {
        require_binary(data)?;
        if !(tau >= 0.0) {
            return Err(Error::invalid(format!("Laplacian weight τ = {tau} must be nonnegative")));
        }
        let basis = BasisSet::new(data.features(), sigma)?;
        let labelled: Vec<usize> = (0..data.len()).filter(|&i| !data.samples()[i].y.is_ambiguous()).collect();
        let rows = weighted_hinge(labelled.iter().map(|&i| (data.samples()[i].y.as_f64(), 1.0)), labelled.len());
        // τ/N²·fᵀLf: the graph term sums over all N² pairs.
        let n = data.len() as f64;
        let laplacian = if tau > 0.0 {
            Some((tau / (n * n), graph_laplacian(basis.centers(), sigma_graph)?.matrix().clone()))
        } else {
            None
        };
        let problem = Problem {
            basis: &basis,
            slack_points: labelled,
            rows,
            lambda,
            lambda_rej: None,
            laplacian,
        };
        let (w, u) = self.solve(&problem)?;
        let hp = Hyperparams {
            lambda,
            sigma,
            sigma_graph,
            tau,
            ..Hyperparams::default()
        };
        TrainedModel::new(Method::LapSvm, basis, w, u, hp, None)
    }

    /// Rejector first, classifier second.
    ///
    /// The rejector is a weighted hinge SVM with target `+1` and weight `c` for
    /// labelled samples and target `−1` and weight `d` for ambiguous ones. The
    /// classifier is an SVM on the labelled samples the rejector accepts
    /// (`r > 0`), or on all labelled samples if that set lacks a class. Both
    /// live on the basis of all training points; centers outside the accepted
    /// set get zero classifier weight.
    pub fn two_step(
        &self,
        data: &Dataset,
        lambda: f64,
        lambda_rej: f64,
        sigma: f64,
        c: f64,
        d: f64,
    ) -> Result<TrainedModel> {
        require_binary(data)?;
        if !(c > 0.0) || !(d > 0.0) {
            return Err(Error::invalid("class weights c and d must be positive"));
        }
        let basis = BasisSet::new(data.features(), sigma)?;
        let n = data.len();
        let targets = data.samples().iter().map(|s| match s.y {
            Label::Ambiguous => (-1.0, d),
            _ => (1.0, c),
        });
        let rejector = Problem {
            basis: &basis,
            slack_points: (0..n).collect(),
            rows: weighted_hinge(targets, n),
            lambda: lambda_rej,
            lambda_rej: None,
            laplacian: None,
        };
        let (u, _) = self.solve(&rejector)?;
        let phi = design_matrix(&basis, basis.centers())?;
        let r = &phi * &u;

        let labelled: Vec<usize> = (0..n).filter(|&i| !data.samples()[i].y.is_ambiguous()).collect();
        let accepted: Vec<usize> = labelled.iter().copied().filter(|&i| r[i] > 0.0).collect();
        let subset = data.subset(&accepted);
        let fallback = require_binary(&subset).is_err();
        let chosen = if fallback { labelled } else { accepted };
        let inner = self.svm(&data.subset(&chosen), lambda, sigma)?;
        let mut w = DVector::zeros(n);
        for (k, &i) in chosen.iter().enumerate() {
            w[i] = inner.w[k];
        }
        let hp = Hyperparams {
            lambda,
            lambda_rej,
            sigma,
            c,
            d,
            ..Hyperparams::default()
        };
        Ok(TrainedModel::new(Method::TwoStep, basis, w, u, hp, None)?.with_fallback(fallback))
    }

    /// Classifier with reject option trained with the MH loss; ambiguous
    /// samples are discarded first. Uses `α = 2(1−2c)`, `β = 1+2c` and `η = 1`.
    pub fn cro_svm(&self, data: &Dataset, lambda: f64, lambda_rej: f64, sigma: f64, c: f64) -> Result<TrainedModel> {
        check_cost(c)?;
        let data = data.binary_part();
        require_binary(&data)?;
        // d plays no role in the MH loss; any admissible value will do.
        let params = LossParams::calibrated(c, 0.5)?.with_eta(1.0)?;
        let basis = BasisSet::new(data.features(), sigma)?;
        let n = data.len();
        let mut rows = Vec::new();
        for (i, s) in data.samples().iter().enumerate() {
            rows.extend(mh_rows(i, s.y.as_f64(), &params, 1.0));
        }
        let problem = Problem {
            basis: &basis,
            slack_points: (0..n).collect(),
            rows: LossRows {
                rows,
                slack_cost: vec![1.0 / n as f64; n],
            },
            lambda,
            lambda_rej: Some(lambda_rej),
            laplacian: None,
        };
        let (w, u) = self.solve(&problem)?;
        let hp = Hyperparams {
            lambda,
            lambda_rej,
            sigma,
            c,
            ..Hyperparams::default()
        };
        TrainedModel::new(Method::CroSvm, basis, w, u, hp, Some(params))
    }

    /// CRO-SVM after relabelling every ambiguous sample at random.
    pub fn cro_svm_rl(
        &self,
        data: &Dataset,
        lambda: f64,
        lambda_rej: f64,
        sigma: f64,
        c: f64,
        seed: u64,
    ) -> Result<TrainedModel> {
        let model = self.cro_svm(&relabel_ambiguous(data, seed)?, lambda, lambda_rej, sigma, c)?;
        Ok(TrainedModel { method: Method::CroSvmRl, ..model })
    }

    /// Classifier and rejector trained jointly with the MHA loss under the
    /// calibrated `(α, β, η)`. Every training point is a basis center and the
    /// slack average runs over all samples, ambiguous ones included.
    pub fn cad_svm(
        &self,
        data: &Dataset,
        lambda: f64,
        lambda_rej: f64,
        sigma: f64,
        c: f64,
        d: f64,
    ) -> Result<TrainedModel> {
        require_binary(data)?;
        let mut params = LossParams::calibrated(c, d)?;
        if let Some(eta) = self.options.eta_override {
            params = params.with_eta(eta)?;
        }
        let basis = BasisSet::new(data.features(), sigma)?;
        let n = data.len();
        let mut rows = Vec::new();
        for (i, s) in data.samples().iter().enumerate() {
            rows.extend(mha_rows(i, s.y, &params));
        }
        let problem = Problem {
            basis: &basis,
            slack_points: (0..n).collect(),
            rows: LossRows {
                rows,
                slack_cost: vec![1.0 / n as f64; n],
            },
            lambda,
            lambda_rej: Some(lambda_rej),
            laplacian: None,
        };
        let (w, u) = self.solve(&problem)?;
        let hp = Hyperparams {
            lambda,
            lambda_rej,
            sigma,
            c,
            d,
            ..Hyperparams::default()
        };
        TrainedModel::new(Method::CadSvm, basis, w, u, hp, Some(params))
    }
}

/// Hinge rows for `(target, weight)` pairs with slack cost `weight / n`.
fn weighted_hinge(targets: impl Iterator<Item = (f64, f64)>, n: usize) -> LossRows {
    let mut rows = Vec::with_capacity(2 * n);
    let mut slack_cost = Vec::with_capacity(n);
    for (i, (y, weight)) in targets.enumerate() {
        rows.extend(hinge_rows(i, y));
        slack_cost.push(weight / n as f64);
    }
    LossRows { rows, slack_cost }
}

pub fn train_svm(data: &Dataset, lambda: f64, sigma: f64) -> Result<TrainedModel> {
    Trainer::default().svm(data, lambda, sigma)
}

pub fn train_svm_rl(data: &Dataset, lambda: f64, sigma: f64, seed: u64) -> Result<TrainedModel> {
    Trainer::default().svm_rl(data, lambda, sigma, seed)
}

pub fn train_lapsvm(data: &Dataset, lambda: f64, sigma: f64, sigma_graph: f64, tau: f64) -> Result<TrainedModel> {
    Trainer::default().lapsvm(data, lambda, sigma, sigma_graph, tau)
}

pub fn train_two_step(
    data: &Dataset,
    lambda: f64,
    lambda_rej: f64,
    sigma: f64,
    c: f64,
    d: f64,
) -> Result<TrainedModel> {
    Trainer::default().two_step(data, lambda, lambda_rej, sigma, c, d)
}

pub fn train_cro_svm(data: &Dataset, lambda: f64, lambda_rej: f64, sigma: f64, c: f64) -> Result<TrainedModel> {
    Trainer::default().cro_svm(data, lambda, lambda_rej, sigma, c)
}

pub fn train_cro_svm_rl(
    data: &Dataset,
    lambda: f64,
    lambda_rej: f64,
    sigma: f64,
    c: f64,
    seed: u64,
) -> Result<TrainedModel> {
    Trainer::default().cro_svm_rl(data, lambda, lambda_rej, sigma, c, seed)
}

pub fn train_cad_svm(
    data: &Dataset,
    lambda: f64,
    lambda_rej: f64,
    sigma: f64,
    c: f64,
    d: f64,
) -> Result<TrainedModel> {
    Trainer::default().cad_svm(data, lambda, lambda_rej, sigma, c, d)
}
