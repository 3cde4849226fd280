//! The seven trainers and the shared predictor.
//!
//! Every model is a Gaussian kernel expansion `h(x) = Σ_j w_j φ_j(x)` without
//! intercept, optionally paired with a rejector `r(x) = Σ_j u_j φ_j(x)` on the
//! same basis. Only `h` is used to classify.

mod io;
mod rows;
mod spectral;
mod train;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{design_matrix, BasisSet};
use crate::losses::{loss_hinge, loss_mh, loss_mha, Label, LossParams};

pub use rows::{assemble_training_qp, hinge_rows, mh_rows, mha_rows, LossRow, LossRows};
pub use spectral::KernelCache;
pub use train::{
    train_cad_svm, train_cro_svm, train_cro_svm_rl, train_lapsvm, train_svm, train_svm_rl, train_two_step,
    relabel_ambiguous, Backend, TrainOptions, Trainer,
};

/// Training algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Svm,
    SvmRl,
    LapSvm,
    TwoStep,
    CroSvm,
    CroSvmRl,
    CadSvm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Svm,
        Method::SvmRl,
        Method::LapSvm,
        Method::TwoStep,
        Method::CroSvm,
        Method::CroSvmRl,
        Method::CadSvm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Svm => "svm",
            Method::SvmRl => "svm-rl",
            Method::LapSvm => "lapsvm",
            Method::TwoStep => "two-step",
            Method::CroSvm => "cro-svm",
            Method::CroSvmRl => "cro-svm-rl",
            Method::CadSvm => "cad-svm",
        }
    }

    /// Display name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Svm => "SVM",
            Method::SvmRl => "SVM-RL",
            Method::LapSvm => "LapSVM",
            Method::TwoStep => "Two-step SVM",
            Method::CroSvm => "CRO-SVM",
            Method::CroSvmRl => "CRO-SVM-RL",
            Method::CadSvm => "CAD-SVM",
        }
    }

    /// Whether the method learns a rejector and so takes `λ′`.
    pub fn has_rejector(self) -> bool {
        matches!(self, Method::TwoStep | Method::CroSvm | Method::CroSvmRl | Method::CadSvm)
    }

    /// Whether the method draws random labels for ambiguous samples.
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::SvmRl | Method::CroSvmRl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| {
                let tags: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
                Error::invalid(format!("unknown method {s:?}; valid methods are {}", tags.join(", ")))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

/// Hyperparameters of all methods; each method reads only the ones it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyperparams {
    pub lambda: f64,
    /// `λ′`, regularization of the rejector.
    pub lambda_rej: f64,
    pub sigma: f64,
    /// `σ′`, width of the graph weights (LapSVM).
    pub sigma_graph: f64,
    /// Laplacian coefficient (LapSVM).
    pub tau: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1e-5,
            lambda_rej: 1e-5,
            sigma: 10f64.powf(0.5),
            sigma_graph: 10f64.powf(0.5),
            tau: 1e-2,
            c: 0.2,
            d: 0.2,
        }
    }
}

/// A trained classifier, optionally with its rejector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    method: Method,
    fallback: bool,
    basis: BasisSet,
    w: DVector<f64>,
    u: DVector<f64>,
    hyper: Hyperparams,
    loss_params: Option<LossParams>,
}

impl TrainedModel {
    pub fn new(
        method: Method,
        basis: BasisSet,
        w: DVector<f64>,
        u: DVector<f64>,
        hyper: Hyperparams,
        loss_params: Option<LossParams>,
    ) -> Result<Self> {
        if w.len() != basis.len() || u.len() != basis.len() {
            return Err(Error::dims(format!(
                "coefficient lengths {} and {} differ from the basis size {}",
                w.len(),
                u.len(),
                basis.len()
            )));
        }
        if w.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("model coefficients must be finite"));
        }
        Ok(TrainedModel {
            method,
            fallback: false,
            basis,
            w,
            u,
            hyper,
            loss_params,
        })
    }

    pub(crate) fn with_fallback(mut self, fallback: bool) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Method tag, with `+fallback` when the two-step classifier had to be
    /// trained on all labelled samples.
    pub fn method_tag(&self) -> String {
        if self.fallback {
            format!("{}+fallback", self.method.tag())
        } else {
            self.method.tag().to_string()
        }
    }

    pub fn used_fallback(&self) -> bool {
        self.fallback
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn loss_params(&self) -> Option<&LossParams> {
        self.loss_params.as_ref()
    }

    /// `(h, r)` at each row of `points`.
    pub fn decision_values(&self, points: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let phi = design_matrix(&self.basis, points)?;
        let h = DVector::from_fn(phi.nrows(), |i, _| dot(phi.row(i).iter(), &self.w));
        let r = DVector::from_fn(phi.nrows(), |i, _| dot(phi.row(i).iter(), &self.u));
        Ok((h, r))
    }

    /// Mean training surrogate on `data`: hinge for the SVM-type methods, MH
    /// for the CRO variants, MHA for CAD-SVM. Ambiguous samples count only
    /// for CAD-SVM.
    pub fn surrogate_risk(&self, data: &Dataset) -> Result<f64> {
        let (h, r) = self.decision_values(&data.features())?;
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, s) in data.samples().iter().enumerate() {
            let value = match (self.method, &self.loss_params) {
                (Method::CadSvm, Some(p)) => loss_mha(h[i], r[i], s.y, p),
                (_, _) if s.y.is_ambiguous() => continue,
                (Method::CroSvm | Method::CroSvmRl, Some(p)) => loss_mh(h[i], r[i], s.y, p)?,
                _ => loss_hinge(h[i], s.y)?,
            };
            total += value;
            count += 1;
        }
        if count == 0 {
            return Err(Error::data("no samples to evaluate the surrogate on"));
        }
        Ok(total / count as f64)
    }
}

// Sequential sum, so that single and batch prediction agree bit for bit.
fn dot<'a>(phi: impl Iterator<Item = &'a f64>, coef: &DVector<f64>) -> f64 {
    phi.zip(coef.iter()).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// Output of [`predict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub h_value: f64,
    pub r_value: f64,
    /// `+1` iff `h_value > 0`.
    pub label: Label,
    /// `r_value ≤ 0`; diagnostic only.
    pub rejected: bool,
}

impl Prediction {
    fn new(h: f64, r: f64) -> Self {
        Prediction {
            h_value: h,
            r_value: r,
            label: Label::from_sign(h),
            rejected: r <= 0.0,
        }
    }
}

pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<Prediction> {
    let phi = model.basis.features(x)?;
    Ok(Prediction::new(dot(phi.iter(), &model.w), dot(phi.iter(), &model.u)))
}

/// [`predict`] for every row of `points`.
pub fn predict_batch(model: &TrainedModel, points: &DMatrix<f64>) -> Result<Vec<Prediction>> {
    let (h, r) = model.decision_values(points)?;
    Ok(h.iter().zip(r.iter()).map(|(&h, &r)| Prediction::new(h, r)).collect())
}
