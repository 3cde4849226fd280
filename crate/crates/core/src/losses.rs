//! Pointwise losses for classification with rejection and ambiguous labels.
//!
//! `h` is the discriminant value and `r` the rejector value at one sample. A
//! sample is accepted when `r > 0` and rejected when `r ≤ 0`; a classified
//! sample is an error when `y·h ≤ 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ternary label: positive, negative, or ambiguous (encoded as `0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Ambiguous,
    Positive,
}

impl Label {
    /// Integer encoding in `{-1, 0, 1}`.
    pub fn value(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Ambiguous => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn from_value(v: i64) -> Result<Label> {
        match v {
            -1 => Ok(Label::Negative),
            0 => Ok(Label::Ambiguous),
            1 => Ok(Label::Positive),
            _ => Err(Error::invalid(format!("label {v} is not one of -1, 0, 1"))),
        }
    }

    /// The label a discriminant value predicts; `h = 0` counts as negative.
    pub fn from_sign(h: f64) -> Label {
        if h > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_ambiguous(self) -> bool {
        self == Label::Ambiguous
    }

    /// `y` for binary labels, an error for the ambiguous one.
    pub fn binary(self) -> Result<f64> {
        match self {
            Label::Ambiguous => Err(Error::AmbiguousLabel),
            other => Ok(other.as_f64()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Penalties of the 0-1-c-d loss and shape parameters of its surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    c: f64,
    d: f64,
    alpha: f64,
    beta: f64,
    eta: f64,
}

fn check_cost(c: f64) -> Result<()> {
    if c > 0.0 && c < 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rejection cost c = {c} must lie in (0, 0.5)")))
    }
}

impl LossParams {
    /// Requires `0 < c < 0.5`, `0 < d ≤ 1`, `α, β > 0` and `η ≥ 1`.
    pub fn new(c: f64, d: f64, alpha: f64, beta: f64, eta: f64) -> Result<Self> {
        check_cost(c)?;
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::invalid(format!("ambiguity penalty d = {d} must lie in (0, 1]")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("surrogate slopes must be positive (α = {alpha}, β = {beta})")));
        }
        if !(eta >= 1.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("surrogate scale η = {eta} must be at least 1")));
        }
        Ok(LossParams { c, d, alpha, beta, eta })
    }

    /// The calibrated surrogate: `α = 2(1−2c)`, `β = 1+2c`, `η = 2/(1+2c)`.
    /// None of them depends on `d`.
    pub fn calibrated(c: f64, d: f64) -> Result<Self> {
        check_cost(c)?;
        LossParams::new(c, d, 2.0 * (1.0 - 2.0 * c), 1.0 + 2.0 * c, 2.0 / (1.0 + 2.0 * c))
    }

    /// Same parameters with `η` replaced.
    pub fn with_eta(self, eta: f64) -> Result<Self> {
        LossParams::new(self.c, self.d, self.alpha, self.beta, eta)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Free-function form of [`LossParams::calibrated`].
pub fn calibrated_params(c: f64, d: f64) -> Result<LossParams> {
    LossParams::calibrated(c, d)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `1[y·h ≤ 0]`.
pub fn loss_01(h: f64, y: Label) -> Result<f64> {
    Ok(indicator(y.binary()? * h <= 0.0))
}

/// `max(1 − y·h, 0)`.
pub fn loss_hinge(h: f64, y: Label) -> Result<f64> {
    Ok((1.0 - y.binary()? * h).max(0.0))
}

/// `1[y·h ≤ 0]·1[r > 0] + c·1[r ≤ 0]`.
pub fn loss_01c(h: f64, r: f64, y: Label, c: f64) -> Result<f64> {
    let y = y.binary()?;
    check_cost(c)?;
    Ok(binary_01c(y * h, r, c))
}

fn binary_01c(margin: f64, r: f64, c: f64) -> f64 {
    if r > 0.0 {
        indicator(margin <= 0.0)
    } else {
        c
    }
}

/// `y²·(1[y·h ≤ 0]·1[r > 0] + c·1[r ≤ 0]) + d·1[y = 0]·1[r > 0]`.
pub fn loss_01cd(h: f64, r: f64, y: Label, params: &LossParams) -> f64 {
    match y {
        Label::Ambiguous => params.d * indicator(r > 0.0),
        _ => binary_01c(y.as_f64() * h, r, params.c),
    }
}

/// Max-hinge loss `max(1 + α/2·(r − y·h), c·(1 − β·r), 0)`.
pub fn loss_mh(h: f64, r: f64, y: Label, params: &LossParams) -> Result<f64> {
    let y = y.binary()?;
    Ok(max_hinge(y * h, r, params, 1.0))
}

fn max_hinge(margin: f64, r: f64, params: &LossParams, eta: f64) -> f64 {
    let classify = 1.0 + params.alpha / 2.0 * (r - margin);
    let reject = eta * params.c * (1.0 - params.beta * r);
    classify.max(reject).max(0.0)
}

/// Max-hinge-ambiguous loss:
/// `y²·max(1 + α/2·(r − y·h), η·c·(1 − β·r), 0) + (1 − y²)·max(η·d·(1 + β·r), 0)`.
pub fn loss_mha(h: f64, r: f64, y: Label, params: &LossParams) -> f64 {
    match y {
        Label::Ambiguous => (params.eta * params.d * (1.0 + params.beta * r)).max(0.0),
        _ => max_hinge(y.as_f64() * h, r, params, params.eta),
    }
}
