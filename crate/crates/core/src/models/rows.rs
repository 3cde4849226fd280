use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::losses::{Label, LossParams};
use crate::qp::QpProblem;

/// One epigraph constraint `ξ_sample ≥ h_coef·h_sample + r_coef·r_sample + offset`.
///
/// A per-sample loss of the form `max(a_1, …, a_k)` with affine pieces `a_j`
/// becomes one row per piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub sample: usize,
    pub h_coef: f64,
    pub r_coef: f64,
    pub offset: f64,
}

impl LossRow {
    /// `ξ ≥ 0`.
    pub fn nonnegative(sample: usize) -> Self {
        LossRow { sample, h_coef: 0.0, r_coef: 0.0, offset: 0.0 }
    }

    /// Value of the affine piece at `(h, r)`.
    pub fn value(&self, h: f64, r: f64) -> f64 {
        self.h_coef * h + self.r_coef * r + self.offset
    }
}

/// Hinge `max(1 − y·h, 0)` for a target `y = ±1`.
pub fn hinge_rows(sample: usize, y: f64) -> Vec<LossRow> {
    vec![
        LossRow { sample, h_coef: -y, r_coef: 0.0, offset: 1.0 },
        LossRow::nonnegative(sample),
    ]
}

/// Max-hinge `max(1 + α/2·(r − y·h), η·c·(1 − β·r), 0)`; `η = 1` gives the
/// plain MH loss.
pub fn mh_rows(sample: usize, y: f64, params: &LossParams, eta: f64) -> Vec<LossRow> {
    let half = params.alpha() / 2.0;
    let reject = eta * params.c();
    vec![
        LossRow { sample, h_coef: -half * y, r_coef: half, offset: 1.0 },
        LossRow { sample, h_coef: 0.0, r_coef: -reject * params.beta(), offset: reject },
        LossRow::nonnegative(sample),
    ]
}

/// Max-hinge-ambiguous rows: the MH rows scaled by `η` for labelled samples,
/// `max(η·d·(1 + β·r), 0)` for ambiguous ones.
pub fn mha_rows(sample: usize, y: Label, params: &LossParams) -> Vec<LossRow> {
    match y {
        Label::Ambiguous => {
            let amb = params.eta() * params.d();
            vec![
                LossRow { sample, h_coef: 0.0, r_coef: amb * params.beta(), offset: amb },
                LossRow::nonnegative(sample),
            ]
        }
        _ => mh_rows(sample, y.as_f64(), params, params.eta()),
    }
}

/// Constraint rows for all samples and the objective weight of each slack.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRows {
    pub rows: Vec<LossRow>,
    pub slack_cost: Vec<f64>,
}

impl LossRows {
    pub fn n_samples(&self) -> usize {
        self.slack_cost.len()
    }

    /// True if any row involves the rejector.
    pub fn uses_rejector(&self) -> bool {
        self.rows.iter().any(|r| r.r_coef != 0.0)
    }

    /// `Σ_i cost_i · max_rows(value)` at the given function values.
    pub fn objective_at(&self, h: &[f64], r: &[f64]) -> f64 {
        let mut best = vec![f64::NEG_INFINITY; self.n_samples()];
        for row in &self.rows {
            let v = row.value(h[row.sample], r[row.sample]);
            best[row.sample] = best[row.sample].max(v);
        }
        best.iter().zip(&self.slack_cost).map(|(b, c)| b * c).sum()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.n_samples();
        let mut seen = vec![false; n];
        for (k, row) in self.rows.iter().enumerate() {
            if row.sample >= n {
                return Err(Error::dims(format!("loss row {k} references sample {} of {n}", row.sample)));
            }
            seen[row.sample] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::dims(format!("sample {i} has no loss row")));
        }
        Ok(())
    }
}

/// Dense training QP over `(w, u, ξ)`:
///
/// ```text
///     minimize    λ/2‖w‖² + λ′/2‖u‖² + Σ_i cost_i ξ_i
///     subject to  ξ_i ≥ a·(Φw)_i + b·(Φu)_i + k     (one per loss row)
/// ```
///
/// `design` has one row per sample and one column per basis function. `n_u`
/// is `0` (no rejector) or the basis size; `λ′` is ignored when it is `0`.
pub fn assemble_training_qp(
    design: &DMatrix<f64>,
    rows: &LossRows,
    n_u: usize,
    lambda: f64,
    lambda_rej: f64,
) -> Result<QpProblem> {
    assemble_dense(design, rows, n_u, lambda, lambda_rej, None)
}

pub(crate) fn assemble_dense(
    design: &DMatrix<f64>,
    rows: &LossRows,
    n_u: usize,
    lambda: f64,
    lambda_rej: f64,
    w_curvature: Option<&DMatrix<f64>>,
) -> Result<QpProblem> {
    if !(lambda > 0.0) || !(lambda_rej >= 0.0) {
        return Err(Error::invalid(format!("need λ > 0 and λ′ ≥ 0 (got {lambda}, {lambda_rej})")));
    }
    rows.validate()?;
    let n_w = design.ncols();
    let n = rows.n_samples();
    if design.nrows() != n {
        return Err(Error::dims(format!("design has {} rows for {n} samples", design.nrows())));
    }
    if n_u != 0 && n_u != n_w {
        return Err(Error::dims(format!("rejector size {n_u} must be 0 or the basis size {n_w}")));
    }
    if n_u == 0 && rows.uses_rejector() {
        return Err(Error::dims("loss rows use the rejector but n_u = 0"));
    }
    let total = n_w + n_u + n;
    let mut p = DMatrix::zeros(total, total);
    for j in 0..n_w {
        p[(j, j)] = lambda;
    }
    if let Some(extra) = w_curvature {
        let mut block = p.view_mut((0, 0), (n_w, n_w));
        block += extra;
    }
    for j in n_w..n_w + n_u {
        p[(j, j)] = lambda_rej;
    }
    let mut q = DVector::zeros(total);
    q.rows_mut(n_w + n_u, n).copy_from(&DVector::from_column_slice(&rows.slack_cost));

    let mut g = DMatrix::zeros(rows.rows.len(), total);
    let mut h = DVector::zeros(rows.rows.len());
    for (k, row) in rows.rows.iter().enumerate() {
        for j in 0..n_w {
            g[(k, j)] = row.h_coef * design[(row.sample, j)];
            if n_u > 0 {
                g[(k, n_w + j)] = row.r_coef * design[(row.sample, j)];
            }
        }
        g[(k, n_w + n_u + row.sample)] = -1.0;
        h[k] = -row.offset;
    }
    QpProblem::new(p, q, g, h)
}
