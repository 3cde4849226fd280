use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::dense::QpProblem;
use super::ipm::KktSystem;
use crate::error::{Error, Result};

/// One coefficient block `x_b` of a [`SlackQp`].
///
/// `features` has one row per sample; the block contributes the quadratic term
/// `½ x_bᵀ curvature x_b` to the objective.
#[derive(Debug, Clone)]
pub struct CoefBlock {
    pub features: DMatrix<f64>,
    pub curvature: DMatrix<f64>,
}

/// Constraint `Σ_b coefs[b]·⟨features_b[sample], x_b⟩ − t[sample] ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackRow {
    pub sample: usize,
    pub coefs: Vec<f64>,
    pub rhs: f64,
}

/// QP over coefficient blocks and one epigraph slack per sample:
///
/// ```text
///     minimize    Σ_b ½ x_bᵀ C_b x_b + Σ_i cost_i t_i
///     subject to  Σ_b coefs[b]·⟨ψ_b(i), x_b⟩ − t_i ≤ rhs     (one per row)
/// ```
///
/// Variables are ordered `(x_1, …, x_B, t)`, the same order [`SlackQp::to_dense`]
/// uses. Because each row touches exactly one slack, the slacks drop out of the
/// Newton system in closed form and only a `Σ_b dim(x_b)` square matrix is
/// factored per iteration.
#[derive(Debug, Clone)]
pub struct SlackQp {
    blocks: Vec<CoefBlock>,
    offsets: Vec<usize>,
    n_x: usize,
    n_slack: usize,
    rows: Vec<SlackRow>,
    rows_of_sample: Vec<Vec<usize>>,
    linear: DVector<f64>,
    bounds: DVector<f64>,
}

impl SlackQp {
    pub fn new(blocks: Vec<CoefBlock>, slack_cost: DVector<f64>, rows: Vec<SlackRow>) -> Result<Self> {
        let n_slack = slack_cost.len();
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut n_x = 0;
        for (b, block) in blocks.iter().enumerate() {
            let k = block.features.ncols();
            if block.features.nrows() != n_slack {
                return Err(Error::dims(format!(
                    "block {b} has {} feature rows for {n_slack} samples",
                    block.features.nrows()
                )));
            }
            if block.curvature.nrows() != k || block.curvature.ncols() != k {
                return Err(Error::dims(format!("block {b} curvature is not {k}x{k}")));
            }
            offsets.push(n_x);
            n_x += k;
        }
        let mut rows_of_sample = vec![Vec::new(); n_slack];
        for (k, row) in rows.iter().enumerate() {
            if row.sample >= n_slack {
                return Err(Error::dims(format!(
                    "row {k} references sample {} of {n_slack}",
                    row.sample
                )));
            }
            if row.coefs.len() != blocks.len() {
                return Err(Error::dims(format!(
                    "row {k} has {} coefficients for {} blocks",
                    row.coefs.len(),
                    blocks.len()
                )));
            }
            rows_of_sample[row.sample].push(k);
        }
        if let Some(i) = rows_of_sample.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("slack {i} has no constraint row")));
        }
        if slack_cost.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::invalid("slack costs must be nonnegative"));
        }
        let mut linear = DVector::zeros(n_x + n_slack);
        linear.rows_mut(n_x, n_slack).copy_from(&slack_cost);
        let bounds = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.rhs));
        Ok(SlackQp {
            blocks,
            offsets,
            n_x,
            n_slack,
            rows,
            rows_of_sample,
            linear,
            bounds,
        })
    }

    /// Number of coefficient variables (all blocks together).
    pub fn n_coefs(&self) -> usize {
        self.n_x
    }

    pub fn n_slacks(&self) -> usize {
        self.n_slack
    }

    pub fn rows(&self) -> &[SlackRow] {
        &self.rows
    }

    /// The part of a solution vector that belongs to block `b`.
    pub fn block_of(&self, z: &DVector<f64>, b: usize) -> DVector<f64> {
        let k = self.blocks[b].features.ncols();
        z.rows(self.offsets[b], k).into_owned()
    }

    /// Expands into the equivalent dense problem.
    pub fn to_dense(&self) -> Result<QpProblem> {
        let n = self.n_x + self.n_slack;
        let mut p = DMatrix::zeros(n, n);
        for (block, &off) in self.blocks.iter().zip(&self.offsets) {
            let k = block.features.ncols();
            p.view_mut((off, off), (k, k)).copy_from(&block.curvature);
        }
        let mut g = DMatrix::zeros(self.rows.len(), n);
        for (k, row) in self.rows.iter().enumerate() {
            for ((block, &off), &coef) in self.blocks.iter().zip(&self.offsets).zip(&row.coefs) {
                if coef != 0.0 {
                    for j in 0..block.features.ncols() {
                        g[(k, off + j)] = coef * block.features[(row.sample, j)];
                    }
                }
            }
            g[(k, self.n_x + row.sample)] = -1.0;
        }
        QpProblem::new(p, self.linear.clone(), g, self.bounds.clone())
    }

    fn block_values(&self, z: &DVector<f64>) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(block, &off)| &block.features * z.rows(off, block.features.ncols()))
            .collect()
    }
}

pub(crate) struct SlackFactor {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    slack_diag: Vec<f64>,
    // Row-weighted coefficient sums, `coupling[(i, b)] = Σ_k d_k coefs_k[b]`.
    coupling: DMatrix<f64>,
}

impl KktSystem for SlackQp {
    type Factor = SlackFactor;

    fn n_vars(&self) -> usize {
        self.n_x + self.n_slack
    }

    fn n_cons(&self) -> usize {
        self.rows.len()
    }

    fn linear_term(&self) -> &DVector<f64> {
        &self.linear
    }

    fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    fn mul_quad(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(z.len());
        for (block, &off) in self.blocks.iter().zip(&self.offsets) {
            let k = block.features.ncols();
            out.rows_mut(off, k)
                .copy_from(&(&block.curvature * z.rows(off, k)));
        }
        out
    }

    fn mul_cons(&self, z: &DVector<f64>) -> DVector<f64> {
        let values = self.block_values(z);
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let lin: f64 = row
                    .coefs
                    .iter()
                    .zip(&values)
                    .map(|(c, f)| c * f[row.sample])
                    .sum();
                lin - z[self.n_x + row.sample]
            }),
        )
    }

    fn mul_cons_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let nb = self.blocks.len();
        let mut per_sample = DMatrix::zeros(self.n_slack, nb);
        let mut out = DVector::zeros(self.n_x + self.n_slack);
        for (row, &yk) in self.rows.iter().zip(y.iter()) {
            for (b, &c) in row.coefs.iter().enumerate() {
                per_sample[(row.sample, b)] += c * yk;
            }
            out[self.n_x + row.sample] -= yk;
        }
        for (b, (block, &off)) in self.blocks.iter().zip(&self.offsets).enumerate() {
            let k = block.features.ncols();
            out.rows_mut(off, k)
                .copy_from(&block.features.tr_mul(&per_sample.column(b)));
        }
        out
    }

    fn factor(&self, weights: &DVector<f64>, shift: f64) -> Option<SlackFactor> {
        let nb = self.blocks.len();
        let mut slack_diag = vec![shift; self.n_slack];
        let mut coupling = DMatrix::zeros(self.n_slack, nb);
        // Schur weights per sample and block pair, stored as columns a*nb + b.
        let mut schur = DMatrix::zeros(self.n_slack, nb * nb);

        for (i, rows) in self.rows_of_sample.iter().enumerate() {
            let total: f64 = shift + rows.iter().map(|&k| weights[k]).sum::<f64>();
            if !(total > 0.0) {
                return None;
            }
            slack_diag[i] = total;
            for &k in rows {
                for b in 0..nb {
                    coupling[(i, b)] += weights[k] * self.rows[k].coefs[b];
                }
            }
            // Σ d c cᵀ − v vᵀ/S written as a sum over row pairs, which avoids
            // cancellation when one weight dominates.
            for a in 0..nb {
                for b in a..nb {
                    let mut acc = 0.0;
                    for (x, &k) in rows.iter().enumerate() {
                        let ck = &self.rows[k].coefs;
                        acc += shift * weights[k] * ck[a] * ck[b];
                        for &l in &rows[x + 1..] {
                            let cl = &self.rows[l].coefs;
                            acc += weights[k] * weights[l] * (ck[a] - cl[a]) * (ck[b] - cl[b]);
                        }
                    }
                    schur[(i, a * nb + b)] = acc / total;
                }
            }
        }

        let mut matrix = DMatrix::zeros(self.n_x, self.n_x);
        for a in 0..nb {
            let fa = &self.blocks[a].features;
            for b in a..nb {
                let fb = &self.blocks[b].features;
                let mut scaled = fb.clone();
                for (mut row, &w) in scaled.row_iter_mut().zip(schur.column(a * nb + b).iter()) {
                    row *= w;
                }
                let block = fa.tr_mul(&scaled);
                let (ra, rb) = (self.offsets[a], self.offsets[b]);
                matrix
                    .view_mut((ra, rb), (fa.ncols(), fb.ncols()))
                    .copy_from(&block);
                if a != b {
                    matrix
                        .view_mut((rb, ra), (fb.ncols(), fa.ncols()))
                        .copy_from(&block.transpose());
                }
            }
            let k = fa.ncols();
            let off = self.offsets[a];
            let mut diag = matrix.view_mut((off, off), (k, k));
            diag += &self.blocks[a].curvature;
        }
        for i in 0..self.n_x {
            matrix[(i, i)] += shift;
        }
        let chol = Cholesky::new(matrix.clone())?;
        Some(SlackFactor {
            matrix,
            chol,
            slack_diag,
            coupling,
        })
    }

    fn solve(&self, factor: &SlackFactor, rhs: &DVector<f64>) -> DVector<f64> {
        let rt = rhs.rows(self.n_x, self.n_slack);
        let scaled_t =
            DVector::from_iterator(self.n_slack, rt.iter().zip(&factor.slack_diag).map(|(r, s)| r / s));

        let mut rx = rhs.rows(0, self.n_x).into_owned();
        for (b, (block, &off)) in self.blocks.iter().zip(&self.offsets).enumerate() {
            let k = block.features.ncols();
            let weighted = factor.coupling.column(b).component_mul(&scaled_t);
            let mut part = rx.rows_mut(off, k);
            part += block.features.tr_mul(&weighted);
        }

        let mut dx = factor.chol.solve(&rx);
        let residual = &rx - &factor.matrix * &dx;
        dx += factor.chol.solve(&residual);

        let mut out = DVector::zeros(self.n_x + self.n_slack);
        out.rows_mut(0, self.n_x).copy_from(&dx);
        let mut dt = rt.into_owned();
        for (b, (block, &off)) in self.blocks.iter().zip(&self.offsets).enumerate() {
            let values = &block.features * dx.rows(off, block.features.ncols());
            dt += factor.coupling.column(b).component_mul(&values);
        }
        for (i, v) in dt.iter().enumerate() {
            out[self.n_x + i] = v / factor.slack_diag[i];
        }
        out
    }
}
