use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::ipm::KktSystem;
use crate::error::{Error, Result};

/// Largest problem for which positive semidefiniteness is checked by a full
/// eigendecomposition.
const PSD_CHECK_LIMIT: usize = 500;

/// Dense convex QP: minimize ½ zᵀPz + qᵀz subject to Gz ≤ h.
#[derive(Debug, Clone)]
pub struct QpProblem {
    p: DMatrix<f64>,
    q: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl QpProblem {
    /// Builds a problem, symmetrizing `P` and checking dimensions. For up to
    /// 500 variables `P` must also have no eigenvalue below `-1e-8`.
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        let n = q.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::dims(format!(
                "P is {}x{} but q has length {n}",
                p.nrows(),
                p.ncols()
            )));
        }
        if g.ncols() != n && g.nrows() != 0 {
            return Err(Error::dims(format!("G has {} columns, expected {n}", g.ncols())));
        }
        if g.nrows() != h.len() {
            return Err(Error::dims(format!(
                "G has {} rows but h has length {}",
                g.nrows(),
                h.len()
            )));
        }
        if p.iter().chain(q.iter()).chain(g.iter()).chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("QP data contains non-finite entries"));
        }
        let g = if g.nrows() == 0 { DMatrix::zeros(0, n) } else { g };
        let p = (&p + p.transpose()) * 0.5;
        if n > 0 && n <= PSD_CHECK_LIMIT {
            let smallest = p.clone().symmetric_eigenvalues().min();
            if smallest < -1e-8 {
                return Err(Error::invalid(format!(
                    "P is not positive semidefinite (eigenvalue {smallest:.3e})"
                )));
            }
        }
        Ok(QpProblem { p, q, g, h })
    }

    pub fn n_vars(&self) -> usize {
        self.q.len()
    }

    pub fn n_cons(&self) -> usize {
        self.h.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.q.dot(z)
    }
}

pub(crate) struct DenseFactor {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl KktSystem for QpProblem {
    type Factor = DenseFactor;

    fn n_vars(&self) -> usize {
        self.q.len()
    }

    fn n_cons(&self) -> usize {
        self.h.len()
    }

    fn linear_term(&self) -> &DVector<f64> {
        &self.q
    }

    fn bounds(&self) -> &DVector<f64> {
        &self.h
    }

    fn mul_quad(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.p * z
    }

    fn mul_cons(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.g * z
    }

    fn mul_cons_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.g.tr_mul(y)
    }

    fn factor(&self, weights: &DVector<f64>, shift: f64) -> Option<DenseFactor> {
        let mut scaled = self.g.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(weights.iter()) {
            row *= *w;
        }
        let mut matrix = &self.p + self.g.tr_mul(&scaled);
        for i in 0..matrix.nrows() {
            matrix[(i, i)] += shift;
        }
        let chol = Cholesky::new(matrix.clone())?;
        Some(DenseFactor { matrix, chol })
    }

    fn solve(&self, factor: &DenseFactor, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = factor.chol.solve(rhs);
        // One step of iterative refinement.
        let residual = rhs - &factor.matrix * &x;
        x += factor.chol.solve(&residual);
        x
    }
}
