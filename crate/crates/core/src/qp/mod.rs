//! Dense convex quadratic programming.
//!
//! Every trainer in the crate reduces to a problem of the form
//!
//! ```text
//!     minimize    ½ zᵀPz + qᵀz
//!     subject to  Gz ≤ h
//! ```
//!
//! with `P` positive semidefinite. [`solve_qp`] handles the general dense case.
//! [`SlackQp`] describes the same kind of problem when the variables split into
//! coefficient blocks plus one epigraph slack per sample, which is the shape all
//! the hinge-type training problems share; it is solved by the same
//! interior-point iteration with the slacks eliminated from the Newton system.

mod dense;
mod ipm;
mod slack;

pub use dense::QpProblem;
pub use slack::{CoefBlock, SlackQp, SlackRow};

use nalgebra::DVector;

/// Outcome of an interior-point solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Converged,
    MaxIterations,
    NumericalFailure,
}

/// Solver controls. The defaults are a KKT tolerance of `1e-8` (max-norm) and
/// at most 100 iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Primal-dual answer of a QP together with its KKT residual.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// One multiplier per inequality row; strictly positive by construction.
    pub duals: DVector<f64>,
    pub objective: f64,
    /// Max-norm over stationarity, primal infeasibility and complementarity.
    pub kkt_residual: f64,
    pub status: QpStatus,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_converged(&self) -> bool {
        self.status == QpStatus::Converged
    }
}

/// Solves a dense QP with a Mehrotra predictor-corrector interior-point method.
///
/// The solution is always returned, also when the iteration budget runs out
/// or the Newton system cannot be factored; check [`QpSolution::status`].
pub fn solve_qp(problem: &QpProblem, tol: f64, max_iter: usize) -> QpSolution {
    ipm::interior_point(problem, QpSettings { tol, max_iter })
}

/// Solves a [`SlackQp`] with the same interior-point iteration as [`solve_qp`].
pub fn solve_slack_qp(problem: &SlackQp, settings: QpSettings) -> QpSolution {
    ipm::interior_point(problem, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix};

    #[test]
    fn active_lower_bound() {
        // minimize z² subject to z ≥ 1
        let qp = QpProblem::new(dmatrix![2.0], dvector![0.0], dmatrix![-1.0], dvector![-1.0]).unwrap();
        let sol = solve_qp(&qp, 1e-8, 100);
        assert!(sol.is_converged());
        assert!((sol.z[0] - 1.0).abs() < 1e-7);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!((sol.duals[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QpProblem::new(
            DMatrix::identity(2, 2) * 2.0,
            dvector![0.0, 0.0],
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve_qp(&qp, 1e-8, 100);
        assert!(sol.is_converged());
        assert_eq!(sol.z.len(), 2);
        assert!(sol.z.amax() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = QpProblem::new(dmatrix![1.0, 0.0; 0.0, 1.0], dvector![0.0], DMatrix::zeros(0, 1), DVector::zeros(0));
        assert!(matches!(err, Err(crate::Error::DimensionMismatch(_))));
        let err = QpProblem::new(dmatrix![1.0], dvector![0.0], dmatrix![1.0, 2.0], dvector![1.0]);
        assert!(matches!(err, Err(crate::Error::DimensionMismatch(_))));
        let err = QpProblem::new(dmatrix![1.0], dvector![0.0], dmatrix![1.0], dvector![1.0, 2.0]);
        assert!(matches!(err, Err(crate::Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_indefinite_curvature() {
        let err = QpProblem::new(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0], DMatrix::zeros(0, 2), DVector::zeros(0));
        assert!(matches!(err, Err(crate::Error::InvalidParameter(_))));
    }

    #[test]
    fn symmetrizes_curvature() {
        let qp = QpProblem::new(dmatrix![2.0, 1.0; 0.0, 2.0], dvector![0.0, 0.0], DMatrix::zeros(0, 2), DVector::zeros(0)).unwrap();
        assert_eq!(qp.p()[(0, 1)], 0.5);
        assert_eq!(qp.p()[(1, 0)], 0.5);
    }

    #[test]
    fn singular_unconstrained_problem_fails_numerically() {
        // Zero curvature and a nonzero linear term: unbounded, Newton matrix singular.
        let qp = QpProblem::new(dmatrix![0.0], dvector![1.0], DMatrix::zeros(0, 1), DVector::zeros(0)).unwrap();
        let sol = solve_qp(&qp, 1e-8, 100);
        assert_ne!(sol.status, QpStatus::Converged);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let qp = QpProblem::new(dmatrix![2.0], dvector![0.0], dmatrix![-1.0], dvector![-1.0]).unwrap();
        let sol = solve_qp(&qp, 1e-14, 1);
        assert_eq!(sol.status, QpStatus::MaxIterations);
        assert!(sol.kkt_residual > 1e-14);
    }

    #[test]
    fn slack_form_matches_dense_expansion() {
        // Two hinge-style rows per sample on a single block.
        let features = dmatrix![1.0, 0.2; 0.3, 1.0; -0.5, 0.4];
        let block = CoefBlock {
            features,
            curvature: DMatrix::identity(2, 2) * 0.1,
        };
        let labels = [1.0, -1.0, 1.0];
        let mut rows = Vec::new();
        for (i, y) in labels.iter().enumerate() {
            rows.push(SlackRow { sample: i, coefs: vec![-y], rhs: -1.0 });
            rows.push(SlackRow { sample: i, coefs: vec![0.0], rhs: 0.0 });
        }
        let qp = SlackQp::new(vec![block], DVector::from_element(3, 1.0 / 3.0), rows).unwrap();
        let structured = solve_slack_qp(&qp, QpSettings::default());
        let dense = solve_qp(&qp.to_dense().unwrap(), 1e-8, 100);
        assert!(structured.is_converged() && dense.is_converged());
        assert!((&structured.z - &dense.z).amax() < 1e-6);
        assert!((structured.objective - dense.objective).abs() < 1e-8);
    }

    #[test]
    fn slack_form_requires_a_row_per_slack() {
        let block = CoefBlock {
            features: DMatrix::identity(2, 2),
            curvature: DMatrix::identity(2, 2),
        };
        let rows = vec![SlackRow { sample: 0, coefs: vec![1.0], rhs: 0.0 }];
        assert!(SlackQp::new(vec![block], DVector::from_element(2, 0.5), rows).is_err());
    }
}
