//! Kernel SVM solved through its dual by exact coordinate ascent.
//!
//! Primal: minimize λ/2‖w‖² + (1/N) Σ max(0, 1 − y_i ⟨φ_i, w⟩).
//! Dual:   maximize Σ a_i − 1/(2λ) Σ_ij a_i a_j y_i y_j ⟨φ_i, φ_j⟩,  0 ≤ a_i ≤ 1/N,
//! with w = (1/λ) Σ a_i y_i φ_i.

use nalgebra::{DMatrix, DVector};

/// `design` has one row `φ_i` per sample. Returns `w`.
pub fn svm_by_dual(design: &DMatrix<f64>, y: &[f64], lambda: f64, sweeps: usize) -> DVector<f64> {
    let n = y.len();
    let gram = design * design.transpose();
    let upper = 1.0 / n as f64;
    let mut a = vec![0.0; n];
    // g_i = y_i Σ_j a_j y_j G_ij / λ, the current margin of sample i.
    let mut margin = vec![0.0; n];
    for _ in 0..sweeps {
        for i in 0..n {
            let q = gram[(i, i)] / lambda;
            if q <= 0.0 {
                continue;
            }
            let new = (a[i] + (1.0 - margin[i]) / q).clamp(0.0, upper);
            let delta = new - a[i];
            if delta != 0.0 {
                a[i] = new;
                for j in 0..n {
                    margin[j] += delta * y[i] * y[j] * gram[(i, j)] / lambda;
                }
            }
        }
    }
    let mut w = DVector::zeros(design.ncols());
    for i in 0..n {
        w.axpy(a[i] * y[i] / lambda, &design.row(i).transpose(), 1.0);
    }
    w
}

pub fn svm_primal(design: &DMatrix<f64>, y: &[f64], lambda: f64, w: &DVector<f64>) -> f64 {
    let h = design * w;
    let hinge: f64 = h.iter().zip(y).map(|(h, y)| (1.0 - y * h).max(0.0)).sum();
    0.5 * lambda * w.norm_squared() + hinge / y.len() as f64
}
