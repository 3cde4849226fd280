use nalgebra::DVector;

use super::{QpSettings, QpSolution, QpStatus};

/// Diagonal shifts tried, in order, when the Newton matrix is not numerically
/// positive definite.
const REGULARIZATION: [f64; 4] = [0.0, 1e-10, 1e-9, 1e-8];

/// Fraction of the distance to the boundary taken by each step.
const STEP_FRACTION: f64 = 0.99;

/// Linear-algebra backend of the interior-point loop.
///
/// `factor` prepares solves with the reduced Newton matrix
/// `P + Gᵀ diag(weights) G + shift·I`.
pub(crate) trait KktSystem {
    type Factor;

    fn n_vars(&self) -> usize;
    fn n_cons(&self) -> usize;
    fn linear_term(&self) -> &DVector<f64>;
    fn bounds(&self) -> &DVector<f64>;
    fn mul_quad(&self, z: &DVector<f64>) -> DVector<f64>;
    fn mul_cons(&self, z: &DVector<f64>) -> DVector<f64>;
    fn mul_cons_t(&self, y: &DVector<f64>) -> DVector<f64>;
    fn factor(&self, weights: &DVector<f64>, shift: f64) -> Option<Self::Factor>;
    fn solve(&self, factor: &Self::Factor, rhs: &DVector<f64>) -> DVector<f64>;
}

fn factor_with_shift<K: KktSystem>(sys: &K, weights: &DVector<f64>) -> Option<K::Factor> {
    REGULARIZATION
        .iter()
        .find_map(|&shift| sys.factor(weights, shift))
}

fn objective<K: KktSystem>(sys: &K, z: &DVector<f64>) -> f64 {
    0.5 * z.dot(&sys.mul_quad(z)) + sys.linear_term().dot(z)
}

/// KKT residual of a primal-dual pair, measured directly on `(z, duals)`.
fn kkt_residual<K: KktSystem>(sys: &K, z: &DVector<f64>, duals: &DVector<f64>) -> f64 {
    let stationarity = (sys.mul_quad(z) + sys.linear_term() + sys.mul_cons_t(duals)).amax();
    let gap = sys.mul_cons(z) - sys.bounds();
    let infeasibility = gap.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let complementarity = gap
        .iter()
        .zip(duals.iter())
        .fold(0.0f64, |acc, (&g, &l)| acc.max((g * l).abs()));
    stationarity.max(infeasibility).max(complementarity)
}

/// Largest step in `[0, 1]` keeping `s + a·ds` and `l + a·dl` nonnegative.
fn max_step(s: &DVector<f64>, ds: &DVector<f64>, l: &DVector<f64>, dl: &DVector<f64>) -> f64 {
    let mut step = 1.0f64;
    for (v, dv) in s.iter().zip(ds.iter()).chain(l.iter().zip(dl.iter())) {
        if *dv < 0.0 {
            step = step.min(-v / dv);
        }
    }
    step
}

fn shift_positive(v: &DVector<f64>) -> DVector<f64> {
    let worst = -v.min();
    if worst < 0.0 {
        v.clone()
    } else {
        v.add_scalar(1.0 + worst)
    }
}

fn finish<K: KktSystem>(
    sys: &K,
    z: DVector<f64>,
    duals: DVector<f64>,
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let kkt = kkt_residual(sys, &z, &duals);
    QpSolution {
        objective: objective(sys, &z),
        kkt_residual: if kkt.is_finite() { kkt } else { f64::INFINITY },
        z,
        duals,
        status,
        iterations,
    }
}

pub(crate) fn interior_point<K: KktSystem>(sys: &K, settings: QpSettings) -> QpSolution {
    let n = sys.n_vars();
    let m = sys.n_cons();
    let q = sys.linear_term();
    let h = sys.bounds();

    if m == 0 {
        let Some(factor) = factor_with_shift(sys, &DVector::zeros(0)) else {
            return finish(sys, DVector::zeros(n), DVector::zeros(0), QpStatus::NumericalFailure, 0);
        };
        let z = sys.solve(&factor, &(-q));
        let status = if kkt_residual(sys, &z, &DVector::zeros(0)) <= settings.tol {
            QpStatus::Converged
        } else {
            QpStatus::NumericalFailure
        };
        return finish(sys, z, DVector::zeros(0), status, 1);
    }

    // Starting point from the least-squares system with unit weights.
    let Some(factor) = factor_with_shift(sys, &DVector::from_element(m, 1.0)) else {
        return finish(
            sys,
            DVector::zeros(n),
            DVector::from_element(m, 1.0),
            QpStatus::NumericalFailure,
            0,
        );
    };
    let mut z = sys.solve(&factor, &(sys.mul_cons_t(h) - q));
    let residual = h - sys.mul_cons(&z);
    let mut s = shift_positive(&residual);
    let mut duals = shift_positive(&(-residual));

    for iteration in 0..settings.max_iter {
        let gz = sys.mul_cons(&z);
        let rp = &gz + &s - h;
        let rd = sys.mul_quad(&z) + q + sys.mul_cons_t(&duals);

        if kkt_residual(sys, &z, &duals) <= settings.tol {
            return finish(sys, z, duals, QpStatus::Converged, iteration);
        }

        let mu = s.dot(&duals) / m as f64;
        let weights = duals.component_div(&s);
        let Some(factor) = factor_with_shift(sys, &weights) else {
            return finish(sys, z, duals, QpStatus::NumericalFailure, iteration);
        };

        // Solves the Newton system for a given complementarity target `rc`.
        let newton = |rc: &DVector<f64>| {
            let scaled = (duals.component_mul(&rp) - rc).component_div(&s);
            let dz = sys.solve(&factor, &(-&rd - sys.mul_cons_t(&scaled)));
            let gdz = sys.mul_cons(&dz);
            let ds = -&rp - &gdz;
            let dl = scaled + weights.component_mul(&gdz);
            (dz, ds, dl)
        };

        let rc_aff = s.component_mul(&duals);
        let (_, ds_aff, dl_aff) = newton(&rc_aff);
        let step_aff = max_step(&s, &ds_aff, &duals, &dl_aff);
        let mu_aff = (&s + &ds_aff * step_aff).dot(&(&duals + &dl_aff * step_aff)) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc = rc_aff + ds_aff.component_mul(&dl_aff) - DVector::from_element(m, sigma * mu);
        let (dz, ds, dl) = newton(&rc);
        let step = (STEP_FRACTION * max_step(&s, &ds, &duals, &dl)).min(1.0);

        z += &dz * step;
        s += &ds * step;
        duals += &dl * step;

        if !(z.iter().all(|v| v.is_finite()) && s.min() > 0.0 && duals.min() > 0.0) {
            return finish(sys, z, duals, QpStatus::NumericalFailure, iteration + 1);
        }
    }

    let status = if kkt_residual(sys, &z, &duals) <= settings.tol {
        QpStatus::Converged
    } else {
        QpStatus::MaxIterations
    };
    finish(sys, z, duals, status, settings.max_iter)
}
