use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// A random strictly convex QP that is feasible by construction.
pub struct RandomQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> RandomQp {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let anchor = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &g * anchor + DVector::from_fn(m, |_, _| rng.gen_range(0.0..0.5));
    RandomQp { p, q, g, h }
}

/// Best objective over all active sets: each subset of rows is treated as
/// binding, its equality-constrained KKT system solved, and the point kept if
/// it is primal feasible with nonnegative multipliers.
pub fn enumerate_active_sets(qp: &RandomQp) -> (DVector<f64>, f64) {
    let n = qp.q.len();
    let m = qp.h.len();
    assert!(m <= 20, "enumeration is exponential in the row count");
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
        for i in 0..n {
            rhs[i] = -qp.q[i];
        }
        for (a, &row) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + a, j)] = qp.g[(row, j)];
                kkt[(j, n + a)] = qp.g[(row, j)];
            }
            rhs[n + a] = qp.h[row];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let z = sol.rows(0, n).into_owned();
        let multipliers = sol.rows(n, k);
        if multipliers.iter().any(|&l| l < -1e-9) {
            continue;
        }
        let slack = &qp.h - &qp.g * &z;
        if slack.iter().any(|&s| s < -1e-9) {
            continue;
        }
        let obj = 0.5 * z.dot(&(&qp.p * &z)) + qp.q.dot(&z);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((z, obj));
        }
    }
    best.expect("feasible strictly convex QP has a KKT point")
}
