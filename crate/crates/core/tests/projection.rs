use cadsvm::projection::{pca, pca_2d};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Cyclic Jacobi eigensolver for small symmetric matrices.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

fn covariance_by_loops(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let means: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    DMatrix::from_fn(d, d, |a, b| (0..n).map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b])).sum::<f64>() / (n - 1) as f64)
}

#[test]
fn matches_jacobi_oracle_on_13_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Anisotropic cloud so the leading eigenvalues are well separated.
    let x = DMatrix::from_fn(120, 13, |_, j| rng.gen_range(-1.0..1.0) * (13 - j) as f64);
    let (values, vectors) = jacobi_eigen(covariance_by_loops(&x));
    let mut order: Vec<usize> = (0..13).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let p = pca_2d(&x).unwrap();
    for k in 0..2 {
        assert!((p.variances[k] - values[order[k]]).abs() < 1e-8 * values[order[0]]);
        let oracle = vectors.column(order[k]);
        let agreement = p.axes.column(k).dot(&oracle).abs();
        assert!((agreement - 1.0).abs() < 1e-8, "axis {k}: {agreement}");
    }
}

#[test]
fn two_dimensional_input_is_rotated() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = DMatrix::from_fn(50, 2, |_, j| rng.gen_range(0.0..1.0) * (1.0 + j as f64));
    let p = pca_2d(&x).unwrap();
    for i in 0..50 {
        for j in 0..50 {
            let before = (x.row(i) - x.row(j)).norm();
            let after = (p.coords.row(i) - p.coords.row(j)).norm();
            assert!((before - after).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn component_variances_do_not_increase(seed in any::<u64>(), n in 3usize..40, d in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
        let p = pca(&x, 2).unwrap();
        prop_assert!(p.variances[0] >= p.variances[1]);
        let var = |k: usize| p.coords.column(k).norm_squared() / (n - 1) as f64;
        prop_assert!(var(0) + 1e-9 >= var(1));
        prop_assert!((var(0) - p.variances[0]).abs() < 1e-9 * (1.0 + p.variances[0]));
        prop_assert!(p.coords.column(0).sum().abs() < 1e-9 * n as f64);
    }
}
