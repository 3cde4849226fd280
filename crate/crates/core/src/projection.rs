//! Principal-component projection for plotting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Samples projected onto the leading principal axes.
#[derive(Debug, Clone)]
pub struct Projection {
    /// One row per sample, one column per component.
    pub coords: DMatrix<f64>,
    /// Principal axes as columns, unit length.
    pub axes: DMatrix<f64>,
    /// Covariance eigenvalues of the kept axes, largest first.
    pub variances: Vec<f64>,
    pub mean: DVector<f64>,
}

/// Projects mean-centered rows onto the top `k` eigenvectors of their
/// sample covariance (denominator `n − 1`). Each axis is signed so that its
/// largest-magnitude entry is positive.
pub fn pca(points: &DMatrix<f64>, k: usize) -> Result<Projection> {
    let (n, dim) = points.shape();
    if dim < k {
        return Err(Error::dims(format!("cannot take {k} components of {dim}-dimensional data")));
    }
    if n < 2 {
        return Err(Error::data("PCA needs at least two samples"));
    }
    let mean = points.row_mean().transpose();
    let mut centered = points.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = DMatrix::zeros(dim, k);
    let mut variances = Vec::with_capacity(k);
    for (j, &col) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(col).into_owned();
        let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v = -v;
        }
        axes.set_column(j, &v);
        variances.push(eig.eigenvalues[col].max(0.0));
    }
    let coords = &centered * &axes;
    Ok(Projection {
        coords,
        axes,
        variances,
        mean,
    })
}

/// [`pca`] with two components.
pub fn pca_2d(points: &DMatrix<f64>) -> Result<Projection> {
    pca(points, 2)
}
