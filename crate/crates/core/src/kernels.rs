//! Gaussian basis functions and the graph Laplacian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gaussian basis `φ_j(x) = exp(−‖x − x_j‖² / 2σ²)` centred on training inputs.
///
/// Centers are the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    centers: DMatrix<f64>,
    sigma: f64,
}

impl BasisSet {
    pub fn new(centers: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel width σ = {sigma} must be positive")));
        }
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::invalid("a basis needs at least one center of positive dimension"));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("basis centers must be finite"));
        }
        Ok(BasisSet { centers, sigma })
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.centers.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    /// The vector `(φ_1(x), …, φ_N(x))`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dims(format!("point has dimension {}, basis expects {}", x.len(), self.dim())));
        }
        let scale = -0.5 / (self.sigma * self.sigma);
        Ok((0..self.len())
            .map(|j| (scale * sq_dist(x, self.centers.row(j).iter())).exp())
            .collect())
    }
}

fn sq_dist<'a>(x: &[f64], center: impl Iterator<Item = &'a f64>) -> f64 {
    x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn row_sq_dists(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        (0..a.ncols()).map(|k| (a[(i, k)] - b[(j, k)]).powi(2)).sum()
    })
}

/// Matrix with entry `(i, j) = φ_j(points_i)`; points are rows.
pub fn design_matrix(basis: &BasisSet, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if points.ncols() != basis.dim() {
        return Err(Error::dims(format!(
            "points have dimension {}, basis expects {}",
            points.ncols(),
            basis.dim()
        )));
    }
    let scale = -0.5 / (basis.sigma * basis.sigma);
    Ok(row_sq_dists(points, &basis.centers).map(|d2| (scale * d2).exp()))
}

/// `L = D − W` with `W_ij = exp(−‖x_i − x_j‖² / 2σ′²)` off the diagonal and `W_ii = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    matrix: DMatrix<f64>,
    sigma: f64,
}

impl GraphLaplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `fᵀ L f`.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(f);
        v.dot(&(&self.matrix * &v))
    }
}

pub fn graph_laplacian(points: &DMatrix<f64>, sigma: f64) -> Result<GraphLaplacian> {
    if points.nrows() < 2 {
        return Err(Error::invalid("a graph Laplacian needs at least two points"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("graph width σ′ = {sigma} must be positive")));
    }
    let scale = -0.5 / (sigma * sigma);
    let mut w = row_sq_dists(points, points).map(|d2| (scale * d2).exp());
    w.fill_diagonal(0.0);
    let mut matrix = -w;
    for i in 0..matrix.nrows() {
        let degree: f64 = -matrix.row(i).sum();
        matrix[(i, i)] = degree;
    }
    Ok(GraphLaplacian { matrix, sigma })
}
