//! Reduced coordinates for kernel expansions.
//!
//! Training solves for `w` with `h = Φw` on the training points, where `Φ` is
//! the symmetric Gram matrix of the basis. Writing `Φ = QΛQᵀ` and `w = Qv`
//! gives `h = (QΛ)v` and `‖w‖ = ‖v‖`, so the problem can be posed in the
//! eigen-coordinates `v`. A direction with `Λ_j² < ε·λ` can move the
//! optimal `h` by at most about `ε·max|coef|`, so such directions are
//! dropped. On the smooth kernels used here that removes most of them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

/// Relative threshold `ε` on `Λ_j² / λ` below which a direction is dropped.
pub(crate) const DROP_THRESHOLD: f64 = 1e-10;

#[derive(Debug)]
pub(crate) struct Spectrum {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl Spectrum {
    pub(crate) fn new(gram: &DMatrix<f64>) -> Spectrum {
        let eig = gram.clone().symmetric_eigen();
        Spectrum {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        }
    }

    /// Indices of the directions kept for regularization `reg`.
    pub(crate) fn kept(&self, reg: f64) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&j| self.values[j] * self.values[j] >= DROP_THRESHOLD * reg)
            .collect()
    }

    /// Reduced features `(QΛ)[samples, kept]`.
    pub(crate) fn features(&self, samples: &[usize], kept: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(samples.len(), kept.len(), |i, j| {
            self.vectors[(samples[i], kept[j])] * self.values[kept[j]]
        })
    }

    /// `QΛ` restricted to the kept columns, for all basis points.
    pub(crate) fn scaled_vectors(&self, kept: &[usize]) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.vectors.nrows()).collect();
        self.features(&all, kept)
    }

    /// Maps reduced coordinates back: `w = Q[:, kept]·v`.
    pub(crate) fn expand(&self, kept: &[usize], v: &DVector<f64>) -> DVector<f64> {
        let mut w = DVector::zeros(self.vectors.nrows());
        for (j, &col) in kept.iter().enumerate() {
            w.axpy(v[j], &self.vectors.column(col), 1.0);
        }
        w
    }
}

/// Eigendecompositions of Gram matrices keyed by kernel width and point set.
///
/// Cross-validation trains many models on the same fold with different
/// regularization, and all of them share one decomposition.
#[derive(Debug, Default, Clone)]
pub struct KernelCache {
    #[allow(clippy::type_complexity)]
    entries: Arc<Mutex<HashMap<(u64, u64), Vec<(DMatrix<f64>, Arc<Spectrum>)>>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&self) {
        self.entries.lock().expect("kernel cache poisoned").clear();
    }

    pub(crate) fn spectrum(&self, centers: &DMatrix<f64>, sigma: f64, gram: impl FnOnce() -> DMatrix<f64>) -> Arc<Spectrum> {
        let key = (sigma.to_bits(), fingerprint(centers));
        if let Some(bucket) = self.entries.lock().expect("kernel cache poisoned").get(&key) {
            if let Some((_, s)) = bucket.iter().find(|(c, _)| c == centers) {
                return Arc::clone(s);
            }
        }
        let s = Arc::new(Spectrum::new(&gram()));
        self.entries
            .lock()
            .expect("kernel cache poisoned")
            .entry(key)
            .or_default()
            .push((centers.clone(), Arc::clone(&s)));
        s
    }
}

fn fingerprint(m: &DMatrix<f64>) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64 ^ (m.nrows() as u64) ^ ((m.ncols() as u64) << 32);
    for v in m.iter() {
        h = (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01B3);
        h ^= h >> 29;
    }
    h
}
