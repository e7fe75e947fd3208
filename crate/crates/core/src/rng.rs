//! Seeded random instances.
//!
//! All randomness goes through [`ChaCha8Rng`] so that a seed reproduces the
//! same matrices on every platform. Matrices are filled in row-major order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{thin_qr, DenseMatrix};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal entries.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    a
}

/// Column-orthonormal `rows x cols` matrix (QR of a Gaussian matrix).
pub fn random_orthonormal(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    assert!(cols <= rows, "random_orthonormal needs cols <= rows");
    let g = gaussian_matrix(rng, rows, cols);
    thin_qr(&g).expect("finite Gaussian matrix").0
}

/// `U diag(sigma) V^T` with Haar-like random `U`, `V`. `sigma` may be shorter
/// than `min(rows, cols)`; the remaining singular values are zero.
pub fn with_singular_values(rng: &mut Rng, rows: usize, cols: usize, sigma: &[f64]) -> DenseMatrix {
    let p = rows.min(cols);
    assert!(sigma.len() <= p, "too many singular values for the shape");
    let u = random_orthonormal(rng, rows, p);
    let v = random_orthonormal(rng, cols, p);
    let mut us = u;
    for k in 0..p {
        let s = sigma.get(k).copied().unwrap_or(0.0);
        us.column_mut(k).scale_mut(s);
    }
    us * v.transpose()
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.random_range(lo..hi)
}
