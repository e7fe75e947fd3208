/// Numerical thresholds shared by the whole crate.
///
/// Every operation has a variant that uses [`Tolerances::default`]; the
/// `*_with` variants accept an explicit set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Numerical rank threshold: `sigma_r > rank * sigma_1`.
    pub rank: f64,
    /// Minimum relative spectral gap `(sigma_r - sigma_{r+1}) / sigma_1`.
    pub gap: f64,
    /// Allowed `|U^T U - I|` (and `|U^T X_U|`) on construction.
    pub orthonormality: f64,
    /// Minimum relative separation between the two spectra of a Sylvester equation.
    pub sylvester_separation: f64,
    /// Singular triplets of a normal component below `triplet_cutoff * sigma_1` are skipped.
    pub triplet_cutoff: f64,
    /// Sweep limit of the Jacobi SVD kernel.
    pub max_sweeps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-12,
            gap: 1e-10,
            orthonormality: 1e-10,
            sylvester_separation: 1e-12,
            triplet_cutoff: 1e-14,
            max_sweeps: 60,
        }
    }
}
