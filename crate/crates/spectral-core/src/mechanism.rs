//! The Gaussian release mechanism: perturb a matrix with `√T·G`, factor the
//! result, and release either the top-k right-singular projector or the
//! rank-k covariance reconstruction, together with the exact Frobenius error
//! against the unperturbed truth.
//!
//! Each call owns a generator derived from its seed, so calls are safe to
//! run concurrently and identical `(A, k, T, seed)` quadruples produce
//! bit-identical results. Released matrices are re-symmetrized as
//! `(X + Xᵀ)/2` after the floating-point factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpectralWeights, SvdFactors};
use crate::rng::NormalSampler;

/// Singular values closer than this are treated as tied: the subspace truth
/// is then not identifiable.
pub const TRUTH_GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-entry noise variance `T` of the additive Gaussian.
    pub noise_variance: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(noise_variance: f64, seed: u64) -> Result<Self> {
        if noise_variance <= 0.0 || !noise_variance.is_finite() {
            return Err(Error::Input(format!(
                "noise variance T={noise_variance} must be positive and finite"
            )));
        }
        Ok(NoiseConfig {
            noise_variance,
            seed,
        })
    }
}

/// Output of a release: the d×d released matrix, the perturbed spectrum, the
/// measured error (absent only when a degenerate truth was released on
/// explicit request), and the spectral norm of the noise draw, kept for
/// Weyl-style diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseResult {
    pub released: DMatrix<f64>,
    pub perturbed_sigma: DVector<f64>,
    pub error_frobenius: Option<f64>,
    pub noise_opnorm: f64,
    /// Set when the unperturbed spectrum is tied at the cut index.
    pub tied_truth: bool,
}

/// Standard-normal matrix with entries drawn in row-major order from the
/// stream seeded by `seed` (see [`crate::rng`] for the pinned generator).
pub fn sample_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Input(format!(
            "gaussian matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let mut s = NormalSampler::from_seed(seed);
    let mut g = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            g[(i, j)] = s.sample();
        }
    }
    Ok(g)
}

/// `A + √T · G` with `G` the seeded standard-normal matrix of `A`'s shape.
pub fn perturb(a: &DMatrix<f64>, cfg: NoiseConfig) -> Result<DMatrix<f64>> {
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::Input("matrix contains non-finite entries".into()));
    }
    let g = sample_gaussian_matrix(a.nrows(), a.ncols(), cfg.seed)?;
    Ok(a + cfg.noise_variance.sqrt() * g)
}

/// The unperturbed subspace target `V_k V_kᵀ` plus the identifiability gap.
#[derive(Debug, Clone)]
pub struct SubspaceTruth {
    pub projector: DMatrix<f64>,
    pub gap: f64,
    pub k: usize,
}

pub fn subspace_truth(factors: &SvdFactors, k: usize) -> Result<SubspaceTruth> {
    let d = factors.cols();
    if k < 1 || k >= d {
        return Err(Error::Input(format!(
            "subspace release needs 1 <= k < d, got k={k}, d={d}"
        )));
    }
    let gap = factors.singular_values[k - 1] - factors.singular_values[k];
    if gap <= TRUTH_GAP_TOL {
        return Err(Error::DegenerateTruth(format!(
            "sigma_{k} - sigma_{} = {gap:e} <= {TRUTH_GAP_TOL:e}; the target projector is not identifiable",
            k + 1
        )));
    }
    Ok(SubspaceTruth {
        projector: linalg::projector(&factors.right, k)?,
        gap,
        k,
    })
}

/// The unperturbed covariance target `V_k diag(σ²) V_kᵀ`. Always defined:
/// with ties at the cut the canonical nonincreasing ordering picks a valid
/// representative, and the tie is noted in the flag.
#[derive(Debug, Clone)]
pub struct CovarianceTruth {
    pub target: DMatrix<f64>,
    pub tied: bool,
    pub k: usize,
}

pub fn covariance_truth(factors: &SvdFactors, k: usize) -> Result<CovarianceTruth> {
    let d = factors.cols();
    if k < 1 || k > d {
        return Err(Error::Input(format!(
            "covariance release needs 1 <= k <= d, got k={k}, d={d}"
        )));
    }
    let sigma: Vec<f64> = factors.singular_values.iter().copied().collect();
    let w = SpectralWeights::from_singular_values(&sigma, k)?;
    let tied = k < d && sigma[k - 1] - sigma[k] <= TRUTH_GAP_TOL;
    Ok(CovarianceTruth {
        target: linalg::weighted_gram(&factors.right, &w)?,
        tied,
        k,
    })
}

fn perturbed_factors(a: &DMatrix<f64>, cfg: NoiseConfig) -> Result<(SvdFactors, f64)> {
    let g = sample_gaussian_matrix(a.nrows(), a.ncols(), cfg.seed)?;
    let noise_opnorm = linalg::spectral_norm(&g)?;
    let perturbed = a + cfg.noise_variance.sqrt() * g;
    Ok((linalg::svd(&perturbed)?, noise_opnorm))
}

/// Release the top-k projector of the perturbed matrix, measuring the error
/// against a precomputed truth. Used by the experiment harness where the
/// truth is shared across many trials.
pub fn release_subspace_with(
    truth: &SubspaceTruth,
    a: &DMatrix<f64>,
    cfg: NoiseConfig,
) -> Result<ReleaseResult> {
    let (factors, noise_opnorm) = perturbed_factors(a, cfg)?;
    let released = linalg::projector(&factors.right, truth.k)?;
    let error = linalg::frobenius_distance(&released, &truth.projector)?;
    Ok(ReleaseResult {
        released,
        perturbed_sigma: factors.singular_values,
        error_frobenius: Some(error),
        noise_opnorm,
        tied_truth: false,
    })
}

/// Self-contained subspace release: factor `A`, check the truth is
/// identifiable, perturb, and release. Degenerate truth (tied spectrum at
/// `k`) is an error; see [`release_subspace_unchecked`] for the opt-in path.
pub fn release_subspace(a: &DMatrix<f64>, k: usize, cfg: NoiseConfig) -> Result<ReleaseResult> {
    let truth = subspace_truth(&linalg::svd(a)?, k)?;
    release_subspace_with(&truth, a, cfg)
}

/// Opt-in variant that releases even when the truth is degenerate: the
/// projector of the perturbed matrix is still well-defined, but no error is
/// reported because the target is not identifiable.
pub fn release_subspace_unchecked(
    a: &DMatrix<f64>,
    k: usize,
    cfg: NoiseConfig,
) -> Result<ReleaseResult> {
    let factors = linalg::svd(a)?;
    match subspace_truth(&factors, k) {
        Ok(truth) => release_subspace_with(&truth, a, cfg),
        Err(Error::DegenerateTruth(_)) => {
            let (pf, noise_opnorm) = perturbed_factors(a, cfg)?;
            Ok(ReleaseResult {
                released: linalg::projector(&pf.right, k)?,
                perturbed_sigma: pf.singular_values,
                error_frobenius: None,
                noise_opnorm,
                tied_truth: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Release the rank-k covariance reconstruction `V̂_k diag(σ̂²) V̂_kᵀ` of the
/// perturbed matrix against a precomputed truth.
pub fn release_covariance_with(
    truth: &CovarianceTruth,
    a: &DMatrix<f64>,
    cfg: NoiseConfig,
) -> Result<ReleaseResult> {
    let (factors, noise_opnorm) = perturbed_factors(a, cfg)?;
    let sigma_hat: Vec<f64> = factors.singular_values.iter().copied().collect();
    let w = SpectralWeights::from_singular_values(&sigma_hat, truth.k)?;
    let released = linalg::weighted_gram(&factors.right, &w)?;
    let error = linalg::frobenius_distance(&released, &truth.target)?;
    Ok(ReleaseResult {
        released,
        perturbed_sigma: factors.singular_values,
        error_frobenius: Some(error),
        noise_opnorm,
        tied_truth: truth.tied,
    })
}

pub fn release_covariance(a: &DMatrix<f64>, k: usize, cfg: NoiseConfig) -> Result<ReleaseResult> {
    let truth = covariance_truth(&linalg::svd(a)?, k)?;
    release_covariance_with(&truth, a, cfg)
}
