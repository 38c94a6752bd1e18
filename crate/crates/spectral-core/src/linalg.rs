//! Dense linear algebra: SVD, projectors, weighted Gram matrices, norms, and
//! the CSV matrix format.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, dense and double precision
//! throughout; the regimes this crate targets (a few thousand rows at most)
//! need neither sparsity nor extended precision. All functions here are pure
//! and safe to call concurrently.
//!
//! Singular vectors are only identifiable up to sign (and not at all inside
//! a tied block of singular values). Every quantity consumed downstream —
//! projectors, weighted Grams — is sign-invariant, so [`svd`] canonicalizes
//! each right-singular vector to make its largest-magnitude entry nonnegative
//! (ties resolved to the lowest index), purely so serialized factors are
//! reproducible. With repeated singular values only projector-level outputs
//! are contractual; the individual vectors are whatever the factorization
//! returned.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Frobenius tolerance for `‖VᵀV − I‖` on matrices claimed orthogonal.
pub const ORTHO_TOL: f64 = 1e-8;
/// Relative Frobenius tolerance for SVD reconstruction, dimensions ≤ 512.
pub const RECON_TOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 75_000;

/// SVD triple `A = left · diag(σ) · rightᵀ` with `left` m×d (orthonormal
/// columns), `σ` nonincreasing and nonnegative, `right` d×d orthogonal whose
/// columns are the right-singular vectors.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    /// `left · diag(σ) · rightᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = self.cols();
        let mut scaled = self.left.clone();
        for j in 0..d {
            scaled.column_mut(j).scale_mut(self.singular_values[j]);
        }
        scaled * self.right.transpose()
    }
}

fn ensure_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "matrix {}x{} contains non-finite entries",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// `‖VᵀV − I‖_F`, the departure of `v` from orthogonality.
pub fn orthogonality_defect(v: &DMatrix<f64>) -> f64 {
    let d = v.ncols();
    let gram = v.transpose() * v;
    (gram - DMatrix::<f64>::identity(d, d)).norm()
}

fn ensure_orthogonal(v: &DMatrix<f64>) -> Result<()> {
    if v.nrows() != v.ncols() {
        return Err(Error::Input(format!(
            "expected a square orthogonal matrix, got {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    ensure_finite(v)?;
    let defect = orthogonality_defect(v);
    if defect > ORTHO_TOL {
        return Err(Error::Input(format!(
            "matrix is not orthogonal within {ORTHO_TOL:e} (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Flip column signs of `right` (and the matching columns of `left`) so that
/// each right-singular vector's largest-magnitude entry is nonnegative.
fn canonicalize_signs(left: &mut DMatrix<f64>, right: &mut DMatrix<f64>) {
    for j in 0..right.ncols() {
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..right.nrows() {
            let a = right[(i, j)].abs();
            if a > best {
                best = a;
                pivot = i;
            }
        }
        if right[(pivot, j)] < 0.0 {
            right.column_mut(j).neg_mut();
            left.column_mut(j).neg_mut();
        }
    }
}

/// Full SVD of a tall matrix (rows ≥ cols), singular values sorted
/// nonincreasing, signs canonicalized as described in the module docs.
pub fn svd(a: &DMatrix<f64>) -> Result<SvdFactors> {
    ensure_finite(a)?;
    let (m, d) = (a.nrows(), a.ncols());
    if m < d {
        return Err(Error::Input(format!(
            "expected rows >= cols, got {m}x{d}"
        )));
    }
    if d == 0 {
        return Err(Error::Input("matrix has zero columns".into()));
    }
    let f = a
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Numeric(format!("SVD did not converge for a {m}x{d} matrix"))
        })?;
    let mut left = f.u.ok_or_else(|| Error::Numeric("SVD returned no left factor".into()))?;
    let mut right = f
        .v_t
        .ok_or_else(|| Error::Numeric("SVD returned no right factor".into()))?
        .transpose();
    canonicalize_signs(&mut left, &mut right);
    Ok(SvdFactors {
        left,
        singular_values: f.singular_values,
        right,
    })
}

/// Orthogonal projector onto the span of the first `k` columns of `v`:
/// `V_k V_kᵀ`, symmetrized exactly.
pub fn projector(v: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    ensure_orthogonal(v)?;
    let d = v.ncols();
    if k < 1 || k > d {
        return Err(Error::Input(format!(
            "projector rank k={k} out of range [1, {d}]"
        )));
    }
    let vk = v.columns(0, k);
    let p = vk * vk.transpose();
    Ok(symmetrize(p))
}

/// `V · diag(γ²) · Vᵀ`, the Gram matrix of `v`'s columns weighted by the
/// squared spectral weights. Coincides with `projector(v, k)` when the
/// weights are k ones followed by zeros.
pub fn weighted_gram(v: &DMatrix<f64>, w: &SpectralWeights) -> Result<DMatrix<f64>> {
    ensure_orthogonal(v)?;
    let d = v.ncols();
    if w.len() != d {
        return Err(Error::Input(format!(
            "weight vector has length {} but the frame is {d}x{d}",
            w.len()
        )));
    }
    let mut scaled = v.clone();
    for j in 0..d {
        let g = w.gamma()[j];
        scaled.column_mut(j).scale_mut(g * g);
    }
    let x = scaled * v.transpose();
    Ok(symmetrize(x))
}

/// `(X + Xᵀ)/2`, with exactly equal mirror entries.
pub fn symmetrize(x: DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x;
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `‖X − Y‖_F`. Zero exactly when the two matrices are bitwise equal.
pub fn frobenius_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::Input(format!(
            "shape mismatch: {}x{} vs {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok((x - y).norm())
}

/// Largest singular value.
pub fn spectral_norm(x: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(x)?;
    let vals = x
        .clone()
        .try_svd_unordered(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Numeric(format!(
                "SVD did not converge for a {}x{} matrix",
                x.nrows(),
                x.ncols()
            ))
        })?
        .singular_values;
    Ok(vals.iter().fold(0.0f64, |a, &b| a.max(b)))
}

/// Nonincreasing, nonnegative weight vector `γ` with cutoff `k`: `γ_i = 0`
/// for every index past the cutoff (1-based `i > k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    gamma: Vec<f64>,
    k: usize,
}

impl SpectralWeights {
    pub fn new(gamma: Vec<f64>, k: usize) -> Result<Self> {
        let d = gamma.len();
        if d == 0 {
            return Err(Error::Input("weight vector is empty".into()));
        }
        if k < 1 || k > d {
            return Err(Error::Input(format!("cutoff k={k} out of range [1, {d}]")));
        }
        for (i, g) in gamma.iter().enumerate() {
            if !g.is_finite() || *g < 0.0 {
                return Err(Error::Input(format!(
                    "weight gamma[{i}]={g} is not a finite nonnegative number"
                )));
            }
            if i > 0 && gamma[i - 1] < *g {
                return Err(Error::Input(format!(
                    "weights must be nonincreasing (gamma[{}]={} < gamma[{i}]={g})",
                    i - 1,
                    gamma[i - 1]
                )));
            }
            if i >= k && *g != 0.0 {
                return Err(Error::Input(format!(
                    "gamma[{i}]={g} must be zero past the cutoff k={k}"
                )));
            }
        }
        Ok(SpectralWeights { gamma, k })
    }

    /// `k` ones followed by zeros: the subspace-recovery weights.
    pub fn subspace(d: usize, k: usize) -> Result<Self> {
        let mut gamma = vec![0.0; d];
        for g in gamma.iter_mut().take(k.min(d)) {
            *g = 1.0;
        }
        SpectralWeights::new(gamma, k)
    }

    /// `γ_i = σ_i` for `i ≤ k`, zero after: the rank-k covariance weights.
    pub fn from_singular_values(sigma: &[f64], k: usize) -> Result<Self> {
        if k > sigma.len() {
            return Err(Error::Input(format!(
                "cutoff k={k} exceeds spectrum length {}",
                sigma.len()
            )));
        }
        let mut gamma = vec![0.0; sigma.len()];
        gamma[..k].copy_from_slice(&sigma[..k]);
        SpectralWeights::new(gamma, k)
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn cutoff(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

pub mod io {
    //! Matrix CSV format: one matrix row per line, comma-separated real
    //! numbers, no header. The reader rejects ragged rows and non-finite
    //! entries; the writer emits 17 significant digits so values round-trip
    //! exactly.

    use super::*;
    use std::fs;
    use std::io::Write;
    use std::path::Path;

    pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        parse_matrix_csv(&text).map_err(|msg| Error::Input(format!("{}: {msg}", path.display())))
    }

    pub(crate) fn parse_matrix_csv(text: &str) -> std::result::Result<DMatrix<f64>, String> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| format!("line {}: cannot parse '{}'", lineno + 1, field.trim()))?;
                if !v.is_finite() {
                    return Err(format!("line {}: non-finite entry {v}", lineno + 1));
                }
                row.push(v);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(format!(
                        "ragged row at line {}: {} fields, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    ));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err("no data rows".into());
        }
        let (m, d) = (rows.len(), rows[0].len());
        Ok(DMatrix::from_fn(m, d, |i, j| rows[i][j]))
    }

    pub fn write_matrix_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
        let mut buf = String::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if j > 0 {
                    buf.push(',');
                }
                buf.push_str(&format!("{:.16e}", a[(i, j)]));
            }
            buf.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        f.write_all(buf.as_bytes()).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalSampler;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut s = NormalSampler::from_seed(seed);
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = s.sample();
            }
        }
        m
    }

    fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
        let g = random_matrix(d, d, seed);
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        q
    }

    #[test]
    fn svd_identity() {
        let f = svd(&DMatrix::identity(3, 3)).unwrap();
        for i in 0..3 {
            assert!((f.singular_values[i] - 1.0).abs() < 1e-12);
        }
        let prod = &f.left * f.right.transpose();
        assert!((prod - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn svd_already_diagonal() {
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = svd(&a).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_rank_deficient_hand_case() {
        // AᵀA = [[2,2],[2,2]] has eigenvalues 4 and 0, so σ = (2, 0).
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let f = svd(&a).unwrap();
        assert!((f.singular_values[0] - 2.0).abs() < 1e-12);
        assert!(f.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn svd_rejects_bad_input() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::Input(_))));
        let wide = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(svd(&wide), Err(Error::Input(_))));
    }

    #[test]
    fn svd_sign_canonicalization_is_stable() {
        let a = random_matrix(8, 5, 3);
        let f = svd(&a).unwrap();
        for j in 0..5 {
            let col = f.right.column(j);
            let mut pivot = 0;
            let mut best = -1.0;
            for i in 0..5 {
                if col[i].abs() > best {
                    best = col[i].abs();
                    pivot = i;
                }
            }
            assert!(col[pivot] >= 0.0);
        }
    }

    #[test]
    fn svd_reconstruction_tolerance() {
        for seed in 0..20 {
            let a = random_matrix(24, 13, 100 + seed);
            let f = svd(&a).unwrap();
            let err = (f.reconstruct() - &a).norm();
            assert!(err <= RECON_TOL * a.norm(), "seed {seed}: err={err:e}");
        }
        // One larger case near the documented size limit.
        let a = random_matrix(512, 256, 7);
        let f = svd(&a).unwrap();
        let err = (f.reconstruct() - &a).norm();
        assert!(err <= RECON_TOL * a.norm(), "512x256: err={err:e}");
        assert!(orthogonality_defect(&f.right) <= ORTHO_TOL);
        let gram = f.left.transpose() * &f.left;
        assert!((gram - DMatrix::<f64>::identity(256, 256)).norm() <= ORTHO_TOL);
    }

    #[test]
    fn weyl_inequality_over_random_pairs() {
        let mut worst = f64::NEG_INFINITY;
        for seed in 0..1000u64 {
            let a = random_matrix(8, 5, 2 * seed);
            let e = random_matrix(8, 5, 2 * seed + 1);
            let sa = svd(&a).unwrap().singular_values;
            let sae = svd(&(&a + &e)).unwrap().singular_values;
            let e_norm = spectral_norm(&e).unwrap();
            for i in 0..5 {
                worst = worst.max((sa[i] - sae[i]).abs() - e_norm);
            }
        }
        assert!(worst <= 1e-9, "worst Weyl excess {worst:e}");
    }

    #[test]
    fn projector_identity_cases() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let p1 = projector(&i2, 1).unwrap();
        assert_eq!(p1, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let p2 = projector(&i2, 2).unwrap();
        assert_eq!(p2, i2);
    }

    #[test]
    fn projector_rotation_case() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let p = projector(&rot, 1).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((p - want).norm() < 1e-15);
    }

    #[test]
    fn projector_rejects_bad_rank() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(projector(&i2, 0), Err(Error::Input(_))));
        assert!(matches!(projector(&i2, 3), Err(Error::Input(_))));
    }

    #[test]
    fn projector_is_symmetric_idempotent_trace_k() {
        for seed in 0..50u64 {
            let v = random_orthogonal(6, 900 + seed);
            let k = 1 + (seed as usize) % 6;
            let p = projector(&v, k).unwrap();
            assert_eq!(p, p.transpose());
            assert!((&p * &p - &p).norm() <= 10.0 * ORTHO_TOL);
            assert!((p.trace() - k as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn weighted_gram_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let w = SpectralWeights::new(vec![2.0, 0.0], 1).unwrap();
        let g = weighted_gram(&i2, &w).unwrap();
        assert!((g - DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0])).norm() < 1e-15);

        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let w = SpectralWeights::new(vec![3.0, 1.0], 2).unwrap();
        let g = weighted_gram(&rot, &w).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]);
        assert!((g - want).norm() < 1e-12);
    }

    #[test]
    fn weighted_gram_reduces_to_projector_on_unit_weights() {
        for seed in 0..20u64 {
            let v = random_orthogonal(5, 40 + seed);
            let w = SpectralWeights::subspace(5, 2).unwrap();
            let g = weighted_gram(&v, &w).unwrap();
            let p = projector(&v, 2).unwrap();
            assert!((g - p).norm() < 1e-13);
        }
    }

    #[test]
    fn weighted_gram_dimension_mismatch() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let w = SpectralWeights::new(vec![1.0, 1.0, 0.0], 2).unwrap();
        assert!(matches!(weighted_gram(&i2, &w), Err(Error::Input(_))));
    }

    #[test]
    fn weighted_gram_sign_flip_invariance() {
        for seed in 0..20u64 {
            let v = random_orthogonal(6, 700 + seed);
            let w = SpectralWeights::from_singular_values(&[5.0, 3.0, 2.0, 1.0, 0.5, 0.25], 6).unwrap();
            let base = weighted_gram(&v, &w).unwrap();
            let mut flipped = v.clone();
            for j in 0..6 {
                if (seed + j as u64).is_multiple_of(2) {
                    flipped.column_mut(j).neg_mut();
                }
            }
            let alt = weighted_gram(&flipped, &w).unwrap();
            assert!((base - alt).norm() <= 1e-12);
        }
    }

    #[test]
    fn frobenius_distance_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(frobenius_distance(&x, &x).unwrap(), 0.0);
        let y = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((frobenius_distance(&x, &y).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        let z = DMatrix::zeros(2, 2);
        let w = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        assert!((frobenius_distance(&z, &w).unwrap() - 5.0).abs() < 1e-15);
        let bad = DMatrix::<f64>::zeros(3, 2);
        assert!(matches!(frobenius_distance(&z, &bad), Err(Error::Input(_))));
    }

    #[test]
    fn projector_distance_identity() {
        // ‖V_kV_kᵀ − W_kW_kᵀ‖_F² = 2k − 2‖V_kᵀW_k‖_F²
        for seed in 0..30u64 {
            let d = 7;
            let k = 1 + (seed as usize) % 6;
            let v = random_orthogonal(d, 1000 + 2 * seed);
            let w = random_orthogonal(d, 1001 + 2 * seed);
            let pv = projector(&v, k).unwrap();
            let pw = projector(&w, k).unwrap();
            let dist_sq = frobenius_distance(&pv, &pw).unwrap().powi(2);
            let cross = v.columns(0, k).transpose() * w.columns(0, k);
            let want = 2.0 * k as f64 - 2.0 * cross.norm_squared();
            assert!((dist_sq - want).abs() <= 1e-9, "seed {seed}: {dist_sq} vs {want}");
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&DMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-12);
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!((spectral_norm(&n).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_below_frobenius() {
        for seed in 0..20u64 {
            let a = random_matrix(6, 4, 300 + seed);
            assert!(spectral_norm(&a).unwrap() <= a.norm() + 1e-12);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(SpectralWeights::new(vec![1.0, 2.0], 2).is_err()); // increasing
        assert!(SpectralWeights::new(vec![1.0, -0.5], 2).is_err()); // negative
        assert!(SpectralWeights::new(vec![1.0, 0.5], 1).is_err()); // nonzero past cutoff
        assert!(SpectralWeights::new(vec![], 1).is_err());
        let w = SpectralWeights::subspace(4, 2).unwrap();
        assert_eq!(w.gamma(), &[1.0, 1.0, 0.0, 0.0]);
        let w = SpectralWeights::from_singular_values(&[9.0, 4.0, 1.0], 2).unwrap();
        assert_eq!(w.gamma(), &[9.0, 4.0, 0.0]);
    }

    #[test]
    fn csv_round_trip_and_ragged_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let a = random_matrix(5, 3, 11);
        io::write_matrix_csv(&path, &a).unwrap();
        let b = io::read_matrix_csv(&path).unwrap();
        assert_eq!(a, b, "17 significant digits must round-trip exactly");

        assert!(io::parse_matrix_csv("1.0,2.0\n3.0\n").is_err());
        assert!(io::parse_matrix_csv("1.0,nan\n").is_err());
        assert!(io::parse_matrix_csv("").is_err());
    }
}
