//! Closed-form perturbation bounds and the gap assumption, as pure scalar
//! functions of the spectrum `(σ, γ, k, m, d, T)`.
//!
//! Every bound is exposed in a sans-constant form (the asymptotic expression
//! with its constant set to 1) and, where explicit constants are available
//! (the weighted-Gram bound), in an explicit-constant form as well. Empirical
//! comparisons always report ratios against both, since the headline
//! statements are asymptotic and reproducibility needs a pinned convention.
//!
//! Degenerate spectra (zero gaps where a bound divides by a gap) yield a
//! value flagged [`BoundFlag::VacuousGap`] with infinite magnitude rather
//! than an error: experiment sweeps legitimately hit such profiles and must
//! record "bound vacuous" instead of aborting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpectralWeights;

/// Default ratio for the uniform-gap hypothesis check of
/// [`subspace_bound`]: all top-k consecutive gaps must be at least this
/// multiple of the k-th gap.
pub const DEFAULT_UNIFORM_GAP_RATIO: f64 = 1.0;

/// Default regime constant for the baseline covariance comparison: the
/// simplified form only claims validity when
/// `σ_k − σ_{k+1} ≥ c · max(σ_k, √m)`.
pub const DEFAULT_BASELINE_REGIME_RATIO: f64 = 1.0;

/// A spectrum `σ_1 ≥ … ≥ σ_d ≥ 0` together with the ambient shape `m × d`,
/// `d ≤ m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    sigma: Vec<f64>,
    m: usize,
}

impl GapProfile {
    pub fn new(sigma: Vec<f64>, m: usize) -> Result<Self> {
        let d = sigma.len();
        if d == 0 {
            return Err(Error::Input("empty spectrum".into()));
        }
        if m < d {
            return Err(Error::Input(format!(
                "profile needs rows >= cols, got m={m}, d={d}"
            )));
        }
        for (i, s) in sigma.iter().enumerate() {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::Input(format!(
                    "sigma[{i}]={s} is not a finite nonnegative number"
                )));
            }
            if i > 0 && sigma[i - 1] < *s {
                return Err(Error::Input(format!(
                    "spectrum must be nonincreasing (sigma[{}]={} < sigma[{i}]={s})",
                    i - 1,
                    sigma[i - 1]
                )));
            }
        }
        Ok(GapProfile { sigma, m })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Consecutive gap `σ_k − σ_{k+1}` (k is 1-based, `1 ≤ k ≤ d−1`).
    pub fn consecutive_gap(&self, k: usize) -> Result<f64> {
        if k < 1 || k >= self.dim() {
            return Err(Error::Input(format!(
                "gap index k={k} out of range [1, {}]",
                self.dim() - 1
            )));
        }
        Ok(self.sigma[k - 1] - self.sigma[k])
    }
}

/// Which bound a [`BoundValue`] carries. The enum order is the fixed report
/// column order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Davis-Kahan with the per-trial measured noise spectral norm.
    DavisKahanMeasured,
    /// Davis-Kahan with the deterministic `√T(√m+√d)` noise proxy.
    DavisKahanProxy,
    OrourkeVu,
    /// The weighted-Gram perturbation bound (sum over spectral-weight gap
    /// ratios), with explicit constants available.
    WeightedGram,
    /// Subspace form `√(kd)/gap · √T`.
    SubspaceKd,
    /// Subspace form `√d/gap · √T`, valid only under uniform top gaps.
    SubspaceUniformGaps,
    /// Rank-k covariance bound, full sum form.
    CovarianceRankK,
    /// Rank-k covariance bound, simplified `√(kd)` display form.
    CovarianceSimplified,
    /// Baseline covariance bound derived from Davis-Kahan.
    BaselineCovarianceDk,
    /// Baseline covariance bound derived from the O'Rourke-Vu result.
    BaselineCovarianceOv,
}

impl BoundKind {
    pub const ALL: [BoundKind; 10] = [
        BoundKind::DavisKahanMeasured,
        BoundKind::DavisKahanProxy,
        BoundKind::OrourkeVu,
        BoundKind::WeightedGram,
        BoundKind::SubspaceKd,
        BoundKind::SubspaceUniformGaps,
        BoundKind::CovarianceRankK,
        BoundKind::CovarianceSimplified,
        BoundKind::BaselineCovarianceDk,
        BoundKind::BaselineCovarianceOv,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundKind::DavisKahanMeasured => "davis_kahan_measured",
            BoundKind::DavisKahanProxy => "davis_kahan_proxy",
            BoundKind::OrourkeVu => "orourke_vu",
            BoundKind::WeightedGram => "weighted_gram",
            BoundKind::SubspaceKd => "subspace_kd",
            BoundKind::SubspaceUniformGaps => "subspace_uniform_gaps",
            BoundKind::CovarianceRankK => "covariance_rank_k",
            BoundKind::CovarianceSimplified => "covariance_simplified",
            BoundKind::BaselineCovarianceDk => "baseline_covariance_dk",
            BoundKind::BaselineCovarianceOv => "baseline_covariance_ov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFlag {
    /// A gap in the denominator is zero; the value is infinite and the bound
    /// says nothing.
    VacuousGap,
    /// The stated validity regime of this form holds on the given spectrum.
    RegimeSatisfied,
    /// The stated validity regime fails; the value is reported for context
    /// only.
    RegimeViolated,
}

/// One evaluated bound. `sans_constant` is the bound expression with its
/// unspecified constant set to 1, on the Frobenius-distance scale.
/// `explicit_constant`, where present, is the fully-pinned form (also on the
/// Frobenius scale, i.e. the square root of the squared-error bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub kind: BoundKind,
    #[serde(with = "crate::floats")]
    pub sans_constant: f64,
    #[serde(with = "crate::floats::opt")]
    pub explicit_constant: Option<f64>,
    pub flags: Vec<BoundFlag>,
}

impl BoundValue {
    fn finite(kind: BoundKind, sans: f64) -> Self {
        BoundValue {
            kind,
            sans_constant: sans,
            explicit_constant: None,
            flags: Vec::new(),
        }
    }

    fn vacuous(kind: BoundKind) -> Self {
        BoundValue {
            kind,
            sans_constant: f64::INFINITY,
            explicit_constant: None,
            flags: vec![BoundFlag::VacuousGap],
        }
    }

    pub fn is_vacuous(&self) -> bool {
        self.flags.contains(&BoundFlag::VacuousGap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaValidity {
    Valid,
    /// The formula value fell outside (0, 1); `log(1/δ)` is nonpositive or
    /// undefined and the gap requirement is meaningless. Flagged rather than
    /// clamped so it cannot silently pass.
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    #[serde(with = "crate::floats")]
    pub value: f64,
    pub validity: DeltaValidity,
}

impl Delta {
    pub fn is_valid(&self) -> bool {
        self.validity == DeltaValidity::Valid
    }
}

/// The failure-probability parameter of the gap assumption:
///
/// ```text
/// δ = 1/(8 d γ_1²) · (γ_1² − γ_d²)/(σ_1 − σ_d)²
/// ```
///
/// Errors when `γ_1 = 0` or `σ_1 = σ_d` (the formula degenerates to a
/// division by zero); values outside (0, 1) are returned flagged.
pub fn delta_of(profile: &GapProfile, w: &SpectralWeights) -> Result<Delta> {
    let d = profile.dim();
    if w.len() != d {
        return Err(Error::Input(format!(
            "weights have length {}, spectrum has length {d}",
            w.len()
        )));
    }
    let g1 = w.gamma()[0];
    let gd = w.gamma()[d - 1];
    let span = profile.sigma()[0] - profile.sigma()[d - 1];
    if g1 == 0.0 {
        return Err(Error::Input("delta undefined: gamma_1 = 0".into()));
    }
    if span == 0.0 {
        return Err(Error::Input("delta undefined: sigma_1 = sigma_d".into()));
    }
    let value = (g1 * g1 - gd * gd) / (8.0 * d as f64 * g1 * g1 * span * span);
    let validity = if value > 0.0 && value < 1.0 {
        DeltaValidity::Valid
    } else {
        DeltaValidity::OutOfRange
    };
    Ok(Delta { value, validity })
}

/// Result of the gap assumption check: each of the top-k consecutive gaps is
/// compared against `8 √T √m log(1/δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    #[serde(with = "crate::floats")]
    pub delta: f64,
    pub validity: DeltaValidity,
    /// `8 √T √m log(1/δ)`; NaN when δ is out of range (the requirement is
    /// undefined there, and NaN comparisons make every per-gap check false).
    #[serde(with = "crate::floats")]
    pub required_gap: f64,
    /// `σ_i − σ_{i+1}` for `i = 1..=k`.
    pub gaps: Vec<f64>,
    pub gap_satisfied: Vec<bool>,
    /// True only when δ is valid and every per-gap check passes.
    pub satisfied: bool,
}

pub fn check_assumption(
    profile: &GapProfile,
    k: usize,
    t: f64,
    w: &SpectralWeights,
) -> Result<AssumptionReport> {
    let d = profile.dim();
    if k < 1 || k > d.saturating_sub(1) {
        return Err(Error::Input(format!(
            "assumption check needs 1 <= k <= d-1, got k={k}, d={d}"
        )));
    }
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be positive")));
    }
    let delta = delta_of(profile, w)?;
    let required_gap = if delta.is_valid() {
        8.0 * t.sqrt() * (profile.rows() as f64).sqrt() * (1.0 / delta.value).ln()
    } else {
        f64::NAN
    };
    let gaps: Vec<f64> = (1..=k)
        .map(|i| profile.consecutive_gap(i))
        .collect::<Result<_>>()?;
    let gap_satisfied: Vec<bool> = gaps.iter().map(|g| *g >= required_gap).collect();
    let satisfied = delta.is_valid() && gap_satisfied.iter().all(|&b| b);
    Ok(AssumptionReport {
        delta: delta.value,
        validity: delta.validity,
        required_gap,
        gaps,
        gap_satisfied,
        satisfied,
    })
}

/// Davis-Kahan style subspace bound `√k · e_norm / (σ_k − σ_{k+1})` for a
/// caller-supplied noise norm estimate. `kind` records which estimate was
/// fed (measured spectral norm or the deterministic proxy).
pub fn davis_kahan_bound(
    profile: &GapProfile,
    k: usize,
    e_norm: f64,
    kind: BoundKind,
) -> Result<BoundValue> {
    if e_norm < 0.0 || !e_norm.is_finite() {
        return Err(Error::Input(format!(
            "noise norm {e_norm} must be a finite nonnegative number"
        )));
    }
    let gap = profile.consecutive_gap(k)?;
    if gap == 0.0 {
        return Ok(BoundValue::vacuous(kind));
    }
    Ok(BoundValue::finite(kind, (k as f64).sqrt() * e_norm / gap))
}

/// The rank-aware random-perturbation subspace bound
/// `k (√r/gap + m/(σ_k · gap) + √m/σ_k) · √T`, with `r` the rank of the
/// unperturbed matrix.
pub fn orourke_vu_bound(profile: &GapProfile, k: usize, r: usize, t: f64) -> Result<BoundValue> {
    if r < 1 || r > profile.dim() {
        return Err(Error::Input(format!(
            "rank r={r} out of range [1, {}]",
            profile.dim()
        )));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be nonnegative")));
    }
    let gap = profile.consecutive_gap(k)?;
    let sk = profile.sigma()[k - 1];
    if gap == 0.0 || sk == 0.0 {
        return Ok(BoundValue::vacuous(BoundKind::OrourkeVu));
    }
    let m = profile.rows() as f64;
    let sum = (r as f64).sqrt() / gap + m / (sk * gap) + m.sqrt() / sk;
    Ok(BoundValue::finite(
        BoundKind::OrourkeVu,
        k as f64 * sum * t.sqrt(),
    ))
}

/// The two pair sums behind the weighted-Gram bound:
///
/// ```text
/// S1 = Σ_{i≤k} Σ_{j>i} (γ_i² − γ_j²)² / (σ_i − σ_j)²
/// S2 = Σ_{i≤k} ( Σ_{j>i} (γ_i² − γ_j²) / (σ_i − σ_j)² )²
/// ```
///
/// Pairs with `γ_i² = γ_j²` contribute zero even when `σ_i = σ_j`; a tied
/// pair with differing weights makes the sums infinite (vacuous bound).
pub fn weighted_gram_sums(profile: &GapProfile, w: &SpectralWeights) -> Result<(f64, f64)> {
    let d = profile.dim();
    if w.len() != d {
        return Err(Error::Input(format!(
            "weights have length {}, spectrum has length {d}",
            w.len()
        )));
    }
    let sigma = profile.sigma();
    let gamma = w.gamma();
    let k = w.cutoff();
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    for i in 0..k.min(d) {
        let mut inner = 0.0f64;
        for j in (i + 1)..d {
            let wdiff = gamma[i] * gamma[i] - gamma[j] * gamma[j];
            if wdiff == 0.0 {
                continue;
            }
            let gap = sigma[i] - sigma[j];
            if gap == 0.0 {
                return Ok((f64::INFINITY, f64::INFINITY));
            }
            s1 += (wdiff / gap).powi(2);
            inner += wdiff / (gap * gap);
        }
        s2 += inner * inner;
    }
    Ok((s1, s2))
}

/// Bound on the weighted-Gram perturbation `E‖V̂Γ²V̂ᵀ − VΓ²Vᵀ‖_F`, on the
/// Frobenius scale:
///
/// * `sans_constant = √(S1 · T)` (squared-error bound with constant 1), and
/// * `explicit_constant = √(64·T·S1 + 32·T²·S2)` (fully pinned constants).
pub fn weighted_gram_bound(
    profile: &GapProfile,
    w: &SpectralWeights,
    t: f64,
) -> Result<BoundValue> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be nonnegative")));
    }
    let (s1, s2) = weighted_gram_sums(profile, w)?;
    if !s1.is_finite() {
        let mut b = BoundValue::vacuous(BoundKind::WeightedGram);
        b.explicit_constant = Some(f64::INFINITY);
        return Ok(b);
    }
    Ok(BoundValue {
        kind: BoundKind::WeightedGram,
        sans_constant: (s1 * t).sqrt(),
        explicit_constant: Some((64.0 * t * s1 + 32.0 * t * t * s2).sqrt()),
        flags: Vec::new(),
    })
}

/// Subspace recovery bound. The default form is `√(kd)/gap · √T`; with
/// `uniform_gaps` set, the sharper `√d/gap · √T` form is returned after
/// verifying the hypothesis `min_{i≤k}(σ_i − σ_{i+1}) ≥ c_ug · (σ_k −
/// σ_{k+1})` numerically, and refused (hypothesis error) otherwise.
pub fn subspace_bound(
    profile: &GapProfile,
    k: usize,
    t: f64,
    uniform_gaps: bool,
    c_ug: f64,
) -> Result<BoundValue> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be nonnegative")));
    }
    if c_ug <= 0.0 || !c_ug.is_finite() {
        return Err(Error::Input(format!(
            "uniform-gap ratio c_ug={c_ug} must be positive"
        )));
    }
    let gap = profile.consecutive_gap(k)?;
    let kind = if uniform_gaps {
        BoundKind::SubspaceUniformGaps
    } else {
        BoundKind::SubspaceKd
    };
    if gap == 0.0 {
        return Ok(BoundValue::vacuous(kind));
    }
    let d = profile.dim() as f64;
    if uniform_gaps {
        let min_gap = (1..=k)
            .map(|i| profile.consecutive_gap(i).expect("range checked"))
            .fold(f64::INFINITY, f64::min);
        if min_gap < c_ug * gap {
            return Err(Error::Hypothesis(format!(
                "uniform-gap form refused: min top gap {min_gap} < {c_ug} * (sigma_k - sigma_k+1) = {}",
                c_ug * gap
            )));
        }
        let mut b = BoundValue::finite(kind, d.sqrt() / gap * t.sqrt());
        b.flags.push(BoundFlag::RegimeSatisfied);
        return Ok(b);
    }
    Ok(BoundValue::finite(
        kind,
        (k as f64 * d).sqrt() / gap * t.sqrt(),
    ))
}

/// Rank-k covariance bound pair: the full sum form and the simplified
/// display form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBounds {
    /// `√( (d‖Σ_k‖_F² + k Σ_{j>k} (σ_k²/(σ_k−σ_j))²) · T )`
    pub rank_k: BoundValue,
    /// `√(kd) (σ_1 + σ_k²/(σ_k−σ_{k+1})) √T`
    pub simplified: BoundValue,
}

pub fn covariance_bound(profile: &GapProfile, k: usize, t: f64) -> Result<CovarianceBounds> {
    let d = profile.dim();
    if k < 1 || k > d {
        return Err(Error::Input(format!("rank k={k} out of range [1, {d}]")));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be nonnegative")));
    }
    let sigma = profile.sigma();
    let sk = sigma[k - 1];
    if sigma.iter().skip(k).any(|&sj| sj == sk) {
        return Ok(CovarianceBounds {
            rank_k: BoundValue::vacuous(BoundKind::CovarianceRankK),
            simplified: BoundValue::vacuous(BoundKind::CovarianceSimplified),
        });
    }
    let sigma_k_sq: f64 = sigma[..k].iter().map(|s| s * s).sum();
    let tail: f64 = sigma[k..]
        .iter()
        .map(|&sj| (sk * sk / (sk - sj)).powi(2))
        .sum();
    let rank_k = BoundValue::finite(
        BoundKind::CovarianceRankK,
        ((d as f64 * sigma_k_sq + k as f64 * tail) * t).sqrt(),
    );
    let edge = if k < d { sk * sk / (sk - sigma[k]) } else { 0.0 };
    let simplified = BoundValue::finite(
        BoundKind::CovarianceSimplified,
        (k as f64 * d as f64).sqrt() * (sigma[0] + edge) * t.sqrt(),
    );
    Ok(CovarianceBounds { rank_k, simplified })
}

/// Baseline covariance bounds derived from the two classical subspace
/// results: the Davis-Kahan route
/// `2 k^{3/2} √m √T σ_1 + σ_k² √k √m / gap · √T`, and the O'Rourke-Vu route
/// `σ_1 k √m √T`, the latter flagged with whether its regime
/// `gap ≥ c · max(σ_k, √m)` holds.
pub fn baseline_covariance_bounds(
    profile: &GapProfile,
    k: usize,
    t: f64,
    regime_c: f64,
) -> Result<(BoundValue, BoundValue)> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Input(format!("noise variance T={t} must be nonnegative")));
    }
    let gap = profile.consecutive_gap(k)?;
    if gap == 0.0 {
        return Ok((
            BoundValue::vacuous(BoundKind::BaselineCovarianceDk),
            BoundValue::vacuous(BoundKind::BaselineCovarianceOv),
        ));
    }
    let m = profile.rows() as f64;
    let s1 = profile.sigma()[0];
    let sk = profile.sigma()[k - 1];
    let dk = BoundValue::finite(
        BoundKind::BaselineCovarianceDk,
        2.0 * (k as f64).powf(1.5) * m.sqrt() * t.sqrt() * s1
            + sk * sk * (k as f64).sqrt() * m.sqrt() / gap * t.sqrt(),
    );
    let mut ov = BoundValue::finite(
        BoundKind::BaselineCovarianceOv,
        s1 * k as f64 * m.sqrt() * t.sqrt(),
    );
    ov.flags.push(if gap >= regime_c * sk.max(m.sqrt()) {
        BoundFlag::RegimeSatisfied
    } else {
        BoundFlag::RegimeViolated
    });
    Ok((dk, ov))
}

/// Pairwise coupling coefficient of the singular-vector diffusion:
///
/// ```text
/// c(σ_i, σ_j) = √(σ_i² + σ_j²) / |σ_j² − σ_i²|
/// ```
///
/// Symmetric in its arguments; `+∞` when the inputs are equal (including the
/// doubly-degenerate 0,0 case). For nonnegative inputs it never exceeds
/// `2/|σ_i − σ_j|`.
pub fn coupling_coefficient(sigma_i: f64, sigma_j: f64) -> f64 {
    if sigma_i == sigma_j {
        return f64::INFINITY;
    }
    let num = (sigma_i * sigma_i + sigma_j * sigma_j).sqrt();
    let den = (sigma_j * sigma_j - sigma_i * sigma_i).abs();
    num / den
}

/// Spectral-norm tail for a standard Gaussian matrix: threshold
/// `√m + √d + s` and tail probability `min(1, 2 e^{−s²})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNormTail {
    pub threshold: f64,
    pub tail_probability: f64,
}

pub fn gaussian_opnorm_tail(m: usize, d: usize, s: f64) -> Result<OpNormTail> {
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::Input(format!("tail parameter s={s} must be positive")));
    }
    Ok(OpNormTail {
        threshold: (m as f64).sqrt() + (d as f64).sqrt() + s,
        tail_probability: (2.0 * (-s * s).exp()).min(1.0),
    })
}
