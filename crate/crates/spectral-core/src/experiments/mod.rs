//! Synthetic matrix generation, parallel Monte Carlo trials, empirical
//! vs. theoretical bound comparison, and scaling studies.
//!
//! Trials are embarrassingly parallel: trial `i` draws its noise from the
//! substream `derive_seed(root, "trial", i)`, workers share only immutable
//! inputs, and results are gathered by trial index before a sequential
//! reduction. Serial and parallel runs therefore agree bitwise, which the
//! determinism tests check directly. Across a noise sweep the same trial
//! seeds are reused on purpose (common random numbers), so sweep points
//! differ only through the noise scale.
//!
//! Wall-clock runtime is kept on the summary for display but excluded from
//! every serialized report, which must be byte-identical across runs.

pub mod report;

use std::collections::BTreeSet;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    self, AssumptionReport, BoundKind, BoundValue, GapProfile, DEFAULT_BASELINE_REGIME_RATIO,
    DEFAULT_UNIFORM_GAP_RATIO,
};
use crate::error::{Error, Result};
use crate::linalg::{self, SpectralWeights, SvdFactors};
use crate::mechanism::{self, NoiseConfig};
use crate::parallel;
use crate::rng::{derive_seed, NormalSampler};

/// Singular value profile of a synthetic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaProfile {
    Explicit(Vec<f64>),
    /// Geometric decay `σ_i = σ_1 · ratio^(i-1)`, ratio in (0, 1).
    Exponential { sigma1: f64, ratio: f64 },
    /// Arithmetic decay `σ_i = σ_1 − (i-1)·gap`, clipped nowhere: the full
    /// profile must stay nonnegative.
    Linear { sigma1: f64, gap: f64 },
}

impl SigmaProfile {
    pub fn materialize(&self, d: usize) -> Result<Vec<f64>> {
        if d == 0 {
            return Err(Error::Input("profile dimension must be positive".into()));
        }
        let sigma = match self {
            SigmaProfile::Explicit(v) => {
                if v.len() != d {
                    return Err(Error::Input(format!(
                        "explicit profile has {} values but d={d}",
                        v.len()
                    )));
                }
                v.clone()
            }
            SigmaProfile::Exponential { sigma1, ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::Input(format!(
                        "exponential decay ratio {ratio} must lie in (0, 1)"
                    )));
                }
                if *sigma1 <= 0.0 || !sigma1.is_finite() {
                    return Err(Error::Input(format!("sigma1={sigma1} must be positive")));
                }
                (0..d).map(|i| sigma1 * ratio.powi(i as i32)).collect()
            }
            SigmaProfile::Linear { sigma1, gap } => {
                if *gap < 0.0 || !gap.is_finite() {
                    return Err(Error::Input(format!("linear profile gap {gap} must be nonnegative")));
                }
                if *sigma1 <= 0.0 || !sigma1.is_finite() {
                    return Err(Error::Input(format!("sigma1={sigma1} must be positive")));
                }
                let tail = sigma1 - gap * (d as f64 - 1.0);
                if tail < 0.0 {
                    return Err(Error::Input(format!(
                        "linear profile goes negative: sigma1={sigma1}, gap={gap}, d={d}"
                    )));
                }
                (0..d).map(|i| sigma1 - gap * i as f64).collect()
            }
        };
        for (i, s) in sigma.iter().enumerate() {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::Input(format!("sigma[{i}]={s} invalid")));
            }
            if i > 0 && sigma[i - 1] < *s {
                return Err(Error::Input("profile must be nonincreasing".into()));
            }
        }
        Ok(sigma)
    }

    /// The profile re-targeted at dimension `d` for scaling sweeps. Explicit
    /// profiles are truncated or extended by repeating their last value (so
    /// the tail clusters and the top gaps are preserved); parametric
    /// profiles regenerate naturally.
    pub fn for_dimension(&self, d: usize) -> SigmaProfile {
        match self {
            SigmaProfile::Explicit(v) => {
                let mut out = v.clone();
                if out.len() > d {
                    out.truncate(d);
                } else if let Some(&last) = out.last() {
                    out.resize(d, last);
                }
                SigmaProfile::Explicit(out)
            }
            other => other.clone(),
        }
    }

    /// Comma-free label for CSV cells.
    pub fn label(&self) -> String {
        match self {
            SigmaProfile::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                format!("explicit:{}", parts.join(";"))
            }
            SigmaProfile::Exponential { sigma1, ratio } => {
                format!("exponential:sigma1={sigma1};ratio={ratio}")
            }
            SigmaProfile::Linear { sigma1, gap } => format!("linear:sigma1={sigma1};gap={gap}"),
        }
    }
}

/// Recipe for a synthetic matrix: prescribed spectrum and seeded rotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub m: usize,
    pub d: usize,
    pub profile: SigmaProfile,
    pub rotation_seed: u64,
}

/// Orthonormal columns distributed by QR of a Gaussian matrix with the R
/// diagonal forced positive (the standard correction that makes the factor
/// Haar-distributed).
fn haar_columns(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut s = NormalSampler::from_seed(seed);
    let mut g = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            g[(i, j)] = s.sample();
        }
    }
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `U · diag(σ) · Vᵀ` with Haar rotations drawn from the rotation seed.
pub fn gen_matrix(spec: &MatrixSpec) -> Result<DMatrix<f64>> {
    if spec.m < spec.d {
        return Err(Error::Input(format!(
            "matrix spec needs m >= d, got m={}, d={}",
            spec.m, spec.d
        )));
    }
    let sigma = spec.profile.materialize(spec.d)?;
    let u = haar_columns(spec.m, spec.d, derive_seed(spec.rotation_seed, "haar-left", 0));
    let v = haar_columns(spec.d, spec.d, derive_seed(spec.rotation_seed, "haar-right", 0));
    let mut scaled = u;
    for (j, s) in sigma.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    Ok(scaled * v.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Subspace,
    Covariance,
    ScalingM,
    ScalingD,
}

impl ExperimentMode {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentMode::Subspace => "subspace",
            ExperimentMode::Covariance => "covariance",
            ExperimentMode::ScalingM => "scaling_m",
            ExperimentMode::ScalingD => "scaling_d",
        }
    }
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subspace" => Ok(ExperimentMode::Subspace),
            "covariance" => Ok(ExperimentMode::Covariance),
            "scaling_m" => Ok(ExperimentMode::ScalingM),
            "scaling_d" => Ok(ExperimentMode::ScalingD),
            other => Err(Error::Input(format!(
                "unknown mode '{other}' (expected subspace|covariance|scaling_m|scaling_d)"
            ))),
        }
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .iter()
            .find(|k| k.label() == s)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown bound kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: MatrixSpec,
    pub k: usize,
    /// Noise variances to sweep; a single entry runs one configuration.
    pub t_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: ExperimentMode,
    /// Swept dimension values, scaling modes only.
    pub sweep_points: Vec<usize>,
    /// Bound kinds to evaluate; empty means every kind applicable to the
    /// mode.
    pub bounds_requested: BTreeSet<BoundKind>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::Input(format!(
                "trials={} but the standard error needs at least 2",
                self.trials
            )));
        }
        if self.t_values.is_empty() {
            return Err(Error::Input("noise sweep list is empty".into()));
        }
        for t in &self.t_values {
            if *t <= 0.0 || !t.is_finite() {
                return Err(Error::Input(format!("noise variance T={t} must be positive")));
            }
        }
        if self.k < 1 {
            return Err(Error::Input("k must be at least 1".into()));
        }
        match self.mode {
            ExperimentMode::Subspace => {
                if self.k >= self.spec.d {
                    return Err(Error::Input(format!(
                        "subspace mode needs k < d, got k={}, d={}",
                        self.k, self.spec.d
                    )));
                }
            }
            ExperimentMode::Covariance => {
                if self.k > self.spec.d {
                    return Err(Error::Input(format!(
                        "covariance mode needs k <= d, got k={}, d={}",
                        self.k, self.spec.d
                    )));
                }
            }
            ExperimentMode::ScalingM | ExperimentMode::ScalingD => {
                if self.sweep_points.len() < 4 {
                    return Err(Error::Input(format!(
                        "scaling studies need at least 4 sweep points, got {}",
                        self.sweep_points.len()
                    )));
                }
                if !self.sweep_points.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Input(
                        "sweep points must be strictly increasing".into(),
                    ));
                }
                if self.trials < 100 {
                    return Err(Error::Input(format!(
                        "scaling studies need at least 100 trials per point, got {}",
                        self.trials
                    )));
                }
                if self.t_values.len() != 1 {
                    return Err(Error::Input(
                        "scaling studies take a single noise variance".into(),
                    ));
                }
                match self.mode {
                    ExperimentMode::ScalingM => {
                        if self.sweep_points[0] < self.spec.d {
                            return Err(Error::Input(format!(
                                "row sweep starts below d={}",
                                self.spec.d
                            )));
                        }
                    }
                    ExperimentMode::ScalingD => {
                        if self.k >= self.sweep_points[0] {
                            return Err(Error::Input(format!(
                                "column sweep needs k < every point, got k={}",
                                self.k
                            )));
                        }
                        if self.spec.m < *self.sweep_points.last().unwrap() {
                            return Err(Error::Input(format!(
                                "column sweep exceeds m={}",
                                self.spec.m
                            )));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
        Ok(())
    }

    fn wants(&self, kind: BoundKind) -> bool {
        self.bounds_requested.is_empty() || self.bounds_requested.contains(&kind)
    }
}

/// One evaluated bound plus its ratio against the empirical mean. The ratio
/// is absent for vacuous bounds and infinite when the empirical mean is
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundValue,
    #[serde(with = "crate::floats::opt")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub mode: ExperimentMode,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    #[serde(with = "crate::floats")]
    pub noise_variance: f64,
    pub trials: usize,
    pub seed: u64,
    pub profile: String,
    /// Monte Carlo mean and standard error of the Frobenius error.
    #[serde(with = "crate::floats")]
    pub empirical_mean: f64,
    #[serde(with = "crate::floats")]
    pub empirical_stderr: f64,
    /// Mean and standard error of the squared Frobenius error (the scale the
    /// explicit-constant bound lives on).
    #[serde(with = "crate::floats")]
    pub empirical_mean_sq: f64,
    #[serde(with = "crate::floats")]
    pub empirical_stderr_sq: f64,
    /// Gap assumption report; absent when the assumption is undefined for
    /// the configuration (k = d, or a fully degenerate spectrum).
    pub assumption: Option<AssumptionReport>,
    pub bounds: Vec<BoundReport>,
    /// Set when trials < 30: the standard errors are then rough.
    pub low_trial_warning: bool,
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentSummary {
    pub fn bound(&self, kind: BoundKind) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.bound.kind == kind)
    }
}

/// Mean and standard error (unbiased sample variance).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Default small-perturbation noise variance for a profile: `T` such that
/// `√T (√m + √d)` is a tenth of the smallest top-k gap, the regime where the
/// bounds are informative.
pub fn small_perturbation_noise(profile: &GapProfile, k: usize) -> Result<f64> {
    let min_gap = (1..=k)
        .map(|i| profile.consecutive_gap(i))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_gap <= 0.0 {
        return Err(Error::Input("profile has a zero top gap".into()));
    }
    let spread = (profile.rows() as f64).sqrt() + (profile.dim() as f64).sqrt();
    Ok((0.1 * min_gap / spread).powi(2))
}

struct TrialPoint {
    error: f64,
    noise_opnorm: f64,
}

fn run_trials<F>(trials: usize, f: F) -> Result<Vec<TrialPoint>>
where
    F: Fn(u64) -> Result<TrialPoint> + Sync,
{
    parallel::map_trials(trials, |i| f(i as u64))
        .into_iter()
        .collect()
}

fn assumption_or_none(
    profile: &GapProfile,
    k: usize,
    t: f64,
    w: &SpectralWeights,
) -> Option<AssumptionReport> {
    if k >= profile.dim() {
        return None;
    }
    bounds::check_assumption(profile, k, t, w).ok()
}

/// Numerical rank: singular values above `1e-12 · σ_1`.
fn numerical_rank(profile: &GapProfile) -> usize {
    let s1 = profile.sigma()[0];
    let thresh = 1e-12 * s1;
    profile.sigma().iter().filter(|s| **s > thresh).count().max(1)
}

fn push_bound(
    reports: &mut Vec<BoundReport>,
    bound: BoundValue,
    empirical_mean: f64,
) {
    let ratio = if bound.is_vacuous() {
        None
    } else {
        Some(bound.sans_constant / empirical_mean)
    };
    reports.push(BoundReport { bound, ratio });
}

fn subspace_summary(
    cfg: &ExperimentConfig,
    a: &DMatrix<f64>,
    truth: &mechanism::SubspaceTruth,
    profile: &GapProfile,
    t: f64,
) -> Result<ExperimentSummary> {
    let start = Instant::now();
    let outcomes = run_trials(cfg.trials, |i| {
        let noise = NoiseConfig::new(t, derive_seed(cfg.seed, "trial", i))?;
        let r = mechanism::release_subspace_with(truth, a, noise)?;
        Ok(TrialPoint {
            error: r.error_frobenius.expect("non-degenerate truth yields an error"),
            noise_opnorm: r.noise_opnorm,
        })
    })?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let errors_sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (mean, stderr) = mean_stderr(&errors);
    let (mean_sq, stderr_sq) = mean_stderr(&errors_sq);

    let k = cfg.k;
    let weights = SpectralWeights::subspace(profile.dim(), k)?;
    let assumption = assumption_or_none(profile, k, t, &weights);

    let mut reports = Vec::new();
    if cfg.wants(BoundKind::DavisKahanMeasured) {
        let per_trial: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                bounds::davis_kahan_bound(
                    profile,
                    k,
                    t.sqrt() * o.noise_opnorm,
                    BoundKind::DavisKahanMeasured,
                )
                .map(|b| b.sans_constant)
            })
            .collect::<Result<_>>()?;
        let (dk_mean, _) = mean_stderr(&per_trial);
        push_bound(
            &mut reports,
            BoundValue {
                kind: BoundKind::DavisKahanMeasured,
                sans_constant: dk_mean,
                explicit_constant: None,
                flags: Vec::new(),
            },
            mean,
        );
    }
    if cfg.wants(BoundKind::DavisKahanProxy) {
        let proxy = t.sqrt() * ((profile.rows() as f64).sqrt() + (profile.dim() as f64).sqrt());
        let b = bounds::davis_kahan_bound(profile, k, proxy, BoundKind::DavisKahanProxy)?;
        push_bound(&mut reports, b, mean);
    }
    if cfg.wants(BoundKind::OrourkeVu) {
        let b = bounds::orourke_vu_bound(profile, k, numerical_rank(profile), t)?;
        push_bound(&mut reports, b, mean);
    }
    if cfg.wants(BoundKind::WeightedGram) {
        let b = bounds::weighted_gram_bound(profile, &weights, t)?;
        push_bound(&mut reports, b, mean);
    }
    if cfg.wants(BoundKind::SubspaceKd) {
        let b = bounds::subspace_bound(profile, k, t, false, DEFAULT_UNIFORM_GAP_RATIO)?;
        push_bound(&mut reports, b, mean);
    }
    if cfg.wants(BoundKind::SubspaceUniformGaps) {
        match bounds::subspace_bound(profile, k, t, true, DEFAULT_UNIFORM_GAP_RATIO) {
            Ok(b) => push_bound(&mut reports, b, mean),
            Err(Error::Hypothesis(_)) => {} // form refused on this spectrum
            Err(e) => return Err(e),
        }
    }

    Ok(ExperimentSummary {
        mode: ExperimentMode::Subspace,
        m: profile.rows(),
        d: profile.dim(),
        k,
        noise_variance: t,
        trials: cfg.trials,
        seed: cfg.seed,
        profile: cfg.spec.profile.label(),
        empirical_mean: mean,
        empirical_stderr: stderr,
        empirical_mean_sq: mean_sq,
        empirical_stderr_sq: stderr_sq,
        assumption,
        bounds: reports,
        low_trial_warning: cfg.trials < 30,
        runtime: start.elapsed(),
    })
}

fn covariance_summary(
    cfg: &ExperimentConfig,
    a: &DMatrix<f64>,
    truth: &mechanism::CovarianceTruth,
    profile: &GapProfile,
    t: f64,
) -> Result<ExperimentSummary> {
    let start = Instant::now();
    let outcomes = run_trials(cfg.trials, |i| {
        let noise = NoiseConfig::new(t, derive_seed(cfg.seed, "trial", i))?;
        let r = mechanism::release_covariance_with(truth, a, noise)?;
        Ok(TrialPoint {
            error: r.error_frobenius.expect("covariance release always measures"),
            noise_opnorm: r.noise_opnorm,
        })
    })?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let errors_sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (mean, stderr) = mean_stderr(&errors);
    let (mean_sq, stderr_sq) = mean_stderr(&errors_sq);

    let k = cfg.k;
    let weights = SpectralWeights::from_singular_values(profile.sigma(), k)?;
    let assumption = assumption_or_none(profile, k, t, &weights);

    let mut reports = Vec::new();
    if cfg.wants(BoundKind::WeightedGram) {
        let b = bounds::weighted_gram_bound(profile, &weights, t)?;
        push_bound(&mut reports, b, mean);
    }
    if cfg.wants(BoundKind::CovarianceRankK) || cfg.wants(BoundKind::CovarianceSimplified) {
        let cb = bounds::covariance_bound(profile, k, t)?;
        if cfg.wants(BoundKind::CovarianceRankK) {
            push_bound(&mut reports, cb.rank_k, mean);
        }
        if cfg.wants(BoundKind::CovarianceSimplified) {
            push_bound(&mut reports, cb.simplified, mean);
        }
    }
    if k < profile.dim()
        && (cfg.wants(BoundKind::BaselineCovarianceDk) || cfg.wants(BoundKind::BaselineCovarianceOv))
    {
        let (dk, ov) =
            bounds::baseline_covariance_bounds(profile, k, t, DEFAULT_BASELINE_REGIME_RATIO)?;
        if cfg.wants(BoundKind::BaselineCovarianceDk) {
            push_bound(&mut reports, dk, mean);
        }
        if cfg.wants(BoundKind::BaselineCovarianceOv) {
            push_bound(&mut reports, ov, mean);
        }
    }

    Ok(ExperimentSummary {
        mode: ExperimentMode::Covariance,
        m: profile.rows(),
        d: profile.dim(),
        k,
        noise_variance: t,
        trials: cfg.trials,
        seed: cfg.seed,
        profile: cfg.spec.profile.label(),
        empirical_mean: mean,
        empirical_stderr: stderr,
        empirical_mean_sq: mean_sq,
        empirical_stderr_sq: stderr_sq,
        assumption,
        bounds: reports,
        low_trial_warning: cfg.trials < 30,
        runtime: start.elapsed(),
    })
}

fn profile_of(factors: &SvdFactors, m: usize) -> Result<GapProfile> {
    GapProfile::new(factors.singular_values.iter().copied().collect(), m)
}

/// Subspace experiment over the noise sweep: one summary per noise variance.
pub fn run_subspace_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentSummary>> {
    if cfg.mode != ExperimentMode::Subspace {
        return Err(Error::Input(format!(
            "run_subspace_experiment called with mode {}",
            cfg.mode.label()
        )));
    }
    cfg.validate()?;
    let a = gen_matrix(&cfg.spec)?;
    let factors = linalg::svd(&a)?;
    let profile = profile_of(&factors, cfg.spec.m)?;
    let truth = mechanism::subspace_truth(&factors, cfg.k)?;
    cfg.t_values
        .iter()
        .map(|&t| subspace_summary(cfg, &a, &truth, &profile, t))
        .collect()
}

/// Covariance experiment over the noise sweep.
pub fn run_covariance_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentSummary>> {
    if cfg.mode != ExperimentMode::Covariance {
        return Err(Error::Input(format!(
            "run_covariance_experiment called with mode {}",
            cfg.mode.label()
        )));
    }
    cfg.validate()?;
    let a = gen_matrix(&cfg.spec)?;
    let factors = linalg::svd(&a)?;
    let profile = profile_of(&factors, cfg.spec.m)?;
    let truth = mechanism::covariance_truth(&factors, cfg.k)?;
    cfg.t_values
        .iter()
        .map(|&t| covariance_summary(cfg, &a, &truth, &profile, t))
        .collect()
}

/// Least-squares fit of `log y` against `log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    #[serde(with = "crate::floats")]
    pub slope: f64,
    #[serde(with = "crate::floats")]
    pub intercept: f64,
    #[serde(with = "crate::floats")]
    pub slope_stderr: f64,
    #[serde(with = "crate::floats")]
    pub ci95_low: f64,
    #[serde(with = "crate::floats")]
    pub ci95_high: f64,
}

fn t_critical_95(df: usize) -> f64 {
    const TABLE: [f64; 10] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Input("slope fit needs at least 3 points".into()));
    }
    for (x, y) in points {
        if *x <= 0.0 || *y <= 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(Error::Input(format!(
                "log-log fit needs positive finite points, got ({x}, {y})"
            )));
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = logs
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = points.len() - 2;
    let slope_stderr = (ss_res / df as f64 / sxx).sqrt();
    let half = t_critical_95(df) * slope_stderr;
    Ok(SlopeFit {
        slope,
        intercept,
        slope_stderr,
        ci95_low: slope - half,
        ci95_high: slope + half,
    })
}

/// A scaling study: the swept summaries, the fitted empirical exponent, and
/// the exponent of the classical concentration-based reference bound over
/// the same sweep (`√(km)/gap·√T` for row sweeps, `√(kd)/gap·√T` for column
/// sweeps, both slope 1/2 in the swept variable by construction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub mode: ExperimentMode,
    pub sweep: Vec<usize>,
    pub points: Vec<ExperimentSummary>,
    pub empirical: SlopeFit,
    pub reference: SlopeFit,
}

pub fn run_scaling_study(cfg: &ExperimentConfig) -> Result<ScalingStudy> {
    if cfg.mode != ExperimentMode::ScalingM && cfg.mode != ExperimentMode::ScalingD {
        return Err(Error::Input(format!(
            "run_scaling_study called with mode {}",
            cfg.mode.label()
        )));
    }
    cfg.validate()?;
    let t = cfg.t_values[0];
    let mut points = Vec::with_capacity(cfg.sweep_points.len());
    let mut reference = Vec::with_capacity(cfg.sweep_points.len());
    for &p in &cfg.sweep_points {
        let mut sub = cfg.clone();
        sub.mode = ExperimentMode::Subspace;
        sub.sweep_points = Vec::new();
        match cfg.mode {
            ExperimentMode::ScalingM => sub.spec.m = p,
            ExperimentMode::ScalingD => {
                sub.spec.d = p;
                sub.spec.profile = cfg.spec.profile.for_dimension(p);
            }
            _ => unreachable!(),
        }
        let summary = run_subspace_experiment(&sub)?.remove(0);
        let sigma = sub.spec.profile.materialize(sub.spec.d)?;
        let gap = sigma[cfg.k - 1] - sigma[cfg.k];
        if gap <= 0.0 {
            return Err(Error::Input("scaling sweep hit a zero top gap".into()));
        }
        let swept = p as f64;
        reference.push((swept, (cfg.k as f64 * swept).sqrt() / gap * t.sqrt()));
        points.push(summary);
    }
    let empirical_pts: Vec<(f64, f64)> = cfg
        .sweep_points
        .iter()
        .zip(points.iter())
        .map(|(&p, s)| (p as f64, s.empirical_mean))
        .collect();
    Ok(ScalingStudy {
        mode: cfg.mode,
        sweep: cfg.sweep_points.clone(),
        points,
        empirical: fit_log_slope(&empirical_pts)?,
        reference: fit_log_slope(&reference)?,
    })
}
