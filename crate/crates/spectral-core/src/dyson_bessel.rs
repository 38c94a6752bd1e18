//! Euler–Maruyama integration of the coupled singular value / right-singular
//! vector diffusion induced when a matrix's entries undergo independent
//! Brownian motions, plus the exact direct-path oracle.
//!
//! For state `(σ, V)` with `σ` strictly decreasing positive, one step of
//! size `dt` driven by increments `(dβ_ii, dβ_ji)` is
//!
//! ```text
//! σ_i ← σ_i + dβ_ii + [ 1/(2σ_i) Σ_{j≠i} (σ_i²+σ_j²)/(σ_i²−σ_j²) + (m−1)/(2σ_i) ] dt
//! v_i ← v_i + Σ_{j≠i} v_j c_ij dβ_ji − (v_i/2) Σ_{j≠i} c_ij² dt
//! ```
//!
//! with `c_ij` the coupling coefficient evaluated at the current state. The
//! off-diagonal increments form a skew-symmetric matrix; the convention
//! pinned here is that the entry at `(j, i)` with `j > i` is the sampled
//! variate and `(i, j)` is its negative. The drift only preserves column
//! norms to first order, so the frame is projected back onto the orthogonal
//! group by QR (with the R diagonal forced positive) every `reortho_every`
//! steps.
//!
//! Pairwise repulsion blows up as singular values approach each other; a
//! step that would push any separation below the collision floor is rejected
//! and retried at `dt/2` with the increments rescaled by `1/√2` (a valid
//! Brownian increment for the shorter step, and deterministic), up to a
//! retry cap. The floor also guards the boundary at zero: the drift needs
//! `σ_d > 0`.
//!
//! One trajectory is strictly sequential; distinct trajectories with
//! distinct derived seeds share no state and run concurrently.
//!
//! Left singular vectors are not evolved; [`direct_path`] supplies full
//! factorizations when they are needed. Its marginal law at each checkpoint
//! is exactly that of `A + √t·G`, which makes it the verification oracle for
//! the integrator: it has no discretization error in distribution.

use nalgebra::{DMatrix, DVector};

use crate::bounds::coupling_coefficient;
use crate::error::{Error, Result};
use crate::linalg::{self, SpectralWeights, SvdFactors};
use crate::rng::NormalSampler;

/// Frobenius tolerance for `‖VᵀV − I‖` at re-orthonormalization checkpoints.
pub const FRAME_TOL: f64 = 1e-8;
/// Maximum step-halving retries before a collision error.
pub const MAX_STEP_RETRIES: u32 = 24;
/// Default: re-orthonormalize the frame every this many steps.
pub const DEFAULT_REORTHO_EVERY: usize = 10;
/// Default collision floor, as a fraction of the smallest initial gap.
pub const DEFAULT_COLLISION_FLOOR_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SdeState {
    pub t: f64,
    /// Strictly decreasing positive singular values.
    pub sigma: DVector<f64>,
    /// d×d orthogonal frame of right-singular vectors (columns).
    pub frame: DMatrix<f64>,
    pub step_count: u64,
}

impl SdeState {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Smallest consecutive separation (the last value's distance to zero is
    /// not included).
    pub fn min_gap(&self) -> f64 {
        let d = self.dim();
        (1..d)
            .map(|i| self.sigma[i - 1] - self.sigma[i])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    pub reortho_every: usize,
    /// Minimum allowed separation between consecutive singular values (and
    /// between the smallest one and zero). `None` resolves to
    /// `1e-3 × (smallest initial gap)` at simulation start.
    pub collision_floor: Option<f64>,
    pub n_checkpoints: usize,
    /// Row count of the underlying matrix; enters the drift.
    pub m: usize,
    pub seed: u64,
}

impl SdeConfig {
    pub fn new(dt: f64, horizon: f64, m: usize, seed: u64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::Input(format!("step size dt={dt} must be positive")));
        }
        if horizon < 0.0 || !horizon.is_finite() {
            return Err(Error::Input(format!("horizon T={horizon} must be nonnegative")));
        }
        if horizon > 0.0 && dt > horizon {
            return Err(Error::Input(format!(
                "step size dt={dt} exceeds horizon T={horizon}"
            )));
        }
        Ok(SdeConfig {
            dt,
            horizon,
            reortho_every: DEFAULT_REORTHO_EVERY,
            collision_floor: None,
            n_checkpoints: 10,
            m,
            seed,
        })
    }
}

/// Brownian increments for one attempted step of size `dt`: a diagonal
/// vector of N(0, dt) variates driving the singular values, and a
/// skew-symmetric matrix of N(0, dt) variates driving the vectors. The
/// sampled variate sits at `(j, i)` with `j > i`; the mirror entry is its
/// exact negative.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    pub dt: f64,
    pub diag: DVector<f64>,
    pub skew: DMatrix<f64>,
}

impl BrownianIncrements {
    pub fn sample(d: usize, dt: f64, sampler: &mut NormalSampler) -> Self {
        let sd = dt.sqrt();
        let diag = DVector::from_fn(d, |_, _| sampler.sample_scaled(sd));
        let mut skew = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let v = sampler.sample_scaled(sd);
                skew[(j, i)] = v;
                skew[(i, j)] = -v;
            }
        }
        BrownianIncrements { dt, diag, skew }
    }

    pub fn zeros(d: usize, dt: f64) -> Self {
        BrownianIncrements {
            dt,
            diag: DVector::zeros(d),
            skew: DMatrix::zeros(d, d),
        }
    }

    /// The same noise path restricted to a step of half the size: scaling a
    /// Brownian increment by `1/√2` matches the N(0, dt/2) law exactly.
    fn halved(&self) -> Self {
        BrownianIncrements {
            dt: self.dt / 2.0,
            diag: self.diag.scale(std::f64::consts::FRAC_1_SQRT_2),
            skew: self.skew.scale(std::f64::consts::FRAC_1_SQRT_2),
        }
    }
}

/// Drift of the singular values:
/// `drift_i = 1/(2σ_i) Σ_{j≠i} (σ_i²+σ_j²)/(σ_i²−σ_j²) + (m−1)/(2σ_i)`.
pub fn singular_value_drift(sigma: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    let d = sigma.len();
    let mut drift = DVector::zeros(d);
    for i in 0..d {
        let si = sigma[i];
        if si <= 0.0 {
            return Err(Error::Numeric(format!(
                "drift undefined: sigma[{i}]={si} is not positive"
            )));
        }
        let mut interaction = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            let sj = sigma[j];
            let den = si * si - sj * sj;
            if den == 0.0 {
                return Err(Error::Numeric(format!(
                    "drift undefined: sigma[{i}] == sigma[{j}] == {si}"
                )));
            }
            interaction += (si * si + sj * sj) / den;
        }
        drift[i] = interaction / (2.0 * si) + (m as f64 - 1.0) / (2.0 * si);
    }
    Ok(drift)
}

fn reorthonormalize(v: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = v.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn effective_floor(cfg: &SdeConfig) -> f64 {
    cfg.collision_floor.unwrap_or(0.0)
}

/// Accepts a proposed spectrum when it is strictly decreasing with all
/// separations (including distance to zero) at or above the floor.
fn spectrum_ok(sigma: &DVector<f64>, floor: f64) -> std::result::Result<(), usize> {
    let d = sigma.len();
    for i in 0..d {
        if !sigma[i].is_finite() {
            return Err(i);
        }
    }
    for i in 1..d {
        if sigma[i - 1] - sigma[i] < floor || sigma[i - 1] <= sigma[i] {
            return Err(i - 1);
        }
    }
    if sigma[d - 1] < floor || sigma[d - 1] <= 0.0 {
        return Err(d - 1);
    }
    Ok(())
}

/// One Euler–Maruyama step. On collision the step is retried at half the
/// size (increments rescaled accordingly) up to [`MAX_STEP_RETRIES`] times;
/// the committed step may therefore be shorter than `inc.dt`, which the
/// returned state's `t` reflects.
pub fn step(state: &SdeState, cfg: &SdeConfig, inc: &BrownianIncrements) -> Result<SdeState> {
    let d = state.dim();
    if inc.diag.len() != d || inc.skew.nrows() != d || inc.skew.ncols() != d {
        return Err(Error::Input(format!(
            "increment dimensions do not match state dimension {d}"
        )));
    }
    if cfg.reortho_every == 0 {
        return Err(Error::Input("reortho_every must be at least 1".into()));
    }
    let floor = effective_floor(cfg);
    let drift = singular_value_drift(&state.sigma, cfg.m)?;

    // Pairwise couplings at the current state, shared by every retry.
    let mut coupling = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let c = coupling_coefficient(state.sigma[i], state.sigma[j]);
            coupling[(i, j)] = c;
            coupling[(j, i)] = c;
        }
    }

    let mut attempt = inc.clone();
    let mut last_bad = 0usize;
    for _retry in 0..=MAX_STEP_RETRIES {
        let dt = attempt.dt;
        let sigma_new = &state.sigma + &attempt.diag + drift.scale(dt);
        match spectrum_ok(&sigma_new, floor) {
            Err(i) => {
                last_bad = i;
                attempt = attempt.halved();
                continue;
            }
            Ok(()) => {
                // Frame update V ← V(I + K): K[j,i] = c_ij dβ_ji off the
                // diagonal, K[i,i] = −(dt/2) Σ_j c_ij².
                let mut k_mat = DMatrix::zeros(d, d);
                for i in 0..d {
                    let mut sq = 0.0;
                    for j in 0..d {
                        if j == i {
                            continue;
                        }
                        let c = coupling[(j, i)];
                        k_mat[(j, i)] = c * attempt.skew[(j, i)];
                        sq += c * c;
                    }
                    k_mat[(i, i)] = -0.5 * dt * sq;
                }
                let mut frame = &state.frame + &state.frame * k_mat;
                let step_count = state.step_count + 1;
                if step_count.is_multiple_of(cfg.reortho_every as u64) {
                    frame = reorthonormalize(&frame);
                    let defect = linalg::orthogonality_defect(&frame);
                    if defect > FRAME_TOL {
                        return Err(Error::Numeric(format!(
                            "frame defect {defect:e} after re-orthonormalization"
                        )));
                    }
                }
                return Ok(SdeState {
                    t: state.t + dt,
                    sigma: sigma_new,
                    frame,
                    step_count,
                });
            }
        }
    }
    Err(Error::Collision {
        t: state.t,
        index: last_bad,
        sigma: state.sigma.iter().copied().collect(),
    })
}

/// The increment the weighted Gram matrix `V diag(γ²) Vᵀ` picks up over one
/// step with the given Brownian increments:
///
/// ```text
/// dΨ = Σ_i Σ_{j≠i} (γ_i²−γ_j²) [ (c_ij/2) dβ_ji (v_i v_jᵀ + v_j v_iᵀ) − c_ij² dt · v_i v_iᵀ ]
/// ```
///
/// Assembled in the frame basis as `V M Vᵀ` with `M` symmetric —
/// `M[i,j] = (γ_i²−γ_j²) c_ij dβ_ji` (both ordered pairs contribute the same
/// term), `M[i,i] = −dt Σ_{j≠i} (γ_i²−γ_j²) c_ij²` — so the output is
/// symmetric by construction and identically zero when all weights are
/// equal. `dt` is passed separately so the drift part can be switched off
/// (`dt = 0`) independently of the noise.
pub fn weighted_gram_increment(
    state: &SdeState,
    w: &SpectralWeights,
    inc: &BrownianIncrements,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let d = state.dim();
    if w.len() != d {
        return Err(Error::Input(format!(
            "weights have length {}, state dimension is {d}",
            w.len()
        )));
    }
    if inc.skew.nrows() != d || inc.skew.ncols() != d {
        return Err(Error::Input(format!(
            "increment dimensions do not match state dimension {d}"
        )));
    }
    let gamma = w.gamma();
    let mut m_mat = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut diag = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            let wdiff = gamma[i] * gamma[i] - gamma[j] * gamma[j];
            if wdiff == 0.0 {
                continue;
            }
            let c = coupling_coefficient(state.sigma[i], state.sigma[j]);
            if !c.is_finite() {
                return Err(Error::Collision {
                    t: state.t,
                    index: i.min(j),
                    sigma: state.sigma.iter().copied().collect(),
                });
            }
            if j > i {
                m_mat[(i, j)] = wdiff * c * inc.skew[(j, i)];
                m_mat[(j, i)] = m_mat[(i, j)];
            }
            diag -= wdiff * c * c * dt;
        }
        m_mat[(i, i)] = diag;
    }
    let x = &state.frame * m_mat * state.frame.transpose();
    Ok(linalg::symmetrize(x))
}

/// Source of Brownian increments, so trajectories can be driven by seeded
/// noise or by a deterministic skeleton in tests.
pub trait IncrementSource {
    fn draw(&mut self, d: usize, dt: f64) -> BrownianIncrements;
}

/// Seeded noise.
pub struct SeededIncrements(pub NormalSampler);

impl IncrementSource for SeededIncrements {
    fn draw(&mut self, d: usize, dt: f64) -> BrownianIncrements {
        BrownianIncrements::sample(d, dt, &mut self.0)
    }
}

/// All-zero increments: the deterministic Euler skeleton.
pub struct ZeroIncrements;

impl IncrementSource for ZeroIncrements {
    fn draw(&mut self, d: usize, dt: f64) -> BrownianIncrements {
        BrownianIncrements::zeros(d, dt)
    }
}

fn initial_state(a: &DMatrix<f64>, cfg: &SdeConfig) -> Result<(SdeState, f64)> {
    if a.nrows() != cfg.m {
        return Err(Error::Input(format!(
            "config row count m={} does not match the matrix ({} rows)",
            cfg.m,
            a.nrows()
        )));
    }
    let factors = linalg::svd(a)?;
    let sigma = factors.singular_values.clone();
    let d = sigma.len();
    let min_gap = (1..d)
        .map(|i| sigma[i - 1] - sigma[i])
        .fold(f64::INFINITY, f64::min);
    let floor = cfg
        .collision_floor
        .unwrap_or(DEFAULT_COLLISION_FLOOR_RATIO * min_gap.min(sigma[d - 1]));
    if floor <= 0.0 || !floor.is_finite() {
        return Err(Error::Input(format!(
            "collision floor {floor} must be positive; spectrum has a zero gap or zero tail"
        )));
    }
    let state = SdeState {
        t: 0.0,
        sigma,
        frame: factors.right,
        step_count: 0,
    };
    if let Err(i) = spectrum_ok(&state.sigma, floor) {
        return Err(Error::Input(format!(
            "initial spectrum violates the collision floor {floor:e} at index {i} (gaps must exceed the floor and sigma_d must be positive)"
        )));
    }
    Ok((state, floor))
}

/// Integrate the diffusion started at the factorization of `a` up to the
/// horizon, recording the state at `n_checkpoints` equally spaced times
/// (plus the initial state). Deterministic per seed.
pub fn simulate(a: &DMatrix<f64>, cfg: &SdeConfig) -> Result<Vec<SdeState>> {
    let mut src = SeededIncrements(NormalSampler::from_seed(cfg.seed));
    simulate_with(a, cfg, &mut src)
}

/// [`simulate`] with a caller-supplied increment source.
pub fn simulate_with(
    a: &DMatrix<f64>,
    cfg: &SdeConfig,
    src: &mut dyn IncrementSource,
) -> Result<Vec<SdeState>> {
    if cfg.n_checkpoints == 0 {
        return Err(Error::Input("n_checkpoints must be at least 1".into()));
    }
    let (mut state, floor) = initial_state(a, cfg)?;
    let mut resolved = *cfg;
    resolved.collision_floor = Some(floor);
    let mut out = Vec::with_capacity(cfg.n_checkpoints + 1);
    out.push(state.clone());
    if cfg.horizon == 0.0 {
        return Ok(out);
    }
    let d = state.dim();
    for j in 1..=cfg.n_checkpoints {
        let target = cfg.horizon * j as f64 / cfg.n_checkpoints as f64;
        while state.t < target {
            let dt = resolved.dt.min(target - state.t);
            let inc = src.draw(d, dt);
            state = step(&state, &resolved, &inc)?;
        }
        // Checkpoints are re-orthonormalization points, so recorded states
        // satisfy the frame invariant regardless of where the periodic QR
        // schedule landed.
        state.frame = reorthonormalize(&state.frame);
        let defect = linalg::orthogonality_defect(&state.frame);
        if defect > FRAME_TOL {
            return Err(Error::Numeric(format!(
                "frame defect {defect:e} after checkpoint re-orthonormalization"
            )));
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// Simulate the matrix-valued path `A + B(t)` directly by accumulating
/// independent Gaussian increments and factorizing at each checkpoint
/// `t_j = j·T/n`. The marginal law at `t_j` is exactly that of
/// `A + √(t_j)·G`, so this path has no discretization error in distribution
/// and serves as the oracle for [`simulate`].
pub fn direct_path(
    a: &DMatrix<f64>,
    horizon: f64,
    n_checkpoints: usize,
    seed: u64,
) -> Result<Vec<(f64, SvdFactors)>> {
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(Error::Input(format!("horizon T={horizon} must be nonnegative")));
    }
    if horizon == 0.0 {
        return Ok(vec![(0.0, linalg::svd(a)?)]);
    }
    if n_checkpoints == 0 {
        return Err(Error::Input("n_checkpoints must be at least 1".into()));
    }
    let (m, d) = (a.nrows(), a.ncols());
    let dt = horizon / n_checkpoints as f64;
    let sd = dt.sqrt();
    let mut sampler = NormalSampler::from_seed(seed);
    let mut phi = a.clone();
    let mut out = Vec::with_capacity(n_checkpoints);
    for j in 1..=n_checkpoints {
        for r in 0..m {
            for c in 0..d {
                phi[(r, c)] += sampler.sample_scaled(sd);
            }
        }
        out.push((horizon * j as f64 / n_checkpoints as f64, linalg::svd(&phi)?));
    }
    Ok(out)
}
