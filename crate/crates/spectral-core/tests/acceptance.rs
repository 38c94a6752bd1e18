//! Acceptance suite: the eight exit checks for this crate, each printing a
//! pass/fail line (`cargo test --test acceptance -- --nocapture` to see all
//! of them). Every tolerance is pinned in code here.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use spectral_core::bounds::{self, GapProfile};
use spectral_core::dyson_bessel::{
    direct_path, simulate, weighted_gram_increment, BrownianIncrements, SdeConfig, SdeState,
};
#[cfg(feature = "parallel")]
use spectral_core::experiments::{report, run_subspace_experiment};
use spectral_core::experiments::{
    fit_log_slope, mean_stderr, run_scaling_study, ExperimentConfig, ExperimentMode, MatrixSpec,
    SigmaProfile,
};
use spectral_core::linalg::{self, SpectralWeights};
use spectral_core::mechanism::{self, NoiseConfig};
use spectral_core::parallel::map_trials;
use spectral_core::rng::{derive_seed, NormalSampler};

fn diag_embedded(values: &[f64], rows: usize) -> DMatrix<f64> {
    let d = values.len();
    let mut a = DMatrix::zeros(rows, d);
    for (i, v) in values.iter().enumerate() {
        a[(i, i)] = *v;
    }
    a
}

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

/// Mean of ‖AᵀG‖_F² over 2000 draws equals d·‖A‖_F² = 520 within 3 standard
/// errors, for A = diag(10, 5, 2, 1) embedded in 50×4.
#[test]
fn a1_exact_gaussian_second_moment() {
    let a = diag_embedded(&[10.0, 5.0, 2.0, 1.0], 50);
    let target = 4.0 * 130.0;
    let samples: Vec<f64> = map_trials(2000, |i| {
        let g = mechanism::sample_gaussian_matrix(50, 4, derive_seed(101, "moment", i as u64))
            .unwrap();
        (a.transpose() * g).norm_squared()
    });
    let (mean, se) = mean_stderr(&samples);
    let pass = (mean - target).abs() <= 3.0 * se;
    verdict(
        "exact second-moment identity",
        pass,
        &format!("mean={mean:.3}, target={target}, 3se={:.3}", 3.0 * se),
    );
}

/// Over 1000 trials at 200×50: every singular value moves by at most
/// √T·‖G‖₂ + 1e-9, and ‖G‖₂ exceeds √m+√d+2 no more often than the
/// concentration tail allows.
#[test]
fn a2_weyl_and_opnorm_concentration() {
    let (m, d) = (200usize, 50usize);
    let spec = MatrixSpec {
        m,
        d,
        profile: SigmaProfile::Exponential {
            sigma1: 50.0,
            ratio: 0.9,
        },
        rotation_seed: 5,
    };
    let a = spectral_core::experiments::gen_matrix(&spec).unwrap();
    let sigma_a = linalg::svd(&a).unwrap().singular_values;
    let t = 0.01f64;
    let threshold = (m as f64).sqrt() + (d as f64).sqrt() + 2.0;
    let results: Vec<(f64, usize)> = map_trials(1000, |i| {
        let seed = derive_seed(202, "weyl", i as u64);
        let g = mechanism::sample_gaussian_matrix(m, d, seed).unwrap();
        let g_norm = linalg::spectral_norm(&g).unwrap();
        let ahat = &a + t.sqrt() * &g;
        let sigma_hat = ahat
            .clone()
            .try_svd_unordered(false, false, f64::EPSILON, 50_000)
            .unwrap()
            .singular_values;
        let mut sorted: Vec<f64> = sigma_hat.iter().copied().collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut worst = 0.0f64;
        for j in 0..d {
            worst = worst.max((sorted[j] - sigma_a[j]).abs() - t.sqrt() * g_norm);
        }
        (worst, usize::from(g_norm > threshold))
    });
    let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let exceed: usize = results.iter().map(|r| r.1).sum();
    let tail = 2.0 * (-4.0f64).exp();
    let allowed = tail + 3.0 * (tail * (1.0 - tail) / 1000.0).sqrt();
    let freq = exceed as f64 / 1000.0;
    let pass = worst <= 1e-9 && freq <= allowed;
    verdict(
        "eigenvalue stability and spectral-norm tail",
        pass,
        &format!("worst Weyl excess={worst:.2e}, tail freq={freq} (allowed {allowed:.2e})"),
    );
}

/// Ten gap-assumption-satisfying configurations: the Monte Carlo mean of the
/// squared weighted-Gram error plus 3 standard errors stays below the
/// explicit-constant bound 64·T·S1 + 32·T²·S2 in every one (500 trials each).
#[test]
fn a3_explicit_bound_dominates_every_configuration() {
    let mut checked = 0;
    for c in 0..10u64 {
        let d = 4 + ((3 * c) as usize % 13); // 4..=16
        let k = (1 + (c as usize % 4)).min(d - 1).min(4);
        let m = d + 8 + 4 * c as usize;
        let gap = 1.5 + 0.25 * (c as f64);
        let sigma: Vec<f64> = (0..d).map(|i| gap * (d - i) as f64).collect();
        let profile = GapProfile::new(sigma.clone(), m).unwrap();
        let weights = SpectralWeights::subspace(d, k).unwrap();

        // Largest T the gap assumption allows, shrunk off the boundary, then
        // capped by the small-perturbation default.
        let delta = bounds::delta_of(&profile, &weights).unwrap();
        assert!(delta.is_valid());
        let t_assumption =
            (gap / (8.0 * (m as f64).sqrt() * (1.0 / delta.value).ln())).powi(2);
        let t_small = spectral_core::experiments::small_perturbation_noise(&profile, k).unwrap();
        let t = 0.99 * t_assumption.min(t_small);
        let report = bounds::check_assumption(&profile, k, t, &weights).unwrap();
        assert!(report.satisfied, "config {c} must satisfy the gap assumption");

        let spec = MatrixSpec {
            m,
            d,
            profile: SigmaProfile::Explicit(sigma),
            rotation_seed: 300 + c,
        };
        let a = spectral_core::experiments::gen_matrix(&spec).unwrap();
        let factors = linalg::svd(&a).unwrap();
        let truth = mechanism::subspace_truth(&factors, k).unwrap();
        let sq: Vec<f64> = map_trials(500, |i| {
            let cfg = NoiseConfig::new(t, derive_seed(303 + c, "trial", i as u64)).unwrap();
            let r = mechanism::release_subspace_with(&truth, &a, cfg).unwrap();
            r.error_frobenius.unwrap().powi(2)
        });
        let (mean_sq, se_sq) = mean_stderr(&sq);
        let bound = bounds::weighted_gram_bound(&profile, &weights, t).unwrap();
        let explicit_sq = bound.explicit_constant.unwrap().powi(2);
        assert!(
            mean_sq + 3.0 * se_sq <= explicit_sq,
            "config {c} (d={d}, k={k}, m={m}, T={t:.3e}): {mean_sq:.3e} + 3se > {explicit_sq:.3e}"
        );
        checked += 1;
    }
    verdict(
        "explicit-constant bound domination",
        checked == 10,
        &format!("{checked}/10 configurations dominated"),
    );
}

/// Row sweep {100,200,400,800} at d=10: fitted log-log slope of the
/// empirical subspace error in [-0.15, 0.15]. Column sweep {8,16,32,64} at
/// m=512: slope in [0.35, 0.65]. 200 trials per point.
#[test]
fn a4_row_independence_and_column_scaling() {
    let t = 5e-4;
    let mut sigma10 = vec![2.0; 10];
    sigma10[0] = 10.0;
    let m_cfg = ExperimentConfig {
        spec: MatrixSpec {
            m: 100,
            d: 10,
            profile: SigmaProfile::Explicit(sigma10),
            rotation_seed: 41,
        },
        k: 1,
        t_values: vec![t],
        trials: 200,
        seed: 404,
        mode: ExperimentMode::ScalingM,
        sweep_points: vec![100, 200, 400, 800],
        bounds_requested: BTreeSet::new(),
    };
    let m_study = run_scaling_study(&m_cfg).unwrap();
    let m_slope = m_study.empirical.slope;

    let d_cfg = ExperimentConfig {
        spec: MatrixSpec {
            m: 512,
            d: 8,
            profile: SigmaProfile::Explicit(vec![10.0, 2.0]),
            rotation_seed: 42,
        },
        k: 1,
        t_values: vec![t],
        trials: 200,
        seed: 405,
        mode: ExperimentMode::ScalingD,
        sweep_points: vec![8, 16, 32, 64],
        bounds_requested: BTreeSet::new(),
    };
    let d_study = run_scaling_study(&d_cfg).unwrap();
    let d_slope = d_study.empirical.slope;

    let pass = (-0.15..=0.15).contains(&m_slope)
        && (0.35..=0.65).contains(&d_slope)
        && (m_study.reference.slope - 0.5).abs() < 1e-9;
    verdict(
        "row-independence and column scaling",
        pass,
        &format!(
            "m-slope={m_slope:.4} (want [-0.15, 0.15]), d-slope={d_slope:.4} (want [0.35, 0.65]), reference slope={:.4}",
            m_study.reference.slope
        ),
    );
}

/// 500 integrator paths vs. 500 exact direct paths for diag(10,4) in 20×2 at
/// T = 0.01, dt = 1e-4: mean and variance of both singular values agree
/// within 3 Monte Carlo standard errors.
#[test]
fn a5_dyson_bessel_integrator_matches_exact_law() {
    let a = diag_embedded(&[10.0, 4.0], 20);
    let horizon = 0.01;
    let n = 500usize;
    let sde: Vec<DVector<f64>> = map_trials(n, |p| {
        let mut cfg =
            SdeConfig::new(1e-4, horizon, 20, derive_seed(505, "sde", p as u64)).unwrap();
        cfg.n_checkpoints = 1;
        let traj = simulate(&a, &cfg).unwrap();
        traj.last().unwrap().sigma.clone()
    });
    let exact: Vec<DVector<f64>> = map_trials(n, |p| {
        let path = direct_path(&a, horizon, 1, derive_seed(506, "direct", p as u64)).unwrap();
        path[0].1.singular_values.clone()
    });
    let mut detail = String::new();
    let mut pass = true;
    for i in 0..2 {
        let xs: Vec<f64> = sde.iter().map(|s| s[i]).collect();
        let ys: Vec<f64> = exact.iter().map(|s| s[i]).collect();
        let (mx, sex) = mean_stderr(&xs);
        let (my, sey) = mean_stderr(&ys);
        let mean_gap = (mx - my).abs();
        let mean_tol = 3.0 * (sex * sex + sey * sey).sqrt();
        let var = |v: &[f64], m: f64| {
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
        };
        let (vx, vy) = (var(&xs, mx), var(&ys, my));
        // Standard error of a sample variance under approximate normality.
        let sev = |v: f64| v * (2.0 / (n as f64 - 1.0)).sqrt();
        let var_gap = (vx - vy).abs();
        let var_tol = 3.0 * (sev(vx).powi(2) + sev(vy).powi(2)).sqrt();
        pass &= mean_gap <= mean_tol && var_gap <= var_tol;
        detail.push_str(&format!(
            "sigma_{}: mean gap {mean_gap:.2e} (tol {mean_tol:.2e}), var gap {var_gap:.2e} (tol {var_tol:.2e}); ",
            i + 1
        ));
    }
    verdict("integrator matches the exact path law", pass, &detail);
}

/// dt-halving regression of the one-step weighted-Gram consistency error
/// over dt ∈ {1e-3, 1e-4, 1e-5, 1e-6} with shared increments: measured
/// order at least 0.9.
#[test]
fn a6_weighted_gram_one_step_consistency_order() {
    let raw_gram = |v: &DMatrix<f64>, w: &SpectralWeights| -> DMatrix<f64> {
        let mut scaled = v.clone();
        for j in 0..v.ncols() {
            let g = w.gamma()[j];
            scaled.column_mut(j).scale_mut(g * g);
        }
        scaled * v.transpose()
    };
    let spec = MatrixSpec {
        m: 12,
        d: 3,
        profile: SigmaProfile::Explicit(vec![8.0, 4.0, 1.5]),
        rotation_seed: 606,
    };
    let a = spectral_core::experiments::gen_matrix(&spec).unwrap();
    let f = linalg::svd(&a).unwrap();
    let state = SdeState {
        t: 0.0,
        sigma: f.singular_values.clone(),
        frame: f.right.clone(),
        step_count: 0,
    };
    let w = SpectralWeights::subspace(3, 1).unwrap();
    let mut sampler = NormalSampler::from_seed(607);
    let unit = BrownianIncrements::sample(3, 1.0, &mut sampler);
    let mut cfg = SdeConfig::new(1.0, 1.0, 12, 0).unwrap();
    cfg.collision_floor = Some(1e-12);
    cfg.reortho_every = usize::MAX;
    let mut pts = Vec::new();
    for exp in [3i32, 4, 5, 6] {
        let dt = 10f64.powi(-exp);
        let inc = BrownianIncrements {
            dt,
            diag: unit.diag.scale(dt.sqrt()),
            skew: unit.skew.scale(dt.sqrt()),
        };
        let mut c = cfg;
        c.dt = dt;
        let next = spectral_core::dyson_bessel::step(&state, &c, &inc).unwrap();
        let direct = raw_gram(&next.frame, &w) - raw_gram(&state.frame, &w);
        let predicted = weighted_gram_increment(&state, &w, &inc, dt).unwrap();
        pts.push((dt, (direct - predicted).norm()));
    }
    let fit = fit_log_slope(&pts).unwrap();
    let pass = fit.slope >= 0.9;
    verdict(
        "one-step weighted-Gram consistency order",
        pass,
        &format!(
            "measured order {:.3} from errors {:?}",
            fit.slope,
            pts.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    );
}

/// Along 1000 exact paths under a gap-assumption-satisfying profile, the
/// fraction of paths where any top-pair separation drops below half its
/// initial value is within the binomial envelope of δ, and on the
/// non-violating paths every coupling coefficient stays below 4 over the
/// initial gap.
#[test]
fn a7_gap_and_coupling_stability_along_paths() {
    let sigma = [10.0f64, 2.0];
    let a = diag_embedded(&sigma, 4);
    let profile = GapProfile::new(sigma.to_vec(), 4).unwrap();
    let weights = SpectralWeights::subspace(2, 1).unwrap();
    let t = 0.005;
    let report = bounds::check_assumption(&profile, 1, t, &weights).unwrap();
    assert!(report.satisfied, "profile must satisfy the gap assumption");
    let delta = report.delta;
    let n = 1000usize;
    let half_gap = 0.5 * (sigma[0] - sigma[1]);
    let coupling_cap = 4.0 / (sigma[0] - sigma[1]);
    let outcomes: Vec<(bool, bool)> = map_trials(n, |p| {
        let path = direct_path(&a, t, 8, derive_seed(707, "paths", p as u64)).unwrap();
        let mut violated = false;
        let mut coupling_ok = true;
        for (_, f) in &path {
            let s = &f.singular_values;
            if s[0] - s[1] < half_gap {
                violated = true;
            } else {
                coupling_ok &=
                    bounds::coupling_coefficient(s[0], s[1]) <= coupling_cap + 1e-12;
            }
        }
        (violated, coupling_ok)
    });
    let violations = outcomes.iter().filter(|o| o.0).count();
    let coupling_failures = outcomes.iter().filter(|o| !o.0 && !o.1).count();
    let freq = violations as f64 / n as f64;
    let allowed = delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt();
    let pass = freq <= allowed && coupling_failures == 0;
    verdict(
        "gap halving and coupling cap along paths",
        pass,
        &format!(
            "violation freq {freq} (allowed {allowed:.3e}), coupling failures {coupling_failures}"
        ),
    );
}

/// The same experiment run in a 1-thread pool and a 4-thread pool emits
/// byte-identical CSV and JSON reports.
#[test]
#[cfg(feature = "parallel")]
fn a8_reports_are_identical_across_thread_counts() {
    let cfg = ExperimentConfig {
        spec: MatrixSpec {
            m: 40,
            d: 3,
            profile: SigmaProfile::Explicit(vec![9.0, 4.0, 1.0]),
            rotation_seed: 88,
        },
        k: 1,
        t_values: vec![1e-5, 1e-4],
        trials: 64,
        seed: 808,
        mode: ExperimentMode::Subspace,
        sweep_points: Vec::new(),
        bounds_requested: BTreeSet::new(),
    };
    let run_in_pool = |threads: usize| -> (String, String) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let summaries = run_subspace_experiment(&cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let files = report::emit_report(&summaries, dir.path(), "det").unwrap();
            (
                std::fs::read_to_string(&files.csv).unwrap(),
                std::fs::read_to_string(&files.json).unwrap(),
            )
        })
    };
    let (csv1, json1) = run_in_pool(1);
    let (csv4, json4) = run_in_pool(4);
    let pass = csv1 == csv4 && json1 == json4;
    verdict(
        "thread-count determinism",
        pass,
        &format!(
            "csv {} bytes, json {} bytes, identical across 1 and 4 threads: {pass}",
            csv1.len(),
            json1.len()
        ),
    );
}
