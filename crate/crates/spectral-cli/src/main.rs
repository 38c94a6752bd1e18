//! `spectral-lab`: perturbation bounds, the Gaussian release mechanism, the
//! singular value/vector diffusion, and Monte Carlo experiments from the
//! command line.
//!
//! Exit codes: 0 on success, 2 for input errors, 3 for numeric or collision
//! failures.

mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use serde::Serialize;

use spectral_core::bounds::{
    self, AssumptionReport, BoundKind, BoundValue, GapProfile, DEFAULT_BASELINE_REGIME_RATIO,
    DEFAULT_UNIFORM_GAP_RATIO,
};
use spectral_core::dyson_bessel::{simulate, SdeConfig};
use spectral_core::experiments::{
    report, run_covariance_experiment, run_scaling_study, run_subspace_experiment,
    ExperimentMode,
};
use spectral_core::linalg::{io::read_matrix_csv, io::write_matrix_csv, SpectralWeights};
use spectral_core::mechanism::{self, NoiseConfig};
use spectral_core::rng::derive_seed;
use spectral_core::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-lab", version, about)]
struct Cli {
    /// Root seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form bounds and the gap assumption for a spectrum.
    Bounds(BoundsArgs),
    /// Perturb a matrix with seeded Gaussian noise and release a projector
    /// or rank-k covariance, measuring the exact error.
    Mechanism(MechanismArgs),
    /// Integrate the coupled singular value / singular vector diffusion.
    Simulate(SimulateArgs),
    /// Monte Carlo experiment: empirical error vs. every applicable bound.
    Experiment(ExperimentArgs),
    /// Sweep rows or columns and fit the error-scaling exponent.
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Spectrum, comma separated, nonincreasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<f64>,
    /// Ambient row count.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// Noise variance per entry.
    #[arg(long = "T", alias = "t")]
    noise_variance: f64,
    /// Spectral weights: unit weights on the top k, or the singular values
    /// themselves.
    #[arg(long, value_enum, default_value_t = WeightsChoice::Subspace)]
    weights: WeightsChoice,
    /// Also evaluate the uniform-gap subspace form (refused when the gap
    /// hypothesis fails).
    #[arg(long)]
    uniform_gaps: bool,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsChoice {
    Subspace,
    Covariance,
}

#[derive(Args)]
struct MechanismArgs {
    /// Input matrix CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Noise variance per entry.
    #[arg(long = "T", alias = "t")]
    noise_variance: f64,
    #[arg(long, value_enum)]
    mode: ReleaseMode,
    /// Output JSON path; the released matrix goes to the same stem with a
    /// `.released.csv` suffix.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReleaseMode {
    Subspace,
    Covariance,
}

#[derive(Args)]
struct SimulateArgs {
    /// Input matrix CSV (the diffusion starts at its factorization).
    #[arg(long)]
    input: PathBuf,
    /// Time horizon.
    #[arg(long = "T", alias = "t")]
    horizon: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 10)]
    checkpoints: usize,
    /// Minimum allowed singular value separation (default: 1e-3 of the
    /// smallest initial gap).
    #[arg(long)]
    collision_floor: Option<f64>,
    /// Re-orthonormalize the vector frame every this many steps.
    #[arg(long, default_value_t = 10)]
    reortho_every: usize,
    /// Trajectory CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Optional sidecar CSV with the full singular-vector frame per
    /// checkpoint (row-major).
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Noise variance sweep, comma separated.
    #[arg(long = "T", alias = "t", value_delimiter = ',')]
    noise_variance: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// explicit | exponential | linear
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    rotation_seed: Option<u64>,
    /// Bound kinds to evaluate (default: all applicable).
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<String>>,
    /// Output file stem.
    #[arg(long, default_value = "experiment")]
    stem: String,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    base: ExperimentArgs,
    /// Swept dimension: rows (m) or columns (d).
    #[arg(long)]
    sweep: Option<SweepChoice>,
    /// Sweep points, comma separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepChoice {
    M,
    D,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        spectral_core::parallel::configure_threads(n);
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bounds(ref args) => run_bounds(&cli, args),
        Command::Mechanism(ref args) => run_mechanism(&cli, args),
        Command::Simulate(ref args) => run_simulate(&cli, args),
        Command::Experiment(ref args) => run_experiment(&cli, args),
        Command::Scaling(ref args) => run_scaling(&cli, args),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_owned(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

#[derive(Serialize)]
struct BoundsOutput {
    m: usize,
    d: usize,
    k: usize,
    #[serde(rename = "T", with = "spectral_core::floats")]
    noise_variance: f64,
    gamma: Vec<f64>,
    uniform_gap_ratio: f64,
    assumption: Option<AssumptionReport>,
    bounds: Vec<BoundValue>,
}

fn run_bounds(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    let profile = GapProfile::new(args.sigma.clone(), args.m)?;
    let d = profile.dim();
    let t = args.noise_variance;
    let k = args.k;
    let weights = match args.weights {
        WeightsChoice::Subspace => SpectralWeights::subspace(d, k)?,
        WeightsChoice::Covariance => SpectralWeights::from_singular_values(profile.sigma(), k)?,
    };
    let assumption = if k < d {
        bounds::check_assumption(&profile, k, t, &weights).ok()
    } else {
        None
    };
    let mut out = Vec::new();
    if k < d {
        let proxy = t.sqrt() * ((args.m as f64).sqrt() + (d as f64).sqrt());
        out.push(bounds::davis_kahan_bound(
            &profile,
            k,
            proxy,
            BoundKind::DavisKahanProxy,
        )?);
        let rank = profile
            .sigma()
            .iter()
            .filter(|s| **s > 1e-12 * profile.sigma()[0])
            .count()
            .max(1);
        out.push(bounds::orourke_vu_bound(&profile, k, rank, t)?);
        out.push(bounds::subspace_bound(
            &profile,
            k,
            t,
            false,
            DEFAULT_UNIFORM_GAP_RATIO,
        )?);
        if args.uniform_gaps {
            out.push(bounds::subspace_bound(
                &profile,
                k,
                t,
                true,
                DEFAULT_UNIFORM_GAP_RATIO,
            )?);
        }
        let (dk, ov) =
            bounds::baseline_covariance_bounds(&profile, k, t, DEFAULT_BASELINE_REGIME_RATIO)?;
        out.push(dk);
        out.push(ov);
    }
    out.push(bounds::weighted_gram_bound(&profile, &weights, t)?);
    let cov = bounds::covariance_bound(&profile, k, t)?;
    out.push(cov.rank_k);
    out.push(cov.simplified);

    let doc = BoundsOutput {
        m: args.m,
        d,
        k,
        noise_variance: t,
        gamma: weights.gamma().to_vec(),
        uniform_gap_ratio: DEFAULT_UNIFORM_GAP_RATIO,
        assumption,
        bounds: out,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Numeric(format!("JSON serialization failed: {e}")))?;
    match &args.output {
        Some(rel) => {
            let path = cli.output_dir.join(rel);
            write_text(&path, &(json + "\n"))?;
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct MechanismOutput {
    mode: &'static str,
    k: usize,
    #[serde(rename = "T", with = "spectral_core::floats")]
    noise_variance: f64,
    seed: u64,
    sigma_hat: Vec<f64>,
    #[serde(with = "spectral_core::floats")]
    error_frobenius: f64,
    released_csv_path: String,
}

fn run_mechanism(cli: &Cli, args: &MechanismArgs) -> Result<()> {
    let a = read_matrix_csv(&args.input)?;
    let seed = cli.seed;
    let cfg = NoiseConfig::new(args.noise_variance, seed)?;
    let (mode_label, result) = match args.mode {
        ReleaseMode::Subspace => ("subspace", mechanism::release_subspace(&a, args.k, cfg)?),
        ReleaseMode::Covariance => (
            "covariance",
            mechanism::release_covariance(&a, args.k, cfg)?,
        ),
    };
    let json_path = cli
        .output_dir
        .join(args.output.as_deref().unwrap_or(Path::new("mechanism.json")));
    let released_path = json_path.with_extension("released.csv");
    if let Some(parent) = json_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_owned(),
                source: e,
            })?;
        }
    }
    write_matrix_csv(&released_path, &result.released)?;
    let doc = MechanismOutput {
        mode: mode_label,
        k: args.k,
        noise_variance: args.noise_variance,
        seed,
        sigma_hat: result.perturbed_sigma.iter().copied().collect(),
        error_frobenius: result
            .error_frobenius
            .expect("release paths always measure the error"),
        released_csv_path: released_path.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Numeric(format!("JSON serialization failed: {e}")))?;
    write_text(&json_path, &(json + "\n"))?;
    println!("wrote {}", json_path.display());
    println!("wrote {}", released_path.display());
    Ok(())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let a = read_matrix_csv(&args.input)?;
    let root = cli.seed;
    if args.paths == 0 {
        return Err(Error::Input("paths must be at least 1".into()));
    }
    let mut traj_csv = String::from("path_id,t");
    for j in 1..=a.ncols() {
        traj_csv.push_str(&format!(",sigma_{j}"));
    }
    traj_csv.push('\n');
    let mut frames_csv = args.frames.as_ref().map(|_| {
        let mut h = String::from("path_id,t");
        for r in 1..=a.ncols() {
            for c in 1..=a.ncols() {
                h.push_str(&format!(",v_{r}_{c}"));
            }
        }
        h.push('\n');
        h
    });
    for p in 0..args.paths {
        let mut cfg = SdeConfig::new(args.dt, args.horizon, a.nrows(), derive_seed(root, "path", p as u64))?;
        cfg.n_checkpoints = args.checkpoints;
        cfg.collision_floor = args.collision_floor;
        cfg.reortho_every = args.reortho_every;
        let traj = simulate(&a, &cfg)?;
        for state in &traj {
            traj_csv.push_str(&format!("{p},{}", fmt17(state.t)));
            for i in 0..state.sigma.len() {
                traj_csv.push(',');
                traj_csv.push_str(&fmt17(state.sigma[i]));
            }
            traj_csv.push('\n');
            if let Some(fc) = frames_csv.as_mut() {
                fc.push_str(&format!("{p},{}", fmt17(state.t)));
                for r in 0..state.frame.nrows() {
                    for c in 0..state.frame.ncols() {
                        fc.push(',');
                        fc.push_str(&fmt17(state.frame[(r, c)]));
                    }
                }
                fc.push('\n');
            }
        }
    }
    let out_path = cli
        .output_dir
        .join(args.output.as_deref().unwrap_or(Path::new("trajectory.csv")));
    write_text(&out_path, &traj_csv)?;
    println!("wrote {}", out_path.display());
    if let (Some(rel), Some(fc)) = (&args.frames, frames_csv) {
        let fp = cli.output_dir.join(rel);
        write_text(&fp, &fc)?;
        println!("wrote {}", fp.display());
    }
    Ok(())
}

impl ExperimentArgs {
    fn partial(&self) -> config::PartialConfig {
        config::PartialConfig {
            mode: self.mode.clone(),
            m: self.m,
            d: self.d,
            k: self.k,
            t: self.noise_variance.clone(),
            trials: self.trials,
            seed: None,
            profile: self.profile.clone(),
            sigma: self.sigma.clone(),
            sigma1: self.sigma1,
            ratio: self.ratio,
            gap: self.gap,
            rotation_seed: self.rotation_seed,
            sweep_points: None,
            bounds: self.bounds.clone(),
        }
    }

    fn assemble(&self, root_seed: u64) -> Result<spectral_core::experiments::ExperimentConfig> {
        let file = match &self.config {
            Some(path) => config::parse_config_file(path)?,
            None => config::PartialConfig::default(),
        };
        self.partial().over(file).build(root_seed)
    }
}

fn run_experiment(cli: &Cli, args: &ExperimentArgs) -> Result<()> {
    let cfg = args.assemble(cli.seed)?;
    let summaries = match cfg.mode {
        ExperimentMode::Subspace => run_subspace_experiment(&cfg)?,
        ExperimentMode::Covariance => run_covariance_experiment(&cfg)?,
        other => {
            return Err(Error::Input(format!(
                "mode {} belongs to the scaling subcommand",
                other.label()
            )))
        }
    };
    for s in &summaries {
        let assumption = match &s.assumption {
            Some(a) if a.satisfied => "assumption satisfied",
            Some(_) => "assumption NOT satisfied",
            None => "assumption undefined",
        };
        println!(
            "T={:<12.3e} mean={:.6e} stderr={:.2e} ({assumption}, {:.2?})",
            s.noise_variance, s.empirical_mean, s.empirical_stderr, s.runtime
        );
    }
    let files = report::emit_report(&summaries, &cli.output_dir, &args.stem)?;
    println!("wrote {}", files.csv.display());
    println!("wrote {}", files.json.display());
    println!("wrote {}", files.plot.display());
    Ok(())
}

fn run_scaling(cli: &Cli, args: &ScalingArgs) -> Result<()> {
    let mut partial = args.base.partial();
    if let Some(sweep) = args.sweep {
        partial.mode = Some(
            match sweep {
                SweepChoice::M => "scaling_m",
                SweepChoice::D => "scaling_d",
            }
            .to_string(),
        );
    }
    partial.sweep_points = args.points.clone();
    let file = match &args.base.config {
        Some(path) => config::parse_config_file(path)?,
        None => config::PartialConfig::default(),
    };
    let cfg = partial.over(file).build(cli.seed)?;
    let study = run_scaling_study(&cfg)?;
    println!(
        "empirical slope {:.4} (95% CI [{:.4}, {:.4}]), reference slope {:.4}",
        study.empirical.slope,
        study.empirical.ci95_low,
        study.empirical.ci95_high,
        study.reference.slope
    );
    let stem = if args.base.stem == "experiment" {
        "scaling"
    } else {
        &args.base.stem
    };
    let files = report::emit_scaling_report(&study, &cli.output_dir, stem)?;
    println!("wrote {}", files.csv.display());
    println!("wrote {}", files.json.display());
    println!("wrote {}", files.plot.display());
    Ok(())
}
