//! Report emission: a flat CSV (one row per configuration, fixed column
//! order), a full-detail JSON document, and plot-data files of
//! `x,y,yerr` triples.
//!
//! The CSV schema is the 17 base columns below followed by three columns
//! (`<kind>_sans`, `<kind>_explicit`, `<kind>_ratio`) for each bound kind in
//! [`BoundKind::ALL`] order, for every mode; bounds a mode does not produce
//! stay empty. Non-finite values are spelled `inf`, `-inf`, `nan`. The JSON
//! document deserializes back to the exact same scalars (bit-for-bit), which
//! the round-trip test checks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bounds::BoundKind;
use crate::error::{Error, Result};
use crate::floats::csv_cell;

use super::{ExperimentSummary, ScalingStudy};

pub const BASE_COLUMNS: [&str; 17] = [
    "mode",
    "m",
    "d",
    "k",
    "T",
    "trials",
    "seed",
    "profile",
    "empirical_mean",
    "empirical_stderr",
    "empirical_mean_sq",
    "empirical_stderr_sq",
    "assumption_valid",
    "assumption_satisfied",
    "delta",
    "required_gap",
    "min_top_gap",
];

/// The full CSV header, in order.
pub fn report_columns() -> Vec<String> {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for kind in BoundKind::ALL {
        cols.push(format!("{}_sans", kind.label()));
        cols.push(format!("{}_explicit", kind.label()));
        cols.push(format!("{}_ratio", kind.label()));
    }
    cols
}

fn summary_row(s: &ExperimentSummary) -> Vec<String> {
    let mut row = vec![
        s.mode.label().to_string(),
        s.m.to_string(),
        s.d.to_string(),
        s.k.to_string(),
        csv_cell(s.noise_variance),
        s.trials.to_string(),
        s.seed.to_string(),
        s.profile.clone(),
        csv_cell(s.empirical_mean),
        csv_cell(s.empirical_stderr),
        csv_cell(s.empirical_mean_sq),
        csv_cell(s.empirical_stderr_sq),
    ];
    match &s.assumption {
        Some(a) => {
            row.push((a.validity == crate::bounds::DeltaValidity::Valid).to_string());
            row.push(a.satisfied.to_string());
            row.push(csv_cell(a.delta));
            row.push(csv_cell(a.required_gap));
            row.push(csv_cell(
                a.gaps.iter().copied().fold(f64::INFINITY, f64::min),
            ));
        }
        None => row.extend(std::iter::repeat_n(String::new(), 5)),
    }
    for kind in BoundKind::ALL {
        match s.bound(kind) {
            Some(b) => {
                row.push(csv_cell(b.bound.sans_constant));
                row.push(b.bound.explicit_constant.map(csv_cell).unwrap_or_default());
                row.push(b.ratio.map(csv_cell).unwrap_or_default());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
    }
    row
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plot: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

pub fn summaries_csv(summaries: &[ExperimentSummary]) -> String {
    let mut out = report_columns().join(",");
    out.push('\n');
    for s in summaries {
        out.push_str(&summary_row(s).join(","));
        out.push('\n');
    }
    out
}

fn plot_csv<'a>(
    points: impl Iterator<Item = (f64, &'a ExperimentSummary)>,
    x_name: &str,
) -> String {
    let mut out = format!("{x_name},empirical_mean,empirical_stderr\n");
    for (x, s) in points {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_cell(x),
            csv_cell(s.empirical_mean),
            csv_cell(s.empirical_stderr)
        ));
    }
    out
}

/// Emit `<stem>.csv`, `<stem>.json`, `<stem>_plot.csv` for a batch of
/// summaries (the plot file uses the noise variance as the x axis).
pub fn emit_report(
    summaries: &[ExperimentSummary],
    out_dir: &Path,
    stem: &str,
) -> Result<ReportFiles> {
    if summaries.is_empty() {
        return Err(Error::Input("no summaries to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_owned(),
        source: e,
    })?;
    let files = ReportFiles {
        csv: out_dir.join(format!("{stem}.csv")),
        json: out_dir.join(format!("{stem}.json")),
        plot: out_dir.join(format!("{stem}_plot.csv")),
    };
    write_file(&files.csv, &summaries_csv(summaries))?;
    let json = serde_json::to_string_pretty(summaries)
        .map_err(|e| Error::Numeric(format!("JSON serialization failed: {e}")))?;
    write_file(&files.json, &(json + "\n"))?;
    write_file(
        &files.plot,
        &plot_csv(
            summaries.iter().map(|s| (s.noise_variance, s)),
            "T",
        ),
    )?;
    Ok(files)
}

/// Emit a scaling study: per-point rows in the standard schema, the full
/// study as JSON (including both slope fits), and a plot file over the swept
/// dimension.
pub fn emit_scaling_report(
    study: &ScalingStudy,
    out_dir: &Path,
    stem: &str,
) -> Result<ReportFiles> {
    if study.points.is_empty() {
        return Err(Error::Input("no summaries to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_owned(),
        source: e,
    })?;
    let files = ReportFiles {
        csv: out_dir.join(format!("{stem}.csv")),
        json: out_dir.join(format!("{stem}.json")),
        plot: out_dir.join(format!("{stem}_plot.csv")),
    };
    write_file(&files.csv, &summaries_csv(&study.points))?;
    let json = serde_json::to_string_pretty(study)
        .map_err(|e| Error::Numeric(format!("JSON serialization failed: {e}")))?;
    write_file(&files.json, &(json + "\n"))?;
    let xs = study.sweep.iter().map(|&p| p as f64);
    write_file(
        &files.plot,
        &plot_csv(xs.zip(study.points.iter()), "swept_dimension"),
    )?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{
        ExperimentConfig, ExperimentMode, MatrixSpec, SigmaProfile,
    };
    use std::collections::BTreeSet;

    fn tiny_summaries() -> Vec<ExperimentSummary> {
        let cfg = ExperimentConfig {
            spec: MatrixSpec {
                m: 12,
                d: 3,
                profile: SigmaProfile::Explicit(vec![8.0, 3.0, 1.0]),
                rotation_seed: 4,
            },
            k: 1,
            t_values: vec![1e-5, 1e-4],
            trials: 8,
            seed: 21,
            mode: ExperimentMode::Subspace,
            sweep_points: Vec::new(),
            bounds_requested: BTreeSet::new(),
        };
        crate::experiments::run_subspace_experiment(&cfg).unwrap()
    }

    #[test]
    fn csv_has_the_documented_schema_for_all_modes() {
        let mut summaries = tiny_summaries();
        let cov_cfg = ExperimentConfig {
            spec: MatrixSpec {
                m: 12,
                d: 3,
                profile: SigmaProfile::Explicit(vec![8.0, 3.0, 1.0]),
                rotation_seed: 4,
            },
            k: 3,
            t_values: vec![1e-5],
            trials: 8,
            seed: 21,
            mode: ExperimentMode::Covariance,
            sweep_points: Vec::new(),
            bounds_requested: BTreeSet::new(),
        };
        summaries.extend(crate::experiments::run_covariance_experiment(&cov_cfg).unwrap());
        let csv = summaries_csv(&summaries);
        let want = report_columns().len();
        for (i, line) in csv.lines().enumerate() {
            let n = line.split(',').count();
            assert_eq!(n, want, "row {i} has {n} fields, schema says {want}");
        }
        assert_eq!(csv.lines().count(), summaries.len() + 1);
    }

    #[test]
    fn json_round_trips_every_scalar_bit_exactly() {
        let summaries = tiny_summaries();
        let json = serde_json::to_string_pretty(&summaries).unwrap();
        let back: Vec<ExperimentSummary> = serde_json::from_str(&json).unwrap();
        let again = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(json, again);
        assert_eq!(
            summaries[0].empirical_mean.to_bits(),
            back[0].empirical_mean.to_bits()
        );
    }

    #[test]
    fn emit_writes_the_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let summaries = tiny_summaries();
        let files = emit_report(&summaries, dir.path(), "run").unwrap();
        assert!(files.csv.exists() && files.json.exists() && files.plot.exists());
        let plot = std::fs::read_to_string(&files.plot).unwrap();
        assert!(plot.starts_with("T,empirical_mean,empirical_stderr\n"));
        assert_eq!(plot.lines().count(), summaries.len() + 1);
        assert!(emit_report(&[], dir.path(), "empty").is_err());
    }
}
