//! Flat key-value experiment configuration files.
//!
//! One `key = value` pair per line, `#` starts a comment. Keys mirror the
//! experiment configuration: `mode`, `m`, `d`, `k`, `t` (comma list allowed),
//! `trials`, `seed`, `profile`, `sigma`, `sigma1`, `ratio`, `gap`,
//! `rotation_seed`, `sweep_points`, `bounds`. Command-line flags override
//! file values.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use spectral_core::bounds::BoundKind;
use spectral_core::experiments::{ExperimentConfig, ExperimentMode, MatrixSpec, SigmaProfile};
use spectral_core::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct PartialConfig {
    pub mode: Option<String>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub t: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub profile: Option<String>,
    pub sigma: Option<Vec<f64>>,
    pub sigma1: Option<f64>,
    pub ratio: Option<f64>,
    pub gap: Option<f64>,
    pub rotation_seed: Option<u64>,
    pub sweep_points: Option<Vec<usize>>,
    pub bounds: Option<Vec<String>>,
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Input(format!("config key '{key}': cannot parse '{p}'")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Input(format!("config key '{key}': cannot parse '{value}'")))
}

pub fn parse_config_text(text: &str) -> Result<PartialConfig> {
    let mut cfg = PartialConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Input(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "mode" => cfg.mode = Some(value.to_string()),
            "m" => cfg.m = Some(parse_scalar(value, key)?),
            "d" => cfg.d = Some(parse_scalar(value, key)?),
            "k" => cfg.k = Some(parse_scalar(value, key)?),
            "t" | "T" => cfg.t = Some(parse_list(value, key)?),
            "trials" => cfg.trials = Some(parse_scalar(value, key)?),
            "seed" => cfg.seed = Some(parse_scalar(value, key)?),
            "profile" => cfg.profile = Some(value.to_string()),
            "sigma" => cfg.sigma = Some(parse_list(value, key)?),
            "sigma1" => cfg.sigma1 = Some(parse_scalar(value, key)?),
            "ratio" => cfg.ratio = Some(parse_scalar(value, key)?),
            "gap" => cfg.gap = Some(parse_scalar(value, key)?),
            "rotation_seed" => cfg.rotation_seed = Some(parse_scalar(value, key)?),
            "sweep_points" => cfg.sweep_points = Some(parse_list(value, key)?),
            "bounds" => {
                cfg.bounds = Some(value.split(',').map(|s| s.trim().to_string()).collect())
            }
            other => {
                return Err(Error::Input(format!(
                    "config line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn parse_config_file(path: &Path) -> Result<PartialConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    parse_config_text(&text)
}

impl PartialConfig {
    /// Overlay `self` (higher priority, e.g. command-line flags) on `base`.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            mode: self.mode.or(base.mode),
            m: self.m.or(base.m),
            d: self.d.or(base.d),
            k: self.k.or(base.k),
            t: self.t.or(base.t),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            profile: self.profile.or(base.profile),
            sigma: self.sigma.or(base.sigma),
            sigma1: self.sigma1.or(base.sigma1),
            ratio: self.ratio.or(base.ratio),
            gap: self.gap.or(base.gap),
            rotation_seed: self.rotation_seed.or(base.rotation_seed),
            sweep_points: self.sweep_points.or(base.sweep_points),
            bounds: self.bounds.or(base.bounds),
        }
    }

    fn build_profile(&self, d: usize) -> Result<SigmaProfile> {
        let name = self.profile.as_deref().unwrap_or(if self.sigma.is_some() {
            "explicit"
        } else {
            "exponential"
        });
        match name {
            "explicit" => {
                let sigma = self
                    .sigma
                    .clone()
                    .ok_or_else(|| Error::Input("explicit profile needs 'sigma'".into()))?;
                Ok(SigmaProfile::Explicit(sigma))
            }
            "exponential" => Ok(SigmaProfile::Exponential {
                sigma1: self
                    .sigma1
                    .ok_or_else(|| Error::Input("exponential profile needs 'sigma1'".into()))?,
                ratio: self
                    .ratio
                    .ok_or_else(|| Error::Input("exponential profile needs 'ratio'".into()))?,
            }),
            "linear" => Ok(SigmaProfile::Linear {
                sigma1: self
                    .sigma1
                    .ok_or_else(|| Error::Input("linear profile needs 'sigma1'".into()))?,
                gap: self
                    .gap
                    .ok_or_else(|| Error::Input("linear profile needs 'gap'".into()))?,
            }),
        other => Err(Error::Input(format!(
                "unknown profile '{other}' (expected explicit|exponential|linear)"
            ))),
        }
        .and_then(|p| {
            p.materialize(d)?;
            Ok(p)
        })
    }

    /// Assemble a full experiment configuration. `root_seed` fills in when
    /// no seed was given; a missing noise variance defaults to the
    /// small-perturbation rule for the profile.
    pub fn build(&self, root_seed: u64) -> Result<ExperimentConfig> {
        let mode: ExperimentMode = self
            .mode
            .as_deref()
            .ok_or_else(|| Error::Input("missing 'mode'".into()))?
            .parse()?;
        let d = self
            .d
            .or_else(|| self.sigma.as_ref().map(|s| s.len()))
            .ok_or_else(|| Error::Input("missing 'd'".into()))?;
        let m = self.m.ok_or_else(|| Error::Input("missing 'm'".into()))?;
        let k = self.k.ok_or_else(|| Error::Input("missing 'k'".into()))?;
        let seed = self.seed.unwrap_or(root_seed);
        let profile = self.build_profile(d)?;
        let spec = MatrixSpec {
            m,
            d,
            profile,
            rotation_seed: self.rotation_seed.unwrap_or(seed),
        };
        let t_values = match &self.t {
            Some(ts) => ts.clone(),
            None => {
                let sigma = spec.profile.materialize(d)?;
                let gp = spectral_core::bounds::GapProfile::new(sigma, m)?;
                vec![spectral_core::experiments::small_perturbation_noise(
                    &gp,
                    k.min(d.saturating_sub(1)).max(1),
                )?]
            }
        };
        let mut bounds_requested = BTreeSet::new();
        if let Some(names) = &self.bounds {
            for n in names {
                bounds_requested.insert(n.parse::<BoundKind>()?);
            }
        }
        Ok(ExperimentConfig {
            spec,
            k,
            t_values,
            trials: self.trials.unwrap_or(500),
            seed,
            mode,
            sweep_points: self.sweep_points.clone().unwrap_or_default(),
            bounds_requested,
        })
    }
}
