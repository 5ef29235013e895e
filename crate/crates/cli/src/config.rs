//! TOML run configuration and the flag/env/file precedence rules.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rmps_core::compress::DEFAULT_SWEEP_TOL;
use rmps_core::model::{ModelKind, Sigma, SigmaMode, SpinModel};
use rmps_core::sampler::{SamplerConfig, DEFAULT_CHECKPOINTS, DEFAULT_RECORD_EVERY};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub model: ModelSection,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    #[serde(rename = "N")]
    pub sites: usize,
    #[serde(rename = "J", default = "one")]
    pub coupling: f64,
    pub h: Option<f64>,
    pub g: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SigmaValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub chi: usize,
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    pub u: Option<f64>,
    pub sigma: Option<SigmaValue>,
    pub sigma_mode: Option<String>,
    pub iterations: usize,
    pub samples: usize,
    pub compress_tol: Option<f64>,
    pub record_every: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Values given on the command line or through the environment.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub sigma_mode: Option<SigmaMode>,
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub sampler: SamplerConfig,
    pub output_dir: PathBuf,
    /// 0 means the available parallelism.
    pub threads: usize,
}

pub fn parse_sigma_mode(text: &str) -> Result<SigmaMode, CliError> {
    match text {
        "bound" => Ok(SigmaMode::Bound),
        "paper" => Ok(SigmaMode::Paper),
        "paper-quarter" => Ok(SigmaMode::PaperQuarter),
        other => Err(CliError::invalid(
            "sigma_mode",
            format!("expected bound, paper or paper-quarter, got `{other}`"),
        )),
    }
}

fn finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::invalid(name, format!("must be finite, got {x}")))
    }
}

pub fn load(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("config {}: {}", path.display(), e.message())))
}

impl RunConfigFile {
    pub fn model(&self) -> Result<SpinModel, CliError> {
        let m = &self.model;
        if m.sites < 2 {
            return Err(CliError::invalid(
                "model.N",
                format!("need at least 2 sites, got {}", m.sites),
            ));
        }
        let coupling = finite("model.J", m.coupling)?;
        let model = match m.kind.as_str() {
            "heisenberg" => {
                if m.g.is_some() {
                    return Err(CliError::invalid(
                        "model.g",
                        "the Heisenberg model takes `h`, not `g`",
                    ));
                }
                SpinModel::new(
                    ModelKind::Heisenberg,
                    m.sites,
                    coupling,
                    finite("model.h", m.h.unwrap_or(0.0))?,
                )
            }
            "tfi" | "transverse_ising" => {
                if m.h.is_some() {
                    return Err(CliError::invalid(
                        "model.h",
                        "the transverse Ising model takes `g`, not `h`",
                    ));
                }
                SpinModel::new(
                    ModelKind::TransverseIsing,
                    m.sites,
                    coupling,
                    finite("model.g", m.g.unwrap_or(1.0))?,
                )
            }
            other => {
                return Err(CliError::invalid(
                    "model.kind",
                    format!("expected heisenberg or tfi, got `{other}`"),
                ))
            }
        };
        model.map_err(CliError::from_core)
    }

    /// Applies the precedence flag > environment > file > default.
    pub fn resolve(&self, overrides: &Overrides) -> Result<Resolved, CliError> {
        let model = self.model()?;
        let s = &self.sampler;
        let mut config = match (s.energy, s.u) {
            (Some(_), Some(_)) => {
                return Err(CliError::invalid(
                    "sampler.E",
                    "set exactly one of `E` and `u`, not both",
                ))
            }
            (None, None) => {
                return Err(CliError::invalid(
                    "sampler.E",
                    "set exactly one of `E` and `u`",
                ))
            }
            (Some(e), None) => SamplerConfig::new(
                model,
                finite("sampler.E", e)?,
                s.chi,
                s.iterations,
                s.samples,
            ),
            (None, Some(u)) => SamplerConfig::with_density(
                model,
                finite("sampler.u", u)?,
                s.chi,
                s.iterations,
                s.samples,
            ),
        };
        let file_mode = s.sigma_mode.as_deref().map(parse_sigma_mode).transpose()?;
        config.sigma = match (&s.sigma, overrides.sigma_mode) {
            (_, Some(mode)) => Sigma::Auto(mode),
            (None, None) => Sigma::Auto(file_mode.unwrap_or(SigmaMode::Bound)),
            (Some(SigmaValue::Text(t)), None) if t == "auto" => {
                Sigma::Auto(file_mode.unwrap_or(SigmaMode::Bound))
            }
            (Some(SigmaValue::Text(t)), None) => {
                return Err(CliError::invalid(
                    "sampler.sigma",
                    format!("expected a number or \"auto\", got `{t}`"),
                ))
            }
            (Some(SigmaValue::Number(x)), None) => {
                if !(*x > 0.0) || !x.is_finite() {
                    return Err(CliError::invalid(
                        "sampler.sigma",
                        format!("must be positive and finite, got {x}"),
                    ));
                }
                Sigma::Fixed(*x)
            }
        };
        config.compress_tol = finite(
            "sampler.compress_tol",
            s.compress_tol.unwrap_or(DEFAULT_SWEEP_TOL),
        )?;
        config.record_every = s.record_every.unwrap_or(DEFAULT_RECORD_EVERY);
        config.checkpoints = s
            .checkpoints
            .clone()
            .unwrap_or_else(|| DEFAULT_CHECKPOINTS.to_vec());
        config.master_seed = overrides.seed.or(self.run.seed).unwrap_or(0);
        config.validate().map_err(CliError::from_core)?;
        Ok(Resolved {
            sampler: config,
            output_dir: overrides
                .out
                .clone()
                .or_else(|| self.run.output_dir.clone())
                .unwrap_or_else(|| ".".into()),
            threads: overrides.threads.or(self.run.threads).unwrap_or(0),
        })
    }
}
