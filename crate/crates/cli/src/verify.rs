//! Sampler-against-oracle checks for chains small enough to diagonalize.

use serde::Serialize;

use rmps_core::ensemble::{run_ensemble, ObservableRequest};
use rmps_core::model::ModelKind;
use rmps_core::mps::{to_dense, DEFAULT_DENSE_CAP};
use rmps_core::oracle::{
    canonical_average, dense_power_replay, diagonalize, filtered_average, temperature_for_energy,
    Observable,
};
use rmps_core::sampler::{Sampler, SamplerConfig};

use crate::CliError;

/// Largest chain `verify` accepts.
pub const MAX_SITES: usize = 12;
/// Samples replayed densely.
const REPLAY_SAMPLES: u64 = 3;
const REPLAY_TOL: f64 = 1e-8;
/// Allowed deviation from the oracle, in standard errors.
const SIGMA_COUNT: f64 = 3.0;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub sites: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run(config: &SamplerConfig) -> Result<Report, CliError> {
    let n = config.model.sites;
    if n > MAX_SITES {
        return Err(CliError::Invalid(format!(
            "model.N = {n} exceeds the dense-verification cap of {MAX_SITES} sites; use N <= {MAX_SITES}"
        )));
    }
    let checks = vec![
        replay_check(config)?,
        filtered_check(config)?,
        canonical_check(config)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(Report {
        sites: n,
        checks,
        passed,
    })
}

/// Lossless bond dimension and tight sweeps, so the MPS iteration must
/// reproduce the dense one.
fn replay_check(config: &SamplerConfig) -> Result<Check, CliError> {
    let mut exact = config.clone();
    exact.chi = config.chi.max(1 << (config.model.sites / 2));
    exact.compress_tol = exact.compress_tol.min(1e-12);
    let sampler = Sampler::new(exact.clone()).map_err(CliError::from_core)?;
    let mut worst = 0.0f64;
    let count = REPLAY_SAMPLES.min(config.samples as u64);
    for i in 0..count {
        let initial = to_dense(
            &sampler.initial_state(i).map_err(CliError::from_core)?,
            DEFAULT_DENSE_CAP,
        )
        .map_err(CliError::from_core)?;
        let replay = dense_power_replay(
            &initial,
            &exact.model,
            exact.energy,
            sampler.sigma(),
            exact.iterations,
        )
        .map_err(CliError::from_core)?;
        let out = sampler.run_sample(i).map_err(CliError::from_core)?;
        for r in &out.trace.records {
            worst = worst.max((r.energy - replay.energies[r.k]).abs());
        }
    }
    Ok(Check {
        name: "dense_replay",
        passed: worst <= REPLAY_TOL,
        residual: Some(worst),
        tolerance: Some(REPLAY_TOL),
        detail: format!(
            "{count} samples at chi = {}, largest |E_mps - E_dense| over recorded k",
            exact.chi
        ),
    })
}

fn filtered_check(config: &SamplerConfig) -> Result<Check, CliError> {
    let spectrum = diagonalize(&config.model).map_err(CliError::from_core)?;
    let request = ObservableRequest {
        magnetization: true,
        correlations: Vec::new(),
    };
    let result = run_ensemble(config, &request).map_err(CliError::from_core)?;
    let sigma = result.metadata.sigma;
    let exact = filtered_average(
        &spectrum,
        config.energy,
        sigma,
        config.iterations,
        &Observable::magnetization(config.model.sites),
    )
    .map_err(CliError::from_core)?;
    let m = result
        .magnetization
        .ok_or_else(|| CliError::Runtime("no magnetization recorded".into()))?;
    let Some(stderr) = m.stderr else {
        return Ok(Check {
            name: "filtered_average",
            passed: false,
            residual: Some((m.mean - exact).abs()),
            tolerance: None,
            detail: "needs at least two samples for an error bar".into(),
        });
    };
    let deviation = (m.mean - exact).abs();
    Ok(Check {
        name: "filtered_average",
        passed: deviation <= SIGMA_COUNT * stderr,
        residual: Some(deviation),
        tolerance: Some(SIGMA_COUNT * stderr),
        detail: format!(
            "m_z ensemble {} +- {stderr} over {} samples, oracle {exact}",
            m.mean, m.count
        ),
    })
}

/// Canonical `m_z(h)` at the temperature matching `E` at the configured field
/// must not decrease in `h`.
fn canonical_check(config: &SamplerConfig) -> Result<Check, CliError> {
    if config.model.kind != ModelKind::Heisenberg {
        return Ok(Check {
            name: "canonical_monotone",
            passed: true,
            residual: None,
            tolerance: None,
            detail: "skipped: defined for the Heisenberg chain".into(),
        });
    }
    let n = config.model.sites;
    let base = diagonalize(&config.model).map_err(CliError::from_core)?;
    let temperature = match temperature_for_energy(&base, config.energy) {
        Ok(t) => t,
        Err(_) => {
            return Ok(Check {
                name: "canonical_monotone",
                passed: true,
                residual: None,
                tolerance: None,
                detail: format!(
                    "skipped: E = {} is not reached at any positive temperature",
                    config.energy
                ),
            })
        }
    };
    let mut curve = Vec::new();
    for g in 0..=10 {
        let h = g as f64 / 10.0;
        let spectrum = diagonalize(&config.model.with_field(h)).map_err(CliError::from_core)?;
        curve.push(
            canonical_average(&spectrum, temperature, &Observable::magnetization(n))
                .map_err(CliError::from_core)?,
        );
    }
    let worst_drop = curve.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    Ok(Check {
        name: "canonical_monotone",
        passed: worst_drop <= 1e-12,
        residual: Some(worst_drop),
        tolerance: Some(1e-12),
        detail: format!(
            "canonical m_z(h), h = 0..1 step 0.1, at T = {temperature} (matching E at h = {})",
            config.model.field
        ),
    })
}
