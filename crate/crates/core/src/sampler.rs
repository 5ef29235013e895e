//! The filtered power iteration `|psi_{k+1}> = G |psi_k> / ||G |psi_k>||`,
//! started from a random MPS and compressed to a fixed bond dimension after
//! every step.

use serde::{Deserialize, Serialize};

use crate::compress::{apply_with_gram, CompressOptions, DEFAULT_SWEEP_TOL};
use crate::error::{Error, Result};
use crate::model::{Sigma, SpinModel};
use crate::mpo::{build_filter, FilterOperator};
use crate::mps::{canonicalize, random_mps, Direction, Mps};
use crate::observables::expectation_real;
use crate::rng::derive_stream;
use crate::stats::power_law_exponent;

/// Iterations recorded regardless of `record_every`.
pub const DEFAULT_CHECKPOINTS: [usize; 4] = [1, 10, 30, 100];
pub const DEFAULT_RECORD_EVERY: usize = 10;

/// Smallest `k` included in the variance power-law fit.
pub const TAIL_START: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub model: SpinModel,
    /// Target energy `E`.
    pub energy: f64,
    /// `u = E / N`, when the target was given as a density.
    pub energy_density: Option<f64>,
    pub sigma: Sigma,
    pub chi: usize,
    /// Number of filter applications `k_max`; 0 returns the raw random state.
    pub iterations: usize,
    pub compress_tol: f64,
    pub record_every: usize,
    pub checkpoints: Vec<usize>,
    pub master_seed: u64,
    pub samples: usize,
}

impl SamplerConfig {
    pub fn new(
        model: SpinModel,
        energy: f64,
        chi: usize,
        iterations: usize,
        samples: usize,
    ) -> Self {
        Self {
            model,
            energy,
            energy_density: None,
            sigma: Sigma::default(),
            chi,
            iterations,
            compress_tol: DEFAULT_SWEEP_TOL,
            record_every: DEFAULT_RECORD_EVERY,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            master_seed: 0,
            samples,
        }
    }

    /// Target given as an energy density `u`; `E = u N`.
    pub fn with_density(
        model: SpinModel,
        u: f64,
        chi: usize,
        iterations: usize,
        samples: usize,
    ) -> Self {
        let mut c = Self::new(model, u * model.sites as f64, chi, iterations, samples);
        c.energy_density = Some(u);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.chi == 0 {
            return Err(Error::param("chi", "must be at least 1"));
        }
        if !(self.compress_tol > 0.0) || !self.compress_tol.is_finite() {
            return Err(Error::param(
                "compress_tol",
                format!("must be positive, got {}", self.compress_tol),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::param("samples", "must be at least 1"));
        }
        if !self.energy.is_finite() {
            return Err(Error::param("E", "must be finite"));
        }
        let bound = self.model.norm_bound();
        if self.energy.abs() > bound {
            return Err(Error::param(
                "E",
                format!(
                    "target {} lies outside the spectral bound [-{bound}, {bound}]",
                    self.energy
                ),
            ));
        }
        if let Sigma::Fixed(s) = self.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::param(
                    "sigma",
                    format!("must be positive and finite, got {s}"),
                ));
            }
        }
        Ok(())
    }

    /// Iterations at which observables are recorded: 0, the fixed
    /// checkpoints, every multiple of `record_every`, and `k_max`.
    pub fn record_points(&self) -> Vec<usize> {
        let k_max = self.iterations;
        let mut ks: Vec<usize> = vec![0, k_max];
        ks.extend(self.checkpoints.iter().copied().filter(|&k| k <= k_max));
        ks.extend((self.record_every..=k_max).step_by(self.record_every.max(1)));
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `<H>`.
    pub energy: f64,
    /// `<H^2> - <H>^2`.
    pub energy_variance: f64,
    /// Truncation error of the compression that produced this iterate (0 at
    /// `k = 0`).
    pub truncation_error: f64,
    /// `ln ||G psi_{k-1}||` for the step that produced this iterate.
    pub log_norm_decrement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub sample_index: u64,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn at(&self, k: usize) -> Option<&IterationRecord> {
        self.records.iter().find(|r| r.k == k)
    }
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub state: Mps,
    pub trace: IterationTrace,
}

/// A validated configuration together with its filter operator, reusable
/// across samples.
#[derive(Clone, Debug)]
pub struct Sampler {
    config: SamplerConfig,
    filter: FilterOperator,
    record_points: Vec<usize>,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let filter = build_filter(&config.model, config.energy, config.sigma)?;
        let record_points = config.record_points();
        Ok(Self {
            config,
            filter,
            record_points,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn filter(&self) -> &FilterOperator {
        &self.filter
    }

    pub fn sigma(&self) -> f64 {
        self.filter.sigma
    }

    /// The random MPS of sample `sample_index`, gauged to right-canonical form
    /// with minimal bonds.
    pub fn initial_state(&self, sample_index: u64) -> Result<Mps> {
        let mut stream = derive_stream(self.config.master_seed, sample_index);
        let raw = random_mps(&mut stream, self.config.model.sites, 2, self.config.chi)?;
        Ok(canonicalize(
            &canonicalize(&raw, Direction::Left),
            Direction::Right,
        ))
    }

    fn record(
        &self,
        state: &Mps,
        k: usize,
        truncation_error: f64,
        decrement: f64,
    ) -> Result<IterationRecord> {
        let energy = expectation_real(&self.filter.hamiltonian, state)?;
        let second = expectation_real(&self.filter.hamiltonian_sq, state)?;
        let energy_variance = second - energy * energy;
        if !energy.is_finite() || !energy_variance.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite energy at k = {k}"
            )));
        }
        Ok(IterationRecord {
            k,
            energy,
            energy_variance,
            truncation_error,
            log_norm_decrement: decrement,
        })
    }

    pub fn run_sample(&self, sample_index: u64) -> Result<SampleOutcome> {
        let mut state = self.initial_state(sample_index)?;
        let mut records = Vec::with_capacity(self.record_points.len());
        let mut next_record = 0;
        if self.record_points.first() == Some(&0) {
            records.push(self.record(&state, 0, 0.0, 0.0)?);
            next_record = 1;
        }
        for k in 1..=self.config.iterations {
            let recording = self.record_points.get(next_record) == Some(&k);
            let mut opts = CompressOptions::new(self.config.chi, self.config.compress_tol);
            opts.measure_error = recording;
            let step = apply_with_gram(&self.filter.g_mpo, &self.filter.g_sq, &state, &opts)?;
            let decrement = step.state.log_norm() - state.log_norm();
            state = step.state;
            if recording {
                let err = step.truncation_error.unwrap_or(f64::NAN);
                records.push(self.record(&state, k, err, decrement)?);
                next_record += 1;
            }
        }
        Ok(SampleOutcome {
            state,
            trace: IterationTrace {
                sample_index,
                records,
            },
        })
    }
}

/// Runs one sample from scratch.
pub fn run_sample(config: &SamplerConfig, sample_index: u64) -> Result<SampleOutcome> {
    Sampler::new(config.clone())?.run_sample(sample_index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Slope of `ln var` against `ln k` over records with `k >= TAIL_START`;
    /// absent with fewer than two usable points.
    pub tail_exponent: Option<f64>,
    /// `|<H> - E|` at the last record.
    pub final_deviation: Option<f64>,
    /// `sigma^2 / (4 k)` at the last record, the variance implied by the
    /// Gaussian weights `exp[-2k ((E_i - E) / sigma)^2]`.
    pub model_variance: Option<f64>,
    /// `4 sigma^2 / k` at the last record.
    pub alternative_variance: Option<f64>,
    /// Measured variance over `model_variance`.
    pub variance_ratio: Option<f64>,
}

pub fn convergence_diagnostics(
    trace: &IterationTrace,
    config: &SamplerConfig,
    sigma: f64,
) -> Diagnostics {
    let tail: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.k >= TAIL_START && r.energy_variance > 0.0)
        .map(|r| (r.k as f64, r.energy_variance))
        .collect();
    let (ks, vs): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
    let tail_exponent = power_law_exponent(&ks, &vs);
    let last = trace.records.last();
    let final_deviation = last.map(|r| (r.energy - config.energy).abs());
    let positive_k = last.filter(|r| r.k > 0);
    let model_variance = positive_k.map(|r| sigma * sigma / (4.0 * r.k as f64));
    let alternative_variance = positive_k.map(|r| 4.0 * sigma * sigma / r.k as f64);
    let variance_ratio = positive_k
        .zip(model_variance)
        .map(|(r, m)| r.energy_variance / m);
    Diagnostics {
        tail_exponent,
        final_deviation,
        model_variance,
        alternative_variance,
        variance_ratio,
    }
}
