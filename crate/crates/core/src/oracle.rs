//! Exact diagonalization reference for small chains.
//!
//! Hamiltonians are assembled densely from their Pauli strings, so nothing
//! here depends on the MPO builders. When the total magnetization is
//! conserved the spectrum is computed sector by sector, and eigenvectors are
//! stored in that block form.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::model::{Pauli, PauliString, PauliSum, SpinModel};
use crate::mps::hilbert_dim;

/// Default cap on the Hilbert-space dimension of dense computations.
pub const DEFAULT_ORACLE_CAP: usize = 1 << 14;

/// Smallest admissible largest filter weight.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
struct Sector {
    /// Basis indices spanned by the sector, ascending.
    basis: Vec<usize>,
    /// Columns are eigenvectors in the sector basis.
    vectors: Mat<f64>,
}

#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub model: SpinModel,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    sectors: Vec<Sector>,
    /// `(sector, column)` of each entry of `eigenvalues`.
    index: Vec<(usize, usize)>,
}

impl DenseSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `i` (ascending eigenvalue order) as a full real vector.
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        let (s, c) = self.index[i];
        let sector = &self.sectors[s];
        let mut v = vec![0.0; self.dim()];
        for (row, &b) in sector.basis.iter().enumerate() {
            v[b] = sector.vectors[(row, c)];
        }
        v
    }

    /// All eigenvectors as the columns of a dense matrix.
    pub fn eigenvector_matrix(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim(), self.dim());
        for (i, &(s, c)) in self.index.iter().enumerate() {
            let sector = &self.sectors[s];
            for (row, &b) in sector.basis.iter().enumerate() {
                m[(b, i)] = sector.vectors[(row, c)];
            }
        }
        m
    }

    /// `<E_i| O |E_i>` for every eigenvector.
    pub fn diagonal_elements(&self, observable: &Observable) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let v: Vec<C64> = self
                    .eigenvector(i)
                    .into_iter()
                    .map(|x| C64::new(x, 0.0))
                    .collect();
                observable.expectation(&v)
            })
            .collect()
    }
}

/// A Hermitian observable on the full Hilbert space.
#[derive(Clone, Debug)]
pub enum Observable {
    Pauli(PauliSum),
    Dense(Mat<C64>),
}

impl Observable {
    /// `sum_i Z_i / N`.
    pub fn magnetization(n: usize) -> Self {
        let terms = (0..n)
            .map(|i| PauliString {
                coeff: 1.0 / n as f64,
                ops: vec![(i, Pauli::Z)],
            })
            .collect();
        Observable::Pauli(PauliSum { sites: n, terms })
    }

    /// `phi(j) = (N - j)^{-1} sum_i Z_i Z_{i+j}`.
    pub fn zz_correlation(n: usize, j: usize) -> Self {
        let c = 1.0 / (n - j) as f64;
        let terms = (0..n - j)
            .map(|i| PauliString {
                coeff: c,
                ops: vec![(i, Pauli::Z), (i + j, Pauli::Z)],
            })
            .collect();
        Observable::Pauli(PauliSum { sites: n, terms })
    }

    pub fn hamiltonian(model: &SpinModel) -> Self {
        Observable::Pauli(model.pauli_sum())
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        match self {
            Observable::Pauli(p) => p.apply(v),
            Observable::Dense(m) => (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
                .collect(),
        }
    }

    /// `<v| O |v> / <v|v>`, real part.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let ov = self.apply(v);
        let num: C64 = v.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        num.re / den
    }
}

pub fn diagonalize(model: &SpinModel) -> Result<DenseSpectrum> {
    diagonalize_with_cap(model, DEFAULT_ORACLE_CAP)
}

pub fn diagonalize_with_cap(model: &SpinModel, cap: usize) -> Result<DenseSpectrum> {
    model.validate()?;
    let n = model.sites;
    let required = hilbert_dim(2, n);
    if required > cap as u128 {
        return Err(Error::TooLarge { required, cap });
    }
    let dim = 1usize << n;
    let ham = model.pauli_sum();
    let groups: Vec<Vec<usize>> = if model.conserves_magnetization() {
        let mut by_count = vec![Vec::new(); n + 1];
        for b in 0..dim {
            by_count[b.count_ones() as usize].push(b);
        }
        by_count
    } else {
        vec![(0..dim).collect()]
    };

    let mut position = vec![usize::MAX; dim];
    let mut sectors = Vec::with_capacity(groups.len());
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(dim);
    let mut unit = vec![ZERO; dim];
    for basis in groups {
        for (i, &b) in basis.iter().enumerate() {
            position[b] = i;
        }
        let m = basis.len();
        let mut h = Mat::<f64>::zeros(m, m);
        for (col, &b) in basis.iter().enumerate() {
            unit[b] = C64::new(1.0, 0.0);
            let image = ham.apply(&unit);
            unit[b] = ZERO;
            for &row_b in &basis {
                h[(position[row_b], col)] = image[row_b].re;
            }
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::NumericalFailure(format!("eigensolver failed: {e:?}")))?;
        let values = eig.S().column_vector();
        let s = sectors.len();
        for c in 0..m {
            entries.push((values[c], s, c));
        }
        sectors.push(Sector {
            basis,
            vectors: eig.U().to_owned(),
        });
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(DenseSpectrum {
        model: *model,
        eigenvalues: entries.iter().map(|e| e.0).collect(),
        sectors,
        index: entries.iter().map(|e| (e.1, e.2)).collect(),
    })
}

/// `p_i = |<E_i|psi>|^2`, in ascending eigenvalue order.
pub fn populations(state: &[C64], spectrum: &DenseSpectrum) -> Result<Vec<f64>> {
    if state.len() != spectrum.dim() {
        return Err(Error::IncompatibleStates(format!(
            "state of length {} vs spectrum of dimension {}",
            state.len(),
            spectrum.dim()
        )));
    }
    Ok(spectrum
        .index
        .iter()
        .map(|&(s, c)| {
            let sector = &spectrum.sectors[s];
            let amp: C64 = sector
                .basis
                .iter()
                .enumerate()
                .map(|(row, &b)| state[b] * sector.vectors[(row, c)])
                .sum();
            amp.norm_sqr()
        })
        .collect())
}

/// `ln [1 - ((E_i - E) / sigma)^2]^{2k}`, the logarithm of the `G^{2k}` weight.
pub fn log_filter_weights(eigenvalues: &[f64], energy: f64, sigma: f64, k: usize) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&e| {
            if k == 0 {
                return 0.0;
            }
            let x = (e - energy) / sigma;
            2.0 * k as f64 * (1.0 - x * x).abs().ln()
        })
        .collect()
}

/// Normalized `G^{2k}` weights.
pub fn filter_weights(
    spectrum: &DenseSpectrum,
    energy: f64,
    sigma: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let logs = log_filter_weights(&spectrum.eigenvalues, energy, sigma, k);
    normalize_log_weights(&logs, energy)
}

fn normalize_log_weights(logs: &[f64], energy: f64) -> Result<Vec<f64>> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max >= WEIGHT_FLOOR.ln()) {
        return Err(Error::DegenerateWindow { energy });
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// `Tr(O W) / Tr(W)` with `W = G^{2k} = sum_i [1 - ((E_i - E)/sigma)^2]^{2k} |E_i><E_i|`.
pub fn filtered_average(
    spectrum: &DenseSpectrum,
    energy: f64,
    sigma: f64,
    k: usize,
    observable: &Observable,
) -> Result<f64> {
    let w = filter_weights(spectrum, energy, sigma, k)?;
    let diag = spectrum.diagonal_elements(observable);
    Ok(w.iter().zip(&diag).map(|(a, b)| a * b).sum())
}

/// Mean and variance of the energy under the `G^{2k}` weights.
pub fn filtered_energy_moments(
    spectrum: &DenseSpectrum,
    energy: f64,
    sigma: f64,
    k: usize,
) -> Result<(f64, f64)> {
    let w = filter_weights(spectrum, energy, sigma, k)?;
    Ok(weighted_moments(&spectrum.eigenvalues, &w))
}

pub(crate) fn weighted_moments(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(e, w)| e * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(e, w)| (e - mean) * (e - mean) * w)
        .sum::<f64>()
        / total;
    (mean, var)
}

/// Canonical average `Tr(O e^{-H/T}) / Tr(e^{-H/T})`.
pub fn canonical_average(
    spectrum: &DenseSpectrum,
    temperature: f64,
    observable: &Observable,
) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::param(
            "T",
            format!("temperature must be positive, got {temperature}"),
        ));
    }
    let e0 = spectrum.eigenvalues.first().copied().unwrap_or(0.0);
    let w: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|e| (-(e - e0) / temperature).exp())
        .collect();
    let total: f64 = w.iter().sum();
    let diag = spectrum.diagonal_elements(observable);
    Ok(w.iter().zip(&diag).map(|(a, b)| a * b).sum::<f64>() / total)
}

/// Canonical mean energy at temperature `T`.
pub fn canonical_energy(spectrum: &DenseSpectrum, temperature: f64) -> Result<f64> {
    canonical_moment(&spectrum.eigenvalues, temperature)
}

fn canonical_moment(eigenvalues: &[f64], temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::param(
            "T",
            format!("temperature must be positive, got {temperature}"),
        ));
    }
    let e0 = eigenvalues.first().copied().unwrap_or(0.0);
    let (mut z, mut ez) = (0.0, 0.0);
    for &e in eigenvalues {
        let w = (-(e - e0) / temperature).exp();
        z += w;
        ez += w * e;
    }
    Ok(ez / z)
}

/// The temperature whose canonical mean energy is `energy`, by bisection on
/// `ln T`. `energy` must lie strictly between the ground energy and the
/// infinite-temperature mean.
pub fn temperature_for_energy(spectrum: &DenseSpectrum, energy: f64) -> Result<f64> {
    let eig = &spectrum.eigenvalues;
    let ground = eig.first().copied().unwrap_or(0.0);
    let infinite = eig.iter().sum::<f64>() / eig.len().max(1) as f64;
    if !(energy > ground && energy < infinite) {
        return Err(Error::param(
            "E",
            format!(
                "no positive temperature reaches {energy}; the range is ({ground}, {infinite})"
            ),
        ));
    }
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if canonical_moment(eig, mid.exp())? < energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Clone, Debug)]
pub struct Replay {
    /// `<H>` at `k = 0..=k_max`.
    pub energies: Vec<f64>,
    /// `<H^2> - <H>^2` at `k = 0..=k_max`.
    pub variances: Vec<f64>,
    pub final_state: Vec<C64>,
}

/// Dense normalized iteration of `G = I - ((H - E)/sigma)^2` from `initial`.
pub fn dense_power_replay(
    initial: &[C64],
    model: &SpinModel,
    energy: f64,
    sigma: f64,
    k_max: usize,
) -> Result<Replay> {
    let n = model.sites;
    let required = hilbert_dim(2, n);
    if required > DEFAULT_ORACLE_CAP as u128 {
        return Err(Error::TooLarge {
            required,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    if initial.len() != 1 << n {
        return Err(Error::IncompatibleStates(format!(
            "state of length {} for N = {n}",
            initial.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let ham = model.pauli_sum();
    let moments = |v: &[C64]| -> (f64, f64) {
        let hv = ham.apply(v);
        let e: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
        let e2: f64 = hv.iter().map(|z| z.norm_sqr()).sum();
        (e, e2 - e * e)
    };
    let norm = initial.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut v: Vec<C64> = initial.iter().map(|z| z / norm).collect();
    let mut energies = Vec::with_capacity(k_max + 1);
    let mut variances = Vec::with_capacity(k_max + 1);
    let (e, var) = moments(&v);
    energies.push(e);
    variances.push(var);
    let inv = 1.0 / (sigma * sigma);
    for _ in 0..k_max {
        // (H - E) v, twice.
        let mut a = ham.apply(&v);
        for (x, y) in a.iter_mut().zip(&v) {
            *x -= y * energy;
        }
        let mut b = ham.apply(&a);
        for (x, y) in b.iter_mut().zip(&a) {
            *x -= y * energy;
        }
        for (x, y) in v.iter_mut().zip(&b) {
            *x -= y * inv;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalFailure("dense iterate vanished".into()));
        }
        for x in &mut v {
            *x /= norm;
        }
        let (e, var) = moments(&v);
        energies.push(e);
        variances.push(var);
    }
    Ok(Replay {
        energies,
        variances,
        final_state: v,
    })
}

/// Populations after `k` filter steps predicted from the initial ones:
/// `p_i(k) ~ p_i(0) [1 - ((E_i - E)/sigma)^2]^{2k}`.
pub fn evolved_populations(
    initial: &[f64],
    spectrum: &DenseSpectrum,
    energy: f64,
    sigma: f64,
    k: usize,
) -> Result<Vec<f64>> {
    let logs: Vec<f64> = log_filter_weights(&spectrum.eigenvalues, energy, sigma, k)
        .iter()
        .zip(initial)
        .map(|(l, p)| {
            if *p > 0.0 {
                l + p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    normalize_log_weights(&logs, energy)
}
