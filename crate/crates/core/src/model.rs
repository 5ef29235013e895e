//! Spin-chain Hamiltonians on open chains.
//!
//! Heisenberg: `H = -sum_{i<N} (J/4)(X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}) - h sum_i Z_i`.
//! Transverse-field Ising: `H = -J sum_{i<N} Z_i Z_{i+1} - g sum_i X_i`.
//!
//! Besides the parameters this module provides the model as an explicit sum of
//! Pauli strings, which the dense oracle assembles independently of the MPO
//! builders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heisenberg,
    TransverseIsing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    pub kind: ModelKind,
    pub sites: usize,
    pub coupling: f64,
    /// `h` for Heisenberg, `g` for transverse Ising.
    pub field: f64,
}

/// How an automatic `sigma` is derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// Triangle-inequality bound on `||H||` plus `|E|`; guarantees `G >= 0`.
    Bound,
    /// `2 N delta + |E|` with `delta = max(|J|, |h|)`.
    Paper,
    /// `2 N delta + |E|` with `delta = max(|J|/4, |h|)`.
    PaperQuarter,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma {
    Auto(SigmaMode),
    Fixed(f64),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Auto(SigmaMode::Bound)
    }
}

impl SpinModel {
    pub fn heisenberg(sites: usize, coupling: f64, field: f64) -> Result<Self> {
        Self::new(ModelKind::Heisenberg, sites, coupling, field)
    }

    pub fn transverse_ising(sites: usize, coupling: f64, field: f64) -> Result<Self> {
        Self::new(ModelKind::TransverseIsing, sites, coupling, field)
    }

    pub fn new(kind: ModelKind, sites: usize, coupling: f64, field: f64) -> Result<Self> {
        let model = Self {
            kind,
            sites,
            coupling,
            field,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::param(
                "N",
                format!("need at least 2 sites, got {}", self.sites),
            ));
        }
        if !self.coupling.is_finite() {
            return Err(Error::param("J", "must be finite"));
        }
        if !self.field.is_finite() {
            return Err(Error::param("field", "must be finite"));
        }
        Ok(())
    }

    pub fn with_field(mut self, field: f64) -> Self {
        self.field = field;
        self
    }

    /// Rigorous upper bound on the operator norm of `H`.
    pub fn norm_bound(&self) -> f64 {
        let bonds = (self.sites - 1) as f64;
        let n = self.sites as f64;
        match self.kind {
            // ||XX + YY + ZZ|| = 3 (singlet eigenvalue).
            ModelKind::Heisenberg => bonds * 3.0 * self.coupling.abs() / 4.0 + n * self.field.abs(),
            ModelKind::TransverseIsing => bonds * self.coupling.abs() + n * self.field.abs(),
        }
    }

    /// The filter scale for target energy `energy`.
    pub fn sigma(&self, energy: f64, mode: SigmaMode) -> f64 {
        let n = self.sites as f64;
        match mode {
            SigmaMode::Bound => self.norm_bound() + energy.abs(),
            SigmaMode::Paper => 2.0 * n * self.coupling.abs().max(self.field.abs()) + energy.abs(),
            SigmaMode::PaperQuarter => {
                2.0 * n * (self.coupling.abs() / 4.0).max(self.field.abs()) + energy.abs()
            }
        }
    }

    /// Whether `H` commutes with total `Z`.
    pub fn conserves_magnetization(&self) -> bool {
        self.kind == ModelKind::Heisenberg || self.field == 0.0
    }

    /// The Hamiltonian as a sum of Pauli strings.
    pub fn pauli_sum(&self) -> PauliSum {
        let mut terms = Vec::new();
        let n = self.sites;
        match self.kind {
            ModelKind::Heisenberg => {
                let c = -self.coupling / 4.0;
                for i in 0..n - 1 {
                    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                        terms.push(PauliString {
                            coeff: c,
                            ops: vec![(i, p), (i + 1, p)],
                        });
                    }
                }
                for i in 0..n {
                    terms.push(PauliString {
                        coeff: -self.field,
                        ops: vec![(i, Pauli::Z)],
                    });
                }
            }
            ModelKind::TransverseIsing => {
                for i in 0..n - 1 {
                    terms.push(PauliString {
                        coeff: -self.coupling,
                        ops: vec![(i, Pauli::Z), (i + 1, Pauli::Z)],
                    });
                }
                for i in 0..n {
                    terms.push(PauliString {
                        coeff: -self.field,
                        ops: vec![(i, Pauli::X)],
                    });
                }
            }
        }
        PauliSum { sites: n, terms }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// `P |bit>` as `(amplitude, new bit)`; bit 0 is spin up.
    fn act(self, bit: usize) -> (C64, usize) {
        match (self, bit) {
            (Pauli::X, b) => (ONE, b ^ 1),
            (Pauli::Y, 0) => (C64::new(0.0, 1.0), 1),
            (Pauli::Y, _) => (C64::new(0.0, -1.0), 0),
            (Pauli::Z, 0) => (ONE, 0),
            (Pauli::Z, _) => (-ONE, 1),
        }
    }

    /// 2x2 matrix, row = output level.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -i], [i, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

#[derive(Clone, Debug)]
pub struct PauliString {
    pub coeff: f64,
    pub ops: Vec<(usize, Pauli)>,
}

#[derive(Clone, Debug)]
pub struct PauliSum {
    pub sites: usize,
    pub terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    /// Column `basis` of the operator: list of `(row, amplitude)`.
    fn column(&self, basis: usize, out: &mut Vec<(usize, C64)>) {
        out.clear();
        let n = self.sites;
        for term in &self.terms {
            let mut idx = basis;
            let mut amp = C64::new(term.coeff, 0.0);
            for &(site, p) in &term.ops {
                let shift = n - 1 - site;
                let bit = (idx >> shift) & 1;
                let (a, nb) = p.act(bit);
                amp *= a;
                idx = (idx & !(1 << shift)) | (nb << shift);
            }
            out.push((idx, amp));
        }
    }

    /// `H v` without forming the matrix.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        let mut col = Vec::with_capacity(self.terms.len());
        for (basis, &x) in v.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            self.column(basis, &mut col);
            for &(row, amp) in &col {
                out[row] += amp * x;
            }
        }
        out
    }

    pub fn to_dense(&self) -> faer::Mat<C64> {
        let dim = self.dim();
        let mut m = faer::Mat::<C64>::zeros(dim, dim);
        let mut col = Vec::new();
        for basis in 0..dim {
            self.column(basis, &mut col);
            for &(row, amp) in &col {
                m[(row, basis)] += amp;
            }
        }
        m
    }

    /// Real part of the dense matrix; both models are real symmetric in the
    /// computational basis.
    pub fn to_dense_real(&self) -> faer::Mat<f64> {
        let dim = self.dim();
        let mut m = faer::Mat::<f64>::zeros(dim, dim);
        let mut col = Vec::new();
        for basis in 0..dim {
            self.column(basis, &mut col);
            for &(row, amp) in &col {
                m[(row, basis)] += amp.re;
            }
        }
        m
    }
}
