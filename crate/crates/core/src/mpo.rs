//! Matrix product operators: storage, builders for spin chains and the
//! energy filter, and MPO arithmetic.
//!
//! A site holds `W[a, b]^{s, s'}` with `a`/`b` the left/right operator bonds
//! and `s`/`s'` the output/input physical levels. The operator is
//! `sum W^{s1 s1'} ... W^{sN sN'} |s><s'|`. Hamiltonian MPOs use the
//! lower-triangular automaton convention: the first site is the last row of
//! the bulk tensor, the last site its first column.

use faer::Mat;

use crate::compress::{self, CompressOptions, Compression};
use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::model::{ModelKind, Pauli, Sigma, SpinModel};
use crate::mps::{hilbert_dim, Mps};

/// Relative singular-value threshold for operator compression.
pub const DEFAULT_OPERATOR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Entry {
    pub a: usize,
    pub b: usize,
    pub s: usize,
    pub sp: usize,
    pub c: C64,
}

#[derive(Clone, Debug)]
pub struct MpoSite {
    left: usize,
    right: usize,
    d: usize,
    data: Vec<C64>,
    nonzeros: Vec<Entry>,
}

impl MpoSite {
    pub fn zeros(left: usize, right: usize, d: usize) -> Self {
        Self {
            left,
            right,
            d,
            data: vec![ZERO; left * right * d * d],
            nonzeros: Vec::new(),
        }
    }

    fn index(&self, a: usize, b: usize, s: usize, sp: usize) -> usize {
        ((a * self.right + b) * self.d + s) * self.d + sp
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn get(&self, a: usize, b: usize, s: usize, sp: usize) -> C64 {
        self.data[self.index(a, b, s, sp)]
    }

    pub fn set(&mut self, a: usize, b: usize, s: usize, sp: usize, value: C64) {
        let i = self.index(a, b, s, sp);
        self.data[i] = value;
    }

    fn add_operator(&mut self, a: usize, b: usize, coeff: f64, op: [[C64; 2]; 2]) {
        for (s, row) in op.iter().enumerate() {
            for (sp, &v) in row.iter().enumerate() {
                let i = self.index(a, b, s, sp);
                self.data[i] += v * coeff;
            }
        }
    }

    fn finish(mut self) -> Self {
        self.nonzeros.clear();
        for a in 0..self.left {
            for b in 0..self.right {
                for s in 0..self.d {
                    for sp in 0..self.d {
                        let c = self.get(a, b, s, sp);
                        if c != ZERO {
                            self.nonzeros.push(Entry { a, b, s, sp, c });
                        }
                    }
                }
            }
        }
        self
    }

    pub(crate) fn nonzeros(&self) -> &[Entry] {
        &self.nonzeros
    }
}

#[derive(Clone, Debug)]
pub struct Mpo {
    local_dim: usize,
    sites: Vec<MpoSite>,
    hermitian: bool,
}

impl Mpo {
    pub fn from_sites(local_dim: usize, sites: Vec<MpoSite>, hermitian: bool) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidDimension(
                "an MPO needs at least one site".into(),
            ));
        }
        let mut left = 1;
        for (i, w) in sites.iter().enumerate() {
            if w.d != local_dim || w.left != left {
                return Err(Error::InvalidDimension(format!(
                    "MPO site {i} does not chain"
                )));
            }
            left = w.right;
        }
        if left != 1 {
            return Err(Error::InvalidDimension(
                "MPO right boundary bond must be 1".into(),
            ));
        }
        let sites = sites.into_iter().map(MpoSite::finish).collect();
        Ok(Self {
            local_dim,
            sites,
            hermitian,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn site(&self, i: usize) -> &MpoSite {
        &self.sites[i]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut bonds = vec![1];
        bonds.extend(self.sites.iter().map(|w| w.right));
        bonds
    }

    /// Largest operator bond.
    pub fn max_bond(&self) -> usize {
        self.sites.iter().map(|w| w.right).max().unwrap_or(1)
    }

    /// Number of nonzero `W` entries, summed over sites.
    pub fn nonzero_count(&self) -> usize {
        self.sites.iter().map(|w| w.nonzeros.len()).sum()
    }

    pub(crate) fn check_state(&self, state: &Mps) -> Result<()> {
        if self.len() != state.len() || self.local_dim != state.local_dim() {
            return Err(Error::IncompatibleStates(format!(
                "operator on {} sites (d = {}) vs state on {} sites (d = {})",
                self.len(),
                self.local_dim,
                state.len(),
                state.local_dim()
            )));
        }
        Ok(())
    }

    /// Dense `d^N x d^N` matrix, site 1 most significant.
    pub fn to_dense(&self, cap: usize) -> Result<Mat<C64>> {
        let d = self.local_dim;
        let required = hilbert_dim(d, self.len());
        if required > cap as u128 {
            return Err(Error::TooLarge { required, cap });
        }
        let mut blocks: Vec<Mat<C64>> = vec![Mat::from_fn(1, 1, |_, _| ONE)];
        for w in &self.sites {
            let p = blocks[0].nrows();
            let mut next: Vec<Mat<C64>> = (0..w.right).map(|_| Mat::zeros(p * d, p * d)).collect();
            for e in &w.nonzeros {
                let src = &blocks[e.a];
                let dst = &mut next[e.b];
                for col in 0..p {
                    for row in 0..p {
                        dst[(row * d + e.s, col * d + e.sp)] += e.c * src[(row, col)];
                    }
                }
            }
            blocks = next;
        }
        Ok(blocks.swap_remove(0))
    }

    /// `O` as an MPS with local dimension `d^2` (row `(s d + s') w_l + a`).
    pub(crate) fn to_stacked(&self) -> Vec<Mat<C64>> {
        let d = self.local_dim;
        self.sites
            .iter()
            .map(|w| {
                Mat::from_fn(d * d * w.left, w.right, |row, b| {
                    let (p, a) = (row / w.left, row % w.left);
                    w.get(a, b, p / d, p % d)
                })
            })
            .collect()
    }

    pub(crate) fn from_stacked(
        local_dim: usize,
        stacked: &[Mat<C64>],
        hermitian: bool,
    ) -> Result<Self> {
        let d = local_dim;
        let sites = stacked
            .iter()
            .map(|m| {
                let left = m.nrows() / (d * d);
                let mut w = MpoSite::zeros(left, m.ncols(), d);
                for b in 0..m.ncols() {
                    for row in 0..m.nrows() {
                        let (p, a) = (row / left, row % left);
                        w.set(a, b, p / d, p % d, m[(row, b)]);
                    }
                }
                w
            })
            .collect();
        Self::from_sites(local_dim, sites, hermitian)
    }
}

/// Identity operator; every operator bond is 1.
pub fn identity_mpo(n: usize, d: usize) -> Mpo {
    let sites = (0..n)
        .map(|_| {
            let mut w = MpoSite::zeros(1, 1, d);
            for s in 0..d {
                w.set(0, 0, s, s, ONE);
            }
            w
        })
        .collect();
    Mpo::from_sites(d, sites, true).expect("identity MPO chains by construction")
}

fn identity2() -> [[C64; 2]; 2] {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// Hamiltonian MPO: bulk operator bond 5 for Heisenberg, 3 for transverse
/// Ising.
pub fn hamiltonian_mpo(model: &SpinModel) -> Result<Mpo> {
    model.validate()?;
    let n = model.sites;
    let bulk = match model.kind {
        ModelKind::Heisenberg => {
            let c = -model.coupling / 4.0;
            let mut w = MpoSite::zeros(5, 5, 2);
            w.add_operator(0, 0, 1.0, identity2());
            w.add_operator(1, 0, 1.0, Pauli::X.matrix());
            w.add_operator(2, 0, 1.0, Pauli::Y.matrix());
            w.add_operator(3, 0, 1.0, Pauli::Z.matrix());
            w.add_operator(4, 0, -model.field, Pauli::Z.matrix());
            w.add_operator(4, 1, c, Pauli::X.matrix());
            w.add_operator(4, 2, c, Pauli::Y.matrix());
            w.add_operator(4, 3, c, Pauli::Z.matrix());
            w.add_operator(4, 4, 1.0, identity2());
            w
        }
        ModelKind::TransverseIsing => {
            let mut w = MpoSite::zeros(3, 3, 2);
            w.add_operator(0, 0, 1.0, identity2());
            w.add_operator(1, 0, 1.0, Pauli::Z.matrix());
            w.add_operator(2, 0, -model.field, Pauli::X.matrix());
            w.add_operator(2, 1, -model.coupling, Pauli::Z.matrix());
            w.add_operator(2, 2, 1.0, identity2());
            w
        }
    };
    let last_row = bulk.left - 1;
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let rows: Vec<usize> = if i == 0 {
            vec![last_row]
        } else {
            (0..bulk.left).collect()
        };
        let cols: Vec<usize> = if i == n - 1 {
            vec![0]
        } else {
            (0..bulk.right).collect()
        };
        let mut w = MpoSite::zeros(rows.len(), cols.len(), 2);
        for (ai, &a) in rows.iter().enumerate() {
            for (bi, &b) in cols.iter().enumerate() {
                for s in 0..2 {
                    for sp in 0..2 {
                        w.set(ai, bi, s, sp, bulk.get(a, b, s, sp));
                    }
                }
            }
        }
        sites.push(w);
    }
    Mpo::from_sites(2, sites, true)
}

/// `top * bottom` as an MPO (bottom acts first). Bonds multiply.
pub fn mpo_product(top: &Mpo, bottom: &Mpo) -> Result<Mpo> {
    if top.len() != bottom.len() || top.local_dim != bottom.local_dim {
        return Err(Error::IncompatibleStates(
            "MPO product of mismatched operators".into(),
        ));
    }
    let d = top.local_dim;
    let sites = top
        .sites
        .iter()
        .zip(&bottom.sites)
        .map(|(t, u)| {
            let mut w = MpoSite::zeros(t.left * u.left, t.right * u.right, d);
            for et in &t.nonzeros {
                for eu in u.nonzeros.iter().filter(|eu| eu.s == et.sp) {
                    let a = et.a * u.left + eu.a;
                    let b = et.b * u.right + eu.b;
                    let i = w.index(a, b, et.s, eu.sp);
                    w.data[i] += et.c * eu.c;
                }
            }
            w
        })
        .collect();
    // A product of commuting Hermitian factors is Hermitian; only squares are
    // flagged here.
    let hermitian = top.hermitian && std::ptr::eq(top, bottom);
    Mpo::from_sites(d, sites, hermitian)
}

/// `sum_k c_k O_k` as a block-diagonal direct sum; bonds add.
pub fn mpo_sum(terms: &[(C64, &Mpo)]) -> Result<Mpo> {
    let first = terms
        .first()
        .ok_or_else(|| Error::param("terms", "empty operator sum"))?
        .1;
    let (n, d) = (first.len(), first.local_dim);
    if terms.iter().any(|(_, o)| o.len() != n || o.local_dim != d) {
        return Err(Error::IncompatibleStates(
            "MPO sum of mismatched operators".into(),
        ));
    }
    let hermitian = terms.iter().all(|(c, o)| o.hermitian && c.im == 0.0);
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let lefts: Vec<usize> = terms.iter().map(|(_, o)| o.sites[i].left).collect();
        let rights: Vec<usize> = terms.iter().map(|(_, o)| o.sites[i].right).collect();
        let left_total = if i == 0 { 1 } else { lefts.iter().sum() };
        let right_total = if i == n - 1 { 1 } else { rights.iter().sum() };
        let mut w = MpoSite::zeros(left_total, right_total, d);
        let (mut a_off, mut b_off) = (0, 0);
        for (k, (c, o)) in terms.iter().enumerate() {
            let src = &o.sites[i];
            // The coefficient enters once, on the first site.
            let scale = if i == 0 { *c } else { ONE };
            for e in &src.nonzeros {
                let a = if i == 0 { 0 } else { a_off + e.a };
                let b = if i == n - 1 { 0 } else { b_off + e.b };
                let idx = w.index(a, b, e.s, e.sp);
                w.data[idx] += scale * e.c;
            }
            a_off += lefts[k];
            b_off += rights[k];
        }
        sites.push(w);
    }
    Mpo::from_sites(d, sites, hermitian)
}

/// Operator-space compression: SVD sweeps over the MPO viewed as an MPS with
/// local dimension `d^2`, discarding singular values below `tol` times the
/// largest at each cut.
pub fn compress_mpo(op: &Mpo, tol: f64) -> Result<Mpo> {
    let d2 = op.local_dim * op.local_dim;
    let swept = compress::svd_sweep(op.to_stacked(), d2, usize::MAX, tol)?;
    Mpo::from_stacked(op.local_dim, &swept.sites, op.hermitian)
}

/// `H^2`: MPO product (bulk bond 25 for Heisenberg) followed by compression.
/// Logs a warning when the compressed Heisenberg bulk bond exceeds 9.
pub fn mpo_square(h: &Mpo, tol: f64) -> Result<Mpo> {
    let product = mpo_product(h, h)?;
    let sq = compress_mpo(&product, tol)?;
    if h.max_bond() == 5 && sq.max_bond() > 9 {
        log::warn!(
            "compressed H^2 has operator bond {} (expected at most 9)",
            sq.max_bond()
        );
    }
    Ok(sq)
}

/// Whether the filter is provably positive semidefinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    /// `sigma >= ||H||_bound + |E|`, hence `0 <= G <= I`.
    Guaranteed,
    /// `sigma` is below the rigorous bound; `G` may have negative eigenvalues.
    BoundViolated,
}

/// `G = I - ((H - E) / sigma)^2 = a I + b H + c H^2`.
#[derive(Clone, Debug)]
pub struct FilterOperator {
    pub g_mpo: Mpo,
    pub hamiltonian: Mpo,
    pub hamiltonian_sq: Mpo,
    /// `G^2`, for measuring `||G psi||` without forming `G |psi>`.
    pub g_sq: Mpo,
    pub energy: f64,
    pub sigma: f64,
    pub sigma_choice: Sigma,
    pub model: SpinModel,
    pub coefficients: [f64; 3],
    pub positivity: Positivity,
}

/// Coefficients `(a, b, c)` of `G = a I + b H + c H^2`.
pub fn filter_coefficients(energy: f64, sigma: f64) -> [f64; 3] {
    let s2 = sigma * sigma;
    [1.0 - energy * energy / s2, 2.0 * energy / s2, -1.0 / s2]
}

pub fn build_filter(model: &SpinModel, energy: f64, sigma: Sigma) -> Result<FilterOperator> {
    model.validate()?;
    if !energy.is_finite() {
        return Err(Error::param("E", "must be finite"));
    }
    let sigma_value = match sigma {
        Sigma::Fixed(s) => s,
        Sigma::Auto(mode) => model.sigma(energy, mode),
    };
    if !(sigma_value > 0.0) || !sigma_value.is_finite() {
        return Err(Error::param(
            "sigma",
            format!("must be positive and finite, got {sigma_value}"),
        ));
    }
    let positivity = if sigma_value >= model.norm_bound() + energy.abs() {
        Positivity::Guaranteed
    } else {
        log::warn!(
            "sigma = {sigma_value} is below the spectral bound {}; the filter may not be positive",
            model.norm_bound() + energy.abs()
        );
        Positivity::BoundViolated
    };
    let h = hamiltonian_mpo(model)?;
    let h2 = mpo_square(&h, DEFAULT_OPERATOR_TOL)?;
    let id = identity_mpo(model.sites, 2);
    let [a, b, c] = filter_coefficients(energy, sigma_value);
    let sum = mpo_sum(&[
        (C64::new(a, 0.0), &id),
        (C64::new(b, 0.0), &h),
        (C64::new(c, 0.0), &h2),
    ])?;
    let g = compress_mpo(&sum, DEFAULT_OPERATOR_TOL)?;
    let g_sq = compress_mpo(&mpo_product(&g, &g)?, DEFAULT_OPERATOR_TOL)?;
    Ok(FilterOperator {
        g_sq,
        g_mpo: g,
        hamiltonian: h,
        hamiltonian_sq: h2,
        energy,
        sigma: sigma_value,
        sigma_choice: sigma,
        model: *model,
        coefficients: [a, b, c],
        positivity,
    })
}

/// `compress(op |state>, chi, tol)`; the result is at unit tensor norm with
/// `log_norm` advanced by `ln ||op state||`.
pub fn apply(op: &Mpo, state: &Mps, chi: usize, tol: f64) -> Result<Compression> {
    compress::apply_with(op, state, &CompressOptions::new(chi, tol))
}

/// The uncompressed product `op |state>`; bonds multiply.
pub fn apply_exact(op: &Mpo, state: &Mps) -> Result<Mps> {
    op.check_state(state)?;
    let d = op.local_dim;
    let mut sites = Vec::with_capacity(state.len());
    for (i, w) in op.sites.iter().enumerate() {
        let (l, r) = (state.left_bond(i), state.right_bond(i));
        let (bl, br) = (w.left * l, w.right * r);
        let mut m = Mat::<C64>::zeros(d * bl, br);
        for e in &w.nonzeros {
            let src = state.block(i, e.sp);
            let row0 = e.s * bl + e.a * l;
            let col0 = e.b * r;
            for col in 0..r {
                for row in 0..l {
                    m[(row0 + row, col0 + col)] += e.c * src[(row, col)];
                }
            }
        }
        sites.push(m);
    }
    Ok(Mps::from_sites(d, sites)?.with_log_norm(state.log_norm()))
}
