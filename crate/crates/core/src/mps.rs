//! Open-boundary matrix product states.
//!
//! Site `i` holds the `d` matrices `A^s` (shape `left x right`) stacked
//! vertically into one `(d * left) x right` matrix, block `s` occupying rows
//! `s * left .. (s + 1) * left`. In this layout a left-canonical site is simply
//! a matrix with orthonormal columns, and the bulk tensors of a random MPS are
//! literally the first `chi` columns of a Haar unitary.
//!
//! The physical state is `exp(log_norm)` times the tensor contraction. States
//! produced by canonicalization, compression and MPO application keep the
//! tensor contraction at unit norm and carry the scale in `log_norm`.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};
use crate::rng::{haar_unit_vector, haar_unitary, RngStream};

/// Default cap on the number of amplitudes produced by [`to_dense`].
pub const DEFAULT_DENSE_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Canonical {
    Left,
    Right,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub struct Mps {
    pub(crate) local_dim: usize,
    pub(crate) sites: Vec<Mat<C64>>,
    pub(crate) log_norm: f64,
    pub(crate) canonical: Canonical,
    /// Orthogonality centre: every site before it is left-orthonormal and every
    /// site after it right-orthonormal. `None` when unknown.
    pub(crate) center: Option<usize>,
}

impl Mps {
    /// Builds a state from stacked site matrices, checking that the bonds
    /// chain up and both boundary bonds are 1.
    pub fn from_sites(local_dim: usize, sites: Vec<Mat<C64>>) -> Result<Self> {
        if local_dim == 0 {
            return Err(Error::InvalidDimension("local dimension 0".into()));
        }
        if sites.is_empty() {
            return Err(Error::InvalidDimension(
                "an MPS needs at least one site".into(),
            ));
        }
        let mut left = 1;
        for (i, m) in sites.iter().enumerate() {
            if m.nrows() != local_dim * left {
                return Err(Error::InvalidDimension(format!(
                    "site {i} has {} rows, expected {} (d = {local_dim}, left bond = {left})",
                    m.nrows(),
                    local_dim * left
                )));
            }
            left = m.ncols();
        }
        if left != 1 {
            return Err(Error::InvalidDimension(format!(
                "last right bond is {left}, expected 1"
            )));
        }
        Ok(Self {
            local_dim,
            sites,
            log_norm: 0.0,
            canonical: Canonical::None,
            center: None,
        })
    }

    /// Computational basis product state; `config[i]` is the local level of
    /// site `i` (0 is spin up).
    pub fn product_state(local_dim: usize, config: &[usize]) -> Result<Self> {
        let vectors: Vec<Vec<C64>> = config
            .iter()
            .map(|&s| {
                let mut v = vec![ZERO; local_dim];
                if s < local_dim {
                    v[s] = ONE;
                }
                v
            })
            .collect();
        if config.iter().any(|&s| s >= local_dim) {
            return Err(Error::param(
                "config",
                format!("levels must be below d = {local_dim}"),
            ));
        }
        Self::product_from_vectors(&vectors)
    }

    /// Product state from one local vector per site (not normalized).
    pub fn product_from_vectors(vectors: &[Vec<C64>]) -> Result<Self> {
        let d = vectors.first().map(Vec::len).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidDimension(
                "local vectors differ in length".into(),
            ));
        }
        let sites = vectors
            .iter()
            .map(|v| Mat::from_fn(d, 1, |r, _| v[r]))
            .collect();
        Self::from_sites(d, sites)
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

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn canonical(&self) -> Canonical {
        self.canonical
    }

    /// The `N + 1` bond dimensions, first and last equal to 1.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut bonds = Vec::with_capacity(self.len() + 1);
        bonds.push(1);
        bonds.extend(self.sites.iter().map(|m| m.ncols()));
        bonds
    }

    pub fn max_bond(&self) -> usize {
        self.sites.iter().map(|m| m.ncols()).max().unwrap_or(1)
    }

    /// Number of stored complex coefficients.
    pub fn parameter_count(&self) -> usize {
        self.sites.iter().map(|m| m.nrows() * m.ncols()).sum()
    }

    pub fn left_bond(&self, site: usize) -> usize {
        self.sites[site].nrows() / self.local_dim
    }

    pub fn right_bond(&self, site: usize) -> usize {
        self.sites[site].ncols()
    }

    /// Stacked matrix of site `i`.
    pub fn site(&self, i: usize) -> MatRef<'_, C64> {
        self.sites[i].as_ref()
    }

    /// `A^s` of site `i`.
    pub fn block(&self, i: usize, s: usize) -> MatRef<'_, C64> {
        let l = self.left_bond(i);
        self.sites[i].as_ref().subrows(s * l, l)
    }

    /// Squared norm of the tensor contraction, ignoring `log_norm`.
    pub fn tensor_norm_sq(&self) -> f64 {
        transfer_overlap(self, self).re
    }

    /// Physical norm, `exp(log_norm) * ||contraction||`.
    pub fn norm(&self) -> f64 {
        self.log_norm.exp() * self.tensor_norm_sq().sqrt()
    }

    /// Same ray with the tensors rescaled to unit norm and `log_norm` reset,
    /// so that the physical norm is 1.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        let norm = out.tensor_norm_sq().sqrt();
        if norm > 0.0 {
            let last = out.len() - 1;
            let target = out.center.unwrap_or(last);
            linalg::scale_in_place(&mut out.sites[target], 1.0 / norm);
        }
        out.log_norm = 0.0;
        out
    }

    /// Replaces the accumulated scale, keeping the tensors as they are.
    pub fn with_log_norm(mut self, log_norm: f64) -> Self {
        self.log_norm = log_norm;
        self
    }

    pub(crate) fn tensors_finite(&self) -> bool {
        self.sites.iter().all(|m| linalg::all_finite(m.as_ref()))
    }

    /// Largest deviation of `sum_s A^s† A^s` from the identity over sites
    /// `range`.
    pub fn left_canonical_residual(&self, range: std::ops::Range<usize>) -> f64 {
        range
            .map(|i| linalg::isometry_residual(self.sites[i].as_ref(), true))
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `sum_s A^s A^s†` from the identity over sites
    /// `range`.
    pub fn right_canonical_residual(&self, range: std::ops::Range<usize>) -> f64 {
        range
            .map(|i| {
                let h = stacked_to_horizontal(self.sites[i].as_ref(), self.local_dim);
                linalg::isometry_residual(h.as_ref(), false)
            })
            .fold(0.0, f64::max)
    }
}

/// `(d * l) x r` stacked layout to the `l x (d * r)` layout `[A^0 A^1 ...]`.
pub(crate) fn stacked_to_horizontal(m: MatRef<'_, C64>, d: usize) -> Mat<C64> {
    let l = m.nrows() / d;
    let r = m.ncols();
    Mat::from_fn(l, d * r, |a, col| m[((col / r) * l + a, col % r)])
}

pub(crate) fn horizontal_to_stacked(h: MatRef<'_, C64>, d: usize) -> Mat<C64> {
    let l = h.nrows();
    let r = h.ncols() / d;
    Mat::from_fn(d * l, r, |row, b| h[(row % l, (row / l) * r + b)])
}

/// `x * A^s` for every block of a stacked site.
pub(crate) fn left_multiply(x: MatRef<'_, C64>, site: MatRef<'_, C64>, d: usize) -> Mat<C64> {
    let h = stacked_to_horizontal(site, d);
    horizontal_to_stacked((x * h).as_ref(), d)
}

/// Overlap of the two tensor contractions (no `log_norm`).
pub(crate) fn transfer_overlap(bra: &Mps, ket: &Mps) -> C64 {
    let d = ket.local_dim;
    let mut env = Mat::<C64>::from_fn(1, 1, |_, _| ONE);
    for (b, k) in bra.sites.iter().zip(&ket.sites) {
        // env (lb x lk) * A_ket^s, restacked so a single product with the
        // stacked bra finishes the step.
        let t = left_multiply(env.as_ref(), k.as_ref(), d);
        env = b.adjoint() * &t;
    }
    env[(0, 0)]
}

/// Random MPS: bulk sites are the first `chi` columns of independent Haar
/// unitaries of dimension `d * chi`; the boundary row and column vectors are
/// the `d` segments of independent Haar unit vectors of dimension `d * chi`.
/// The result is normalized and tagged left-canonical.
pub fn random_mps(stream: &mut RngStream, n: usize, d: usize, chi: usize) -> Result<Mps> {
    if n < 2 {
        return Err(Error::param("N", format!("need at least 2 sites, got {n}")));
    }
    if d < 2 {
        return Err(Error::param(
            "d",
            format!("local dimension must be at least 2, got {d}"),
        ));
    }
    if chi == 0 {
        return Err(Error::param("chi", "bond dimension must be positive"));
    }
    let dim = d * chi;
    let mut sites = Vec::with_capacity(n);
    let first = haar_unit_vector(stream, dim)?;
    sites.push(Mat::from_fn(d, chi, |s, b| first[s * chi + b]));
    for _ in 1..n - 1 {
        let u = haar_unitary(stream, dim)?;
        sites.push(u.as_ref().subcols(0, chi).to_owned());
    }
    let last = haar_unit_vector(stream, dim)?;
    sites.push(Mat::from_fn(dim, 1, |row, _| last[row]));

    let mut mps = Mps::from_sites(d, sites)?;
    let norm = mps.tensor_norm_sq().sqrt();
    linalg::scale_in_place(&mut mps.sites[n - 1], 1.0 / norm);
    mps.canonical = Canonical::Left;
    Ok(mps)
}

/// `<bra|ket>` including both `log_norm` scales.
pub fn inner_product(bra: &Mps, ket: &Mps) -> Result<C64> {
    check_compatible(bra, ket)?;
    Ok(transfer_overlap(bra, ket) * (bra.log_norm + ket.log_norm).exp())
}

pub(crate) fn check_compatible(a: &Mps, b: &Mps) -> Result<()> {
    if a.len() != b.len() || a.local_dim != b.local_dim {
        return Err(Error::IncompatibleStates(format!(
            "N = {} / {}, d = {} / {}",
            a.len(),
            b.len(),
            a.local_dim,
            b.local_dim
        )));
    }
    Ok(())
}

/// Number of amplitudes `d^N`, saturating.
pub(crate) fn hilbert_dim(d: usize, n: usize) -> u128 {
    (0..n).fold(1u128, |acc, _| acc.saturating_mul(d as u128))
}

/// Dense amplitudes, site 1 most significant: index `sum_i s_i d^(N-i)`.
pub fn to_dense(state: &Mps, cap: usize) -> Result<Vec<C64>> {
    let required = hilbert_dim(state.local_dim, state.len());
    if required > cap as u128 {
        return Err(Error::TooLarge { required, cap });
    }
    let d = state.local_dim;
    let mut v = Mat::<C64>::from_fn(1, 1, |_, _| ONE);
    for i in 0..state.len() {
        let p = v.nrows();
        let r = state.right_bond(i);
        let mut next = Mat::<C64>::zeros(p * d, r);
        for s in 0..d {
            let part = &v * state.block(i, s);
            for row in 0..p {
                for col in 0..r {
                    next[(row * d + s, col)] = part[(row, col)];
                }
            }
        }
        v = next;
    }
    let scale = state.log_norm.exp();
    Ok((0..v.nrows()).map(|i| v[(i, 0)] * scale).collect())
}

/// Gauge transformation into left- or right-canonical form by a QR (LQ)
/// sweep. The physical state is unchanged; the tensors end up at unit norm
/// with the norm moved into `log_norm`. Bonds shrink to the rank the QR sweep
/// exposes.
pub fn canonicalize(state: &Mps, direction: Direction) -> Mps {
    let d = state.local_dim;
    let n = state.len();
    let mut sites = state.sites.clone();
    let mut log_norm = state.log_norm;
    match direction {
        Direction::Left => {
            for i in 0..n - 1 {
                let (q, r) = linalg::qr_thin(sites[i].as_ref());
                sites[i] = q;
                sites[i + 1] = left_multiply(r.as_ref(), sites[i + 1].as_ref(), d);
            }
            let norm = linalg::frobenius_sq(sites[n - 1].as_ref()).sqrt();
            if norm > 0.0 {
                linalg::scale_in_place(&mut sites[n - 1], 1.0 / norm);
            }
            log_norm += norm.ln();
        }
        Direction::Right => {
            for i in (1..n).rev() {
                let h = stacked_to_horizontal(sites[i].as_ref(), d);
                let (l, q) = linalg::lq_thin(h.as_ref());
                sites[i] = horizontal_to_stacked(q.as_ref(), d);
                sites[i - 1] = &sites[i - 1] * &l;
            }
            let norm = linalg::frobenius_sq(sites[0].as_ref()).sqrt();
            if norm > 0.0 {
                linalg::scale_in_place(&mut sites[0], 1.0 / norm);
            }
            log_norm += norm.ln();
        }
    }
    let (canonical, center) = match direction {
        Direction::Left => (Canonical::Left, n - 1),
        Direction::Right => (Canonical::Right, 0),
    };
    Mps {
        local_dim: d,
        sites,
        log_norm,
        canonical,
        center: Some(center),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn dense_norm(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn shapes_are_validated() {
        let bad = vec![Mat::<C64>::zeros(2, 3), Mat::<C64>::zeros(4, 1)];
        assert!(Mps::from_sites(2, bad).is_err());
        let bad_end = vec![Mat::<C64>::zeros(2, 2)];
        assert!(Mps::from_sites(2, bad_end).is_err());
    }

    #[test]
    fn random_mps_bonds_and_storage() {
        let mut s = derive_stream(1, 0);
        let psi = random_mps(&mut s, 6, 2, 4).unwrap();
        assert_eq!(psi.bond_dims(), vec![1, 4, 4, 4, 4, 4, 1]);
        assert!(psi.parameter_count() <= 2 * 6 * 4 * 4);
        assert_eq!(psi.canonical(), Canonical::Left);
    }

    #[test]
    fn chi_one_random_state_is_normalized_product() {
        let mut s = derive_stream(2, 0);
        let psi = random_mps(&mut s, 2, 2, 1).unwrap();
        assert_eq!(psi.bond_dims(), vec![1, 1, 1]);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_mps_bulk_is_left_canonical() {
        let mut s = derive_stream(3, 0);
        let psi = random_mps(&mut s, 10, 2, 8).unwrap();
        assert!(psi.left_canonical_residual(1..9) <= 1e-10);
    }

    #[test]
    fn random_mps_rejects_bad_parameters() {
        let mut s = derive_stream(0, 0);
        assert!(random_mps(&mut s, 1, 2, 4).is_err());
        assert!(random_mps(&mut s, 4, 1, 4).is_err());
        assert!(random_mps(&mut s, 4, 2, 0).is_err());
    }

    #[test]
    fn self_overlap_of_normalized_state_is_one() {
        let mut s = derive_stream(4, 0);
        let psi = random_mps(&mut s, 8, 2, 6).unwrap();
        let ov = inner_product(&psi, &psi).unwrap();
        assert!((ov - ONE).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_product_states() {
        let up_up = Mps::product_state(2, &[0, 0]).unwrap();
        let down_up = Mps::product_state(2, &[1, 0]).unwrap();
        assert_eq!(inner_product(&up_up, &down_up).unwrap(), ZERO);
    }

    #[test]
    fn mismatched_states_are_rejected() {
        let a = Mps::product_state(2, &[0, 0]).unwrap();
        let b = Mps::product_state(2, &[0, 0, 0]).unwrap();
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::IncompatibleStates(_))
        ));
    }

    #[test]
    fn product_state_dense_has_one_entry() {
        let psi = Mps::product_state(2, &[0, 1]).unwrap();
        let v = to_dense(&psi, DEFAULT_DENSE_CAP).unwrap();
        // |up down> = index 0b01.
        assert_eq!(v, vec![ZERO, ONE, ZERO, ZERO]);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let psi = Mps::product_state(2, &[0; 12]).unwrap();
        assert!(matches!(
            to_dense(&psi, 1 << 10),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn dense_norm_matches() {
        let mut s = derive_stream(5, 1);
        let psi = random_mps(&mut s, 8, 2, 4).unwrap();
        let v = to_dense(&psi, DEFAULT_DENSE_CAP).unwrap();
        assert!((dense_norm(&v) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inner_product_matches_dense() {
        let mut s = derive_stream(6, 0);
        let psi = random_mps(&mut s, 8, 2, 4).unwrap();
        let phi = random_mps(&mut s, 8, 2, 4).unwrap();
        let a = to_dense(&psi, DEFAULT_DENSE_CAP).unwrap();
        let b = to_dense(&phi, DEFAULT_DENSE_CAP).unwrap();
        let dense: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        assert!((inner_product(&psi, &phi).unwrap() - dense).norm() < 1e-10);
    }

    #[test]
    fn canonical_forms_hold_and_preserve_the_state() {
        let mut s = derive_stream(7, 0);
        let psi = random_mps(&mut s, 8, 2, 8).unwrap();
        let dense = to_dense(&psi, DEFAULT_DENSE_CAP).unwrap();
        for dir in [Direction::Left, Direction::Right] {
            let c = canonicalize(&psi, dir);
            let n = c.len();
            match dir {
                Direction::Left => assert!(c.left_canonical_residual(0..n - 1) <= 1e-10),
                Direction::Right => assert!(c.right_canonical_residual(1..n) <= 1e-10),
            }
            let cd = to_dense(&c, DEFAULT_DENSE_CAP).unwrap();
            let ov: C64 = dense.iter().zip(&cd).map(|(x, y)| x.conj() * y).sum();
            assert!((ov.norm() - 1.0).abs() < 1e-10);
            let diff: f64 = dense
                .iter()
                .zip(&cd)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-10, "{dir:?}: {diff}");
        }
    }

    #[test]
    fn right_canonicalizing_left_state() {
        let mut s = derive_stream(8, 0);
        let psi = canonicalize(&random_mps(&mut s, 10, 2, 8).unwrap(), Direction::Left);
        let r = canonicalize(&psi, Direction::Right);
        assert!(r.right_canonical_residual(1..9) <= 1e-10);
        let ov = inner_product(&psi, &r).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalization_keeps_norm_in_log_scale() {
        let mut s = derive_stream(9, 0);
        let psi = random_mps(&mut s, 6, 2, 3).unwrap().with_log_norm(2.5);
        let c = canonicalize(&psi, Direction::Left);
        assert!((c.tensor_norm_sq() - 1.0).abs() < 1e-12);
        assert!((c.norm() - psi.norm()).abs() < 1e-9 * psi.norm());
    }
}
