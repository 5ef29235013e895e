//! Bond-dimension compression of `W |psi>` (and of plain states, with `W` the
//! identity).
//!
//! `Canonical` contracts `W` into `psi` site by site with QR factors, which
//! leaves the exact product in left-canonical form, and truncates it by an SVD
//! sweep from the right; it is exact whenever no cut needs truncating.
//! `ZipUp` contracts `W` into `psi` site by site, truncating as it goes.
//! `Reuse` starts from `psi` itself, which suits operators close to the
//! identity once every bond of `psi` is at its cap. Results that may be
//! lossy are refined by single-site variational sweeps against the factored
//! target until the captured weight `|<phi|W psi>|^2 / ||phi||^2` settles.

use faer::Mat;

use crate::env::{
    absorb_left, absorb_right, boundary, close_left, close_right, horizontal_to_vertical,
};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::mpo::{self, Mpo};
use crate::mps::{
    self, hilbert_dim, horizontal_to_stacked, stacked_to_horizontal, Canonical, Direction, Mps,
};
use crate::observables::sandwich;

/// Relative singular-value cutoff applied on top of the bond cap.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-14;
/// Cap on full variational sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 8;
/// Default relative change of the captured weight that ends the sweeps.
pub const DEFAULT_SWEEP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// `Canonical` when every cut fits in the bond cap, `Reuse` when every
    /// bond of the input is saturated, `ZipUp` otherwise.
    Auto,
    Canonical,
    ZipUp,
    /// Starts from the input state; falls back to `ZipUp` when some bond of
    /// the input is below its cap.
    Reuse,
}

#[derive(Clone, Copy, Debug)]
pub struct CompressOptions {
    pub max_bond: usize,
    /// Relative change of the captured weight between sweeps that counts as
    /// converged.
    pub tol: f64,
    pub svd_cutoff: f64,
    pub max_sweeps: usize,
    pub init: InitStrategy,
    /// Compute the truncation error even when it needs an extra contraction
    /// of the enlarged state.
    pub measure_error: bool,
}

impl CompressOptions {
    pub fn new(max_bond: usize, tol: f64) -> Self {
        Self {
            max_bond,
            tol,
            svd_cutoff: DEFAULT_SVD_CUTOFF,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            init: InitStrategy::Auto,
            measure_error: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_bond == 0 {
            return Err(Error::param("chi", "bond cap must be positive"));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::param(
                "tol",
                format!("must be positive and finite, got {}", self.tol),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Compression {
    /// Unit tensor norm; the scale of the compressed vector is in `log_norm`.
    pub state: Mps,
    /// `1 - |<out|target>|^2 / (||out||^2 ||target||^2)`; `None` when not
    /// measured.
    pub truncation_error: Option<f64>,
    /// Variational half-sweeps performed.
    pub half_sweeps: usize,
    pub strategy: InitStrategy,
}

/// Compresses `state` to bond dimension `chi`.
pub fn compress(state: &Mps, chi: usize, tol: f64) -> Result<Compression> {
    compress_with(state, &CompressOptions::new(chi, tol))
}

pub fn compress_with(state: &Mps, opts: &CompressOptions) -> Result<Compression> {
    let id = mpo::identity_mpo(state.len(), state.local_dim());
    run(&id, state, opts, Some(state.tensor_norm_sq()))
}

/// Compressed `op |state>`.
pub fn apply_with(op: &Mpo, state: &Mps, opts: &CompressOptions) -> Result<Compression> {
    run(op, state, opts, None)
}

/// Compressed `op |state>`, with the truncation error measured through
/// `gram`, an MPO for `op^dag op`, instead of the enlarged state.
pub fn apply_with_gram(
    op: &Mpo,
    gram: &Mpo,
    state: &Mps,
    opts: &CompressOptions,
) -> Result<Compression> {
    gram.check_state(state)?;
    let norm_sq = if opts.measure_error {
        Some(sandwich(state, gram, state).re)
    } else {
        None
    };
    run(op, state, opts, norm_sq)
}

/// Output of [`svd_sweep`].
pub(crate) struct SvdSweep {
    pub sites: Vec<Mat<C64>>,
    /// Squared norm before truncation.
    pub norm_sq_in: f64,
    /// Squared norm after truncation.
    pub norm_sq_out: f64,
}

/// QR sweep to the right, then truncating SVD sweep back to the left. The
/// result is right-orthonormal on sites `1..N` and carries the full scale in
/// site 0.
pub(crate) fn svd_sweep(
    mut sites: Vec<Mat<C64>>,
    d: usize,
    max_bond: usize,
    cutoff: f64,
) -> Result<SvdSweep> {
    let n = sites.len();
    for i in 0..n - 1 {
        let (q, r) = linalg::qr_thin(sites[i].as_ref());
        sites[i] = q;
        sites[i + 1] = mps::left_multiply(r.as_ref(), sites[i + 1].as_ref(), d);
    }
    svd_from_right(sites, d, max_bond, cutoff)
}

/// Truncating SVD sweep from the right over sites that are left-orthonormal
/// on `0..N-1`.
fn svd_from_right(
    mut sites: Vec<Mat<C64>>,
    d: usize,
    max_bond: usize,
    cutoff: f64,
) -> Result<SvdSweep> {
    let n = sites.len();
    let norm_sq_in = linalg::frobenius_sq(sites[n - 1].as_ref());
    if !norm_sq_in.is_finite() {
        return Err(Error::NumericalFailure(
            "non-finite norm in SVD sweep".into(),
        ));
    }
    for i in (1..n).rev() {
        let h = stacked_to_horizontal(sites[i].as_ref(), d);
        let svd = linalg::svd_truncated(h.as_ref(), max_bond, cutoff)?;
        sites[i] = horizontal_to_stacked(svd.vh.as_ref(), d);
        let mut us = svd.u;
        for (j, s) in svd.s.iter().enumerate() {
            for r in 0..us.nrows() {
                us[(r, j)] *= *s;
            }
        }
        sites[i - 1] = &sites[i - 1] * &us;
    }
    let norm_sq_out = linalg::frobenius_sq(sites[0].as_ref());
    Ok(SvdSweep {
        sites,
        norm_sq_in,
        norm_sq_out,
    })
}

/// `op |state>` as sites left-orthonormal on `0..N-1`, built by absorbing one
/// operator site at a time and splitting off a QR factor.
fn qr_zip(op: &Mpo, state: &Mps) -> Vec<Mat<C64>> {
    let d = state.local_dim();
    let n = state.len();
    let mut carry = boundary();
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let w = op.site(i);
        let t = absorb_left(carry.as_ref(), w, state.site(i), d);
        if i == n - 1 {
            sites.push(t);
            break;
        }
        let (q, r) = linalg::qr_thin(t.as_ref());
        sites.push(q);
        carry = horizontal_to_vertical(r.as_ref(), w.right());
    }
    sites
}

/// Largest bond any state on `n` sites can need at each internal cut.
fn cut_caps(n: usize, d: usize) -> Vec<u128> {
    (1..n)
        .map(|i| hilbert_dim(d, i).min(hilbert_dim(d, n - i)))
        .collect()
}

fn is_lossless(op: &Mpo, state: &Mps, max_bond: usize) -> bool {
    let caps = cut_caps(state.len(), state.local_dim());
    let wb = op.bond_dims();
    let sb = state.bond_dims();
    caps.iter().enumerate().all(|(i, &cap)| {
        let product = (wb[i + 1] * sb[i + 1]) as u128;
        cap.min(product) <= max_bond as u128
    })
}

/// Whether every bond of `state` equals `min(max_bond, cut cap)`.
fn is_saturated(state: &Mps, max_bond: usize) -> bool {
    let caps = cut_caps(state.len(), state.local_dim());
    let sb = state.bond_dims();
    caps.iter()
        .enumerate()
        .all(|(i, &cap)| sb[i + 1] as u128 == cap.min(max_bond as u128))
}

fn check_finite(state: &Mps) -> Result<()> {
    if !state.tensors_finite() || !state.log_norm().is_finite() {
        return Err(Error::NumericalFailure("non-finite tensor entries".into()));
    }
    Ok(())
}

fn run(
    op: &Mpo,
    state: &Mps,
    opts: &CompressOptions,
    known_norm_sq: Option<f64>,
) -> Result<Compression> {
    opts.validate()?;
    op.check_state(state)?;
    check_finite(state)?;
    let strategy = match opts.init {
        InitStrategy::Auto if is_lossless(op, state, opts.max_bond) => InitStrategy::Canonical,
        InitStrategy::Auto if is_saturated(state, opts.max_bond) => InitStrategy::Reuse,
        InitStrategy::Auto => InitStrategy::ZipUp,
        InitStrategy::Reuse if !is_saturated(state, opts.max_bond) => InitStrategy::ZipUp,
        other => other,
    };
    let out = match strategy {
        InitStrategy::Canonical => {
            let lossless = is_lossless(op, state, opts.max_bond);
            canonical_route(op, state, opts, !lossless)?
        }
        InitStrategy::Reuse => reuse_route(op, state, opts, known_norm_sq)?,
        _ => zip_up_route(op, state, opts, known_norm_sq)?,
    };
    check_finite(&out.state)?;
    Ok(out)
}

fn canonical_route(
    op: &Mpo,
    state: &Mps,
    opts: &CompressOptions,
    refine: bool,
) -> Result<Compression> {
    let d = state.local_dim();
    let swept = svd_from_right(qr_zip(op, state), d, opts.max_bond, opts.svd_cutoff)?;
    let target_sq = swept.norm_sq_in;
    if target_sq == 0.0 {
        return Err(Error::NumericalFailure(
            "compression target has zero norm".into(),
        ));
    }
    let mut sites = swept.sites;
    let kept_sq = swept.norm_sq_out;
    linalg::scale_in_place(&mut sites[0], 1.0 / kept_sq.sqrt());
    let mut result = Mps::from_sites(d, sites)?;
    result.log_norm = state.log_norm() + 0.5 * kept_sq.ln();
    result.canonical = Canonical::Right;
    result.center = Some(0);

    if refine {
        let mut refined = variational(op, state, result, opts)?;
        let err = (1.0 - refined.captured_sq / target_sq).max(0.0);
        refined.compression.truncation_error = Some(err);
        refined.compression.strategy = InitStrategy::Canonical;
        return Ok(refined.compression);
    }
    let err = (1.0 - kept_sq / target_sq).max(0.0);
    Ok(Compression {
        state: result,
        truncation_error: Some(err),
        half_sweeps: 0,
        strategy: InitStrategy::Canonical,
    })
}

fn zip_up_route(
    op: &Mpo,
    state: &Mps,
    opts: &CompressOptions,
    known_norm_sq: Option<f64>,
) -> Result<Compression> {
    let d = state.local_dim();
    let n = state.len();
    let psi = if state.center == Some(0) {
        state.clone()
    } else {
        mps::canonicalize(state, Direction::Right)
    };

    let mut carry = boundary();
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let w = op.site(i);
        let t = absorb_left(carry.as_ref(), w, psi.site(i), d);
        if i == n - 1 {
            sites.push(t);
            break;
        }
        let svd = linalg::svd_truncated(t.as_ref(), opts.max_bond, opts.svd_cutoff)?;
        let mut sv = svd.vh;
        for (j, s) in svd.s.iter().enumerate() {
            for c in 0..sv.ncols() {
                sv[(j, c)] *= *s;
            }
        }
        sites.push(svd.u);
        carry = horizontal_to_vertical(sv.as_ref(), w.right());
    }
    let mut init = Mps::from_sites(d, sites)?;
    let norm = linalg::frobenius_sq(init.sites[n - 1].as_ref()).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NumericalFailure(
            "zip-up produced a zero or non-finite state".into(),
        ));
    }
    linalg::scale_in_place(&mut init.sites[n - 1], 1.0 / norm);
    init.log_norm = psi.log_norm() + norm.ln();
    init.canonical = Canonical::Left;
    init.center = Some(n - 1);

    let refined = variational(op, &psi, init, opts)?;
    finish(
        op,
        state,
        &psi,
        refined,
        opts,
        known_norm_sq,
        InitStrategy::ZipUp,
    )
}

fn reuse_route(
    op: &Mpo,
    state: &Mps,
    opts: &CompressOptions,
    known_norm_sq: Option<f64>,
) -> Result<Compression> {
    let psi = if state.center == Some(0) {
        state.clone()
    } else {
        mps::canonicalize(state, Direction::Right)
    };
    let mut guess = psi.clone();
    guess.log_norm = 0.0;
    let refined = variational(op, &psi, guess, opts)?;
    finish(
        op,
        state,
        &psi,
        refined,
        opts,
        known_norm_sq,
        InitStrategy::Reuse,
    )
}

/// Attaches the truncation error and strategy to a variational result.
fn finish(
    op: &Mpo,
    state: &Mps,
    psi: &Mps,
    mut refined: Refined,
    opts: &CompressOptions,
    known_norm_sq: Option<f64>,
    strategy: InitStrategy,
) -> Result<Compression> {
    let target_sq = match known_norm_sq {
        Some(v) => Some(v * (2.0 * (state.log_norm() - psi.log_norm())).exp()),
        None if opts.measure_error => {
            let enlarged = mpo::apply_exact(op, psi)?;
            Some(enlarged.tensor_norm_sq())
        }
        None => None,
    };
    refined.compression.truncation_error = target_sq.map(|t| {
        if t > 0.0 {
            (1.0 - refined.captured_sq / t).max(0.0)
        } else {
            0.0
        }
    });
    refined.compression.strategy = strategy;
    Ok(refined.compression)
}

struct Refined {
    compression: Compression,
    /// `|<phi|W psi>|^2 / ||phi||^2` in the tensor scale of `psi`.
    captured_sq: f64,
}

/// Single-site variational sweeps. `guess` must have its orthogonality centre
/// at one end of the chain; the result has it at site 0.
fn variational(op: &Mpo, psi: &Mps, guess: Mps, opts: &CompressOptions) -> Result<Refined> {
    let d = psi.local_dim();
    let n = psi.len();
    let mut phi = guess.sites;
    let mut left: Vec<Mat<C64>> = vec![Mat::zeros(0, 0); n + 1];
    let mut right: Vec<Mat<C64>> = vec![Mat::zeros(0, 0); n + 1];
    left[0] = boundary();
    right[n] = boundary();

    let start_left = guess.center == Some(n - 1);
    if start_left {
        for i in 0..n - 1 {
            let t = absorb_left(left[i].as_ref(), op.site(i), psi.site(i), d);
            left[i + 1] = close_left(t.as_ref(), phi[i].as_ref(), op.site(i).right());
        }
    } else {
        for i in (1..n).rev() {
            let v = absorb_right(right[i + 1].as_ref(), op.site(i), psi.site(i), d);
            let phi_h = stacked_to_horizontal(phi[i].as_ref(), d);
            right[i] = close_right(v.as_ref(), phi_h.as_ref());
        }
    }

    let mut previous: Option<f64> = None;
    let mut captured = 0.0;
    let mut half_sweeps = 0;
    let mut going_left = start_left;
    let max_half = 2 * opts.max_sweeps.max(1);
    loop {
        if going_left {
            for i in (0..n).rev() {
                let v = absorb_right(right[i + 1].as_ref(), op.site(i), psi.site(i), d);
                let left_h = horizontal_view(&left[i], op.site(i).left());
                let b_h = &left_h * &v;
                if i == 0 {
                    captured = linalg::frobenius_sq(b_h.as_ref());
                    phi[0] = horizontal_to_stacked(b_h.as_ref(), d);
                } else {
                    let (_, q) = linalg::lq_thin(b_h.as_ref());
                    right[i] = close_right(v.as_ref(), q.as_ref());
                    phi[i] = horizontal_to_stacked(q.as_ref(), d);
                }
            }
        } else {
            for i in 0..n {
                let t = absorb_left(left[i].as_ref(), op.site(i), psi.site(i), d);
                let b = &t * &right[i + 1];
                if i == n - 1 {
                    captured = linalg::frobenius_sq(b.as_ref());
                    phi[i] = b;
                } else {
                    let (q, _) = linalg::qr_thin(b.as_ref());
                    left[i + 1] = close_left(t.as_ref(), q.as_ref(), op.site(i).right());
                    phi[i] = q;
                }
            }
        }
        half_sweeps += 1;
        if !captured.is_finite() {
            return Err(Error::NumericalFailure(
                "non-finite weight in variational sweep".into(),
            ));
        }
        let converged = previous.is_some_and(|p: f64| {
            (captured - p).abs() <= opts.tol * captured.max(f64::MIN_POSITIVE)
        });
        previous = Some(captured);
        // Only stop with the centre on site 0.
        if going_left && (converged || half_sweeps >= max_half) {
            break;
        }
        going_left = !going_left;
    }

    if !(captured > 0.0) {
        return Err(Error::NumericalFailure(
            "compressed state has zero norm".into(),
        ));
    }
    let norm = captured.sqrt();
    linalg::scale_in_place(&mut phi[0], 1.0 / norm);
    let mut state = Mps::from_sites(d, phi)?;
    state.log_norm = psi.log_norm() + norm.ln();
    state.canonical = Canonical::Right;
    state.center = Some(0);
    Ok(Refined {
        compression: Compression {
            state,
            truncation_error: None,
            half_sweeps,
            strategy: InitStrategy::Auto,
        },
        captured_sq: captured,
    })
}

fn horizontal_view(vertical: &Mat<C64>, blocks: usize) -> Mat<C64> {
    stacked_to_horizontal(vertical.as_ref(), blocks)
}
