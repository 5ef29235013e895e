//! Thin wrappers over the dense factorizations used by the tensor code.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Thin QR: `a = q * r` with `q` of shape `m x k`, `k = min(m, n)`.
pub(crate) fn qr_thin(a: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();
    (q, r)
}

/// Thin LQ: `a = l * q` with `q` having orthonormal rows.
pub(crate) fn lq_thin(a: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let (q, r) = qr_thin(a.adjoint().to_owned().as_ref());
    (r.adjoint().to_owned(), q.adjoint().to_owned())
}

/// Result of a truncated SVD, `a ~ u * diag(s) * vh`.
pub(crate) struct TruncatedSvd {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub vh: Mat<C64>,
}

/// SVD keeping at most `max_rank` singular values, dropping any below
/// `rel_cutoff * s_max`. Always keeps at least one value. Ties are resolved by
/// position so the result is reproducible.
pub(crate) fn svd_truncated(
    a: MatRef<'_, C64>,
    max_rank: usize,
    rel_cutoff: f64,
) -> Result<TruncatedSvd> {
    let svd = a
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let s_full: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let mut order: Vec<usize> = (0..s_full.len()).collect();
    order.sort_by(|&i, &j| s_full[j].total_cmp(&s_full[i]).then(i.cmp(&j)));
    let s_max = order.first().map(|&i| s_full[i]).unwrap_or(0.0);
    if !s_max.is_finite() {
        return Err(Error::NumericalFailure("non-finite singular value".into()));
    }
    let mut keep = 0;
    for &i in &order {
        if keep >= max_rank.max(1) {
            break;
        }
        if keep > 0 && s_full[i] <= rel_cutoff * s_max {
            break;
        }
        keep += 1;
    }
    let kept = &order[..keep];
    let u_full = svd.U();
    let v_full = svd.V();
    let u = Mat::from_fn(a.nrows(), keep, |r, c| u_full[(r, kept[c])]);
    let vh = Mat::from_fn(keep, a.ncols(), |r, c| v_full[(c, kept[r])].conj());
    let s = kept.iter().map(|&i| s_full[i]).collect();
    Ok(TruncatedSvd { u, s, vh })
}

pub(crate) fn frobenius_sq(a: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc
}

pub(crate) fn all_finite(a: MatRef<'_, C64>) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return false;
            }
        }
    }
    true
}

pub(crate) fn scale_in_place(a: &mut Mat<C64>, factor: f64) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] *= factor;
        }
    }
}

/// Largest absolute deviation of `a^H a` (or `a a^H` when `columns` is false)
/// from the identity.
pub(crate) fn isometry_residual(a: MatRef<'_, C64>, columns: bool) -> f64 {
    let g = if columns {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}
