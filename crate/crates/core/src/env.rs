//! Environment contractions for `<phi| W |psi>` networks.
//!
//! A left environment before site `i` stores `L[a]` (`chi_phi x chi_psi`) for
//! every operator bond index `a`, stacked vertically into a
//! `(w * chi_phi) x chi_psi` matrix. A right environment after site `i` stores
//! `R[b]` (`chi_psi x chi_phi`) stacked the same way into
//! `(w * chi_psi) x chi_phi`.

use faer::{Mat, MatRef};

use crate::linalg::{C64, ONE};
use crate::mpo::MpoSite;
use crate::mps::{horizontal_to_stacked, stacked_to_horizontal};

/// Environment of an empty block.
pub(crate) fn boundary() -> Mat<C64> {
    Mat::from_fn(1, 1, |_, _| ONE)
}

/// Vertical blocks `[X_0; X_1; ...]` to horizontal `[X_0 X_1 ...]`.
pub(crate) fn vertical_to_horizontal(v: MatRef<'_, C64>, blocks: usize) -> Mat<C64> {
    stacked_to_horizontal(v, blocks)
}

pub(crate) fn horizontal_to_vertical(h: MatRef<'_, C64>, blocks: usize) -> Mat<C64> {
    horizontal_to_stacked(h, blocks)
}

/// `T[b, s] = sum_{a, s'} W[a, b]^{s s'} L[a] psi^{s'}`, as a
/// `(d * chi_phi) x (w_r * chi_psi_r)` matrix: rows `s * chi_phi + m`,
/// columns `b * chi_psi_r + r`.
pub(crate) fn absorb_left(
    env: MatRef<'_, C64>,
    w: &MpoSite,
    psi: MatRef<'_, C64>,
    d: usize,
) -> Mat<C64> {
    let l = psi.nrows() / d;
    let r = psi.ncols();
    let m = env.nrows() / w.left();
    // T1 = L * [psi^0 psi^1 ...]: block (a, s') at rows a*m, cols s'*r.
    let psi_h = stacked_to_horizontal(psi, d);
    debug_assert_eq!(env.ncols(), l);
    let t1 = env * &psi_h;
    let (wl, wr) = (w.left(), w.right());
    let mut coeff = Mat::<C64>::zeros(wl * d, wr * d);
    for e in w.nonzeros() {
        coeff[(e.a * d + e.sp, e.b * d + e.s)] = e.c;
    }
    let from: Vec<(usize, usize)> = (0..wl * d).map(|k| ((k / d) * m, (k % d) * r)).collect();
    let to: Vec<(usize, usize)> = (0..wr * d).map(|k| ((k % d) * m, (k / d) * r)).collect();
    contract_blocks(t1.as_ref(), m, r, &from, coeff.as_ref(), &to, d * m, wr * r)
}

/// Closes a left absorption with the bra site: `L'[b] = sum_s phi^{s dag} T[b, s]`.
pub(crate) fn close_left(t: MatRef<'_, C64>, phi: MatRef<'_, C64>, w_right: usize) -> Mat<C64> {
    let h = phi.adjoint() * t;
    horizontal_to_vertical(h.as_ref(), w_right)
}

/// `V[a, s] = sum_{b, s'} W[a, b]^{s s'} psi^{s'} R[b]`, as a
/// `(w_l * chi_psi_l) x (d * chi_phi)` matrix: rows `a * chi_psi_l + l`,
/// columns `s * chi_phi + m`.
pub(crate) fn absorb_right(
    env: MatRef<'_, C64>,
    w: &MpoSite,
    psi: MatRef<'_, C64>,
    d: usize,
) -> Mat<C64> {
    let l = psi.nrows() / d;
    let r = psi.ncols();
    let mphi = env.ncols();
    // U = psi_stacked * [R_0 R_1 ...]: block (s', b) at rows s'*l, cols b*mphi.
    let env_h = vertical_to_horizontal(env, w.right());
    debug_assert_eq!(env_h.nrows(), r);
    let u = psi * &env_h;
    let (wl, wr) = (w.left(), w.right());
    let mut coeff = Mat::<C64>::zeros(wr * d, wl * d);
    for e in w.nonzeros() {
        coeff[(e.b * d + e.sp, e.a * d + e.s)] = e.c;
    }
    let from: Vec<(usize, usize)> = (0..wr * d).map(|k| ((k % d) * l, (k / d) * mphi)).collect();
    let to: Vec<(usize, usize)> = (0..wl * d).map(|k| ((k / d) * l, (k % d) * mphi)).collect();
    contract_blocks(
        u.as_ref(),
        l,
        mphi,
        &from,
        coeff.as_ref(),
        &to,
        wl * l,
        d * mphi,
    )
}

/// Closes a right absorption with the bra site given in horizontal layout:
/// `R'[a] = sum_s V[a, s] phi^{s dag}`.
pub(crate) fn close_right(v: MatRef<'_, C64>, phi_h: MatRef<'_, C64>) -> Mat<C64> {
    v * phi_h.adjoint()
}

/// `dst` block `to[j]` = `sum_k coeff[k, j] * src` block `from[k]`, all blocks
/// `rows x cols` and addressed by their top-left corner.
#[allow(clippy::too_many_arguments)]
fn contract_blocks(
    src: MatRef<'_, C64>,
    rows: usize,
    cols: usize,
    from: &[(usize, usize)],
    coeff: MatRef<'_, C64>,
    to: &[(usize, usize)],
    dst_rows: usize,
    dst_cols: usize,
) -> Mat<C64> {
    let mut x = Mat::<C64>::zeros(rows * cols, from.len());
    for (k, &(r0, c0)) in from.iter().enumerate() {
        let xk = x
            .as_mut()
            .col_mut(k)
            .try_as_col_major_mut()
            .expect("contiguous column")
            .as_slice_mut();
        for c in 0..cols {
            let s = src
                .col(c0 + c)
                .subrows(r0, rows)
                .try_as_col_major()
                .expect("contiguous column")
                .as_slice();
            xk[c * rows..(c + 1) * rows].copy_from_slice(s);
        }
    }
    let y = &x * coeff;
    let mut dst = Mat::<C64>::zeros(dst_rows, dst_cols);
    for (j, &(r0, c0)) in to.iter().enumerate() {
        let yj = y
            .col(j)
            .try_as_col_major()
            .expect("contiguous column")
            .as_slice();
        for c in 0..cols {
            let t = dst
                .as_mut()
                .col_mut(c0 + c)
                .subrows_mut(r0, rows)
                .try_as_col_major_mut()
                .expect("contiguous column");
            t.as_slice_mut()
                .copy_from_slice(&yj[c * rows..(c + 1) * rows]);
        }
    }
    dst
}
