//! Expectation values of MPOs and of local Pauli operators.

use faer::Mat;

use crate::env::{absorb_left, boundary, close_left};
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::model::Pauli;
use crate::mpo::Mpo;
use crate::mps::{check_compatible, left_multiply, Mps};

/// Imaginary part above which a Hermitian expectation is rejected.
pub const HERMITIAN_IMAG_LIMIT: f64 = 1e-6;

/// `<bra| op |ket>` including both `log_norm` scales.
pub fn matrix_element(bra: &Mps, op: &Mpo, ket: &Mps) -> Result<C64> {
    check_compatible(bra, ket)?;
    op.check_state(ket)?;
    Ok(sandwich(bra, op, ket) * (bra.log_norm() + ket.log_norm()).exp())
}

pub(crate) fn sandwich(bra: &Mps, op: &Mpo, ket: &Mps) -> C64 {
    let d = ket.local_dim();
    let mut env = boundary();
    for i in 0..ket.len() {
        let t = absorb_left(env.as_ref(), op.site(i), ket.site(i), d);
        env = close_left(t.as_ref(), bra.site(i), op.site(i).right());
    }
    env[(0, 0)]
}

/// `<state| op |state> / <state|state>`. For Hermitian operators the
/// imaginary part is checked and dropped.
pub fn expectation(op: &Mpo, state: &Mps) -> Result<C64> {
    op.check_state(state)?;
    let norm_sq = state.tensor_norm_sq();
    if !(norm_sq > 0.0) {
        return Err(Error::NumericalFailure(
            "expectation value in a zero-norm state".into(),
        ));
    }
    let value = sandwich(state, op, state) / norm_sq;
    if op.is_hermitian() {
        if value.im.abs() > HERMITIAN_IMAG_LIMIT * value.re.abs().max(1.0) {
            return Err(Error::NumericalFailure(format!(
                "Hermitian expectation has imaginary part {}",
                value.im
            )));
        }
        return Ok(C64::new(value.re, 0.0));
    }
    Ok(value)
}

/// Real part of a Hermitian expectation.
pub fn expectation_real(op: &Mpo, state: &Mps) -> Result<f64> {
    Ok(expectation(op, state)?.re)
}

/// One step of a transfer environment with `P` inserted on the site:
/// `sum_{s s'} P_{s s'} B^{s dag} env A^{s'}`.
fn transfer_step(
    env: &Mat<C64>,
    bra: &Mps,
    ket: &Mps,
    i: usize,
    op: Option<[[C64; 2]; 2]>,
) -> Mat<C64> {
    let d = ket.local_dim();
    let t = left_multiply(env.as_ref(), ket.site(i), d);
    match op {
        None => bra.site(i).adjoint() * &t,
        Some(p) => {
            let m = env.nrows();
            let r = t.ncols();
            let mut u = Mat::<C64>::zeros(d * m, r);
            for s in 0..d {
                for sp in 0..d {
                    let c = p[s][sp];
                    if c == ZERO {
                        continue;
                    }
                    for col in 0..r {
                        for row in 0..m {
                            u[(s * m + row, col)] += c * t[(sp * m + row, col)];
                        }
                    }
                }
            }
            bra.site(i).adjoint() * &u
        }
    }
}

/// Right environments `R_i` (`ket x bra`) of sites `i..N`.
fn right_envs(state: &Mps) -> Vec<Mat<C64>> {
    let n = state.len();
    let d = state.local_dim();
    let mut envs = vec![Mat::<C64>::zeros(0, 0); n + 1];
    envs[n] = boundary();
    for i in (0..n).rev() {
        // sum_s A^s R A^{s dag} via the stacked layout.
        let a = state.site(i);
        let l = a.nrows() / d;
        let ar = a * &envs[i + 1];
        let mut next = Mat::<C64>::zeros(l, l);
        for s in 0..d {
            let blk = ar.as_ref().subrows(s * l, l);
            let own = a.subrows(s * l, l);
            next += blk * own.adjoint();
        }
        envs[i] = next;
    }
    envs
}

fn trace_product(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn check_spin(state: &Mps) -> Result<()> {
    if state.local_dim() != 2 {
        return Err(Error::param(
            "d",
            "Pauli observables need local dimension 2",
        ));
    }
    Ok(())
}

/// `<sigma^a_i>` for every site, normalized by `<state|state>`.
pub fn local_expectations(state: &Mps, pauli: Pauli) -> Result<Vec<f64>> {
    check_spin(state)?;
    let right = right_envs(state);
    let norm_sq = right[0][(0, 0)].re;
    if !(norm_sq > 0.0) {
        return Err(Error::NumericalFailure(
            "local expectations in a zero-norm state".into(),
        ));
    }
    let mut left = boundary();
    let mut out = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let with_op = transfer_step(&left, state, state, i, Some(pauli.matrix()));
        out.push(trace_product(&with_op, &right[i + 1]).re / norm_sq);
        left = transfer_step(&left, state, state, i, None);
    }
    Ok(out)
}

/// `phi(j)` for `j = 1..=max_sep`: the mean of `<Z_i Z_{i+j}>` over the
/// `N - j` pairs of the open chain.
pub fn zz_profile(state: &Mps, max_sep: usize) -> Result<Vec<f64>> {
    check_spin(state)?;
    let n = state.len();
    if max_sep == 0 || max_sep >= n {
        return Err(Error::param(
            "j",
            format!("separation must lie in 1..={}, got {max_sep}", n - 1),
        ));
    }
    let right = right_envs(state);
    let norm_sq = right[0][(0, 0)].re;
    if !(norm_sq > 0.0) {
        return Err(Error::NumericalFailure(
            "correlations in a zero-norm state".into(),
        ));
    }
    let z = Some(Pauli::Z.matrix());
    let mut sums = vec![0.0; max_sep];
    let mut left = boundary();
    for i in 0..n - 1 {
        let mut carry = transfer_step(&left, state, state, i, z);
        for j in 1..=max_sep.min(n - 1 - i) {
            let closed = transfer_step(&carry, state, state, i + j, z);
            sums[j - 1] += trace_product(&closed, &right[i + j + 1]).re / norm_sq;
            if j < max_sep {
                carry = transfer_step(&carry, state, state, i + j, None);
            }
        }
        left = transfer_step(&left, state, state, i, None);
    }
    Ok(sums
        .iter()
        .enumerate()
        .map(|(k, s)| s / (n - k - 1) as f64)
        .collect())
}

/// `phi(j) = (N - j)^{-1} sum_{i <= N - j} <Z_i Z_{i+j}>`.
pub fn zz_correlations(state: &Mps, j: usize) -> Result<f64> {
    if j == 0 || j >= state.len() {
        return Err(Error::param(
            "j",
            format!("separation must lie in 1..={}, got {j}", state.len() - 1),
        ));
    }
    Ok(zz_profile(state, j)?[j - 1])
}

/// Per-site mean of `<Z_i>`.
pub fn magnetization(state: &Mps) -> Result<f64> {
    let z = local_expectations(state, Pauli::Z)?;
    Ok(z.iter().sum::<f64>() / z.len() as f64)
}
