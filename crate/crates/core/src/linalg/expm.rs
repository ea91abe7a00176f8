use super::{lu::solve, DenseMatrix};
use crate::error::Result;

const PADE_ORDER: usize = 6;

/// Matrix exponential by diagonal Padé(6,6) with scaling and squaring.
///
/// The argument is scaled so that `‖A/2^s‖₁ ≤ 1/2`; the truncation error of
/// the [6/6] approximant is then below double precision.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (mut e, s) = scaled_pade(a)?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// `exp(A) = e^c · P` with `max|P_ij| = 1`, renormalizing after every
/// squaring so that neither factor over- or underflows. Returns `(c, P)`;
/// `c = -inf` and `P = 0` if the exponential is exactly zero.
pub fn expm_log_scaled(a: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let (mut e, s) = scaled_pade(a)?;
    let mut c = 0.0;
    for k in 0..=s {
        if k > 0 {
            e = &e * &e;
            c *= 2.0;
        }
        let m = e.max_abs();
        if m == 0.0 || !m.is_finite() {
            return if m == 0.0 { Ok((f64::NEG_INFINITY, e)) } else { Err(crate::Error::NonFinite) };
        }
        e = e.scale(1.0 / m);
        c += m.ln();
    }
    Ok((c, e))
}

/// Padé approximant of `exp(A / 2^s)` with `s` chosen from `‖A‖₁`.
fn scaled_pade(a: &DenseMatrix) -> Result<(DenseMatrix, i32)> {
    a.require_square()?;
    let norm = a.one_norm();
    if !norm.is_finite() {
        return Err(crate::Error::NonFinite);
    }
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    Ok((pade(&a.scale(0.5_f64.powi(s)))?, s))
}

fn pade(scaled: &DenseMatrix) -> Result<DenseMatrix> {
    let n = scaled.rows();
    let mut c = 1.0;
    let mut num = DenseMatrix::identity(n);
    let mut den = DenseMatrix::identity(n);
    let mut power = DenseMatrix::identity(n);
    let q = PADE_ORDER as f64;
    for k in 1..=PADE_ORDER {
        let kf = k as f64;
        c *= (q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0));
        power = &power * scaled;
        let term = power.scale(c);
        num = &num + &term;
        den = if k % 2 == 0 { &den + &term } else { &den - &term };
    }
    solve(&den, &num)
}
