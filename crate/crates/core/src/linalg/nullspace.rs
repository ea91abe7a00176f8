use super::{DenseMatrix, LuFactors};
use crate::error::{Error, Result};

/// Normalized positive left kernel vector `ψ` of a zero-row-sum matrix:
/// `ψᵀ M = 0`, `Σ ψ_i = 1`, `ψ_i > 0`.
///
/// The kernel of `Mᵀ` is located with a completely pivoted LU; its
/// dimension is the number of pivots below `tol * max|M_ij|`. The kernel
/// vector comes from back-substitution against the singular trailing pivot,
/// followed by one step of inverse iteration at shift zero. Components at or
/// below `tol` count as non-positive.
pub fn left_null_vector(m: &DenseMatrix, tol: f64) -> Result<Vec<f64>> {
    m.require_square()?;
    let n = m.rows();
    let scale = m.max_abs().max(1.0);
    let row_tol = tol * scale;
    for (row, sum) in m.row_sums().into_iter().enumerate() {
        if sum.abs() > row_tol {
            return Err(Error::NotZeroRowSum { row, sum });
        }
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }

    let mt = m.transpose();
    let lu = LuFactors::new(&mt)?;
    let kernel_dim = lu.negligible_pivots(tol * m.max_abs());
    if kernel_dim != 1 {
        return Err(Error::DegenerateKernel { dim: kernel_dim });
    }

    // U y = 0 with y_last = 1, then undo the column permutation.
    let packed = lu.packed();
    let mut y = vec![0.0; n];
    y[n - 1] = 1.0;
    for i in (0..n - 1).rev() {
        let mut s = 0.0;
        for j in (i + 1)..n {
            s -= packed[(i, j)] * y[j];
        }
        y[i] = s / packed[(i, i)];
    }
    let mut psi = vec![0.0; n];
    for (k, &c) in lu.col_perm().iter().enumerate() {
        psi[c] = y[k];
    }
    normalize_sum(&mut psi)?;

    // one inverse-iteration refinement at shift 0
    let floor = f64::EPSILON * scale;
    if let Ok(mut refined) = lu.solve_with_floor(&psi, floor) {
        if normalize_sum(&mut refined).is_ok() && residual(&mt, &refined) <= residual(&mt, &psi) {
            psi = refined;
        }
    }

    for (index, &value) in psi.iter().enumerate() {
        if value <= tol {
            return Err(Error::NonPositiveEntry { index, value });
        }
    }
    Ok(psi)
}

fn normalize_sum(v: &mut [f64]) -> Result<()> {
    let s: f64 = v.iter().sum();
    if s == 0.0 || !s.is_finite() {
        return Err(Error::NonPositiveEntry { index: 0, value: 0.0 });
    }
    for x in v.iter_mut() {
        *x /= s;
    }
    Ok(())
}

fn residual(mt: &DenseMatrix, psi: &[f64]) -> f64 {
    mt.matvec(psi).iter().map(|x| x * x).sum::<f64>().sqrt()
}
