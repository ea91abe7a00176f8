use super::DenseMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Spectrum of a symmetric matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector paired with `eigenvalues[k]`.
    pub eigenvectors: DenseMatrix,
}

impl SpectrumResult {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let v = &self.eigenvectors;
        (0..v.rows()).map(|i| v[(i, k)]).collect()
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `1e-12 * ‖A‖_F`. Input is accepted if `‖A − Aᵀ‖_∞ ≤ 1e-12 * max(1, ‖A‖_∞)`;
/// the symmetric part is what gets diagonalized.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SpectrumResult> {
    a.require_square()?;
    let n = a.rows();
    let tol_sym = 1e-12 * a.inf_norm().max(1.0);
    let asym = (a - &a.transpose()).inf_norm();
    if asym > tol_sym {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    let mut m = a.symmetric_part()?;
    let mut v = DenseMatrix::identity(n);
    let fro = m.frobenius_norm();
    let target = 1e-12 * fro;

    let mut converged = fro == 0.0;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // tan of the rotation angle, smaller root for stability
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s, t);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > target {
        return Err(Error::NoConvergence("Jacobi sweeps exhausted".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, k)] = v[(i, src)];
        }
    }
    Ok(SpectrumResult { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

#[allow(clippy::too_many_arguments)]
fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = m.rows();
    let apq = m[(p, q)];
    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m[(r, p)];
        let arq = m[(r, q)];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        m[(r, p)] = new_rp;
        m[(p, r)] = new_rp;
        m[(r, q)] = new_rq;
        m[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}
