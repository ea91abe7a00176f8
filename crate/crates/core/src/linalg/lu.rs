use super::DenseMatrix;
use crate::error::{Error, Result};

/// LU factorization with complete pivoting: `P A Q = L U`.
///
/// Pivots come out in non-increasing magnitude, which makes the count of
/// negligible pivots a usable numerical rank.
#[derive(Debug, Clone)]
pub struct LuFactors {
    /// Packed factors: strict lower part is `L` (unit diagonal), upper part is `U`.
    lu: DenseMatrix,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        a.require_square()?;
        let n = a.rows();
        let mut lu = a.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, -1.0);
            for i in k..n {
                for j in k..n {
                    let v = lu[(i, j)].abs();
                    if v > best {
                        best = v;
                        pr = i;
                        pc = j;
                    }
                }
            }
            if pr != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pr, j)];
                    lu[(pr, j)] = tmp;
                }
                row_perm.swap(k, pr);
            }
            if pc != k {
                for i in 0..n {
                    let tmp = lu[(i, k)];
                    lu[(i, k)] = lu[(i, pc)];
                    lu[(i, pc)] = tmp;
                }
                col_perm.swap(k, pc);
            }
            let pivot = lu[(k, k)];
            if pivot == 0.0 {
                // remaining block is exactly zero
                break;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, row_perm, col_perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn pivots(&self) -> Vec<f64> {
        self.lu.diagonal()
    }

    /// Number of pivots with magnitude at most `tol`.
    pub fn negligible_pivots(&self, tol: f64) -> usize {
        self.pivots().iter().filter(|p| p.abs() <= tol).count()
    }

    pub(crate) fn packed(&self) -> &DenseMatrix {
        &self.lu
    }

    pub(crate) fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Solves `A x = b`, replacing any pivot smaller than `floor` in
    /// magnitude by `floor` (keeping its sign). With `floor = 0` a zero
    /// pivot is an error.
    pub fn solve_with_floor(&self, b: &[f64], floor: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!("rhs of length {} for order {n}", b.len())));
        }
        let mut y: Vec<f64> = self.row_perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s = y[i] - ((i + 1)..n).map(|j| self.lu[(i, j)] * y[j]).sum::<f64>();
            let mut p = self.lu[(i, i)];
            if p.abs() < floor || p == 0.0 {
                if floor == 0.0 {
                    return Err(Error::NoConvergence("singular matrix in solve".into()));
                }
                p = if p < 0.0 { -floor } else { floor };
            }
            y[i] = s / p;
        }
        let mut x = vec![0.0; n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        Ok(x)
    }
}

/// Solves `A X = B` for a square non-singular `A`.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch("solve: row counts differ".into()));
    }
    let lu = LuFactors::new(a)?;
    let tol = f64::EPSILON * a.rows() as f64 * lu.pivots()[0].abs();
    if lu.negligible_pivots(tol) > 0 {
        return Err(Error::NoConvergence("singular matrix in solve".into()));
    }
    let mut x = DenseMatrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let col: Vec<f64> = (0..b.rows()).map(|i| b[(i, j)]).collect();
        let sol = lu.solve_with_floor(&col, 0.0)?;
        for (i, v) in sol.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}
