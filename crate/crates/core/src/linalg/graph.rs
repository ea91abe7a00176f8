//! Structural checks on coupling matrices viewed as weighted digraphs.
//!
//! Arc convention: `M_ij != 0` with `i != j` is an arc `i -> j`.
//! Irreducibility does not depend on the direction convention.

use super::DenseMatrix;
use crate::error::Result;

/// True iff every row sum is within `tol` of zero.
pub fn is_zero_row_sum(m: &DenseMatrix, tol: f64) -> Result<bool> {
    m.require_square()?;
    Ok(m.row_sums().iter().all(|s| s.abs() <= tol))
}

/// True iff the off-diagonal sparsity digraph of `m` is strongly connected.
pub fn is_strongly_connected(m: &DenseMatrix) -> Result<bool> {
    Ok(strongly_connected_components(m)?.len() == 1)
}

/// Strongly connected components (Tarjan), each listed in pop order.
pub fn strongly_connected_components(m: &DenseMatrix) -> Result<Vec<Vec<usize>>> {
    m.require_square()?;
    let n = m.rows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && m[(i, j)] != 0.0).collect())
        .collect();
    Ok(tarjan(&adj))
}

/// Iterative Tarjan so deep graphs cannot overflow the call stack.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    // (node, next neighbour position)
    let mut work: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos == 0 && index[v] == usize::MAX {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> DenseMatrix {
        DenseMatrix::from_rows(&[[-3.0, 3.0, 0.0], [0.0, 0.0, 0.0], [3.0, 0.0, -3.0]]).unwrap()
    }

    #[test]
    fn zero_row_sum_cases() {
        let tol = 1e-9;
        assert!(is_zero_row_sum(&m1(), tol).unwrap());
        assert!(!is_zero_row_sum(&DenseMatrix::identity(3), tol).unwrap());
        let mut p = m1();
        p[(0, 0)] += 2.0 * tol;
        assert!(!is_zero_row_sum(&p, tol).unwrap());
        assert!(is_zero_row_sum(&DenseMatrix::zeros(2, 3), tol).is_err());
    }

    #[test]
    fn connectivity_cases() {
        let m11 = DenseMatrix::from_rows(&[[-21.0, 9.0, 12.0], [0.0, -72.0, 72.0], [90.0, 0.0, -90.0]])
            .unwrap();
        assert!(is_strongly_connected(&m11).unwrap());
        assert!(!is_strongly_connected(&m1()).unwrap());
        assert!(is_strongly_connected(&DenseMatrix::zeros(1, 1)).unwrap());
    }

    #[test]
    fn long_cycle_does_not_recurse() {
        let n = 5000;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, (i + 1) % n)] = 1.0;
        }
        assert!(is_strongly_connected(&m).unwrap());
        m[(n - 1, 0)] = 0.0;
        assert_eq!(strongly_connected_components(&m).unwrap().len(), n);
    }
}
