//! Shared test-only oracles, independent of the solver paths under test.

use nalgebra::{DMatrix, DVector};

/// Plain Gaussian elimination with partial pivoting.
pub(crate) fn gauss_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        m.swap_rows(col, pivot);
        v.swap_rows(col, pivot);
        for row in (col + 1)..n {
            let f = m[(row, col)] / m[(col, col)];
            for k in col..n {
                m[(row, k)] -= f * m[(col, k)];
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = DVector::zeros(n);
    for row in (0..n).rev() {
        let mut s = v[row];
        for k in (row + 1)..n {
            s -= m[(row, k)] * x[k];
        }
        x[row] = s / m[(row, row)];
    }
    x
}
