//! Small dense linear algebra for the handful of k×k systems the
//! estimators need (log-rank covariance, normal equations).

use crate::scalar::Real;

/// Row-major square matrix.
pub type Matrix<T> = Vec<Vec<T>>;

pub fn zeros<T: Real>(rows: usize, cols: usize) -> Matrix<T> {
    vec![vec![T::zero(); cols]; rows]
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// On failure returns the column at which a pivot fell below
/// `tol · max|a|`.
pub fn invert<T: Real>(a: &Matrix<T>, tol: T) -> Result<Matrix<T>, usize> {
    let n = a.len();
    let scale = a.iter().flat_map(|r| r.iter()).fold(T::zero(), |m, v| m.max(v.abs()));
    let threshold = tol * scale.max(T::min_positive_value());
    let mut aug: Matrix<T> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { T::one() } else { T::zero() }));
            r
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| crate::scalar::total_cmp(&aug[x][col].abs(), &aug[y][col].abs()))
            .expect("non-empty range");
        if aug[pivot][col].abs() <= threshold {
            return Err(col);
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = aug[row][col];
                if factor != T::zero() {
                    for j in 0..2 * n {
                        let delta = factor * aug[col][j];
                        aug[row][j] -= delta;
                    }
                }
            }
        }
    }
    Ok(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_vec<T: Real>(a: &Matrix<T>, x: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(&p, &q)| p * q).sum())
        .collect()
}

pub fn quad_form<T: Real>(a: &Matrix<T>, x: &[T]) -> T {
    mat_vec(a, x).iter().zip(x).map(|(&p, &q)| p * q).sum()
}
