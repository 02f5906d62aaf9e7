//! Small dense linear algebra helpers over row-major slices.

use nalgebra::DMatrix;

/// Determinant by Gaussian elimination with partial pivoting; clobbers `a`.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    match n {
        0 => return 1.0,
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        _ => {}
    }
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
    }
    det
}

pub fn det(a: &[f64], n: usize) -> f64 {
    det_in_place(&mut a.to_vec(), n)
}

/// Result of a square solve with a reciprocal condition estimate.
#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<f64>,
    /// `1 / (|A|_1 |A^-1|_1)`; zero when `A` is singular.
    pub rcond: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solve `A x = b` for row-major `a`. Returns `rcond = 0` and no solution when singular.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Option<Solve> {
    let m = DMatrix::from_row_slice(n, n, a);
    let inv = m.clone().try_inverse()?;
    let rcond = 1.0 / (norm1(&m) * norm1(&inv));
    let x = inv * nalgebra::DVector::from_column_slice(b);
    Some(Solve { x: x.iter().copied().collect(), rcond })
}

/// `y = A x` for row-major `a` with `rows x cols`.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows).map(|r| (0..cols).map(|c| a[r * cols + c] * x[c]).sum()).collect()
}

/// `C = A B` for row-major matrices.
pub fn mat_mul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i * k + l];
            for j in 0..m {
                c[i * m + j] += ail * b[l * m + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
