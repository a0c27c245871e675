//! Ordinary least squares baseline.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// Ridge added to the normal-equation diagonal so collinear or constant
/// features still yield a unique solution.
const RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub(crate) coef: Array1<f64>,
    pub(crate) intercept: f64,
}

impl LinearModel {
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Self {
        let (n, p) = x.dim();
        assert_eq!(n, y.len(), "row count mismatch");
        assert!(n > 0, "no training rows");
        let x_mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let y_mean = y.mean().expect("non-empty");
        let xc = &x - &x_mean;
        let yc = &y - y_mean;

        // Augmented system [XᵀX + εI | Xᵀy], solved in place.
        let xtx = xc.t().dot(&xc);
        let xty = xc.t().dot(&yc);
        let scale = (0..p).map(|i| xtx[[i, i]]).fold(0.0f64, f64::max).max(1.0);
        let mut a: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                let mut row: Vec<f64> = xtx.row(i).to_vec();
                row[i] += RIDGE * scale;
                row.push(xty[i]);
                row
            })
            .collect();
        let coef = Array1::from(solve_augmented(&mut a));
        let intercept = y_mean - coef.dot(&x_mean);
        Self { coef, intercept }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coef) + self.intercept
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        x.dot(&self.coef) + self.intercept
    }
}

/// Gaussian elimination with partial pivoting on a `p × (p+1)` system.
fn solve_augmented(a: &mut [Vec<f64>]) -> Vec<f64> {
    let p = a.len();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < f64::MIN_POSITIVE {
            continue;
        }
        for row in col + 1..p {
            let factor = a[row][col] / diag;
            if factor != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *dst -= factor * src;
                }
            }
        }
    }
    let mut x = vec![0.0; p];
    for row in (0..p).rev() {
        let diag = a[row][row];
        if diag.abs() < f64::MIN_POSITIVE {
            continue;
        }
        let tail: f64 = (row + 1..p).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][p] - tail) / diag;
    }
    x
}
