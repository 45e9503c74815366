use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Ridge regression or L2-penalised logistic regression with an unpenalised
/// intercept.
#[derive(Clone, Debug)]
pub struct LinearModel {
    /// Intercept first, then one coefficient per feature.
    beta: Vec<f64>,
    logistic: bool,
}

impl LinearModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let eta = self.beta[0] + row.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                if self.logistic {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    eta
                }
            })
            .collect()
    }
}

fn design(x: ArrayView2<f64>) -> DMatrix<f64> {
    let (n, p) = x.dim();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] })
}

/// Solve (A + l2 * I') b = rhs where I' skips the intercept. Falls back to a
/// pseudo-inverse when the system is singular.
fn solve(mut a: DMatrix<f64>, rhs: DVector<f64>, l2: f64) -> Result<DVector<f64>> {
    for j in 1..a.nrows() {
        a[(j, j)] += l2;
    }
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(&rhs));
    }
    a.svd(true, true)
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::Learner(format!("linear solve failed: {e}")))
}

pub fn fit(
    x: ArrayView2<f64>,
    y: &[f64],
    l2: f64,
    max_iterations: usize,
    tolerance: f64,
    logistic: bool,
) -> Result<LinearModel> {
    let xd = design(x);
    let yv = DVector::from_column_slice(y);
    let xt = xd.transpose();
    if !logistic {
        let beta = solve(&xt * &xd, &xt * &yv, l2)?;
        return Ok(LinearModel {
            beta: beta.iter().copied().collect(),
            logistic,
        });
    }
    // iteratively reweighted least squares
    let n = y.len();
    let mut beta = DVector::zeros(xd.ncols());
    for _ in 0..max_iterations {
        let eta = &xd * &beta;
        let mut w = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let p = 1.0 / (1.0 + (-eta[i]).exp());
            let wi = (p * (1.0 - p)).max(1e-10);
            w[i] = wi;
            z[i] = eta[i] + (y[i] - p) / wi;
        }
        let mut xw = xd.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let next = solve(&xt * &xw, &xt * w.component_mul(&z), l2)?;
        let step = (&next - &beta).amax();
        beta = next;
        if step < tolerance {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Learner("logistic fit diverged".into()));
    }
    Ok(LinearModel {
        beta: beta.iter().copied().collect(),
        logistic,
    })
}
