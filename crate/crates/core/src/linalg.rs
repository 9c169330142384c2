//! Small dense least-squares helpers on top of nalgebra's Householder QR.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_ii| / max |R_jj|` below which a column is
/// declared linearly dependent on the previous ones.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub coef: DVector<f64>,
    /// Unweighted residuals `y − X b`.
    pub residuals: DVector<f64>,
    /// `(X'WX)^{-1}` obtained as `R^{-1} R^{-T}`.
    pub xtwx_inv: DMatrix<f64>,
}

/// Rank-checked (weighted) least squares by QR of `W^{1/2} X`. Returns the
/// index of the first dependent column on failure.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>, w: Option<&DVector<f64>>) -> Result<LstsqFit, usize> {
    let (n, k) = x.shape();
    assert_eq!(y.len(), n);
    if k == 0 {
        return Ok(LstsqFit {
            coef: DVector::zeros(0),
            residuals: y.clone(),
            xtwx_inv: DMatrix::zeros(0, 0),
        });
    }
    if n < k {
        return Err(n);
    }
    let (xs, ys) = match w {
        Some(w) => {
            let sw = w.map(f64::sqrt);
            let mut xs = x.clone();
            for (mut row, s) in xs.row_iter_mut().zip(sw.iter()) {
                row *= *s;
            }
            (xs, y.component_mul(&sw))
        }
        None => (x.clone(), y.clone()),
    };
    let qr = xs.qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..k {
        if !(r[(i, i)].abs() > RANK_TOL * scale) {
            return Err(i);
        }
    }
    let q = qr.q();
    let qty = q.transpose() * ys;
    let coef = r
        .solve_upper_triangular(&qty)
        .expect("diagonal checked non-zero");
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("diagonal checked non-zero");
    let xtwx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;
    Ok(LstsqFit {
        coef,
        residuals,
        xtwx_inv,
    })
}

/// Solve `A x = b` for symmetric positive semidefinite `A`, refusing when the
/// smallest eigenvalue is below `tol` times the largest.
pub fn solve_psd(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > tol * max) {
        return None;
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Some(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose() * b)
}
