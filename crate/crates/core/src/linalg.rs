//! Small dense linear-algebra helpers shared by the spectral and hitting modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-pairs of a real symmetric matrix with eigenvalues sorted ascending.
/// Column `i` of the returned matrix is the unit eigenvector of value `i`.
pub(crate) fn sym_eigen_ascending(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    // Exact symmetrization; callers build matrices that are symmetric up to roundoff.
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000 + 200 * n)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Solves `m x = b` by LU with one step of iterative refinement.
pub(crate) fn solve_refined(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    let mut x = lu.solve(b).ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let residual = b - m * &x;
    if let Some(dx) = lu.solve(&residual) {
        if dx.iter().all(|v| v.is_finite()) {
            x += dx;
        }
    }
    Ok(x)
}

/// `x log x` with the convention `0 log 0 = 0`.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `(1+h) log(1+h) - h` for `h >= -1`, with a series for small `|h|`.
pub(crate) fn bregman_from_delta(h: f64) -> f64 {
    if h <= -1.0 {
        return 1.0;
    }
    if h.abs() < 1e-3 {
        // sum_{k>=2} (-1)^k h^k / (k (k-1))
        let mut term = h * h;
        let mut acc = 0.0;
        for k in 2..12 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (kf * (kf - 1.0));
            term *= h;
        }
        acc
    } else {
        (1.0 + h) * h.ln_1p() - h
    }
}

/// Weighted L_p norm `(sum_x w(x) |f(x)|^p)^{1/p}`; `p = inf` gives the max norm.
pub(crate) fn weighted_norm(f: &[f64], w: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s: f64 = f.iter().zip(w).map(|(v, wx)| wx * v.abs().powf(p)).sum();
    s.powf(1.0 / p)
}
