use crate::{Error, Result};

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `lower[k]` multiplies `x[k-1]` and `upper[k]` multiplies `x[k+1]` in row `k`;
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::invalid("tridiagonal system: mismatched lengths"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Undefined("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for k in 1..n {
        denom = diag[k] - lower[k] * c[k - 1];
        if denom == 0.0 {
            return Err(Error::Undefined("singular tridiagonal system".into()));
        }
        c[k] = upper[k] / denom;
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        d[k] -= c[k] * d[k + 1];
    }
    Ok(d)
}
