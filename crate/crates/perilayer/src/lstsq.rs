//! Dense linear least squares through a Householder QR factorization.

use faer::prelude::*;

use crate::error::{Error, Result};

/// Minimizes ‖A x − b‖₂ for a full-column-rank `A` given by rows.
pub fn lstsq(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    if n == 0 || m < n || rhs.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Numerical(format!(
            "least-squares problem with {} rows and {} unknowns is not well posed",
            m, n
        )));
    }
    let a = Mat::<f64>::from_fn(m, n, |i, j| rows[i][j]);
    let qr = a.col_piv_qr();
    let r = qr.R();
    let scale = (0..n).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..n).any(|k| !(r[(k, k)].abs() > 1e-13 * scale)) {
        return Err(Error::Numerical("least-squares matrix is rank deficient".into()));
    }
    let b = Mat::<f64>::from_fn(m, 1, |i, _| rhs[i]);
    let x = qr.solve_lstsq(&b);
    let out: Vec<f64> = (0..n).map(|k| x[(k, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("least-squares solution is not finite".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let b: Vec<f64> = (0..5).map(|i| 2.0 - 0.5 * i as f64).collect();
        let x = lstsq(&rows, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-13 && (x[1] + 0.5).abs() < 1e-13);
    }

    #[test]
    fn rejects_rank_deficiency() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(lstsq(&rows, &[1.0, 2.0, 3.0]).is_err());
    }
}
