//! Small dense and tridiagonal linear algebra.

use crate::error::{Error, Result};

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub-diagonal `off` (`off.len() == diag.len() - 1`), sorted ascending.
///
/// Implicit QL with Wilkinson-type shifts and Givens rotations. The total
/// number of QL sweeps is capped at `50 * n`.
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::domain(
            "tridiagonal matrix",
            format!("{} diagonal vs {} off-diagonal entries", n, off.len()),
        ));
    }
    let mut d = diag.to_vec();
    // e[i] couples d[i] and d[i+1]; e[n-1] is a zero sentinel
    let mut e = off.to_vec();
    e.push(0.0);

    let budget = 50 * n;
    let mut sweeps = 0usize;
    for l in 0..n {
        loop {
            // find a negligible off-diagonal element to split at
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > budget {
                return Err(Error::Eigensolver { iterations: budget });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut deflated_early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // underflow: recover and restart the sweep
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Determinant of the row-major `n x n` matrix `a` by LU with partial pivoting.
/// `a` is overwritten with the factors.
pub fn determinant_in_place(a: &mut [f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for row in col + 1..n {
            let factor = a[row * n + col] / p;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    det
}

/// Determinant of a row-major `n x n` matrix.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut work = a.to_vec();
    determinant_in_place(&mut work, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_two_by_two() {
        let ev = symmetric_tridiagonal_eigenvalues(&[1.0, 3.0], &[2.0]).unwrap();
        let disc = 5.0f64.sqrt();
        assert!((ev[0] - (2.0 - disc)).abs() < 1e-12);
        assert!((ev[1] - (2.0 + disc)).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_toeplitz_closed_form() {
        // diag a, off b: eigenvalues a + 2b cos(k pi/(n+1))
        let n = 50;
        let ev = symmetric_tridiagonal_eigenvalues(&vec![0.3; n], &vec![-1.1; n - 1]).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| 0.3 + 2.0 * 1.1 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        exact.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn tridiagonal_trace_and_frobenius_preserved() {
        let d = [0.5, -1.25, 2.0, 0.0, 3.5, -0.75];
        let e = [0.1, 1.7, -0.4, 2.2, 0.9];
        let ev = symmetric_tridiagonal_eigenvalues(&d, &e).unwrap();
        let tr: f64 = d.iter().sum();
        let fro: f64 = d.iter().map(|v| v * v).sum::<f64>() + 2.0 * e.iter().map(|v| v * v).sum::<f64>();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
        assert!((ev.iter().map(|v| v * v).sum::<f64>() - fro).abs() < 1e-11);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tridiagonal_handles_decoupled_blocks() {
        let ev = symmetric_tridiagonal_eigenvalues(&[4.0, 1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(ev, vec![1.0, 2.0, 4.0]);
        assert!(symmetric_tridiagonal_eigenvalues(&[1.0], &[1.0]).is_err());
        assert_eq!(symmetric_tridiagonal_eigenvalues(&[], &[]).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn determinant_needs_pivoting() {
        let a = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(determinant(&a, 2), -1.0);
        let a = [2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        assert!((determinant(&a, 3) - 4.0).abs() < 1e-14);
        let singular = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(determinant(&singular, 2), 0.0);
    }
}
