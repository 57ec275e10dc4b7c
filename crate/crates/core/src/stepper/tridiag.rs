//! Thomas algorithm for the per-column implicit solves.

/// Solves `a[k] x[k-1] + b[k] x[k] + c[k] x[k+1] = d[k]` in place (`d` becomes
/// `x`). `a[0]` and `c[n-1]` are ignored. `scratch` needs `n` entries.
/// Requires diagonal dominance; no pivoting.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n && scratch.len() >= n);
    let mut beta = b[0];
    d[0] /= beta;
    for k in 1..n {
        scratch[k] = c[k - 1] / beta;
        beta = b[k] - a[k] * scratch[k];
        d[k] = (d[k] - a[k] * d[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        d[k] -= scratch[k + 1] * d[k + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_product() {
        let n = 7;
        let a: Vec<f64> = (0..n).map(|k| -0.3 - 0.01 * k as f64).collect();
        let c: Vec<f64> = (0..n).map(|k| -0.2 + 0.02 * k as f64).collect();
        let b: Vec<f64> = (0..n).map(|k| 1.5 + 0.1 * k as f64).collect();
        let x: Vec<f64> = (0..n).map(|k| (k as f64).sin() + 2.0).collect();
        let mut d: Vec<f64> = (0..n)
            .map(|k| {
                let mut s = b[k] * x[k];
                if k > 0 {
                    s += a[k] * x[k - 1];
                }
                if k + 1 < n {
                    s += c[k] * x[k + 1];
                }
                s
            })
            .collect();
        let mut scratch = vec![0.0; n];
        solve_tridiagonal(&a, &b, &c, &mut d, &mut scratch);
        for k in 0..n {
            assert!((d[k] - x[k]).abs() < 1e-13);
        }
    }
}
