//! Small least-squares and extrapolation helpers used by the asymptotic fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual.
    pub rms: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

/// Least squares for `y ≈ Σ c_j·basis_j(x)`.
pub fn least_squares<F>(xs: &[f64], ys: &[f64], n_basis: usize, basis: F) -> Option<LinearFit>
where
    F: Fn(f64, usize) -> f64,
{
    let n = xs.len();
    if n < n_basis || n_basis == 0 {
        return None;
    }
    let a = DMatrix::from_fn(n, n_basis, |i, j| basis(xs[i], j));
    // Column scaling keeps the normal problem well conditioned.
    let scales: Vec<f64> = (0..n_basis)
        .map(|j| a.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    let a_scaled = DMatrix::from_fn(n, n_basis, |i, j| a[(i, j)] / scales[j]);
    let b = DVector::from_column_slice(ys);
    let svd = a_scaled.svd(true, true);
    let sol = svd.solve(&b, 1e-14).ok()?;
    let coeffs: Vec<f64> = (0..n_basis).map(|j| sol[j] / scales[j]).collect();
    let mut ss = 0.0;
    let mut mx = 0.0f64;
    for i in 0..n {
        let pred: f64 = (0..n_basis).map(|j| coeffs[j] * a[(i, j)]).sum();
        let r = ys[i] - pred;
        ss += r * r;
        mx = mx.max(r.abs());
    }
    Some(LinearFit {
        coeffs,
        rms: (ss / n as f64).sqrt(),
        max_residual: mx,
    })
}

/// Fits `y ≈ c₀ + c₁/t + … + c_k/tᵏ` and returns the fit (`c₀` is the
/// extrapolated limit).
pub fn inverse_power_fit(ts: &[f64], ys: &[f64], order: usize) -> Option<LinearFit> {
    least_squares(ts, ys, order + 1, |t, j| t.powi(-(j as i32)))
}

/// Polynomial fit in `x` of the given degree.
pub fn poly_fit(xs: &[f64], ys: &[f64], degree: usize) -> Option<LinearFit> {
    least_squares(xs, ys, degree + 1, |x, j| x.powi(j as i32))
}

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Indices of samples with `lo <= t <= hi`.
pub fn window(ts: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    ts.iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(i, _)| i)
        .collect()
}

/// `n` points geometrically spaced on `[lo, hi]`, both ends included.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let r = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (r * i as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

/// `n` points evenly spaced on `[lo, hi]`, both ends included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_inverse_power_limit() {
        let ts = linear_grid(10.0, 100.0, 50);
        let ys: Vec<f64> = ts.iter().map(|t| 2.5 - 3.0 / t + 7.0 / (t * t)).collect();
        let f = inverse_power_fit(&ts, &ys, 2).unwrap();
        assert!((f.coeffs[0] - 2.5).abs() < 1e-12);
        assert!((f.coeffs[1] + 3.0).abs() < 1e-9);
        assert!(f.rms < 1e-12);
    }

    #[test]
    fn poly_roundtrip() {
        let xs = linear_grid(-1.0, 1.0, 11);
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let f = poly_fit(&xs, &ys, 3).unwrap();
        assert!((poly_eval(&f.coeffs, 0.3) - (1.0 - 0.6 + 0.5 * 0.027)).abs() < 1e-12);
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-3, 10.0, 41);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[40], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
