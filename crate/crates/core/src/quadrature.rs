//! Quadrature rules and differentiation matrices for the parametric surface
//! charts: Gauss-Legendre in the polar variable, uniform trapezoid (with
//! Fourier differentiation) in periodic variables.

use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_derivative(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fejer's first rule on [-1, 1]: quadrature at the Chebyshev-Gauss points
/// `x_k = cos((2k+1) pi / (2n))` (endpoints excluded), positive weights,
/// exact for polynomials of degree < n and spectrally accurate for smooth
/// integrands. Returned with nodes ascending.
pub fn fejer1(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let tau = (2.0 * k as f64 + 1.0) * std::f64::consts::PI / (2.0 * n as f64);
        let mut s = 0.0;
        for m in 1..=(n / 2) {
            let mf = m as f64;
            s += (2.0 * mf * tau).cos() / (4.0 * mf * mf - 1.0);
        }
        // Store ascending: k = 0 gives x near +1.
        nodes[n - 1 - k] = tau.cos();
        weights[n - 1 - k] = 2.0 / n as f64 * (1.0 - 2.0 * s);
    }
    (nodes, weights)
}

/// Barycentric differentiation matrix on arbitrary distinct nodes.
pub fn barycentric_diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut w = vec![1.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i] *= nodes[i] - nodes[j];
            }
        }
    }
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for wi in w.iter_mut() {
        *wi = max / *wi;
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Spectral differentiation matrix on `n` uniform nodes of a period-`2*pi`
/// grid. Odd `n` is preferred: its matrix is exact on all representable
/// Fourier modes and its null space is exactly the constants (even grids
/// annihilate the Nyquist sawtooth, which would pollute weak-form spectra).
pub fn fourier_diff_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 3, "fourier grid too small");
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let k = i as isize - j as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let v = if n % 2 == 0 {
                    0.5 * sign / (0.5 * k as f64 * h).tan()
                } else {
                    0.5 * sign / (0.5 * k as f64 * h).sin()
                };
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        // Mathematically zero; enforcing it makes constants differentiate to
        // exact zeros.
        d[(i, i)] = -row_sum;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2usize, 5, 16, 48] {
            let (x, w) = gauss_legendre(n);
            // Exact for degree 2n-1.
            for deg in 0..(2 * n).min(20) {
                let num: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(num, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fejer1_integrates_smooth_functions() {
        let (x, w) = fejer1(24);
        for deg in 0..10 {
            let num: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert_abs_diff_eq!(num, exact, epsilon = 1e-13);
        }
        let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.cos()).sum();
        assert_abs_diff_eq!(num, 2.0 * 1.0f64.sin(), epsilon = 1e-13);
    }

    #[test]
    fn barycentric_differentiates_polynomials() {
        let (x, _) = gauss_legendre(24);
        let d = barycentric_diff_matrix(&x);
        let f: Vec<f64> = x.iter().map(|t| t.powi(5) - 2.0 * t * t + 1.0).collect();
        let fv = nalgebra::DVector::from_vec(f);
        let df = &d * fv;
        for (i, t) in x.iter().enumerate() {
            assert_abs_diff_eq!(df[i], 5.0 * t.powi(4) - 4.0 * t, epsilon = 1e-9);
        }
    }

    #[test]
    fn fourier_differentiates_trig() {
        let n = 32;
        let d = fourier_diff_matrix(n);
        let theta: Vec<f64> = (0..n)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
            .collect();
        let f = nalgebra::DVector::from_iterator(n, theta.iter().map(|t| (3.0 * t).sin()));
        let df = &d * f;
        for (i, t) in theta.iter().enumerate() {
            assert_abs_diff_eq!(df[i], 3.0 * (3.0 * t).cos(), epsilon = 1e-10);
        }
    }
}
