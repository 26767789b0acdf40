use num_complex::Complex;
use std::f64::consts::TAU;

/// `h(n) = Σ_k x(k)·exp(+j2πkn/N)`, evaluated term by term.
pub fn inverse_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(k, &v)| v * Complex::from_polar(1.0, TAU * ((k * m) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Symmetric Blackman window with coefficients (0.42, 0.5, 0.08).
pub fn blackman(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let d = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let x = k as f64 / d;
            0.42 - 0.5 * (TAU * x).cos() + 0.08 * (2.0 * TAU * x).cos()
        })
        .collect()
}

/// Magnitude of the window's DTFT at `cycles` per sample.
pub fn window_response(w: &[f64], cycles: f64) -> f64 {
    w.iter()
        .enumerate()
        .map(|(k, &v)| Complex::from_polar(v, -TAU * cycles * k as f64))
        .sum::<Complex<f64>>()
        .norm()
}
