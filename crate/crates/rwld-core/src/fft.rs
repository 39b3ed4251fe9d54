//! Thin layer over rustfft: padded discrete approximations of the
//! continuous Fourier transform on a uniform grid, with the matching
//! frequency lattice.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Plan a forward FFT of the given length for repeated use.
pub fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Plan an inverse FFT (unnormalized, rustfft convention).
pub fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Sampled continuous Fourier transform of a compactly supported grid
/// function: `hat[m] ~ int f(x) e^{-i xi_m x} dx` on the padded frequency
/// lattice `xi_m = 2 pi m' / (N dx)` with `m'` the signed index.
pub struct FourierTable {
    pub hat: Vec<Complex64>,
    /// Signed angular frequencies, same order as `hat` (non-negative first).
    pub xi: Vec<f64>,
    /// Frequency spacing `2 pi / (N dx)`.
    pub dxi: f64,
}

/// Compute the transform of nodal `values` with spacing `dx`, first node at
/// `x0`, zero-padded to `pad_factor` times the next power of two.
pub fn fourier_table(values: &[f64], dx: f64, x0: f64, pad_factor: usize) -> FourierTable {
    let n = values.len();
    let size = (n * pad_factor.max(1)).next_power_of_two();
    let mut buf: Vec<Complex64> = Vec::with_capacity(size);
    buf.extend(values.iter().map(|&v| Complex64::new(v, 0.0)));
    buf.resize(size, Complex64::new(0.0, 0.0));

    plan_forward(size).process(&mut buf);

    let dxi = 2.0 * std::f64::consts::PI / (size as f64 * dx);
    let mut xi = Vec::with_capacity(size);
    for m in 0..size {
        let signed = if m <= size / 2 { m as f64 } else { m as f64 - size as f64 };
        xi.push(signed * dxi);
    }
    // the raw DFT assumes the first sample sits at x = 0; shift to x0 and
    // scale by dx so the sum approximates the integral
    for (m, v) in buf.iter_mut().enumerate() {
        let phase = -xi[m] * x0;
        *v *= Complex64::new(phase.cos(), phase.sin()) * dx;
    }
    FourierTable { hat: buf, xi, dxi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_transform_matches_closed_form() {
        // F(1_[0,1])(xi) = (1 - e^{-i xi}) / (i xi), |F|^2 = 4 sin^2(xi/2)/xi^2
        let n = 4096;
        let l = 4.0;
        let dx = 2.0 * l / n as f64;
        let x0 = -l;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let x = x0 + j as f64 * dx;
                if (0.0..1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let table = fourier_table(&vals, dx, x0, 4);
        for (m, &xi) in table.xi.iter().enumerate() {
            if xi.abs() < 0.3 || xi.abs() > 20.0 {
                continue;
            }
            let want = 4.0 * (xi / 2.0).sin().powi(2) / (xi * xi);
            let got = table.hat[m].norm_sqr();
            assert!(
                (got - want).abs() < 2e-3,
                "xi = {xi}: |F|^2 = {got}, want {want}"
            );
        }
    }

    #[test]
    fn gaussian_transform_is_real_gaussian() {
        // F(e^{-x^2/2}) = sqrt(2 pi) e^{-xi^2/2} for an even function
        let n = 2048;
        let l = 10.0;
        let dx = 2.0 * l / n as f64;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let x = -l + j as f64 * dx;
                (-x * x / 2.0).exp()
            })
            .collect();
        let table = fourier_table(&vals, dx, -l, 2);
        let want0 = (2.0 * std::f64::consts::PI).sqrt();
        assert!((table.hat[0].re - want0).abs() < 1e-10);
        for (m, &xi) in table.xi.iter().enumerate() {
            if xi.abs() > 5.0 {
                continue;
            }
            let want = want0 * (-xi * xi / 2.0).exp();
            assert!(
                (table.hat[m].re - want).abs() < 1e-9 && table.hat[m].im.abs() < 1e-9,
                "xi = {xi}"
            );
        }
    }
}
