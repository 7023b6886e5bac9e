//! Thin internal wrappers around the FFT backend.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn fft_inplace(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Inverse transform including the 1/N scale, so `ifft(fft(x)) = x`.
pub(crate) fn ifft_inplace(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let s = 1.0 / n as f64;
    for x in buf.iter_mut() {
        *x *= s;
    }
}

/// Forward transform of a real signal zero-padded to `nfft`.
pub(crate) fn fft_real(x: &[f64], nfft: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(nfft, Complex64::new(0.0, 0.0));
    fft_inplace(&mut buf);
    buf
}

/// Fills bins above Nyquist with the conjugate mirror of the lower half so
/// the inverse transform is real.  Bins `0..=nfft/2` must already be set;
/// the Nyquist bin is forced real.
pub(crate) fn mirror_hermitian(spec: &mut [Complex64]) {
    let n = spec.len();
    debug_assert!(n.is_multiple_of(2));
    spec[n / 2].im = 0.0;
    for k in 1..n / 2 {
        spec[n - k] = spec[k].conj();
    }
}

/// Full linear convolution, length `x.len() + h.len() - 1`.  Direct form
/// for short kernels, transform-based beyond that.
pub(crate) fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    if x.len().min(h.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, &a) in x.iter().enumerate() {
            for (j, &b) in h.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        return out;
    }
    let nfft = out_len.next_power_of_two();
    let mut xs = fft_real(x, nfft);
    let hs = fft_real(h, nfft);
    for (a, b) in xs.iter_mut().zip(&hs) {
        *a *= b;
    }
    ifft_inplace(&mut xs);
    xs.truncate(out_len);
    xs.into_iter().map(|v| v.re).collect()
}
