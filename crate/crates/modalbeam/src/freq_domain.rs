//! Frequency-domain beamformer: beam weight design, per-frequency modal
//! response, and the block-DFT processing pipeline.
//!
//! The beamforming weights factor into four independent pieces,
//!
//! ```text
//! W_uv(ω) = α_uv · 1/(iωτ_s) · (-τ_s/τ_d)e^{-iω(τ_d-τ_s)} · 1/h_u(ωτ_d) · Y_uv(focus)
//! ```
//!
//! where `τ_s` is the sensor-sphere delay radius and `τ_d` the focus delay.
//! Applied to the field coefficients of a point source at the focal point the
//! product telescopes to a pure delay, which is what makes the response
//! frequency-invariant there.

use crate::error::{invalid, Result};
use crate::fft::{fft_inplace, ifft_inplace, mirror_hermitian};
use crate::modal::{coeff_count, iter_uv, CoefficientKind, ModalCoefficients, SphericalPoint};
use crate::scene::VectorSensorCapture;
use crate::special::{gauss_legendre, legendre_p, sph_hankel, sph_hankel_prime};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Static description of one beamformer instance.
///
/// `alpha` holds the real beam-shape weights for every `(u,v)` pair in flat
/// index order and is deliberately independent of frequency.
#[derive(Debug, Clone)]
pub struct BeamformerConfig {
    pub order: u32,
    pub focus: SphericalPoint,
    /// Sphere radius over sound speed, seconds.
    pub tau_s: f64,
    /// Focus radius over sound speed, seconds.
    pub tau_d: f64,
    pub alpha: Vec<f64>,
    pub block_size: usize,
}

impl BeamformerConfig {
    pub fn new(
        order: u32,
        focus: SphericalPoint,
        array_radius: f64,
        c: f64,
        alpha: Vec<f64>,
        block_size: usize,
    ) -> Result<Self> {
        if !(array_radius > 0.0 && c > 0.0) {
            return Err(invalid("array radius and sound speed must be positive"));
        }
        if focus.r <= array_radius {
            return Err(invalid(format!(
                "focus radius {} must lie outside the sensor sphere radius {}",
                focus.r, array_radius
            )));
        }
        if alpha.len() != coeff_count(order) {
            return Err(invalid(format!(
                "alpha has {} entries, order {} needs {}",
                alpha.len(),
                order,
                coeff_count(order)
            )));
        }
        if !block_size.is_power_of_two() || block_size < 4 {
            return Err(invalid(format!(
                "block size must be a power of two >= 4, got {block_size}"
            )));
        }
        Ok(Self {
            order,
            focus,
            tau_s: array_radius / c,
            tau_d: focus.r / c,
            alpha,
            block_size,
        })
    }

    fn alpha_y(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.alpha.len());
        for (i, (u, v)) in iter_uv(self.order).enumerate() {
            out.push(self.alpha[i] * crate::special::sph_harmonic(u, v, self.focus.dir)?);
        }
        Ok(out)
    }
}

fn chebyshev_t(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// Axisymmetric equal-ripple beam weights.
///
/// Maps the order-`2N` Chebyshev pattern `T_2N(x0 cos(Θ/2))` onto a Legendre
/// expansion by exact quadrature and scales so the synthesized pattern peaks
/// at exactly 1.  Returns one weight per order; degree expansion is
/// [`expand_symmetric_alpha`].  For `order = 1` the "sidelobe" is the single
/// rear ripple, whose depth the same construction pins at the design level.
pub fn design_dolph_chebyshev(order: u32, sidelobe_db: f64) -> Result<Vec<f64>> {
    if order < 1 {
        return Err(invalid("beam design needs order >= 1"));
    }
    if !(sidelobe_db < 0.0) {
        return Err(invalid(format!(
            "sidelobe level must be negative dB, got {sidelobe_db}"
        )));
    }
    let ripple = 10f64.powf(-sidelobe_db / 20.0);
    let x0 = f64::cosh(f64::acosh(ripple) / (2.0 * order as f64));
    // Pattern as a function of mu = cos(theta); polynomial of degree `order`,
    // so 64 nodes integrate the Legendre projections exactly.
    let pattern = |mu: f64| chebyshev_t(2 * order, x0 * ((1.0 + mu) * 0.5).sqrt());
    let (nodes, weights) = gauss_legendre(64)?;
    let mut alpha = Vec::with_capacity(order as usize + 1);
    for u in 0..=order {
        let mut proj = 0.0;
        for (&mu, &w) in nodes.iter().zip(&weights) {
            proj += w * pattern(mu) * legendre_p(u, mu);
        }
        let a_u = proj * (2.0 * u as f64 + 1.0) * 0.5;
        alpha.push(a_u * 4.0 * PI / ((2.0 * u as f64 + 1.0) * ripple));
    }
    Ok(alpha)
}

/// Expands per-order weights to the full `(u,v)` set with `α_uv = α_u0`.
pub fn expand_symmetric_alpha(alpha_u0: &[f64]) -> Vec<f64> {
    let order = alpha_u0.len().saturating_sub(1) as u32;
    iter_uv(order)
        .map(|(u, _)| alpha_u0[u as usize])
        .collect()
}

/// Synthesized axisymmetric pattern value at polar angle `theta` for
/// per-order weights.
pub fn symmetric_pattern(alpha_u0: &[f64], theta: f64) -> f64 {
    alpha_u0
        .iter()
        .enumerate()
        .map(|(u, a)| a * (2.0 * u as f64 + 1.0) / (4.0 * PI) * legendre_p(u as u32, theta.cos()))
        .sum()
}

/// `1/(iωτ_s)`, the spectral slope that turns the sensed quantities into
/// field units.
pub fn spectral_factor(omega: f64, tau_s: f64) -> Complex64 {
    Complex64::new(0.0, -1.0) / (omega * tau_s)
}

/// `(-τ_s/τ_d) e^{-iω(τ_d-τ_s)}`: gain and delay that keep the weights
/// causal for a focus outside the sphere.
pub fn causality_factor(omega: f64, tau_s: f64, tau_d: f64) -> Complex64 {
    Complex64::new(0.0, -omega * (tau_d - tau_s)).exp() * (-tau_s / tau_d)
}

/// `1/h_u(ωτ_d)`: removes the radial spreading of the focal shell.
pub fn radial_focus_factor(u: u32, omega: f64, tau_d: f64) -> Result<Complex64> {
    Ok(Complex64::new(1.0, 0.0) / sph_hankel(u as i32, omega * tau_d)?)
}

/// Beamforming weights `W_uv` at one frequency.
pub fn beamforming_coeffs(config: &BeamformerConfig, omega: f64) -> Result<ModalCoefficients> {
    if !(omega > 0.0) {
        return Err(invalid("beamforming weights need omega > 0"));
    }
    let scalar = spectral_factor(omega, config.tau_s)
        * causality_factor(omega, config.tau_s, config.tau_d);
    let mut out = ModalCoefficients::zeros(config.order, CoefficientKind::Internal);
    for (i, (u, v)) in iter_uv(config.order).enumerate() {
        out.values[i] = config.alpha[i]
            * scalar
            * radial_focus_factor(u, omega, config.tau_d)?
            * crate::special::sph_harmonic(u, v, config.focus.dir)?;
    }
    Ok(out)
}

/// Per-order factors multiplying the velocity and pressure coefficients in
/// the modal response at one frequency.
fn response_factors(config: &BeamformerConfig, omega: f64) -> Result<Vec<(Complex64, Complex64)>> {
    let x_s = omega * config.tau_s;
    let delay = Complex64::new(0.0, -omega * (config.tau_d - config.tau_s)).exp()
        * (config.tau_s / config.tau_d);
    let mut out = Vec::with_capacity(config.order as usize + 1);
    for u in 0..=config.order {
        let h_d = sph_hankel(u as i32, omega * config.tau_d)?;
        let v_fac = Complex64::new(0.0, -x_s) * delay * sph_hankel(u as i32, x_s)? / h_d;
        let p_fac = -x_s * delay * sph_hankel_prime(u, x_s)? / h_d;
        out.push((v_fac, p_fac));
    }
    Ok(out)
}

/// Beamformed modal response `B_uv` from pressure and velocity coefficient
/// sets at one frequency.
pub fn modal_response(
    p_set: &ModalCoefficients,
    v_set: &ModalCoefficients,
    config: &BeamformerConfig,
    omega: f64,
) -> Result<ModalCoefficients> {
    if p_set.order != v_set.order || p_set.order != config.order {
        return Err(invalid("coefficient sets and config must share one order"));
    }
    if !(omega > 0.0) {
        return Err(invalid("modal response needs omega > 0"));
    }
    let factors = response_factors(config, omega)?;
    let mut out = ModalCoefficients::zeros(config.order, CoefficientKind::Internal);
    for (i, (u, _)) in iter_uv(config.order).enumerate() {
        let (v_fac, p_fac) = factors[u as usize];
        out.values[i] = v_set.values[i] * v_fac + p_set.values[i] * p_fac;
    }
    Ok(out)
}

/// Scalar beamformer output `B(ω) = Σ α_uv B_uv Y_uv(focus)`.
pub fn response(b_set: &ModalCoefficients, config: &BeamformerConfig) -> Result<Complex64> {
    if b_set.order != config.order {
        return Err(invalid("response set order differs from config"));
    }
    let ay = config.alpha_y()?;
    Ok(b_set
        .values
        .iter()
        .zip(&ay)
        .map(|(b, a)| b * a)
        .sum())
}

/// Windowed 50%-overlap block-DFT engine shared by the beamformer pipeline
/// and its reconstruction tests.  `combine` maps the per-channel spectra of
/// one bin to one output bin; analysis and synthesis both use the
/// square-root Hann window, so an identity `combine` reproduces the input
/// delayed by half a block.
pub(crate) fn wola_pipeline(
    inputs: &[&[f64]],
    block: usize,
    out_len: usize,
    mut combine: impl FnMut(usize, &[Complex64]) -> Complex64,
) -> Vec<f64> {
    let hop = block / 2;
    let window: Vec<f64> = (0..block).map(|n| (PI * n as f64 / block as f64).sin()).collect();
    let t_in = inputs.first().map_or(0, |c| c.len());
    let padded = hop + t_in + block;
    let n_frames = (padded - block) / hop + 1;
    let mut out = vec![0.0; out_len];
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); block]; inputs.len()];
    let mut column = vec![Complex64::new(0.0, 0.0); inputs.len()];
    let mut acc = vec![Complex64::new(0.0, 0.0); block];
    for frame in 0..n_frames {
        let start = frame * hop;
        for (spec, input) in spectra.iter_mut().zip(inputs) {
            for (n, s) in spec.iter_mut().enumerate() {
                // Padded coordinate start+n maps to input sample start+n-hop.
                let t = (start + n) as isize - hop as isize;
                let x = if t >= 0 && (t as usize) < input.len() {
                    input[t as usize]
                } else {
                    0.0
                };
                *s = Complex64::new(x * window[n], 0.0);
            }
            fft_inplace(spec);
        }
        for k in 0..=block / 2 {
            for (c, spec) in column.iter_mut().zip(&spectra) {
                *c = spec[k];
            }
            acc[k] = combine(k, &column);
        }
        mirror_hermitian(&mut acc);
        ifft_inplace(&mut acc);
        for (n, a) in acc.iter().enumerate() {
            let t = start + n;
            if t < out.len() {
                out[t] += a.re * window[n];
            }
        }
    }
    out
}

/// Full block-DFT beamformer: modal analysis per sample, per-bin modal
/// response, synthesis by overlap-add.  Output sample `t` corresponds to
/// input sample `t - M/2` (half a block of latency).
pub fn block_pipeline(
    capture: &VectorSensorCapture,
    config: &BeamformerConfig,
    rho: f64,
    c: f64,
) -> Result<Vec<f64>> {
    let m = config.block_size;
    if capture.len() < m {
        return Err(invalid(format!(
            "capture of {} samples is shorter than one block of {m}",
            capture.len()
        )));
    }
    let p_t = crate::analysis::pressure_coeffs_t(capture, config.order)?;
    let v_t = crate::analysis::velocity_coeffs_t(capture, config.order, rho, c)?;
    let ay = config.alpha_y()?;
    let n_modes = coeff_count(config.order);

    // Per-bin response factors, folded with alpha*Y so the hot loop is one
    // complex multiply-add per mode.
    let mut v_gain = vec![vec![Complex64::new(0.0, 0.0); n_modes]; m / 2 + 1];
    let mut p_gain = v_gain.clone();
    for k in 1..m / 2 {
        let omega = 2.0 * PI * k as f64 * capture.f_s / m as f64;
        let factors = response_factors(config, omega)?;
        for (i, (u, _)) in iter_uv(config.order).enumerate() {
            let (v_fac, p_fac) = factors[u as usize];
            v_gain[k][i] = v_fac * ay[i];
            p_gain[k][i] = p_fac * ay[i];
        }
    }

    let inputs: Vec<&[f64]> = p_t
        .channels
        .iter()
        .chain(v_t.channels.iter())
        .map(|ch| ch.as_slice())
        .collect();
    Ok(wola_pipeline(&inputs, m, capture.len(), |k, column| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n_modes {
            acc += column[i] * p_gain[k][i] + column[n_modes + i] * v_gain[k][i];
        }
        acc
    }))
}
