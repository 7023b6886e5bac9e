//! Time-domain beamformer.
//!
//! Per order, the beamforming weight splits into a direct feedthrough plus a
//! strictly proper rational correction in `iω` whose denominator is the
//! reverse Bessel polynomial `Σ_v φ_v(u) s^{u-v}`, `s = iωτ_d`.  All of its
//! roots lie strictly in the left half of the s-plane, so the correction has
//! a causal impulse response that is a finite sum of decaying complex
//! exponentials: one residue term per pole.  Truncating those responses to
//! FIR taps gives a sample-by-sample beamformer with no block latency.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis;
use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::freq_domain::BeamformerConfig;
use crate::modal::{coeff_count, iter_uv, ModalTimeSeries};
use crate::scene::VectorSensorCapture;
use crate::special::{check_order_supported, phi_coeffs, sph_harmonic, Direction};

/// Relative pole spacing below which two roots are treated as coalesced.
/// The reverse Bessel polynomials have simple roots, so a hit means the
/// eigenvalue solve degenerated rather than a legitimate input.
const POLE_COALESCENCE_REL: f64 = 1e-8;

/// Acceptable Newton residual, relative to the coefficient norm.
const ROOT_RESIDUAL_REL: f64 = 1e-9;

/// Largest tolerated imaginary leakage of the sampled impulse responses,
/// relative to their largest real value.  The poles come in `(ω, -ω*)`
/// pairs with conjugate amplitudes, so the exact sum is real.
const IMAG_LEAKAGE_REL: f64 = 1e-10;

/// Denominator coefficients `φ_v(u)`, descending powers of `s` (monic).
fn denominator_poly(order: u32) -> Result<Vec<f64>> {
    phi_coeffs(order as usize)
}

/// Numerator of the velocity-path correction, descending powers of `s`,
/// degree `u-1`: `Σ_{v=1}^{u} φ_v(u) (ρ^v - 1) s^{u-v}` with `ρ = τ_d/τ_s`.
fn g1_numerator(order: u32, rho: f64) -> Result<Vec<f64>> {
    let phi = phi_coeffs(order as usize)?;
    Ok((1..=order as usize)
        .map(|v| phi[v] * (rho.powi(v as i32) - 1.0))
        .collect())
}

/// Numerator of the pressure-path correction, descending powers of `s`,
/// degree `u-1`: `Σ_{v=1}^{u-1} φ_v(u-1) ρ^v s^{u-v} - Σ_{v=1}^{u} φ_v(u) s^{u-v}`.
/// The `v = 0` terms of the two sums cancel, which is what keeps the
/// correction strictly proper.
fn g2_numerator(order: u32, rho: f64) -> Result<Vec<f64>> {
    let u = order as usize;
    let phi = phi_coeffs(u)?;
    let phi_prev = phi_coeffs(u - 1)?;
    let mut num = vec![0.0; u];
    for v in 1..u {
        num[v - 1] += phi_prev[v] * rho.powi(v as i32);
    }
    for v in 1..=u {
        num[v - 1] -= phi[v];
    }
    Ok(num)
}

/// Polynomial and derivative at `s`, coefficients descending.
fn eval_poly(coeffs: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in coeffs {
        dp = dp * s + p;
        p = p * s + a;
    }
    (p, dp)
}

/// Roots of a real polynomial (descending coefficients, nonzero leading
/// term) via the companion matrix, polished by Newton steps.  Fails if any
/// polished root leaves a residual above `ROOT_RESIDUAL_REL` of the
/// coefficient norm.
fn polished_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[0];
    let monic: Vec<f64> = coeffs.iter().map(|&a| a / lead).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic[n - i];
    }
    let eig = m.complex_eigenvalues();
    let norm = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut roots = Vec::with_capacity(n);
    for &e in eig.iter() {
        let mut s = e;
        for _ in 0..12 {
            let (p, dp) = eval_poly(coeffs, s);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            s -= step;
            if step.norm() <= 1e-15 * s.norm().max(1.0) {
                break;
            }
        }
        let (p, _) = eval_poly(coeffs, s);
        if p.norm() > ROOT_RESIDUAL_REL * norm {
            return Err(Error::Numerical(format!(
                "root polish residual {:.3e} exceeds {:.3e}",
                p.norm(),
                ROOT_RESIDUAL_REL * norm
            )));
        }
        roots.push(s);
    }
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite roots"));
    Ok(roots)
}

/// Pole frequencies `ω_{u,m}` (rad/s) of the order-`u` modal corrections:
/// the reverse Bessel roots mapped by `ω = -i s / τ_d`.  Every pole has
/// strictly positive imaginary part; order 0 has none.
pub fn modal_filter_poles(order: u32, tau_d: f64) -> Result<Vec<Complex64>> {
    check_order_supported(order)?;
    if !(tau_d > 0.0 && tau_d.is_finite()) {
        return Err(invalid(format!("focus delay {tau_d} must be positive")));
    }
    if order == 0 {
        return Ok(Vec::new());
    }
    let den = denominator_poly(order)?;
    let roots = polished_roots(&den)?;
    Ok(roots
        .into_iter()
        .map(|s| s * Complex64::new(0.0, -1.0) / tau_d)
        .collect())
}

/// True when any two poles sit closer than `POLE_COALESCENCE_REL` of their
/// magnitude; the residue expansion needs simple poles.
fn has_coalesced_poles(poles: &[Complex64]) -> bool {
    for (i, a) in poles.iter().enumerate() {
        for b in poles.iter().skip(i + 1) {
            if (a - b).norm() < POLE_COALESCENCE_REL * a.norm().max(b.norm()) {
                return true;
            }
        }
    }
    false
}

/// Causal sum of decaying complex exponentials
/// `g(t) = U(t) Σ_m c_m e^{iω_m t}`, with `Im ω_m > 0`.
///
/// At the jump the Fourier-inversion midpoint applies: `g(0) = g(0+)/2`.
#[derive(Debug, Clone)]
pub struct ExponentialFilter {
    terms: Vec<(Complex64, Complex64)>,
}

impl ExponentialFilter {
    /// `(amplitude, pole)` pairs.
    pub fn terms(&self) -> &[(Complex64, Complex64)] {
        &self.terms
    }

    /// Exact complex sum at `t >= 0`, before the real part is taken.
    pub fn value_complex(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(c, w)| c * (Complex64::new(0.0, 1.0) * w * t).exp())
            .sum()
    }

    /// `g(t)`; zero for `t < 0`, midpoint at `t = 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let v = self.value_complex(t).re;
        if t == 0.0 {
            0.5 * v
        } else {
            v
        }
    }

    /// Height of the jump at the origin, `g(0+)`.
    pub fn initial_value(&self) -> f64 {
        self.terms.iter().map(|&(c, _)| c).sum::<Complex64>().re
    }

    /// `∫_0^∞ g dt`, the zero-frequency gain.
    pub fn integral(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(c, w)| c * Complex64::new(0.0, 1.0) / w)
            .sum::<Complex64>()
            .re
    }

    /// `∫_{t0}^∞ g² dt` in closed form: every pairwise product of terms is
    /// again a decaying exponential.
    pub fn energy_from(&self, t0: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(ca, wa) in &self.terms {
            for &(cb, wb) in &self.terms {
                let w = wa + wb;
                acc += ca * cb * Complex64::new(0.0, 1.0) / w
                    * (Complex64::new(0.0, 1.0) * w * t0).exp();
            }
        }
        acc.re
    }

    /// `∫_0^∞ g² dt`.
    pub fn energy(&self) -> f64 {
        self.energy_from(0.0)
    }
}

/// Continuous-time impulse responses of the order-`u` corrections, one for
/// the velocity path and one for the pressure path, by residue expansion:
/// `c_m = num(s_m) / (τ_d · den'(s_m))` at each denominator root `s_m`.
pub fn residue_filters(
    order: u32,
    tau_s: f64,
    tau_d: f64,
) -> Result<(ExponentialFilter, ExponentialFilter)> {
    check_order_supported(order)?;
    if !(tau_s > 0.0 && tau_d > 0.0 && tau_s.is_finite() && tau_d.is_finite()) {
        return Err(invalid(format!(
            "delays must be positive, got tau_s={tau_s}, tau_d={tau_d}"
        )));
    }
    if order == 0 {
        return Ok((
            ExponentialFilter { terms: Vec::new() },
            ExponentialFilter { terms: Vec::new() },
        ));
    }
    let rho = tau_d / tau_s;
    let den = denominator_poly(order)?;
    let num1 = g1_numerator(order, rho)?;
    let num2 = g2_numerator(order, rho)?;
    let roots = polished_roots(&den)?;
    let poles: Vec<Complex64> = roots
        .iter()
        .map(|&s| s * Complex64::new(0.0, -1.0) / tau_d)
        .collect();
    if has_coalesced_poles(&poles) {
        return Err(Error::Unsupported(format!(
            "order {order} produced coalesced poles; residue expansion needs simple poles"
        )));
    }
    let mut terms1 = Vec::with_capacity(roots.len());
    let mut terms2 = Vec::with_capacity(roots.len());
    for (&s, &w) in roots.iter().zip(&poles) {
        let (_, dden) = eval_poly(&den, s);
        let (n1, _) = eval_poly(&num1, s);
        let (n2, _) = eval_poly(&num2, s);
        terms1.push((n1 / (tau_d * dden), w));
        terms2.push((n2 / (tau_d * dden), w));
    }
    Ok((ExponentialFilter { terms: terms1 }, ExponentialFilter { terms: terms2 }))
}

/// Velocity-path correction transfer `num1(iωτ_d) / den(iωτ_d)`.  Well
/// defined for every real `ω` (the denominator has no imaginary-axis
/// roots); zero for order 0.
pub fn g1_transfer(order: u32, omega: f64, tau_s: f64, tau_d: f64) -> Result<Complex64> {
    check_order_supported(order)?;
    if !(tau_s > 0.0 && tau_d > 0.0) {
        return Err(invalid("delays must be positive"));
    }
    if order == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let s = Complex64::new(0.0, omega * tau_d);
    let (num, _) = eval_poly(&g1_numerator(order, tau_d / tau_s)?, s);
    let (den, _) = eval_poly(&denominator_poly(order)?, s);
    Ok(num / den)
}

/// Pressure-path correction transfer `num2(iωτ_d) / den(iωτ_d)`.
pub fn g2_transfer(order: u32, omega: f64, tau_s: f64, tau_d: f64) -> Result<Complex64> {
    check_order_supported(order)?;
    if !(tau_s > 0.0 && tau_d > 0.0) {
        return Err(invalid("delays must be positive"));
    }
    if order == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let s = Complex64::new(0.0, omega * tau_d);
    let (num, _) = eval_poly(&g2_numerator(order, tau_d / tau_s)?, s);
    let (den, _) = eval_poly(&denominator_poly(order)?, s);
    Ok(num / den)
}

/// Impulse-response estimate by inverse DFT of a transfer function sampled
/// at `nfft` signed frequencies spaced `f_est/nfft` apart: `g[n] ≈ g(n/f_est)`.
///
/// `transfer` must satisfy `H(-ω) = H(ω)*` (real impulse response); the
/// tiny imaginary residue of the inverse transform is dropped.
pub fn estimate_impulse_response<F>(transfer: F, f_est: f64, nfft: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Complex64,
{
    if !(f_est > 0.0) {
        return Err(invalid(format!("estimation rate {f_est} must be positive")));
    }
    if nfft < 2 || !nfft.is_power_of_two() {
        return Err(invalid(format!("transform size {nfft} must be a power of two >= 2")));
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); nfft];
    for (k, slot) in spectrum.iter_mut().enumerate() {
        let f_k = if k <= nfft / 2 {
            k as f64 * f_est / nfft as f64
        } else {
            (k as f64 - nfft as f64) * f_est / nfft as f64
        };
        *slot = transfer(2.0 * std::f64::consts::PI * f_k);
    }
    fft::ifft_inplace(&mut spectrum);
    Ok(spectrum.into_iter().map(|z| z.re * f_est).collect())
}

/// FIR realization of one order's correction pair: poles, residue
/// amplitudes, and impulse responses sampled at `f_s` and truncated.
#[derive(Debug, Clone)]
pub struct ModalFilterPair {
    pub order: u32,
    /// Pole frequencies, rad/s, strictly positive imaginary parts.
    pub poles: Vec<Complex64>,
    /// Exponential amplitudes of the velocity-path response.
    pub residues_g1: Vec<Complex64>,
    /// Exponential amplitudes of the pressure-path response.
    pub residues_g2: Vec<Complex64>,
    /// `g¹(k/f_s)`, units 1/s; index 0 holds the jump midpoint.
    pub taps_g1: Vec<f64>,
    pub taps_g2: Vec<f64>,
    pub tau_s: f64,
    pub tau_d: f64,
    /// Energy fraction `∫_{T}^∞ g² / ∫_0^∞ g²` lost to truncation.
    pub tail_fraction_g1: f64,
    pub tail_fraction_g2: f64,
}

impl ModalFilterPair {
    /// Designs the order-`u` pair: residue expansion, sampling at `f_s`,
    /// truncation to `taps` samples.  Order 0 needs no correction and gets
    /// all-zero taps.
    pub fn design(order: u32, tau_s: f64, tau_d: f64, f_s: f64, taps: usize) -> Result<Self> {
        if !(f_s > 0.0 && f_s.is_finite()) {
            return Err(invalid(format!("sample rate {f_s} must be positive")));
        }
        if taps == 0 {
            return Err(invalid("tap count must be at least 1"));
        }
        let (g1, g2) = residue_filters(order, tau_s, tau_d)?;
        let taps_g1 = sample_taps(&g1, f_s, taps)?;
        let taps_g2 = sample_taps(&g2, f_s, taps)?;
        let horizon = taps as f64 / f_s;
        let tail = |g: &ExponentialFilter| {
            let total = g.energy();
            if total > 0.0 {
                g.energy_from(horizon) / total
            } else {
                0.0
            }
        };
        let (poles, residues_g1, residues_g2) = (
            g1.terms().iter().map(|&(_, w)| w).collect(),
            g1.terms().iter().map(|&(c, _)| c).collect(),
            g2.terms().iter().map(|&(c, _)| c).collect(),
        );
        Ok(Self {
            order,
            poles,
            residues_g1,
            residues_g2,
            tail_fraction_g1: tail(&g1),
            tail_fraction_g2: tail(&g2),
            taps_g1,
            taps_g2,
            tau_s,
            tau_d,
        })
    }
}

/// Samples a filter at `k/f_s`, guarding the realness of the exponential
/// sum before dropping imaginary parts.
fn sample_taps(g: &ExponentialFilter, f_s: f64, taps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(taps);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for k in 0..taps {
        let z = g.value_complex(k as f64 / f_s);
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
        out.push(if k == 0 { 0.5 * z.re } else { z.re });
    }
    if max_im > IMAG_LEAKAGE_REL * max_re && max_re > 0.0 {
        return Err(Error::Numerical(format!(
            "imaginary leakage {max_im:.3e} of sampled response exceeds {IMAG_LEAKAGE_REL:e} of peak {max_re:.3e}"
        )));
    }
    Ok(out)
}

/// Correction pairs for all orders `0..=max_order`.
pub fn design_filter_bank(
    max_order: u32,
    tau_s: f64,
    tau_d: f64,
    f_s: f64,
    taps: usize,
) -> Result<Vec<ModalFilterPair>> {
    (0..=max_order)
        .map(|u| ModalFilterPair::design(u, tau_s, tau_d, f_s, taps))
        .collect()
}

/// One modal channel of the discrete beamformer:
///
/// ```text
/// y1 = -τ_s·dv/dt + (u+1)·p        y2 = τ_s·dp/dt
/// b   = y1 + y2 + (1/f_s)·(y1 * g¹ + y2 * g²)
/// ```
///
/// Derivatives are centered with one-sided ends; convolutions are causal
/// and truncated to the input length.
pub fn modal_td_response(
    p: &[f64],
    v: &[f64],
    pair: &ModalFilterPair,
    f_s: f64,
) -> Result<Vec<f64>> {
    if p.len() != v.len() {
        return Err(invalid(format!(
            "pressure ({}) and velocity ({}) sample counts differ",
            p.len(),
            v.len()
        )));
    }
    let dp = analysis::derivative(p, f_s)?;
    let dv = analysis::derivative(v, f_s)?;
    let lead = (pair.order + 1) as f64;
    let y1: Vec<f64> = p
        .iter()
        .zip(&dv)
        .map(|(&pk, &dvk)| -pair.tau_s * dvk + lead * pk)
        .collect();
    let y2: Vec<f64> = dp.iter().map(|&dpk| pair.tau_s * dpk).collect();
    let c1 = fft::convolve(&y1, &pair.taps_g1);
    let c2 = fft::convolve(&y2, &pair.taps_g2);
    let dt = 1.0 / f_s;
    Ok((0..p.len())
        .map(|k| y1[k] + y2[k] + dt * (c1[k] + c2[k]))
        .collect())
}

fn check_bank(filters: &[ModalFilterPair], order: u32) -> Result<()> {
    if filters.len() <= order as usize {
        return Err(invalid(format!(
            "filter bank covers {} orders, need {}",
            filters.len(),
            order + 1
        )));
    }
    for (u, pair) in filters.iter().take(order as usize + 1).enumerate() {
        if pair.order != u as u32 {
            return Err(invalid(format!(
                "filter bank slot {u} holds order {}",
                pair.order
            )));
        }
    }
    Ok(())
}

/// Offline beamformer: weights every modal channel response by
/// `α_{u,v} Y_{u,v}(focus)` and sums.
pub fn td_beamform(
    p_t: &ModalTimeSeries,
    v_t: &ModalTimeSeries,
    filters: &[ModalFilterPair],
    alpha: &[f64],
    focus: Direction,
    f_s: f64,
) -> Result<Vec<f64>> {
    if p_t.order != v_t.order || p_t.len != v_t.len {
        return Err(invalid("pressure and velocity series must share order and length"));
    }
    let order = p_t.order;
    if alpha.len() != coeff_count(order) {
        return Err(invalid(format!(
            "{} shading weights for {} modes",
            alpha.len(),
            coeff_count(order)
        )));
    }
    check_bank(filters, order)?;
    let mut out = vec![0.0; p_t.len];
    for (i, (u, v)) in iter_uv(order).enumerate() {
        let w = alpha[i] * sph_harmonic(u, v, focus)?;
        if w == 0.0 {
            continue;
        }
        let b = modal_td_response(
            p_t.channel(u, v),
            v_t.channel(u, v),
            &filters[u as usize],
            f_s,
        )?;
        for (o, bk) in out.iter_mut().zip(&b) {
            *o += w * bk;
        }
    }
    Ok(out)
}

/// Capture-to-output convenience: modal analysis followed by the offline
/// time-domain beamformer.  The bank must have been designed for the same
/// delays as `config`.
pub fn td_pipeline(
    capture: &VectorSensorCapture,
    config: &BeamformerConfig,
    filters: &[ModalFilterPair],
    rho: f64,
    c: f64,
) -> Result<Vec<f64>> {
    check_bank(filters, config.order)?;
    for pair in filters.iter().take(config.order as usize + 1) {
        if (pair.tau_s - config.tau_s).abs() > 1e-9 * config.tau_s
            || (pair.tau_d - config.tau_d).abs() > 1e-9 * config.tau_d
        {
            return Err(invalid("filter bank delays do not match the beamformer config"));
        }
    }
    let p_t = analysis::pressure_coeffs_t(capture, config.order)?;
    let v_t = analysis::velocity_coeffs_t(capture, config.order, rho, c)?;
    td_beamform(&p_t, &v_t, filters, &config.alpha, config.focus.dir, capture.f_s)
}

/// Sample-by-sample beamformer with per-channel FIR state.
///
/// Feeding sample `n` emits output sample `n-1`: the centered derivative
/// needs one sample of lookahead.  `finish` flushes the last output with a
/// one-sided derivative, so a stream of `T` samples yields exactly `T`
/// outputs and matches [`td_beamform`] to rounding error.
pub struct StreamingBeamformer {
    order: u32,
    f_s: f64,
    tau_s: f64,
    /// `α_i Y_i(focus)` per flat channel.
    weights: Vec<f64>,
    taps1: Vec<Vec<f64>>,
    taps2: Vec<Vec<f64>>,
    ring1: Vec<Vec<f64>>,
    ring2: Vec<Vec<f64>>,
    pos: usize,
    tap_len: usize,
    prev_p: Vec<f64>,
    prev2_p: Vec<f64>,
    prev_v: Vec<f64>,
    prev2_v: Vec<f64>,
    count: usize,
    done: bool,
}

impl StreamingBeamformer {
    pub fn new(
        filters: &[ModalFilterPair],
        alpha: &[f64],
        focus: Direction,
        f_s: f64,
    ) -> Result<Self> {
        if !(f_s > 0.0 && f_s.is_finite()) {
            return Err(invalid(format!("sample rate {f_s} must be positive")));
        }
        if filters.is_empty() {
            return Err(invalid("filter bank is empty"));
        }
        let order = filters.len() as u32 - 1;
        check_bank(filters, order)?;
        if alpha.len() != coeff_count(order) {
            return Err(invalid(format!(
                "{} shading weights for {} modes",
                alpha.len(),
                coeff_count(order)
            )));
        }
        let tap_len = filters[0].taps_g1.len();
        if filters
            .iter()
            .any(|p| p.taps_g1.len() != tap_len || p.taps_g2.len() != tap_len)
        {
            return Err(invalid("filter bank tap lengths differ"));
        }
        let channels = coeff_count(order);
        let mut weights = Vec::with_capacity(channels);
        for (i, (u, v)) in iter_uv(order).enumerate() {
            weights.push(alpha[i] * sph_harmonic(u, v, focus)?);
        }
        Ok(Self {
            order,
            f_s,
            tau_s: filters[0].tau_s,
            weights,
            taps1: filters.iter().map(|p| p.taps_g1.clone()).collect(),
            taps2: filters.iter().map(|p| p.taps_g2.clone()).collect(),
            ring1: vec![vec![0.0; tap_len]; channels],
            ring2: vec![vec![0.0; tap_len]; channels],
            pos: 0,
            tap_len,
            prev_p: vec![0.0; channels],
            prev2_p: vec![0.0; channels],
            prev_v: vec![0.0; channels],
            prev2_v: vec![0.0; channels],
            count: 0,
            done: false,
        })
    }

    /// Modal channel count expected by `push`.
    pub fn channels(&self) -> usize {
        self.weights.len()
    }

    /// Highest modal order the instance realizes.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// One output sample from the per-channel direct terms plus ring/tap
    /// dot products; `d*` are the derivative estimates at the emitted index.
    fn emit(&mut self, p_at: &[f64], dp: &[f64], dv: &[f64]) -> f64 {
        self.pos = (self.pos + 1) % self.tap_len;
        let dt = 1.0 / self.f_s;
        let mut acc = 0.0;
        for ch in 0..self.weights.len() {
            let u = crate::modal::order_degree(ch).0 as usize;
            let lead = (u + 1) as f64;
            let y1 = -self.tau_s * dv[ch] + lead * p_at[ch];
            let y2 = self.tau_s * dp[ch];
            self.ring1[ch][self.pos] = y1;
            self.ring2[ch][self.pos] = y2;
            let w = self.weights[ch];
            if w == 0.0 {
                continue;
            }
            let mut conv = 0.0;
            for (n, (&t1, &t2)) in self.taps1[u].iter().zip(&self.taps2[u]).enumerate() {
                let idx = (self.pos + self.tap_len - n) % self.tap_len;
                conv += t1 * self.ring1[ch][idx] + t2 * self.ring2[ch][idx];
            }
            acc += w * (y1 + y2 + dt * conv);
        }
        acc
    }

    /// Accepts modal sample `n` (pressure and velocity coefficients per
    /// channel) and returns output sample `n-1`, or `None` on the first call.
    pub fn push(&mut self, p: &[f64], v: &[f64]) -> Result<Option<f64>> {
        if self.done {
            return Err(invalid("stream already finished"));
        }
        let channels = self.weights.len();
        if p.len() != channels || v.len() != channels {
            return Err(invalid(format!(
                "expected {channels} modal channels, got {} pressure / {} velocity",
                p.len(),
                v.len()
            )));
        }
        let n = self.count;
        self.count += 1;
        let out = if n == 0 {
            None
        } else {
            let scale = if n == 1 { self.f_s } else { 0.5 * self.f_s };
            let older = if n == 1 { &self.prev_p } else { &self.prev2_p };
            let dp: Vec<f64> = p.iter().zip(older).map(|(&a, &b)| (a - b) * scale).collect();
            let older_v = if n == 1 { &self.prev_v } else { &self.prev2_v };
            let dv: Vec<f64> = v.iter().zip(older_v).map(|(&a, &b)| (a - b) * scale).collect();
            let p_at = self.prev_p.clone();
            Some(self.emit(&p_at, &dp, &dv))
        };
        std::mem::swap(&mut self.prev2_p, &mut self.prev_p);
        std::mem::swap(&mut self.prev2_v, &mut self.prev_v);
        self.prev_p.clear();
        self.prev_p.extend_from_slice(p);
        self.prev_v.clear();
        self.prev_v.extend_from_slice(v);
        Ok(out)
    }

    /// Emits the final output sample with a one-sided derivative.
    pub fn finish(&mut self) -> Result<f64> {
        if self.done {
            return Err(invalid("stream already finished"));
        }
        if self.count < 3 {
            return Err(invalid(format!(
                "stream of {} samples is too short for derivative estimates",
                self.count
            )));
        }
        self.done = true;
        let dp: Vec<f64> = self
            .prev_p
            .iter()
            .zip(&self.prev2_p)
            .map(|(&a, &b)| (a - b) * self.f_s)
            .collect();
        let dv: Vec<f64> = self
            .prev_v
            .iter()
            .zip(&self.prev2_v)
            .map(|(&a, &b)| (a - b) * self.f_s)
            .collect();
        let p_at = self.prev_p.clone();
        Ok(self.emit(&p_at, &dp, &dv))
    }
}

/// Tap table as CSV: `u,filter,tap,value` with filter 1 (velocity path)
/// or 2 (pressure path).
pub fn taps_to_csv<W: std::io::Write>(filters: &[ModalFilterPair], mut w: W) -> Result<()> {
    writeln!(w, "u,filter,tap,value")?;
    for pair in filters {
        for (which, taps) in [(1, &pair.taps_g1), (2, &pair.taps_g2)] {
            for (k, x) in taps.iter().enumerate() {
                writeln!(w, "{},{which},{k},{x:.17e}", pair.order)?;
            }
        }
    }
    Ok(())
}
