//! From raw captures to modal coefficients.
//!
//! The discrete analysis projects each time sample (or frequency bin) of a
//! capture onto the real harmonics.  Combining the pressure and velocity
//! projections removes the radial dependence: with `x = ωτ_s`,
//!
//! ```text
//! K_uv(ω) = (ix)² V_uv(ω) h_u(x) + i x² P_uv(ω) h_u'(x)
//! ```
//!
//! recovers the radial-independent field coefficients that the beamformer
//! weights act on.  The velocity projection carries a `ρc` scale so both
//! inputs share pressure units.

use crate::error::{invalid, Result};
use crate::modal::{coeff_count, CoefficientKind, ModalCoefficients, ModalTimeSeries};
use crate::scene::VectorSensorCapture;
use crate::special::{sph_hankel, sph_hankel_prime};
use num_complex::Complex64;

fn project_capture(
    capture: &VectorSensorCapture,
    data: &[Vec<f64>],
    order: u32,
    kind: CoefficientKind,
    scale: f64,
) -> Result<ModalTimeSeries> {
    if capture.geometry.len() < coeff_count(order) {
        return Err(invalid(format!(
            "order {order} needs at least {} sensors, geometry has {}",
            coeff_count(order),
            capture.geometry.len()
        )));
    }
    let matrix = capture.geometry.analysis_matrix(order)?;
    let t_len = capture.len();
    let mut channels = vec![vec![0.0; t_len]; coeff_count(order)];
    for (row, chan) in matrix.iter().zip(channels.iter_mut()) {
        for (a, sensor) in row.iter().zip(data) {
            let w = a * scale;
            for (y, x) in chan.iter_mut().zip(sensor) {
                *y += w * x;
            }
        }
    }
    ModalTimeSeries::from_channels(order, kind, channels)
}

/// Per-sample harmonic projection of the pressure channels.
pub fn pressure_coeffs_t(capture: &VectorSensorCapture, order: u32) -> Result<ModalTimeSeries> {
    project_capture(
        capture,
        &capture.pressure,
        order,
        CoefficientKind::Pressure,
        1.0,
    )
}

/// Per-sample harmonic projection of the radial-velocity channels, scaled
/// by `ρc` into pressure units.
pub fn velocity_coeffs_t(
    capture: &VectorSensorCapture,
    order: u32,
    rho: f64,
    c: f64,
) -> Result<ModalTimeSeries> {
    project_capture(
        capture,
        &capture.radial_velocity,
        order,
        CoefficientKind::Velocity,
        rho * c,
    )
}

/// Radial-independent field coefficients from pressure and velocity
/// snapshots at one frequency.
pub fn field_coeffs(
    p_set: &ModalCoefficients,
    v_set: &ModalCoefficients,
    omega: f64,
    tau_s: f64,
) -> Result<ModalCoefficients> {
    if p_set.order != v_set.order {
        return Err(invalid(format!(
            "pressure order {} and velocity order {} differ",
            p_set.order, v_set.order
        )));
    }
    if !(omega > 0.0) {
        return Err(invalid("field coefficients need omega > 0 (radial functions singular at 0)"));
    }
    let x = omega * tau_s;
    let ix2 = Complex64::new(0.0, x) * Complex64::new(0.0, x); // (ix)²
    let i_x2 = Complex64::new(0.0, x * x); // i x²
    let mut out = ModalCoefficients::zeros(p_set.order, CoefficientKind::Field);
    let mut idx = 0;
    for u in 0..=p_set.order {
        let h = sph_hankel(u as i32, x)?;
        let hp = sph_hankel_prime(u, x)?;
        for _ in 0..(2 * u + 1) {
            out.values[idx] = ix2 * v_set.values[idx] * h + i_x2 * p_set.values[idx] * hp;
            idx += 1;
        }
    }
    Ok(out)
}

/// Central-difference derivative with step `1/f_s`; one-sided at the two
/// boundary samples so the output length matches the input.
pub fn derivative(x: &[f64], f_s: f64) -> Result<Vec<f64>> {
    if x.len() < 3 {
        return Err(invalid(format!(
            "derivative needs at least 3 samples, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let mut d = vec![0.0; n];
    d[0] = (x[1] - x[0]) * f_s;
    for t in 1..n - 1 {
        d[t] = (x[t + 1] - x[t - 1]) * 0.5 * f_s;
    }
    d[n - 1] = (x[n - 1] - x[n - 2]) * f_s;
    Ok(d)
}

/// [`derivative`] applied to every channel of a coefficient series.
pub fn time_derivative(series: &ModalTimeSeries, f_s: f64) -> Result<ModalTimeSeries> {
    let channels = series
        .channels
        .iter()
        .map(|c| derivative(c, f_s))
        .collect::<Result<Vec<_>>>()?;
    ModalTimeSeries::from_channels(series.order, CoefficientKind::Internal, channels)
}

/// Estimate of `dv/dt` along an axis from two pressure probes straddling
/// the evaluation point: Euler's equation gives
/// `dv/dt = -(1/ρ) ∂p/∂x ≈ -(1/ρ) [p(x+δ) - p(x-δ)] / (2δ)`.
pub fn velocity_from_pressure_gradient(
    p_plus: &[f64],
    p_minus: &[f64],
    delta_x: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    if !(delta_x > 0.0) {
        return Err(invalid(format!("probe spacing must be > 0, got {delta_x}")));
    }
    if p_plus.len() != p_minus.len() {
        return Err(invalid("pressure probe series must have equal length"));
    }
    let s = -1.0 / (rho * 2.0 * delta_x);
    Ok(p_plus
        .iter()
        .zip(p_minus)
        .map(|(a, b)| s * (a - b))
        .collect())
}
