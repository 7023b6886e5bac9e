//! Evaluation: beampattern grids, lobe measurements, magnitude-squared
//! coherence, and the multiplication/latency cost model of the two
//! beamformer realizations.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft;
use crate::freq_domain::{self, BeamformerConfig};
use crate::modal::{iter_uv, CoefficientKind, ModalCoefficients, SphericalPoint};
use crate::scene::modal_ground_truth;
use crate::special::{sph_bessel_j, sph_bessel_j_prime};

/// Floor applied before taking logs so exact pattern nulls stay finite.
const DB_FLOOR_REL: f64 = 1e-20;

/// Normalized response magnitudes over a set of evaluation points and
/// frequencies.  Values are in dB with the global maximum at exactly 0.
#[derive(Debug, Clone)]
pub struct BeampatternGrid {
    pub frequencies: Vec<f64>,
    pub points: Vec<SphericalPoint>,
    /// `magnitudes[point][frequency]`.
    pub magnitudes: Vec<Vec<f64>>,
}

impl BeampatternGrid {
    /// One frequency's level sweep over the points.
    pub fn column(&self, f_index: usize) -> Vec<f64> {
        self.magnitudes.iter().map(|row| row[f_index]).collect()
    }

    /// Polar angles of the points in degrees.
    pub fn thetas_deg(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.dir.theta.to_degrees())
            .collect()
    }
}

/// Analytic response of the beamformer to a unit point source: the source's
/// field coefficients are known in closed form, the radial factors at the
/// sensor sphere convert them to pressure/velocity modes, and the
/// frequency-domain weights do the rest.  No capture synthesis involved.
pub fn analytic_response(
    config: &BeamformerConfig,
    source: SphericalPoint,
    omega: f64,
    c: f64,
) -> Result<Complex64> {
    let k_set = modal_ground_truth(source, omega, config.order, c)?;
    let x_s = omega * config.tau_s;
    let mut p_set = ModalCoefficients::zeros(config.order, CoefficientKind::Pressure);
    let mut v_set = ModalCoefficients::zeros(config.order, CoefficientKind::Velocity);
    for (i, (u, _)) in iter_uv(config.order).enumerate() {
        let k = k_set.values[i];
        p_set.values[i] = k * sph_bessel_j(u, x_s)?;
        v_set.values[i] = Complex64::new(0.0, 1.0) * k * sph_bessel_j_prime(u, x_s)?;
    }
    let b_set = freq_domain::modal_response(&p_set, &v_set, config, omega)?;
    freq_domain::response(&b_set, config)
}

/// Response grid over `points` × `frequencies`, normalized to a 0 dB peak.
/// Points must lie strictly outside the sensor sphere.
pub fn beampattern(
    config: &BeamformerConfig,
    points: &[SphericalPoint],
    frequencies: &[f64],
    c: f64,
) -> Result<BeampatternGrid> {
    if points.is_empty() || frequencies.is_empty() {
        return Err(invalid("beampattern grid needs at least one point and one frequency"));
    }
    let r_s = config.tau_s * c;
    let mut raw = vec![vec![0.0f64; frequencies.len()]; points.len()];
    for (i, &pt) in points.iter().enumerate() {
        if pt.r <= r_s {
            return Err(invalid(format!(
                "evaluation point at r={} m sits inside the sensor sphere (r_s={r_s} m)",
                pt.r
            )));
        }
        for (j, &f) in frequencies.iter().enumerate() {
            if !(f > 0.0) {
                return Err(invalid(format!("frequency {f} Hz must be positive")));
            }
            let omega = 2.0 * std::f64::consts::PI * f;
            raw[i][j] = analytic_response(config, pt, omega, c)?.norm();
        }
    }
    let peak = raw
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    if !(peak > 0.0) {
        return Err(invalid("beampattern is identically zero; nothing to normalize"));
    }
    let magnitudes = raw
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|m| 20.0 * (m / peak).max(DB_FLOOR_REL).log10())
                .collect()
        })
        .collect();
    Ok(BeampatternGrid {
        frequencies: frequencies.to_vec(),
        points: points.to_vec(),
        magnitudes,
    })
}

/// Width of the level region within 3 dB of the peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MainlobeWidth {
    Degrees(f64),
    /// The level never drops 3 dB below the peak anywhere on the sweep.
    Full,
}

fn check_theta_sweep(thetas_deg: &[f64], levels_db: &[f64]) -> Result<()> {
    if thetas_deg.len() != levels_db.len() || thetas_deg.len() < 3 {
        return Err(invalid("sweep needs matching angle/level arrays of at least 3 samples"));
    }
    if thetas_deg[0] > 1e-9 || *thetas_deg.last().unwrap() < 180.0 - 1e-9 {
        return Err(invalid("sweep must cover 0..180 degrees"));
    }
    for w in thetas_deg.windows(2) {
        if !(w[1] > w[0]) || w[1] - w[0] > 1.0 + 1e-9 {
            return Err(invalid("sweep must ascend in steps of at most 1 degree"));
        }
    }
    Ok(())
}

/// Linear interpolation of the angle where the level crosses `target`
/// between samples `i` and `i+1`.
fn crossing(thetas: &[f64], levels: &[f64], i: usize, target: f64) -> f64 {
    let (t0, t1) = (thetas[i], thetas[i + 1]);
    let (l0, l1) = (levels[i], levels[i + 1]);
    t0 + (target - l0) / (l1 - l0) * (t1 - t0)
}

/// Contiguous extent of the -3 dB region around the pattern maximum on a
/// `[0, 180]` degree sweep of an axially symmetric pattern.  A peak on the
/// axis counts its mirror image, so a pattern that crosses -3 dB at 45°
/// reports 90°.  [`MainlobeWidth::Full`] when no crossing exists.
pub fn mainlobe_width_deg(thetas_deg: &[f64], levels_db: &[f64]) -> Result<MainlobeWidth> {
    check_theta_sweep(thetas_deg, levels_db)?;
    let peak_idx = levels_db
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite levels"))
        .map(|(i, _)| i)
        .unwrap();
    let target = levels_db[peak_idx] - 3.0;

    let right = (peak_idx..levels_db.len() - 1)
        .find(|&i| levels_db[i + 1] < target)
        .map(|i| crossing(thetas_deg, levels_db, i, target));
    let left = (1..=peak_idx)
        .rev()
        .find(|&i| levels_db[i - 1] < target)
        .map(|i| crossing(thetas_deg, levels_db, i - 1, target));
    match (left, right) {
        (None, None) => Ok(MainlobeWidth::Full),
        // Peak against the 0 degree edge: mirror the one-sided extent.
        (None, Some(r)) if peak_idx == 0 => Ok(MainlobeWidth::Degrees(2.0 * r)),
        (None, Some(r)) => Ok(MainlobeWidth::Degrees(r - thetas_deg[0])),
        (Some(l), None) if peak_idx == levels_db.len() - 1 => {
            Ok(MainlobeWidth::Degrees(2.0 * (thetas_deg[peak_idx] - l)))
        }
        (Some(l), None) => Ok(MainlobeWidth::Degrees(thetas_deg[levels_db.len() - 1] - l)),
        (Some(l), Some(r)) => Ok(MainlobeWidth::Degrees(r - l)),
    }
}

/// Highest level beyond the first null after the mainlobe, or `None` when
/// the pattern decays monotonically (no null to separate a sidelobe).
pub fn sidelobe_level_db(thetas_deg: &[f64], levels_db: &[f64]) -> Result<Option<f64>> {
    check_theta_sweep(thetas_deg, levels_db)?;
    let peak_idx = levels_db
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite levels"))
        .map(|(i, _)| i)
        .unwrap();
    let target = levels_db[peak_idx] - 3.0;
    let mut crossed = false;
    for i in peak_idx + 1..levels_db.len() - 1 {
        crossed = crossed || levels_db[i] < target;
        if crossed && levels_db[i] <= levels_db[i - 1] && levels_db[i] <= levels_db[i + 1] {
            let tail = &levels_db[i + 1..];
            return Ok(tail.iter().copied().fold(None, |acc: Option<f64>, x| {
                Some(acc.map_or(x, |a| a.max(x)))
            }));
        }
    }
    Ok(None)
}

/// Welch magnitude-squared coherence of two equal-length records:
/// `C(f) = |S_xy|² / (S_xx S_yy)` with Hann windows and 50% overlap.
/// Returns `(frequencies, coherence)` for bins `0..=segment/2`.  Bins where
/// an auto-spectrum vanishes are set to 0 and logged.
pub fn msc(x: &[f64], y: &[f64], segment: usize, f_s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(invalid("coherence inputs must have equal length"));
    }
    if !segment.is_power_of_two() || segment < 8 {
        return Err(invalid(format!("segment {segment} must be a power of two >= 8")));
    }
    if x.len() < 4 * segment {
        return Err(invalid(format!(
            "need at least {} samples for segment {segment}, got {}",
            4 * segment,
            x.len()
        )));
    }
    if !(f_s > 0.0) {
        return Err(invalid("sample rate must be positive"));
    }
    let window: Vec<f64> = (0..segment)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / segment as f64).cos()))
        .collect();
    let hop = segment / 2;
    let bins = segment / 2 + 1;
    let mut sxx = vec![0.0f64; bins];
    let mut syy = vec![0.0f64; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut start = 0;
    while start + segment <= x.len() {
        let wx: Vec<f64> = (0..segment).map(|n| x[start + n] * window[n]).collect();
        let wy: Vec<f64> = (0..segment).map(|n| y[start + n] * window[n]).collect();
        let fx = fft::fft_real(&wx, segment);
        let fy = fft::fft_real(&wy, segment);
        for k in 0..bins {
            sxx[k] += fx[k].norm_sqr();
            syy[k] += fy[k].norm_sqr();
            sxy[k] += fx[k] * fy[k].conj();
        }
        start += hop;
    }
    let mut coherence = Vec::with_capacity(bins);
    for k in 0..bins {
        let denom = sxx[k] * syy[k];
        if denom > 0.0 {
            coherence.push((sxy[k].norm_sqr() / denom).clamp(0.0, 1.0));
        } else {
            log::warn!("coherence bin {k}: vanishing auto-spectrum, reporting 0");
            coherence.push(0.0);
        }
    }
    let freqs = (0..bins).map(|k| k as f64 * f_s / segment as f64).collect();
    Ok((freqs, coherence))
}

/// Mean of `values` over bins whose frequency lies in `[f_l, f_h]`.
pub fn band_mean(freqs: &[f64], values: &[f64], f_l: f64, f_h: f64) -> Result<f64> {
    if freqs.len() != values.len() {
        return Err(invalid("frequency and value arrays must match"));
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for (f, v) in freqs.iter().zip(values) {
        if *f >= f_l && *f <= f_h {
            acc += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(invalid(format!("no bins inside [{f_l}, {f_h}] Hz")));
    }
    Ok(acc / n as f64)
}

/// Complex amplitude of a tone at `f_hz` over samples `lo..hi`, by
/// correlation.  Exact when the window spans whole periods.
pub fn tone_amplitude(x: &[f64], lo: usize, hi: usize, f_hz: f64, f_s: f64) -> Result<Complex64> {
    if lo >= hi || hi > x.len() {
        return Err(invalid(format!("window {lo}..{hi} invalid for {} samples", x.len())));
    }
    let omega = 2.0 * std::f64::consts::PI * f_hz;
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, &xn) in x.iter().enumerate().take(hi).skip(lo) {
        acc += xn * Complex64::new(0.0, -omega * n as f64 / f_s).exp();
    }
    Ok(2.0 * acc / (hi - lo) as f64)
}

/// One row of the cost comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub label: String,
    pub multiplications: u64,
    pub latency_samples: u64,
}

/// Multiplications per output sample per modal channel and latency, for
/// the sample-by-sample path (tap count `L`: two convolutions, `2L`, zero
/// latency) and the block path (size `M`: `16·log2(M) + 4`, latency `M/2`).
pub fn complexity_table(l_values: &[usize], m_values: &[usize]) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::with_capacity(l_values.len() + m_values.len());
    for &l in l_values {
        rows.push(ComplexityRow {
            label: format!("L={l}"),
            multiplications: 2 * l as u64,
            latency_samples: 0,
        });
    }
    for &m in m_values {
        if m == 0 {
            return Err(invalid("block size must be positive"));
        }
        rows.push(ComplexityRow {
            label: format!("M={m}"),
            multiplications: 16 * m.ilog2() as u64 + 4,
            latency_samples: m as u64 / 2,
        });
    }
    Ok(rows)
}

/// Exact per-sample multiplication count behind the block-path entry:
/// `[(2·2+1·4)·M·log2(M) + 2·4M·(f_h-f_l)/f_s] / (M/2)`.  With the default
/// band and rate this evaluates to `16·log2(M) + 1.2`; the published
/// rounded form `16·log2(M) + 4` is what [`complexity_table`] reports.
pub fn block_cost_per_sample(m: usize, f_l: f64, f_h: f64, f_s: f64) -> Result<f64> {
    if m < 2 || !m.is_power_of_two() {
        return Err(invalid(format!("block size {m} must be a power of two >= 2")));
    }
    if !(f_s > 0.0 && f_h > f_l && f_l >= 0.0) {
        return Err(invalid("need 0 <= f_l < f_h and positive sample rate"));
    }
    let mf = m as f64;
    let log2m = mf.log2();
    Ok(((2.0 * 2.0 + 4.0) * mf * log2m + 2.0 * 4.0 * mf * (f_h - f_l) / f_s) / (mf / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_domain::{design_dolph_chebyshev, expand_symmetric_alpha, symmetric_pattern};
    use crate::scene::band_noise_signal;
    use approx::assert_relative_eq;

    const C: f64 = 343.0;

    fn v_config() -> BeamformerConfig {
        let alpha = expand_symmetric_alpha(&design_dolph_chebyshev(4, -25.0).unwrap());
        BeamformerConfig::new(
            4,
            SphericalPoint::new(0.4, 0.0, 0.0),
            0.08,
            C,
            alpha,
            1024,
        )
        .unwrap()
    }

    #[test]
    fn grid_peaks_at_zero_db_on_focus() {
        let config = v_config();
        let points: Vec<SphericalPoint> = (0..=180)
            .step_by(5)
            .map(|t| SphericalPoint::new(0.4, (t as f64).to_radians(), 0.0))
            .collect();
        let grid = beampattern(&config, &points, &[1000.0, 2000.0], C).unwrap();
        let peak = grid
            .magnitudes
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        assert_eq!(peak, 0.0);
        // Focal gain is frequency-invariant, so either column may hold the
        // exact peak; the focus point sits at 0 dB up to roundoff.
        assert!(
            grid.magnitudes[0][0].abs() < 1e-9,
            "focus level {} dB",
            grid.magnitudes[0][0]
        );
        assert!(grid.magnitudes.iter().flatten().all(|m| m.is_finite()));
    }

    #[test]
    fn grid_levels_invariant_under_shading_scale() {
        let mut config = v_config();
        let points: Vec<SphericalPoint> = [0.0, 30.0, 90.0, 150.0]
            .iter()
            .map(|t: &f64| SphericalPoint::new(0.4, t.to_radians(), 0.0))
            .collect();
        let a = beampattern(&config, &points, &[700.0, 1500.0], C).unwrap();
        for w in &mut config.alpha {
            *w *= 3.7;
        }
        let b = beampattern(&config, &points, &[700.0, 1500.0], C).unwrap();
        for (ra, rb) in a.magnitudes.iter().zip(&b.magnitudes) {
            for (x, y) in ra.iter().zip(rb) {
                assert_relative_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        let config = v_config();
        assert!(beampattern(&config, &[], &[1000.0], C).is_err());
        let inside = [SphericalPoint::new(0.05, 0.0, 0.0)];
        assert!(beampattern(&config, &inside, &[1000.0], C).is_err());
        let fine = [SphericalPoint::new(0.4, 0.0, 0.0)];
        assert!(beampattern(&config, &fine, &[-5.0], C).is_err());
    }

    /// The analytic sweep at 1 kHz reproduces the shading design: the -3 dB
    /// edge and sidelobe ceiling frozen from the weight-design tests.
    #[test]
    fn analytic_sweep_matches_shading_design() {
        let config = v_config();
        let points: Vec<SphericalPoint> = (0..=360)
            .map(|t| SphericalPoint::new(0.4, (t as f64 * 0.5).to_radians(), 0.0))
            .collect();
        let grid = beampattern(&config, &points, &[1000.0], C).unwrap();
        let thetas = grid.thetas_deg();
        let levels = grid.column(0);
        match mainlobe_width_deg(&thetas, &levels).unwrap() {
            MainlobeWidth::Degrees(w) => {
                assert_relative_eq!(w, 2.0 * 21.40, epsilon = 0.5)
            }
            MainlobeWidth::Full => panic!("expected a -3 dB crossing"),
        }
        let sll = sidelobe_level_db(&thetas, &levels).unwrap().unwrap();
        assert!(
            (-25.5..=-24.5).contains(&sll),
            "sidelobe level {sll} dB off the -25 dB design"
        );
    }

    #[test]
    fn radial_sweep_attenuates_far_points() {
        let config = v_config();
        let points = [
            SphericalPoint::new(0.4, 0.0, 0.0),
            SphericalPoint::new(2.0, 0.0, 0.0),
        ];
        let grid = beampattern(&config, &points, &[1000.0], C).unwrap();
        assert_eq!(grid.magnitudes[0][0], 0.0);
        assert!(
            grid.magnitudes[1][0] <= -10.0,
            "2 m point only {:.2} dB down",
            grid.magnitudes[1][0]
        );
    }

    #[test]
    fn halfpower_width_of_cardioid_power_pattern() {
        // Power pattern cos²(θ/2): amplitude cos(θ/2), crossing where
        // 20·log10 cos(θ/2) = -3, i.e. θ = 2·acos(10^(-3/20)).
        let thetas: Vec<f64> = (0..=360).map(|i| i as f64 * 0.5).collect();
        let levels: Vec<f64> = thetas
            .iter()
            .map(|t| 20.0 * (t.to_radians() / 2.0).cos().max(1e-12).log10())
            .collect();
        let expect = 2.0 * 2.0 * (10.0f64.powf(-3.0 / 20.0)).acos().to_degrees();
        match mainlobe_width_deg(&thetas, &levels).unwrap() {
            MainlobeWidth::Degrees(w) => assert_relative_eq!(w, expect, epsilon = 0.05),
            MainlobeWidth::Full => panic!("cardioid crosses -3 dB"),
        }
        assert!((expect - 180.0).abs() < 0.3);
    }

    #[test]
    fn flat_pattern_reports_full_width_and_no_sidelobe() {
        let thetas: Vec<f64> = (0..=180).map(|i| i as f64).collect();
        let levels = vec![0.0; thetas.len()];
        assert_eq!(mainlobe_width_deg(&thetas, &levels).unwrap(), MainlobeWidth::Full);
        assert_eq!(sidelobe_level_db(&thetas, &levels).unwrap(), None);
        let short = [0.0, 90.0];
        assert!(mainlobe_width_deg(&short, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn interior_peak_measures_both_crossings() {
        // Triangle peaking at 90° with 6 dB/sample slopes: -3 dB points sit
        // half a degree either side.
        let thetas: Vec<f64> = (0..=180).map(|i| i as f64).collect();
        let levels: Vec<f64> = thetas.iter().map(|t| -6.0 * (t - 90.0).abs()).collect();
        match mainlobe_width_deg(&thetas, &levels).unwrap() {
            MainlobeWidth::Degrees(w) => assert_relative_eq!(w, 1.0, epsilon = 1e-9),
            MainlobeWidth::Full => panic!("triangle crosses -3 dB"),
        }
    }

    #[test]
    fn shading_pattern_slice_locates_design_sidelobes() {
        // Direct slice of the symmetric shading pattern, no propagation:
        // equal-ripple sidelobes at the design level.
        let alpha = design_dolph_chebyshev(4, -25.0).unwrap();
        let thetas: Vec<f64> = (0..=720).map(|i| i as f64 * 0.25).collect();
        let peak = symmetric_pattern(&alpha, 0.0).abs();
        let levels: Vec<f64> = thetas
            .iter()
            .map(|t| 20.0 * (symmetric_pattern(&alpha, t.to_radians()).abs() / peak).max(1e-12).log10())
            .collect();
        let sll = sidelobe_level_db(&thetas, &levels).unwrap().unwrap();
        assert_relative_eq!(sll, -25.0, epsilon = 0.05);
    }

    #[test]
    fn coherence_of_filtered_copy_stays_near_unity() {
        let f_s = 48_000.0;
        let n = 1 << 16;
        let x = band_noise_signal(n, 400.0, 4000.0, 400, f_s, 97).unwrap();
        // Delayed, attenuated copy: LTI relation, so coherence ≈ 1.
        let mut y = vec![0.0; n];
        for i in 7..n {
            y[i] = 0.35 * x[i - 7];
        }
        let (freqs, c) = msc(&x, &y, 1024, f_s).unwrap();
        assert!(c.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mean = band_mean(&freqs, &c, 500.0, 3800.0).unwrap();
        assert!(mean > 0.99, "in-band coherence {mean:.4} for an exact LTI copy");
    }

    #[test]
    fn coherence_of_independent_noise_sits_at_estimator_floor() {
        let f_s = 48_000.0;
        let n = 1 << 16;
        let segment = 1024;
        let x = band_noise_signal(n, 400.0, 4000.0, 400, f_s, 1).unwrap();
        let y = band_noise_signal(n, 400.0, 4000.0, 400, f_s, 2).unwrap();
        let (freqs, c) = msc(&x, &y, segment, f_s).unwrap();
        let mean = band_mean(&freqs, &c, 500.0, 3800.0).unwrap();
        let segments = (n - segment) / (segment / 2) + 1;
        let floor = 2.0 / segments as f64;
        assert!(
            mean > 0.2 * floor && mean < 2.5 * floor,
            "independent-noise coherence {mean:.5} vs expected floor {floor:.5}"
        );
    }

    #[test]
    fn coherence_guards_and_degenerate_inputs() {
        let f_s = 48_000.0;
        let x = vec![0.0; 1 << 14];
        let y = band_noise_signal(1 << 14, 400.0, 4000.0, 100, f_s, 3).unwrap();
        let (_, c) = msc(&x, &y, 1024, f_s).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        assert!(msc(&x, &y[..100], 1024, f_s).is_err());
        assert!(msc(&x, &y, 1000, f_s).is_err());
        assert!(msc(&x[..2048], &y[..2048], 1024, f_s).is_err());
    }

    #[test]
    fn published_cost_cells_reproduce_exactly() {
        let rows = complexity_table(&[240, 360, 480, 960], &[256, 512, 1024, 2048]).unwrap();
        let expect: Vec<(&str, u64, u64)> = vec![
            ("L=240", 480, 0),
            ("L=360", 720, 0),
            ("L=480", 960, 0),
            ("L=960", 1920, 0),
            ("M=256", 132, 128),
            ("M=512", 148, 256),
            ("M=1024", 164, 512),
            ("M=2048", 180, 1024),
        ];
        assert_eq!(rows.len(), expect.len());
        for (row, (label, mults, lat)) in rows.iter().zip(expect) {
            assert_eq!(row.label, label);
            assert_eq!(row.multiplications, mults, "{label}");
            assert_eq!(row.latency_samples, lat, "{label}");
        }
    }

    #[test]
    fn cost_table_edges_and_detailed_formula() {
        let rows = complexity_table(&[0], &[2]).unwrap();
        assert_eq!(rows[0].multiplications, 0);
        assert_eq!(rows[1].multiplications, 20);
        assert_eq!(rows[1].latency_samples, 1);
        assert!(complexity_table(&[], &[0]).is_err());
        // The unrounded block cost with the default band comes out lower
        // than the published rounded entry.
        let exact = block_cost_per_sample(1024, 400.0, 4000.0, 48_000.0).unwrap();
        assert_relative_eq!(exact, 16.0 * 10.0 + 16.0 * 3600.0 / 48_000.0, epsilon = 1e-12);
        assert!(block_cost_per_sample(1000, 400.0, 4000.0, 48_000.0).is_err());
    }

    #[test]
    fn tone_amplitude_recovers_synthetic_tone() {
        let f_s = 48_000.0;
        let f = 1500.0;
        let amp = Complex64::new(0.8, -0.6);
        let x: Vec<f64> = (0..4096)
            .map(|n| {
                (amp * Complex64::new(0.0, 2.0 * std::f64::consts::PI * f * n as f64 / f_s).exp())
                    .re
            })
            .collect();
        // 1500 Hz at 48 kHz: 32-sample period, window of 64 whole periods.
        let got = tone_amplitude(&x, 1024, 1024 + 2048, f, f_s).unwrap();
        assert!((got - amp).norm() <= 1e-12);
        assert!(tone_amplitude(&x, 10, 5, f, f_s).is_err());
    }
}
