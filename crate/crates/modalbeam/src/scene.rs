//! Free-field scene synthesis: what a spherical vector-sensor array
//! records from point sources.
//!
//! Propagation is synthesized per frequency bin on the full-length DFT of
//! each source signal (exact delays and 1/r amplitudes, no fractional-delay
//! filters), with enough zero padding that the circular convolution never
//! wraps.  Particle velocity follows from the pressure gradient via Euler's
//! equation under the `e^{+iωt}` convention, projected on each sensor's
//! radial axis.

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::modal::{iter_uv, CoefficientKind, ModalCoefficients, SphericalPoint};
use crate::sampling::SensorArrayGeometry;
use crate::special::{sph_hankel, sph_harmonic};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::io::{Read, Write};

/// One point source: a position and its emitted signal (unit strength,
/// pressure × distance units).
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub position: SphericalPoint,
    pub signal: Vec<f64>,
}

/// A complete simulation setup.  `snr_db: None` disables sensor noise;
/// otherwise white Gaussian noise is added per channel, scaled to the
/// channel's own signal power.
#[derive(Debug, Clone)]
pub struct AcousticScene {
    pub sources: Vec<SourceSpec>,
    pub c: f64,
    pub rho: f64,
    pub f_s: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

/// What a vector-sensor array recorded: per-sensor pressure and radial
/// particle velocity at the array surface.
#[derive(Debug, Clone)]
pub struct VectorSensorCapture {
    /// pressure[q][t], Pa
    pub pressure: Vec<Vec<f64>>,
    /// radial_velocity[q][t], m/s, positive outward
    pub radial_velocity: Vec<Vec<f64>>,
    pub f_s: f64,
    pub geometry: SensorArrayGeometry,
}

/// Which capture quantity a CSV export writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureQuantity {
    Pressure,
    RadialVelocity,
}

const CAPTURE_MAGIC: &[u8; 8] = b"MBCAP001";

/// Linear-phase FIR approximation of a 4th-order Butterworth bandpass
/// magnitude, with a unit constraint that pins the DC gain to exactly zero
/// (double zero at DC, so the response rolls off as f² toward 0 Hz).
///
/// Least-squares fit of the symmetric (even-length) tap set on a dense
/// frequency grid, solved through the constrained normal equations.
pub fn butterworth_bandpass_fir(taps: usize, f_l: f64, f_h: f64, f_s: f64) -> Result<Vec<f64>> {
    if taps < 4 || !taps.is_multiple_of(2) {
        return Err(invalid(format!("tap count must be even and >= 4, got {taps}")));
    }
    check_band(f_l, f_h, f_s)?;
    let half = taps / 2;
    let grid_n = 4096usize;
    // A(f) = 2 Σ_k a_k cos(2π f (k+1/2)/f_s) for the symmetric half-taps a.
    let mut phi = DMatrix::zeros(grid_n, half);
    let mut d = nalgebra::DVector::zeros(grid_n);
    for i in 0..grid_n {
        let f = f_s / 2.0 * i as f64 / (grid_n - 1) as f64;
        for k in 0..half {
            phi[(i, k)] = 2.0 * (2.0 * PI * f * (k as f64 + 0.5) / f_s).cos();
        }
        d[i] = if f > 0.0 {
            let xi = (f * f - f_l * f_h) / (f * (f_h - f_l));
            1.0 / (1.0 + xi.powi(8)).sqrt()
        } else {
            0.0
        };
    }
    // Constrained least squares: minimize |phi a - d| subject to A(0) = 0.
    let a_mat = phi.transpose() * &phi;
    let g = phi.transpose() * d;
    let mut kkt = DMatrix::zeros(half + 1, half + 1);
    kkt.view_mut((0, 0), (half, half)).copy_from(&a_mat);
    for k in 0..half {
        kkt[(k, half)] = 2.0;
        kkt[(half, k)] = 2.0;
    }
    let mut rhs = nalgebra::DVector::zeros(half + 1);
    rhs.rows_mut(0, half).copy_from(&g);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular filter design system".into()))?;
    let mut h = vec![0.0; taps];
    for k in 0..half {
        h[half + k] = sol[k];
        h[half - 1 - k] = sol[k];
    }
    Ok(h)
}

fn check_band(f_l: f64, f_h: f64, f_s: f64) -> Result<()> {
    if !(f_l > 0.0 && f_l < f_h && f_h < f_s / 2.0) {
        return Err(invalid(format!(
            "band [{f_l}, {f_h}] Hz invalid for sample rate {f_s} Hz"
        )));
    }
    Ok(())
}

/// Unit-variance Gaussian noise shaped by [`butterworth_bandpass_fir`].
/// Fixed seed gives bit-identical output.
pub fn band_noise_signal(
    length: usize,
    f_l: f64,
    f_h: f64,
    taps: usize,
    f_s: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(invalid("noise signal needs at least 2 samples"));
    }
    let h = butterworth_bandpass_fir(taps, f_l, f_h, f_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..length).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; length];
    for (n, y) in out.iter_mut().enumerate() {
        let kmax = n.min(taps - 1);
        *y = (0..=kmax).map(|k| h[k] * white[n - k]).sum();
    }
    let power: f64 = out.iter().map(|x| x * x).sum::<f64>() / length as f64;
    if power > 0.0 {
        let s = 1.0 / power.sqrt();
        for y in &mut out {
            *y *= s;
        }
    }
    Ok(out)
}

/// Free-field pressure transfer `e^{-iωR/c}/(4πR)` from `source` to `eval`.
pub fn pressure_transfer(source: [f64; 3], eval: [f64; 3], omega: f64, c: f64) -> Complex64 {
    let r = distance(source, eval);
    Complex64::new(0.0, -omega * r / c).exp() / (4.0 * PI * r)
}

/// Particle-velocity transfer along `axis` (unit vector) at `eval`:
/// the pressure gradient through Euler's equation,
/// `v = G(R)·(1/(ρc) - i/(ρωR))·R̂`, projected on the axis.
pub fn velocity_transfer(
    source: [f64; 3],
    eval: [f64; 3],
    axis: [f64; 3],
    omega: f64,
    c: f64,
    rho: f64,
) -> Complex64 {
    let r = distance(source, eval);
    let rhat = [
        (eval[0] - source[0]) / r,
        (eval[1] - source[1]) / r,
        (eval[2] - source[2]) / r,
    ];
    let mu = rhat[0] * axis[0] + rhat[1] * axis[1] + rhat[2] * axis[2];
    let g = Complex64::new(0.0, -omega * r / c).exp() / (4.0 * PI * r);
    g * Complex64::new(1.0 / (rho * c), -1.0 / (rho * omega * r)) * mu
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Synthesizes the array recording of a scene over `duration` seconds.
///
/// Per sensor and quantity the source spectra are multiplied by the exact
/// transfer function bin by bin and inverse-transformed; the DFT length is
/// padded past the longest propagation delay so nothing wraps around.
/// Sensor noise (if enabled) is drawn per channel after synthesis, scaled
/// to the channel's own signal power.
pub fn simulate_capture(
    scene: &AcousticScene,
    geometry: &SensorArrayGeometry,
    duration: f64,
) -> Result<VectorSensorCapture> {
    let t_len = (duration * scene.f_s).round() as usize;
    if t_len < 1 {
        return Err(invalid(format!("duration {duration} s too short at {} Hz", scene.f_s)));
    }
    if !(scene.f_s > 0.0 && scene.c > 0.0 && scene.rho > 0.0) {
        return Err(invalid("scene constants must be positive"));
    }
    let mut max_r = 0.0f64;
    for s in &scene.sources {
        if s.position.r <= geometry.radius {
            return Err(invalid(format!(
                "source at r={} m lies inside the array sphere r_s={} m",
                s.position.r, geometry.radius
            )));
        }
        max_r = max_r.max(s.position.r);
    }
    let max_delay = ((max_r + geometry.radius) / scene.c * scene.f_s).ceil() as usize + 2;
    let nfft = (t_len + max_delay).next_power_of_two();

    let spectra: Vec<Vec<Complex64>> = scene
        .sources
        .iter()
        .map(|s| fft::fft_real(&s.signal[..s.signal.len().min(t_len)], nfft))
        .collect();
    let positions: Vec<[f64; 3]> = scene.sources.iter().map(|s| s.position.cartesian()).collect();

    let mut pressure = Vec::with_capacity(geometry.len());
    let mut velocity = Vec::with_capacity(geometry.len());
    for dir in &geometry.directions {
        let axis = dir.unit_vector();
        let sensor = [
            axis[0] * geometry.radius,
            axis[1] * geometry.radius,
            axis[2] * geometry.radius,
        ];
        let mut p_spec = vec![Complex64::new(0.0, 0.0); nfft];
        let mut v_spec = vec![Complex64::new(0.0, 0.0); nfft];
        for (src, spec) in positions.iter().zip(&spectra) {
            for k in 0..=nfft / 2 {
                let omega = 2.0 * PI * scene.f_s * k as f64 / nfft as f64;
                if k == 0 {
                    // DC: finite for pressure, singular for velocity.
                    p_spec[0] += spec[0] * pressure_transfer(*src, sensor, 0.0, scene.c);
                } else {
                    p_spec[k] += spec[k] * pressure_transfer(*src, sensor, omega, scene.c);
                    v_spec[k] += spec[k]
                        * velocity_transfer(*src, sensor, axis, omega, scene.c, scene.rho);
                }
            }
        }
        // Band-limited sources carry no energy at Nyquist; force realness.
        p_spec[nfft / 2].im = 0.0;
        fft::mirror_hermitian(&mut p_spec);
        fft::mirror_hermitian(&mut v_spec);
        fft::ifft_inplace(&mut p_spec);
        fft::ifft_inplace(&mut v_spec);
        pressure.push(p_spec[..t_len].iter().map(|x| x.re).collect::<Vec<f64>>());
        velocity.push(v_spec[..t_len].iter().map(|x| x.re).collect::<Vec<f64>>());
    }

    if let Some(snr_db) = scene.snr_db {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        let scale = 10f64.powf(-snr_db / 20.0);
        for chan in pressure.iter_mut().chain(velocity.iter_mut()) {
            let rms = (chan.iter().map(|x| x * x).sum::<f64>() / t_len as f64).sqrt();
            let std = rms * scale;
            for x in chan.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *x += std * n;
            }
        }
    }

    Ok(VectorSensorCapture {
        pressure,
        radial_velocity: velocity,
        f_s: scene.f_s,
        geometry: geometry.clone(),
    })
}

/// Analytic steady-state capture of complex-amplitude tones at one
/// frequency: `p_q(t) = Re[H_q(f) A e^{iωt}]`, no transient, no noise.
/// Used to measure steady-state responses without waiting out filters.
pub fn steady_tone_capture(
    sources: &[(SphericalPoint, Complex64)],
    geometry: &SensorArrayGeometry,
    f_hz: f64,
    f_s: f64,
    length: usize,
    c: f64,
    rho: f64,
) -> Result<VectorSensorCapture> {
    if !(f_hz > 0.0 && f_hz < f_s / 2.0) {
        return Err(invalid(format!("tone frequency {f_hz} Hz outside (0, f_s/2)")));
    }
    for (pos, _) in sources {
        if pos.r <= geometry.radius {
            return Err(invalid("tone source inside the array sphere"));
        }
    }
    let omega = 2.0 * PI * f_hz;
    let mut pressure = Vec::with_capacity(geometry.len());
    let mut velocity = Vec::with_capacity(geometry.len());
    for dir in &geometry.directions {
        let axis = dir.unit_vector();
        let sensor = [
            axis[0] * geometry.radius,
            axis[1] * geometry.radius,
            axis[2] * geometry.radius,
        ];
        let mut hp = Complex64::new(0.0, 0.0);
        let mut hv = Complex64::new(0.0, 0.0);
        for (pos, amp) in sources {
            let src = pos.cartesian();
            hp += amp * pressure_transfer(src, sensor, omega, c);
            hv += amp * velocity_transfer(src, sensor, axis, omega, c, rho);
        }
        let mut p = Vec::with_capacity(length);
        let mut v = Vec::with_capacity(length);
        for n in 0..length {
            let ph = Complex64::new(0.0, omega * n as f64 / f_s).exp();
            p.push((hp * ph).re);
            v.push((hv * ph).re);
        }
        pressure.push(p);
        velocity.push(v);
    }
    Ok(VectorSensorCapture {
        pressure,
        radial_velocity: velocity,
        f_s,
        geometry: geometry.clone(),
    })
}

/// Analytic radial-independent field coefficients of a unit point source:
/// `(-iω/c) h_u(ωτ_d) Y_{u,v}(θ_d, φ_d)` with `τ_d = r_d/c`.
pub fn modal_ground_truth(
    position: SphericalPoint,
    omega: f64,
    order: u32,
    c: f64,
) -> Result<ModalCoefficients> {
    if !(position.r > 0.0) {
        return Err(invalid("source radius must be positive"));
    }
    if !(omega > 0.0) {
        return Err(invalid("ground truth needs omega > 0"));
    }
    let tau_d = position.r / c;
    let mut set = ModalCoefficients::zeros(order, CoefficientKind::Field);
    let front = Complex64::new(0.0, -omega / c);
    for (i, (u, v)) in iter_uv(order).enumerate() {
        let h = sph_hankel(u as i32, omega * tau_d)?;
        set.values[i] = front * h * sph_harmonic(u, v, position.dir)?;
    }
    Ok(set)
}

impl VectorSensorCapture {
    pub fn len(&self) -> usize {
        self.pressure.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sensor_count(&self) -> usize {
        self.pressure.len()
    }

    /// CSV export of one quantity, columns `q,t,value`.
    pub fn to_csv<W: Write>(&self, quantity: CaptureQuantity, mut w: W) -> Result<()> {
        let data = match quantity {
            CaptureQuantity::Pressure => &self.pressure,
            CaptureQuantity::RadialVelocity => &self.radial_velocity,
        };
        writeln!(w, "q,t,value")?;
        for (q, chan) in data.iter().enumerate() {
            for (t, x) in chan.iter().enumerate() {
                writeln!(w, "{q},{t},{x:.17e}")?;
            }
        }
        Ok(())
    }

    /// Compact binary layout: magic `MBCAP001`, u32 sensor count, u64
    /// sample count, f64 sample rate, then the pressure and velocity
    /// matrices row-major, all little-endian.
    pub fn to_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CAPTURE_MAGIC)?;
        w.write_all(&(self.sensor_count() as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.f_s.to_le_bytes())?;
        for chan in self.pressure.iter().chain(&self.radial_velocity) {
            for x in chan {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the layout written by [`Self::to_binary`]; the geometry is not
    /// stored in the file and must be supplied (sensor count is checked).
    pub fn from_binary<R: Read>(mut r: R, geometry: SensorArrayGeometry) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CAPTURE_MAGIC {
            return Err(Error::Parse("bad capture magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let q = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let t = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let f_s = f64::from_le_bytes(b8);
        if q != geometry.len() {
            return Err(Error::Parse(format!(
                "capture has {q} sensors, geometry has {}",
                geometry.len()
            )));
        }
        let mut read_matrix = |rows: usize| -> Result<Vec<Vec<f64>>> {
            let mut m = Vec::with_capacity(rows);
            for _ in 0..rows {
                let mut chan = Vec::with_capacity(t);
                for _ in 0..t {
                    r.read_exact(&mut b8)?;
                    chan.push(f64::from_le_bytes(b8));
                }
                m.push(chan);
            }
            Ok(m)
        };
        let pressure = read_matrix(q)?;
        let radial_velocity = read_matrix(q)?;
        Ok(Self {
            pressure,
            radial_velocity,
            f_s,
            geometry,
        })
    }
}
