//! Shared fixtures for the criterion benches: the reference operating
//! point (36 sensors on an 0.08 m sphere, order 4, focus at 0.4 m) and a
//! steady-tone capture to drive the pipelines.

use modalbeam::freq_domain::{design_dolph_chebyshev, expand_symmetric_alpha};
use modalbeam::time_domain::design_filter_bank;
use modalbeam::{
    scene, BeamformerConfig, ModalFilterPair, SensorArrayGeometry, SphericalPoint,
    VectorSensorCapture,
};
use num_complex::Complex64;

pub const C: f64 = 343.0;
pub const RHO: f64 = 1.225;
pub const F_S: f64 = 48_000.0;

pub fn reference_setup() -> (SensorArrayGeometry, BeamformerConfig, Vec<ModalFilterPair>) {
    let geometry = SensorArrayGeometry::refined_fibonacci(36, 0.08, 4).unwrap();
    let alpha = expand_symmetric_alpha(&design_dolph_chebyshev(4, -25.0).unwrap());
    let config = BeamformerConfig::new(
        4,
        SphericalPoint::new(0.4, 0.0, 0.0),
        0.08,
        C,
        alpha,
        1024,
    )
    .unwrap();
    let bank = design_filter_bank(4, config.tau_s, config.tau_d, F_S, 240).unwrap();
    (geometry, config, bank)
}

pub fn tone_capture(geometry: &SensorArrayGeometry, length: usize) -> VectorSensorCapture {
    scene::steady_tone_capture(
        &[(
            SphericalPoint::new(0.4, 0.5, 0.3),
            Complex64::new(1.0, 0.0),
        )],
        geometry,
        1500.0,
        F_S,
        length,
        C,
        RHO,
    )
    .unwrap()
}
