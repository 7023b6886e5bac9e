//! Nearfield frequency-invariant modal beamforming for spherical
//! vector-sensor arrays.
//!
//! The library decomposes pressure and radial-velocity samples taken on a
//! rigid ball of `Q` sensors into spherical-harmonic coefficients, applies
//! per-mode focusing filters that point the array at a nearfield location,
//! and recombines the modes into a single output whose spatial response is
//! (ideally) the same at every frequency.  Two interchangeable execution
//! paths are provided:
//!
//! * a block frequency-domain path ([`freq_domain`]) that applies the exact
//!   per-bin weights under an overlap-add scheme, and
//! * a streaming time-domain path ([`time_domain`]) that realizes each
//!   mode's response as a short FIR filter obtained from a partial-fraction
//!   expansion, trading a small approximation error for zero block latency.
//!
//! [`scene`] synthesizes what such an array would record from point
//! sources, [`analysis`] turns captures into modal coefficients, and
//! [`metrics`] measures beampatterns, coherence, and cost.

pub mod analysis;
pub(crate) mod fft;
pub mod error;
pub mod freq_domain;
pub mod metrics;
pub mod modal;
pub mod sampling;
pub mod scene;
pub mod special;
pub mod time_domain;

pub use error::{Error, Result};
pub use modal::{
    coeff_count, flat_index, iter_uv, order_degree, CoefficientKind, ModalCoefficients,
    ModalTimeSeries, SphericalPoint,
};
pub use freq_domain::BeamformerConfig;
pub use sampling::SensorArrayGeometry;
pub use scene::{AcousticScene, SourceSpec, VectorSensorCapture};
pub use special::Direction;
pub use time_domain::{ModalFilterPair, StreamingBeamformer};
