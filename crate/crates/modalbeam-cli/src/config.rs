//! Run configuration: TOML schema, reference defaults, validation, and
//! construction of the domain objects the experiments share.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use modalbeam::freq_domain::{design_dolph_chebyshev, expand_symmetric_alpha};
use modalbeam::time_domain::design_filter_bank;
use modalbeam::{BeamformerConfig, ModalFilterPair, SensorArrayGeometry, SphericalPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Every random stream of a run is derived from this one value.
    pub master_seed: u64,
    pub array: ArraySection,
    pub beamformer: BeamformerSection,
    pub focus: FocusSection,
    pub scene: SceneSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub sensors: usize,
    pub radius_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformerSection {
    pub order: u32,
    pub sidelobe_db: f64,
    pub block_size: usize,
    pub filter_taps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocusSection {
    pub radius_m: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub band_hz: [f64; 2],
    pub snr_db: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub speed_of_sound: f64,
    pub air_density: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 7,
            array: ArraySection::default(),
            beamformer: BeamformerSection::default(),
            focus: FocusSection::default(),
            scene: SceneSection::default(),
            sim: SimSection::default(),
        }
    }
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { sensors: 36, radius_m: 0.08 }
    }
}

impl Default for BeamformerSection {
    fn default() -> Self {
        Self {
            order: 4,
            sidelobe_db: -25.0,
            block_size: 1024,
            filter_taps: 240,
        }
    }
}

impl Default for FocusSection {
    fn default() -> Self {
        Self { radius_m: 0.4, theta_deg: 0.0, phi_deg: 0.0 }
    }
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            band_hz: [400.0, 4000.0],
            snr_db: 30.0,
            sample_rate_hz: 48_000.0,
            duration_s: 10.0,
            runs: 10,
        }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        Self { speed_of_sound: 343.0, air_density: 1.225 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let needed = ((self.beamformer.order + 1) * (self.beamformer.order + 1)) as usize;
        if self.array.sensors < needed {
            bail!(
                "order {} needs at least {needed} sensors, config has {}",
                self.beamformer.order,
                self.array.sensors
            );
        }
        if !(self.array.radius_m > 0.0) {
            bail!("array radius must be positive");
        }
        if self.focus.radius_m <= self.array.radius_m {
            bail!(
                "focus radius {} m must lie outside the array radius {} m",
                self.focus.radius_m,
                self.array.radius_m
            );
        }
        if !(0.0..=180.0).contains(&self.focus.theta_deg) {
            bail!("focus polar angle must be in [0, 180] degrees");
        }
        let [f_l, f_h] = self.scene.band_hz;
        if !(0.0 < f_l && f_l < f_h && f_h < self.scene.sample_rate_hz / 2.0) {
            bail!("band [{f_l}, {f_h}] Hz must satisfy 0 < f_l < f_h < f_s/2");
        }
        if !(self.scene.duration_s > 0.0) || self.scene.runs == 0 {
            bail!("scene duration and run count must be positive");
        }
        if !(self.beamformer.sidelobe_db < 0.0) {
            bail!("sidelobe level must be negative dB");
        }
        if self.beamformer.filter_taps == 0 {
            bail!("filter length must be positive");
        }
        if !self.beamformer.block_size.is_power_of_two() || self.beamformer.block_size < 4 {
            bail!("block size must be a power of two >= 4");
        }
        Ok(())
    }

    /// First 16 hex characters of the SHA-256 of the canonical serialized
    /// form.  Stamped into every CSV artifact so outputs are traceable to
    /// the exact configuration (seed included) that produced them.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn tau_s(&self) -> f64 {
        self.array.radius_m / self.sim.speed_of_sound
    }

    pub fn tau_d(&self) -> f64 {
        self.focus.radius_m / self.sim.speed_of_sound
    }

    pub fn focus_point(&self) -> SphericalPoint {
        SphericalPoint::new(
            self.focus.radius_m,
            self.focus.theta_deg.to_radians(),
            self.focus.phi_deg.to_radians(),
        )
    }

    pub fn geometry(&self) -> Result<SensorArrayGeometry> {
        Ok(SensorArrayGeometry::refined_fibonacci(
            self.array.sensors,
            self.array.radius_m,
            self.beamformer.order,
        )?)
    }

    pub fn beamformer_config(&self) -> Result<BeamformerConfig> {
        let alpha = expand_symmetric_alpha(&design_dolph_chebyshev(
            self.beamformer.order,
            self.beamformer.sidelobe_db,
        )?);
        Ok(BeamformerConfig::new(
            self.beamformer.order,
            self.focus_point(),
            self.array.radius_m,
            self.sim.speed_of_sound,
            alpha,
            self.beamformer.block_size,
        )?)
    }

    pub fn filter_bank(&self) -> Result<Vec<ModalFilterPair>> {
        Ok(design_filter_bank(
            self.beamformer.order,
            self.tau_s(),
            self.tau_d(),
            self.scene.sample_rate_hz,
            self.beamformer.filter_taps,
        )?)
    }
}
