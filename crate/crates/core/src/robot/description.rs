//! Robot description file: the JSON document describing one 3-bar robot.
//!
//! File units follow the measurement convention: masses in grams, lengths
//! in millimeters (fields carry `_g` / `_mm` suffixes). Stiffness fields
//! are SI (newtons and meters) and say so in their names. Everything is
//! converted to SI on load; the conversion is round-trip tested.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{RodGeometry, RodMasses};
use crate::error::{Error, Result};

pub const ROBOT_SCHEMA: &str = "tgsim-robot-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentMode {
    /// Attachment points on the end-cap sphere surfaces (default; stable).
    CapSurface,
    /// All cables attached at the rod tips (cap centers); collapses under
    /// some controls and exists to demonstrate exactly that.
    RodTips,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RodSpecFile {
    pub rod_mass_g: f64,
    pub rod_radius_mm: f64,
    pub rod_length_mm: f64,
    pub endcap_mass_g: f64,
    pub endcap_radius_mm: f64,
    pub mount_mass_g: f64,
    pub mount_radius_mm: f64,
    pub mount_length_mm: f64,
    pub mount_offset_from_center_mm: f64,
}

impl Default for RodSpecFile {
    /// The measured values: grams and millimeters.
    fn default() -> Self {
        RodSpecFile {
            rod_mass_g: 3.8,
            rod_radius_mm: 1.6,
            rod_length_mm: 325.0,
            endcap_mass_g: 10.5,
            endcap_radius_mm: 17.5,
            mount_mass_g: 35.3,
            mount_radius_mm: 17.5,
            mount_length_mm: 45.0,
            mount_offset_from_center_mm: 95.0,
        }
    }
}

impl RodSpecFile {
    pub fn to_si(&self) -> (RodGeometry, RodMasses<f64>) {
        (
            RodGeometry {
                rod_radius: self.rod_radius_mm * 1e-3,
                rod_length: self.rod_length_mm * 1e-3,
                endcap_radius: self.endcap_radius_mm * 1e-3,
                mount_radius: self.mount_radius_mm * 1e-3,
                mount_length: self.mount_length_mm * 1e-3,
                mount_offset: self.mount_offset_from_center_mm * 1e-3,
            },
            RodMasses {
                rod: self.rod_mass_g * 1e-3,
                endcap: self.endcap_mass_g * 1e-3,
                mount: self.mount_mass_g * 1e-3,
            },
        )
    }

    pub fn from_si(geom: &RodGeometry, masses: &RodMasses<f64>) -> Self {
        RodSpecFile {
            rod_mass_g: masses.rod * 1e3,
            rod_radius_mm: geom.rod_radius * 1e3,
            rod_length_mm: geom.rod_length * 1e3,
            endcap_mass_g: masses.endcap * 1e3,
            endcap_radius_mm: geom.endcap_radius * 1e3,
            mount_mass_g: masses.mount * 1e3,
            mount_radius_mm: geom.mount_radius * 1e3,
            mount_length_mm: geom.mount_length * 1e3,
            mount_offset_from_center_mm: geom.mount_offset * 1e3,
        }
    }
}

/// Third-order force-displacement fit of the passive tendons:
/// `F = c1 d + c2 d^2 + c3 d^3` with d in meters and F in newtons.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TendonPolynomial {
    pub c1_n_per_m: f64,
    pub c2_n_per_m2: f64,
    pub c3_n_per_m3: f64,
}

impl Default for TendonPolynomial {
    /// Synthetic coefficients at a plausible scale for the test tendons.
    fn default() -> Self {
        TendonPolynomial { c1_n_per_m: 60.0, c2_n_per_m2: 600.0, c3_n_per_m3: 8000.0 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains { kp: 8.0, ki: 0.5, kd: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ControlDefaults {
    /// "Target reached" band in normalized length units.
    pub tolerance: f64,
    /// Error deadband below which the motor holds.
    pub deadband: f64,
    pub step_timeout_s: f64,
    /// PID update rate; the commanded spool rate holds between updates.
    pub rate_hz: f64,
    /// Low-pass time constant of the sensed lengths feeding the PID.
    pub filter_tau_s: f64,
}

impl Default for ControlDefaults {
    fn default() -> Self {
        ControlDefaults {
            tolerance: 0.02,
            deadband: 0.005,
            step_timeout_s: 4.0,
            rate_hz: 100.0,
            filter_tau_s: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimDefaults {
    pub dt_s: f64,
    pub gravity_m_per_s2: f64,
    pub settle_budget_s: f64,
}

impl Default for SimDefaults {
    fn default() -> Self {
        SimDefaults { dt_s: 1e-3, gravity_m_per_s2: 9.81, settle_budget_s: 40.0 }
    }
}

/// Learnable parameters with their current (initial or identified) values.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LearnableParams {
    /// Motor spool rate in normalized cable lengths per second.
    pub motor_speed: f64,
    pub friction: f64,
    pub restitution: f64,
}

impl Default for LearnableParams {
    fn default() -> Self {
        LearnableParams { motor_speed: 0.5, friction: 0.7, restitution: 0.2 }
    }
}

/// Cable entry in the description file. Attachment offsets are body-frame
/// millimeters on the owning rod.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CableFile {
    /// "actuated" index 0..=5 or "passive" index 0..=2.
    pub kind: CableKindFile,
    pub rod_a: usize,
    pub offset_a_mm: [f64; 3],
    pub rod_b: usize,
    pub offset_b_mm: [f64; 3],
    pub min_length_mm: f64,
    pub max_length_mm: f64,
    /// Rest length for passive tendons (actuated cables derive theirs from
    /// the min/max range and the current target).
    pub rest_length_mm: f64,
    pub damping_n_s_per_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum CableKindFile {
    Actuated(usize),
    Passive(usize),
}

/// The on-disk robot description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotDescription {
    pub schema: String,
    pub rod: RodSpecFile,
    pub attachment_mode: AttachmentMode,
    /// High-stiffness linear model for the short actuated cables.
    pub actuated_stiffness_n_per_m: f64,
    /// Spool calibration: the motor reels in to `target/(1+prestrain)` so
    /// the cable carries tension when its sensed length sits on target.
    pub actuated_prestrain: f64,
    pub actuated_damping_n_s_per_m: f64,
    pub tendon_polynomial: TendonPolynomial,
    pub tendon_damping_n_s_per_m: f64,
    pub cables: Vec<CableFile>,
    pub pid: PidGains,
    pub sensor_rate_hz: f64,
    pub control: ControlDefaults,
    pub sim: SimDefaults,
    pub params: LearnableParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl RobotDescription {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(path: &str, text: &str) -> Result<Self> {
        let desc: RobotDescription = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        desc.validate()?;
        Ok(desc)
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(path, &text)
    }

    pub fn save(&self, path: &str) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Hash of the canonical JSON serialization (first 16 hex chars),
    /// stamped into trajectory and report headers.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("description serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != ROBOT_SCHEMA {
            return Err(Error::InvalidDescription(format!(
                "schema: expected {ROBOT_SCHEMA}, got {}",
                self.schema
            )));
        }
        let (geom, masses) = self.rod.to_si();
        geom.validate()?;
        masses.validate()?;
        if !(self.sim.dt_s > 0.0) {
            return Err(Error::InvalidDescription(format!("sim.dt_s must be > 0, got {}", self.sim.dt_s)));
        }
        if self.sim.gravity_m_per_s2 < 0.0 {
            return Err(Error::InvalidDescription("sim.gravity_m_per_s2 must be >= 0".into()));
        }
        if !(self.control.step_timeout_s > 0.0) {
            return Err(Error::InvalidDescription("control.step_timeout_s must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.params.restitution) {
            return Err(Error::InvalidDescription(format!(
                "params.restitution must be in [0,1], got {}",
                self.params.restitution
            )));
        }
        if self.params.friction < 0.0 {
            return Err(Error::InvalidDescription("params.friction must be >= 0".into()));
        }
        if !(self.params.motor_speed > 0.0) {
            return Err(Error::InvalidDescription("params.motor_speed must be > 0".into()));
        }
        if !(self.actuated_prestrain >= 0.0) {
            return Err(Error::InvalidDescription("actuated_prestrain must be >= 0".into()));
        }
        if !self.cables.is_empty() {
            let mut actuated = [false; 6];
            let mut passive = [false; 3];
            for (i, c) in self.cables.iter().enumerate() {
                if c.rod_a >= 3 || c.rod_b >= 3 {
                    return Err(Error::InvalidDescription(format!("cable {i}: rod index out of range")));
                }
                match c.kind {
                    CableKindFile::Actuated(k) if k < 6 => actuated[k] = true,
                    CableKindFile::Passive(k) if k < 3 => passive[k] = true,
                    _ => {
                        return Err(Error::InvalidDescription(format!("cable {i}: bad kind index")));
                    }
                }
                if !(c.max_length_mm > c.min_length_mm) || c.min_length_mm <= 0.0 {
                    return Err(Error::InvalidDescription(format!(
                        "cable {i}: need 0 < min_length < max_length"
                    )));
                }
            }
            if actuated != [true; 6] || passive != [true; 3] {
                return Err(Error::InvalidDescription(
                    "cable set must cover actuated 0..=5 and passive 0..=2 exactly".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_conversion_round_trips() {
        let file = RodSpecFile::default();
        let (geom, masses) = file.to_si();
        assert!((geom.rod_length - 0.325).abs() < 1e-12);
        assert!((masses.endcap - 0.0105).abs() < 1e-15);
        assert!((geom.overall_length() - 0.360).abs() < 1e-12);
        let back = RodSpecFile::from_si(&geom, &masses);
        assert!((back.rod_mass_g - file.rod_mass_g).abs() < 1e-9);
        assert!((back.rod_length_mm - file.rod_length_mm).abs() < 1e-9);
        assert!((back.mount_offset_from_center_mm - file.mount_offset_from_center_mm).abs() < 1e-9);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let desc = crate::robot::default_description();
        let mut bad = desc.clone();
        bad.schema = "something-else".into();
        assert!(bad.validate().is_err());
        assert!(desc.validate().is_ok());
    }

    #[test]
    fn hash_changes_with_content() {
        let desc = crate::robot::default_description();
        let mut other = desc.clone();
        other.params.motor_speed = 0.75;
        assert_ne!(desc.content_hash(), other.content_hash());
        assert_eq!(desc.content_hash().len(), 16);
    }
}
