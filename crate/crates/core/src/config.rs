//! Configuration: one hierarchical key-value (TOML) file covering geometry,
//! masses, actuator parameters, solver and simulation settings, PID gain
//! sets, stiffness profiles, waypoints, and the air tank.
//!
//! A `schema_version` field is mandatory. The built-in defaults mirror
//! `config/pneumarm.toml` exactly; geometry dimensions are working defaults
//! for a desk-scale arm, not measured hardware values.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

use crate::actuation::{
    ActuationError, AntagonisticJoint, McKibbenParams, PidGains, StiffnessProfile,
};
use crate::arm::{ArmGeometry, GeometryError, JointLimits, SegmentDims};
use crate::ik::{IkError, IkParams};
use crate::plant::{Plant, SimConfig, SimFault, TankState};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("invalid actuation parameters: {0}")]
    Actuation(#[from] ActuationError),
    #[error("invalid IK parameters: {0}")]
    Ik(#[from] IkError),
    #[error("invalid simulation parameters: {0}")]
    Sim(#[from] SimFault),
    #[error("profile {profile:?} references unknown PID gain set {gains:?}")]
    UnknownGains { profile: String, gains: String },
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    geometry: RawGeometry,
    masses: RawMasses,
    actuator: RawActuator,
    limits: RawLimits,
    ik: RawIk,
    sim: RawSim,
    tank: RawTank,
    pid: BTreeMap<String, RawPid>,
    profiles: BTreeMap<String, RawProfile>,
    waypoints: RawWaypoints,
    compliance: RawCompliance,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    rod_length_m: f64,
    upper_plate_half_height_m: f64,
    lower_plate_half_height_m: f64,
    lever_arm_radius_m: f64,
    actuator_rest_length_m: f64,
    attachment_angle_rad: f64,
    base_segment_scale: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMasses {
    plate_kg: f64,
    rod_kg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActuator {
    max_contraction: f64,
    max_elongation: f64,
    force_coeff_n_per_kpa: f64,
    base_force_scale: f64,
    max_pressure_kpa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    joint_limit_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIk {
    max_iters: usize,
    position_tolerance_m: f64,
    damping_m: f64,
    step_scale: f64,
    null_gain: f64,
    wln_enabled: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt_s: f64,
    controller_rate_hz: f64,
    damping_base: f64,
    damping_pressure: f64,
    tau_fill_s: f64,
    tau_vent_s: f64,
    deadband_kpa: f64,
    gravity: f64,
    hardstop_margin_deg: f64,
    hardstop_rate: f64,
    inertia_floor: f64,
    actuator_volume_l: f64,
    derate_gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTank {
    volume_l: f64,
    pressure_kpa: f64,
    regulator_setpoint_kpa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPid {
    kp: f64,
    ki: f64,
    kd: f64,
    integral_clamp: f64,
    output_clamp: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    /// Either 3 per-segment values or 12 per-joint values, kPa.
    p_a_kpa: Vec<f64>,
    gains: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWaypoints {
    dwell_s: f64,
    endurance_dwell_s: f64,
    points: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompliance {
    probe_force_n: f64,
    settle_s: f64,
    hold_s: f64,
}

/// A stiffness profile paired with its PID gain set.
#[derive(Debug, Clone)]
pub struct Profile {
    pub name: String,
    pub stiffness: StiffnessProfile<f64>,
    pub gains: PidGains<f64>,
}

/// Fully validated runtime configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub arm: ArmGeometry<f64>,
    pub joints: [AntagonisticJoint<f64>; 12],
    pub limits: JointLimits<f64>,
    pub ik: IkParams<f64>,
    pub sim: SimConfig<f64>,
    pub tank: TankState<f64>,
    pub max_pressure: f64,
    pub controller_rate_hz: f64,
    pub derate_gamma: f64,
    pub profiles: BTreeMap<String, Profile>,
    pub waypoints: Vec<Vector3<f64>>,
    pub waypoint_dwell_s: f64,
    pub endurance_dwell_s: f64,
    pub compliance_probe_force_n: f64,
    pub compliance_settle_s: f64,
    pub compliance_hold_s: f64,
}

impl Config {
    /// Built-in defaults, identical to the shipped `config/pneumarm.toml`.
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("built-in config must be valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: raw.schema_version,
                expected: SCHEMA_VERSION,
            });
        }

        let dims = SegmentDims {
            rod_length: raw.geometry.rod_length_m,
            upper_plate_half_height: raw.geometry.upper_plate_half_height_m,
            lower_plate_half_height: raw.geometry.lower_plate_half_height_m,
            lever_arm_radius: raw.geometry.lever_arm_radius_m,
            actuator_rest_length: raw.geometry.actuator_rest_length_m,
        };
        let link_masses =
            [[raw.masses.plate_kg, raw.masses.rod_kg, raw.masses.plate_kg]; 3];
        let arm = ArmGeometry::standard(dims, link_masses, raw.geometry.base_segment_scale)?;

        let muscle = |force_scale: f64| {
            McKibbenParams::new(
                raw.geometry.actuator_rest_length_m,
                raw.actuator.max_contraction,
                raw.actuator.force_coeff_n_per_kpa * force_scale,
                raw.actuator.max_elongation,
                raw.actuator.max_pressure_kpa,
            )
        };
        let mut joints = Vec::with_capacity(12);
        for i in 0..12 {
            let base = i < 4;
            let lever = raw.geometry.lever_arm_radius_m
                * if base { raw.geometry.base_segment_scale } else { 1.0 };
            let m = muscle(if base { raw.actuator.base_force_scale } else { 1.0 })?;
            joints.push(AntagonisticJoint::new(
                lever,
                raw.geometry.attachment_angle_rad,
                [m, m],
            )?);
        }
        let joints: [AntagonisticJoint<f64>; 12] =
            joints.try_into().expect("exactly 12 joints");

        if raw.limits.joint_limit_deg <= 0.0 {
            return Err(ConfigError::Invalid(
                "limits.joint_limit_deg must be > 0".into(),
            ));
        }
        let limits = JointLimits::symmetric(raw.limits.joint_limit_deg.to_radians());

        let ik = IkParams {
            max_iters: raw.ik.max_iters,
            position_tolerance: raw.ik.position_tolerance_m,
            damping: raw.ik.damping_m,
            step_scale: raw.ik.step_scale,
            null_gain: raw.ik.null_gain,
            wln_enabled: raw.ik.wln_enabled,
        };
        ik.validate()?;

        if raw.sim.controller_rate_hz <= 0.0 {
            return Err(ConfigError::Invalid(
                "sim.controller_rate_hz must be > 0".into(),
            ));
        }
        let sim = SimConfig {
            dt: raw.sim.dt_s,
            joint_inertia: [1.0; 12],
            damping_base: raw.sim.damping_base,
            damping_pressure: raw.sim.damping_pressure,
            tau_fill: raw.sim.tau_fill_s,
            tau_vent: raw.sim.tau_vent_s,
            deadband_kpa: raw.sim.deadband_kpa,
            gravity: raw.sim.gravity,
            payload_mass: 0.0,
            hardstop_margin_rad: raw.sim.hardstop_margin_deg.to_radians(),
            hardstop_rate: raw.sim.hardstop_rate,
            inertia_floor: raw.sim.inertia_floor,
            actuator_volume_l: raw.sim.actuator_volume_l,
        }
        .with_payload(&arm, 0.0);
        sim.validate()?;

        let tank = TankState {
            volume_l: raw.tank.volume_l,
            pressure_kpa: raw.tank.pressure_kpa,
            regulator_setpoint_kpa: raw.tank.regulator_setpoint_kpa,
        };
        if tank.volume_l <= 0.0 || tank.pressure_kpa <= 0.0 {
            return Err(ConfigError::Invalid("tank volume/pressure must be > 0".into()));
        }

        let mut gain_sets = BTreeMap::new();
        for (name, p) in &raw.pid {
            let gains = PidGains {
                kp: p.kp,
                ki: p.ki,
                kd: p.kd,
                integral_clamp: p.integral_clamp,
                output_clamp: p.output_clamp,
            };
            gains.validate()?;
            gain_sets.insert(name.clone(), gains);
        }

        let mut profiles = BTreeMap::new();
        for (name, p) in &raw.profiles {
            let stiffness = match p.p_a_kpa.len() {
                3 => StiffnessProfile::per_segment([p.p_a_kpa[0], p.p_a_kpa[1], p.p_a_kpa[2]]),
                12 => {
                    let mut arr = [0.0; 12];
                    arr.copy_from_slice(&p.p_a_kpa);
                    StiffnessProfile { p_a: arr }
                }
                n => {
                    return Err(ConfigError::Invalid(format!(
                        "profile {name:?}: p_a_kpa needs 3 or 12 values, got {n}"
                    )))
                }
            };
            stiffness.validate(raw.actuator.max_pressure_kpa)?;
            let gains = gain_sets
                .get(&p.gains)
                .copied()
                .ok_or_else(|| ConfigError::UnknownGains {
                    profile: name.clone(),
                    gains: p.gains.clone(),
                })?;
            profiles.insert(
                name.clone(),
                Profile {
                    name: name.clone(),
                    stiffness,
                    gains,
                },
            );
        }

        if raw.waypoints.points.is_empty() {
            return Err(ConfigError::Invalid("waypoints.points must not be empty".into()));
        }
        if raw.waypoints.dwell_s <= 0.0 || raw.waypoints.endurance_dwell_s <= 0.0 {
            return Err(ConfigError::Invalid("waypoint dwell times must be > 0".into()));
        }
        let waypoints = raw
            .waypoints
            .points
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .collect();

        Ok(Config {
            arm,
            joints,
            limits,
            ik,
            sim,
            tank,
            max_pressure: raw.actuator.max_pressure_kpa,
            controller_rate_hz: raw.sim.controller_rate_hz,
            derate_gamma: raw.sim.derate_gamma,
            profiles,
            waypoints,
            waypoint_dwell_s: raw.waypoints.dwell_s,
            endurance_dwell_s: raw.waypoints.endurance_dwell_s,
            compliance_probe_force_n: raw.compliance.probe_force_n,
            compliance_settle_s: raw.compliance.settle_s,
            compliance_hold_s: raw.compliance.hold_s,
        })
    }

    pub fn profile(&self, name: &str) -> Result<&Profile, ConfigError> {
        self.profiles
            .get(name)
            .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }

    /// Plant instance for a given payload (per-joint inertias recomputed).
    pub fn plant(&self, payload_mass: f64) -> Plant<f64> {
        Plant {
            arm: self.arm.clone(),
            joints: self.joints,
            limits: self.limits.clone(),
            config: self.sim.with_payload(&self.arm, payload_mass),
        }
    }

    /// Plant steps per controller tick (controller runs decimated).
    pub fn steps_per_control_tick(&self) -> usize {
        let ratio = 1.0 / (self.sim.dt * self.controller_rate_hz);
        ratio.round().max(1.0) as usize
    }
}

/// The shipped default configuration. Kept in sync with
/// `config/pneumarm.toml` by a test.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../config/pneumarm.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_is_valid_and_complete() {
        let cfg = Config::builtin();
        assert_eq!(cfg.waypoints.len(), 8);
        for name in ["high-aggressive", "low-aggressive", "low-conservative", "directional-demo"] {
            assert!(cfg.profiles.contains_key(name), "missing profile {name}");
        }
        // The three step-response presets carry the expected floors.
        let high = cfg.profile("high-aggressive").unwrap();
        assert_eq!(high.stiffness.p_a[0], 83.0);
        assert_eq!(high.stiffness.p_a[4], 55.0);
        assert_eq!(high.stiffness.p_a[8], 28.0);
        let low = cfg.profile("low-aggressive").unwrap();
        assert_eq!(low.stiffness.p_a[0], 14.0);
        let cons = cfg.profile("low-conservative").unwrap();
        assert_eq!(cons.stiffness.p_a[11], 14.0);
        assert!((cfg.arm.total_mass() - 1.15).abs() < 1e-9);
        assert_eq!(cfg.steps_per_control_tick(), 10);
    }

    #[test]
    fn schema_version_is_mandatory_and_checked() {
        let bumped = DEFAULT_CONFIG_TOML.replace("schema_version = 1", "schema_version = 99");
        assert!(matches!(
            Config::from_toml_str(&bumped),
            Err(ConfigError::SchemaVersion { found: 99, .. })
        ));
        let missing = DEFAULT_CONFIG_TOML.replace("schema_version = 1", "");
        assert!(matches!(
            Config::from_toml_str(&missing),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn unknown_profile_is_an_error() {
        let cfg = Config::builtin();
        assert!(matches!(
            cfg.profile("does-not-exist"),
            Err(ConfigError::UnknownProfile(_))
        ));
    }

    #[test]
    fn profile_with_unknown_gains_is_rejected() {
        let broken = DEFAULT_CONFIG_TOML.replace(
            "[profiles.\"high-aggressive\"]\np_a_kpa = [83.0, 55.0, 28.0]\ngains = \"aggressive\"",
            "[profiles.\"high-aggressive\"]\np_a_kpa = [83.0, 55.0, 28.0]\ngains = \"nope\"",
        );
        assert!(matches!(
            Config::from_toml_str(&broken),
            Err(ConfigError::UnknownGains { .. })
        ));
    }

    #[test]
    fn bad_values_are_rejected() {
        let bad = DEFAULT_CONFIG_TOML.replace("rod_length_m = 0.060", "rod_length_m = -1.0");
        assert!(Config::from_toml_str(&bad).is_err());
        let bad = DEFAULT_CONFIG_TOML.replace("joint_limit_deg = 15.0", "joint_limit_deg = 0.0");
        assert!(Config::from_toml_str(&bad).is_err());
    }
}
