//! Kinematics, antagonistic pneumatic actuation control, and deterministic
//! plant simulation for a 12-revolute-joint, 24-muscle arm.
//!
//! The math core (`spatial`, `arm`, `ik`, `actuation`, `plant`, `metrics`) is
//! generic over the scalar type through [`real::Real`]; the crate root
//! re-exports `f64` aliases of the domain types, which the configuration
//! loader, experiment harness, and CLI build on.

pub mod actuation;
pub mod arm;
pub mod config;
pub mod control;
pub mod experiments;
pub mod metrics;
pub mod plant;
pub mod ik;
pub mod real;
pub mod spatial;

pub use real::Real;

/// 3-vector of `f64` (positions in meters, unit axes).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Rotation in SO(3), `f64`.
pub type Rotation = spatial::Rotation<f64>;
/// Rigid transform in SE(3), `f64`.
pub type Pose = spatial::Pose<f64>;
/// Twist `[v; w]`, `f64`.
pub type Twist = spatial::Twist<f64>;
/// 12 joint angles, `f64`.
pub type JointVector = arm::JointVector<f64>;
/// Joint angle limits, `f64`.
pub type JointLimits = arm::JointLimits<f64>;
/// Segment dimensions, `f64`.
pub type SegmentDims = arm::SegmentDims<f64>;
/// One spine segment, `f64`.
pub type SegmentGeometry = arm::SegmentGeometry<f64>;
/// Full arm geometry, `f64`.
pub type ArmGeometry = arm::ArmGeometry<f64>;
/// IK solver parameters, `f64`.
pub type IkParams = ik::IkParams<f64>;
/// IK solve outcome, `f64`.
pub type IkResult = ik::IkResult<f64>;
/// McKibben muscle parameters, `f64`.
pub type McKibbenParams = actuation::McKibbenParams<f64>;
/// Antagonistic muscle pair across one joint, `f64`.
pub type AntagonisticJoint = actuation::AntagonisticJoint<f64>;
/// PID gains on the log pressure ratio, `f64`.
pub type PidGains = actuation::PidGains<f64>;
/// Per-joint antagonistic pressure floors, `f64`.
pub type StiffnessProfile = actuation::StiffnessProfile<f64>;
/// 24 muscle pressure targets, `f64`.
pub type ActuatorCommand = control::ActuatorCommand<f64>;
/// The 12-joint controller bank, `f64`.
pub type ArmController = control::ArmController<f64>;
/// Simulated arm plant, `f64`.
pub type Plant = plant::Plant<f64>;
/// Full plant state, `f64`.
pub type PlantState = plant::PlantState<f64>;
/// Simulation parameters, `f64`.
pub type SimConfig = plant::SimConfig<f64>;
/// Compressed-air tank state, `f64`.
pub type TankState = plant::TankState<f64>;
