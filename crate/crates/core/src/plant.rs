//! Deterministic fixed-step plant simulation.
//!
//! Per joint, a decoupled second-order model driven by the antagonistic pair
//! torque, exact gravity torques from the lumped link masses, viscous
//! damping that grows with the common-mode muscle pressure (braided muscles
//! dissipate more when pressurized), and a stiff spring-damper hard stop just
//! past the joint limits. Muscle pressures follow first-order fill/vent
//! dynamics under a bang-bang valve with a deadband. Integration is
//! semi-implicit Euler at a fixed step; identical inputs reproduce bitwise
//! identical trajectories.

use thiserror::Error;

use crate::actuation::{ActuationError, AntagonisticJoint};
use crate::arm::{ArmGeometry, JointLimits, JointVector, JOINT_COUNT};
use crate::control::ActuatorCommand;
use crate::real::{is_finite, real, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimFault {
    #[error("non-finite state at t = {time} s: {what}")]
    NonFinite { time: f64, what: String },
    #[error("actuation fault at t = {time} s, joint {joint}: {source}")]
    Actuation {
        time: f64,
        joint: usize,
        source: ActuationError,
    },
    #[error("invalid simulation config: {0}")]
    BadConfig(&'static str),
}

/// Valve command state of the internal on-off pressure controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValveState {
    Fill,
    Vent,
    Hold,
}

/// One muscle's pressure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorState<T: Real> {
    pub pressure: T,
    pub valve: ValveState,
    pub target_pressure: T,
}

impl<T: Real> ActuatorState<T> {
    pub fn empty() -> Self {
        ActuatorState {
            pressure: T::zero(),
            valve: ValveState::Hold,
            target_pressure: T::zero(),
        }
    }
}

/// Full mechanical + pneumatic state of the simulated arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState<T: Real> {
    pub theta: JointVector<T>,
    pub theta_dot: JointVector<T>,
    pub actuators: [ActuatorState<T>; 24],
    pub time: T,
}

impl<T: Real> PlantState<T> {
    /// Rest: hanging straight down, still, unpressurized.
    pub fn at_rest() -> Self {
        PlantState {
            theta: JointVector::zeros(),
            theta_dot: JointVector::zeros(),
            actuators: [ActuatorState::empty(); 24],
            time: T::zero(),
        }
    }
}

/// Compressed-air tank with a step-down regulator, isothermal accounting.
///
/// Delivered pressure-volume (kPa L) is drawn straight off the stored
/// pressure: `dP = -pv / volume`. The regulator supplies its setpoint while
/// the tank stays above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState<T: Real> {
    pub volume_l: T,
    pub pressure_kpa: T,
    pub regulator_setpoint_kpa: T,
}

impl<T: Real> TankState<T> {
    pub fn supply_available(&self) -> bool {
        self.pressure_kpa > self.regulator_setpoint_kpa
    }

    pub fn supply_pressure(&self) -> T {
        if self.supply_available() {
            self.regulator_setpoint_kpa
        } else {
            self.pressure_kpa
        }
    }
}

/// Deplete the tank by a pressure-volume flow (kPa L / s) over `dt`.
pub fn tank_step<T: Real>(tank: &TankState<T>, pv_flow_kpa_l_per_s: T, dt: T) -> TankState<T> {
    debug_assert!(pv_flow_kpa_l_per_s >= T::zero());
    let dp = pv_flow_kpa_l_per_s * dt / tank.volume_l;
    let pressure = tank.pressure_kpa - dp;
    TankState {
        pressure_kpa: if pressure > T::zero() {
            pressure
        } else {
            T::zero()
        },
        ..*tank
    }
}

/// Fixed parameters of the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T: Real> {
    /// Integration step, s.
    pub dt: T,
    /// Per-joint inertia about the joint axis, kg m^2 (precomputed at the
    /// rest posture from the lumped masses plus payload).
    pub joint_inertia: [T; 12],
    /// Pressure-independent viscous damping, N m s/rad.
    pub damping_base: T,
    /// Damping growth per kPa of common-mode pressure, N m s/rad/kPa.
    pub damping_pressure: T,
    /// Valve fill time constant, s.
    pub tau_fill: T,
    /// Valve vent time constant, s.
    pub tau_vent: T,
    /// Bang-bang deadband, kPa.
    pub deadband_kpa: T,
    /// Gravitational acceleration, m/s^2.
    pub gravity: T,
    /// Tool-frame payload, kg.
    pub payload_mass: T,
    /// Hard-stop engagement margin past the soft limit, rad.
    pub hardstop_margin_rad: T,
    /// Hard-stop natural rate, rad/s; spring constant is I w^2 per joint.
    pub hardstop_rate: T,
    /// Lower bound on joint inertia, kg m^2 (distal axes pass through the
    /// tool point, so their lumped point-mass inertia is exactly zero).
    pub inertia_floor: T,
    /// Internal muscle volume used for supply-flow accounting, L.
    pub actuator_volume_l: T,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<(), SimFault> {
        if self.dt <= T::zero() {
            return Err(SimFault::BadConfig("dt must be > 0"));
        }
        if self.tau_fill <= T::zero() || self.tau_vent <= T::zero() {
            return Err(SimFault::BadConfig("valve time constants must be > 0"));
        }
        for &i in &self.joint_inertia {
            if i <= T::zero() {
                return Err(SimFault::BadConfig("joint inertia must be > 0"));
            }
        }
        if self.damping_base < T::zero() || self.damping_pressure < T::zero() {
            return Err(SimFault::BadConfig("damping coefficients must be >= 0"));
        }
        if self.payload_mass < T::zero() {
            return Err(SimFault::BadConfig("payload must be >= 0"));
        }
        Ok(())
    }

    /// Recompute the per-joint inertias for this arm and payload and return
    /// the updated config.
    pub fn with_payload(mut self, arm: &ArmGeometry<T>, payload_mass: T) -> Self {
        self.payload_mass = payload_mass;
        self.joint_inertia = rest_inertias(arm, payload_mass, self.inertia_floor);
        self
    }
}

/// Decoupled per-joint inertias at the rest posture: for each joint, the sum
/// over distal lumped masses (plus tool payload) of `m d^2`, with `d` the
/// perpendicular distance from the joint axis, floored at `inertia_floor`.
pub fn rest_inertias<T: Real>(
    arm: &ArmGeometry<T>,
    payload_mass: T,
    inertia_floor: T,
) -> [T; 12] {
    let rest = JointVector::<T>::zeros();
    let twists = arm.joint_twists(&rest);
    let particles = arm.mass_particles(&rest);
    let tool = arm.tool_position(&rest);
    let mut inertia = [T::zero(); 12];
    for i in 0..JOINT_COUNT {
        let w = twists[i].angular;
        // Point on the axis closest to the origin: q_perp = w x v.
        let q = w.cross(&twists[i].linear);
        let mut sum = T::zero();
        for p in particles.iter() {
            if p.joints_before > i {
                let d = (p.position - q).cross(&w).norm();
                sum += p.mass * d * d;
            }
        }
        if payload_mass > T::zero() {
            let d = (tool - q).cross(&w).norm();
            sum += payload_mass * d * d;
        }
        inertia[i] = if sum > inertia_floor {
            sum
        } else {
            inertia_floor
        };
    }
    inertia
}

/// Gravity torque on each joint: `tau_i = -dU/dtheta_i` of the total
/// potential energy of the lumped masses plus the tool payload, evaluated
/// through the exact configuration-dependent moment arms.
pub fn gravity_torques<T: Real>(
    arm: &ArmGeometry<T>,
    theta: &JointVector<T>,
    payload_mass: T,
    gravity: T,
) -> JointVector<T> {
    let twists = arm.joint_twists(theta);
    let particles = arm.mass_particles(theta);
    let tool = arm.tool_position(theta);
    let mut tau = JointVector::<T>::zeros();
    for i in 0..JOINT_COUNT {
        let xi = &twists[i];
        let mut dz_weighted = T::zero();
        for p in particles.iter() {
            if p.joints_before > i {
                // dz/dtheta_i of the particle = z component of v + w x x.
                let dp = xi.linear + xi.angular.cross(&p.position);
                dz_weighted += p.mass * dp.z;
            }
        }
        if payload_mass > T::zero() {
            let dp = xi.linear + xi.angular.cross(&tool);
            dz_weighted += payload_mass * dp.z;
        }
        tau[i] = -gravity * dz_weighted;
    }
    tau
}

/// Total gravitational potential energy (J) relative to the base plane.
pub fn potential_energy<T: Real>(
    arm: &ArmGeometry<T>,
    theta: &JointVector<T>,
    payload_mass: T,
    gravity: T,
) -> T {
    let particles = arm.mass_particles(theta);
    let mut u = T::zero();
    for p in particles.iter() {
        u += p.mass * gravity * p.position.z;
    }
    u + payload_mass * gravity * arm.tool_position(theta).z
}

/// Kinetic energy (J) of the decoupled per-joint model.
pub fn kinetic_energy<T: Real>(config: &SimConfig<T>, theta_dot: &JointVector<T>) -> T {
    let half = real::<T>(0.5);
    let mut ke = T::zero();
    for i in 0..JOINT_COUNT {
        ke += half * config.joint_inertia[i] * theta_dot[i] * theta_dot[i];
    }
    ke
}

/// Advance one muscle's pressure by `dt` under the bang-bang valve: fill when
/// below `target - deadband`, vent when above `target + deadband`, hold
/// otherwise. Filling relaxes toward the supply pressure, venting toward
/// zero, each first-order.
pub fn pressure_dynamics_step<T: Real>(
    act: &ActuatorState<T>,
    supply: T,
    config: &SimConfig<T>,
    dt: T,
) -> ActuatorState<T> {
    let target = act.target_pressure;
    let valve = if act.pressure < target - config.deadband_kpa {
        ValveState::Fill
    } else if act.pressure > target + config.deadband_kpa {
        ValveState::Vent
    } else {
        ValveState::Hold
    };
    let rate = match valve {
        ValveState::Fill => (supply - act.pressure) / config.tau_fill,
        ValveState::Vent => -act.pressure / config.tau_vent,
        ValveState::Hold => T::zero(),
    };
    let pressure = (act.pressure + rate * dt).clamp(T::zero(), supply.max(act.pressure));
    ActuatorState {
        pressure,
        valve,
        target_pressure: target,
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiag<T: Real> {
    /// Pressure-volume drawn from the supply this step, kPa L.
    pub fill_pv_kpa_l: T,
    /// Power of the damping terms per joint, W; never positive.
    pub damping_power: [T; 12],
}

/// The simulated arm: geometry, muscle pairs, limits, and sim parameters.
#[derive(Debug, Clone)]
pub struct Plant<T: Real> {
    pub arm: ArmGeometry<T>,
    pub joints: [AntagonisticJoint<T>; 12],
    pub limits: JointLimits<T>,
    pub config: SimConfig<T>,
}

impl<T: Real> Plant<T> {
    /// One fixed step: write the commanded targets, advance all 24 muscle
    /// pressures, then integrate the 12 joints semi-implicitly.
    pub fn step(
        &self,
        state: &PlantState<T>,
        commands: &ActuatorCommand<T>,
        supply: T,
    ) -> Result<(PlantState<T>, StepDiag<T>), SimFault> {
        self.step_with_tip_force(state, commands, supply, &nalgebra::Vector3::zeros())
    }

    /// [`Plant::step`] with an external force (N, base frame) applied at the
    /// tool point, mapped to joint torques through the position Jacobian.
    pub fn step_with_tip_force(
        &self,
        state: &PlantState<T>,
        commands: &ActuatorCommand<T>,
        supply: T,
        tip_force: &nalgebra::Vector3<T>,
    ) -> Result<(PlantState<T>, StepDiag<T>), SimFault> {
        let dt = self.config.dt;
        let mut next = *state;
        let mut fill_pv = T::zero();

        for i in 0..JOINT_COUNT {
            for side in 0..2 {
                let idx = 2 * i + side;
                let mut act = state.actuators[idx];
                act.target_pressure = commands.pairs[i][side];
                let advanced = pressure_dynamics_step(&act, supply, &self.config, dt);
                if advanced.valve == ValveState::Fill && advanced.pressure > act.pressure {
                    fill_pv += (advanced.pressure - act.pressure) * self.config.actuator_volume_l;
                }
                next.actuators[idx] = advanced;
            }
        }

        let tau_g = gravity_torques(
            &self.arm,
            &state.theta,
            self.config.payload_mass,
            self.config.gravity,
        );
        let tau_ext = if tip_force.norm_squared() > T::zero() {
            self.arm.position_jacobian(&state.theta).transpose() * tip_force
        } else {
            JointVector::zeros()
        };
        let mut damping_power = [T::zero(); 12];

        for i in 0..JOINT_COUNT {
            let p1 = next.actuators[2 * i].pressure;
            let p2 = next.actuators[2 * i + 1].pressure;
            let tau_pair = self.joints[i]
                .pair_torque(state.theta[i], p1, p2)
                .map_err(|source| SimFault::Actuation {
                    time: to_f64(state.time),
                    joint: i,
                    source,
                })?;

            let common = p1.min(p2);
            let c = self.config.damping_base + self.config.damping_pressure * common;

            let inertia = self.config.joint_inertia[i];
            let mut tau_stop = T::zero();
            let mut c_stop = T::zero();
            let over_hi = state.theta[i] - self.limits.upper[i];
            let under_lo = state.theta[i] - self.limits.lower[i];
            if over_hi > T::zero() || under_lo < T::zero() {
                let k_stop = inertia * self.config.hardstop_rate * self.config.hardstop_rate;
                c_stop = real::<T>(2.0) * inertia * self.config.hardstop_rate;
                let penetration = if over_hi > T::zero() { over_hi } else { under_lo };
                tau_stop = -k_stop * penetration;
            }

            // Velocity kick with the damping terms implicit: the pressurized
            // muscles can overdamp the light distal joints (c dt / I > 1),
            // which an explicit damping term cannot integrate stably at this
            // step size.
            let tau_explicit = tau_pair + tau_g[i] + tau_ext[i] + tau_stop;
            let kicked = state.theta_dot[i] + dt * tau_explicit / inertia;
            let damped = kicked / (T::one() + dt * (c + c_stop) / inertia);
            damping_power[i] = -(c + c_stop) * damped * damped;
            next.theta_dot[i] = damped;
            next.theta[i] = state.theta[i] + dt * next.theta_dot[i];
        }
        next.time = state.time + dt;

        for i in 0..JOINT_COUNT {
            if !(is_finite(next.theta[i]) && is_finite(next.theta_dot[i])) {
                return Err(SimFault::NonFinite {
                    time: to_f64(next.time),
                    what: format!(
                        "joint {i}: theta = {}, theta_dot = {}",
                        to_f64(next.theta[i]),
                        to_f64(next.theta_dot[i])
                    ),
                });
            }
        }
        Ok((next, StepDiag {
            fill_pv_kpa_l: fill_pv,
            damping_power,
        }))
    }

    /// Total mechanical energy of a state (J): decoupled kinetic plus exact
    /// gravitational potential.
    pub fn mechanical_energy(&self, theta: &JointVector<T>, theta_dot: &JointVector<T>) -> T {
        kinetic_energy(&self.config, theta_dot)
            + potential_energy(&self.arm, theta, self.config.payload_mass, self.config.gravity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::McKibbenParams;
    use crate::arm::SegmentDims;

    fn test_arm() -> ArmGeometry<f64> {
        ArmGeometry::standard(
            SegmentDims {
                rod_length: 0.060,
                upper_plate_half_height: 0.025,
                lower_plate_half_height: 0.025,
                lever_arm_radius: 0.030,
                actuator_rest_length: 0.080,
            },
            [[0.125, 0.13333333333333333, 0.125]; 3],
            1.3,
        )
        .unwrap()
    }

    fn test_joints(arm: &ArmGeometry<f64>) -> [AntagonisticJoint<f64>; 12] {
        let muscle = |scale: f64| {
            McKibbenParams::new(0.080, 0.34, 1.1 * scale, 0.20, 276.0).unwrap()
        };
        let mut out = [AntagonisticJoint::new(0.030, 0.15, [muscle(1.0), muscle(1.0)]).unwrap(); 12];
        for (i, j) in out.iter_mut().enumerate() {
            let scale = if i < 4 { arm.base_segment_scale } else { 1.0 };
            let force = if i < 4 { 1.5 } else { 1.0 };
            *j = AntagonisticJoint::new(0.030 * scale, 0.15, [muscle(force), muscle(force)])
                .unwrap();
        }
        out
    }

    fn test_config(arm: &ArmGeometry<f64>) -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            joint_inertia: [1e-3; 12],
            damping_base: 0.01,
            damping_pressure: 0.004,
            tau_fill: 0.08,
            tau_vent: 0.12,
            deadband_kpa: 3.0,
            gravity: 9.81,
            payload_mass: 0.0,
            hardstop_margin_rad: 2f64.to_radians(),
            hardstop_rate: 700.0,
            inertia_floor: 5e-4,
            actuator_volume_l: 0.02,
        }
        .with_payload(arm, 0.0)
    }

    fn test_plant() -> Plant<f64> {
        let arm = test_arm();
        let config = test_config(&arm);
        let joints = test_joints(&arm);
        Plant {
            limits: JointLimits::symmetric(15f64.to_radians()),
            joints,
            config,
            arm,
        }
    }

    #[test]
    fn pressure_holds_inside_the_deadband() {
        let plant = test_plant();
        let act = ActuatorState {
            pressure: 100.0,
            valve: ValveState::Hold,
            target_pressure: 100.0,
        };
        let next = pressure_dynamics_step(&act, 276.0, &plant.config, 1e-3);
        assert_eq!(next.pressure, 100.0);
        assert_eq!(next.valve, ValveState::Hold);
        // Still inside the band slightly off target.
        let act = ActuatorState {
            pressure: 98.5,
            ..act
        };
        let next = pressure_dynamics_step(&act, 276.0, &plant.config, 1e-3);
        assert_eq!(next.valve, ValveState::Hold);
    }

    #[test]
    fn fill_follows_the_first_order_response() {
        let plant = test_plant();
        let mut act = ActuatorState {
            pressure: 0.0,
            valve: ValveState::Hold,
            target_pressure: 276.0,
        };
        let dt = plant.config.dt;
        let tau = plant.config.tau_fill;
        let mut prev = 0.0;
        let steps = (2.0 * tau / dt) as usize;
        for _ in 0..steps {
            act = pressure_dynamics_step(&act, 276.0, &plant.config, dt);
            assert!(act.pressure > prev, "fill must increase strictly");
            assert!(act.pressure < 276.0, "fill asymptotes below supply");
            prev = act.pressure;
        }
        let analytic = 276.0 * (1.0 - (-2.0f64).exp());
        assert!(
            (act.pressure - analytic).abs() / analytic < 0.02,
            "first-order response mismatch: {} vs {analytic}",
            act.pressure
        );
    }

    #[test]
    fn steady_state_error_is_within_the_deadband() {
        let plant = test_plant();
        for target in [50.0, 150.0, 270.0] {
            let mut act = ActuatorState {
                pressure: 0.0,
                valve: ValveState::Hold,
                target_pressure: target,
            };
            let dt = plant.config.dt;
            let steps = (5.0 * plant.config.tau_fill / dt) as usize;
            for _ in 0..steps {
                act = pressure_dynamics_step(&act, 276.0, &plant.config, dt);
            }
            assert!(
                (act.pressure - target).abs() <= plant.config.deadband_kpa,
                "target {target}: settled at {}",
                act.pressure
            );
        }
    }

    #[test]
    fn gravity_is_zero_hanging_straight_down() {
        let arm = test_arm();
        let tau = gravity_torques(&arm, &JointVector::zeros(), 0.0, 9.81);
        assert_eq!(tau, JointVector::zeros());
        let tau = gravity_torques(&arm, &JointVector::zeros(), 2.5, 9.81);
        assert_eq!(tau, JointVector::zeros());
    }

    #[test]
    fn gravity_matches_potential_energy_gradient() {
        let arm = test_arm();
        let payload = 1.5;
        let mut theta = JointVector::zeros();
        for i in 0..12 {
            theta[i] = 0.15 * ((i as f64 * 0.7).sin());
        }
        let tau = gravity_torques(&arm, &theta, payload, 9.81);
        let h = 1e-6;
        for i in 0..12 {
            let mut tp = theta;
            let mut tm = theta;
            tp[i] += h;
            tm[i] -= h;
            let fd = -(potential_energy(&arm, &tp, payload, 9.81)
                - potential_energy(&arm, &tm, payload, 9.81))
                / (2.0 * h);
            let scale = tau[i].abs().max(1e-6);
            assert!(
                ((fd - tau[i]) / scale).abs() < 1e-6,
                "joint {i}: fd={fd} tau={}",
                tau[i]
            );
        }
    }

    #[test]
    fn payload_contribution_is_linear_in_mass() {
        let arm = test_arm();
        let mut theta = JointVector::zeros();
        for i in 0..12 {
            theta[i] = 0.1 * ((i % 3) as f64 - 1.0);
        }
        let base = gravity_torques(&arm, &theta, 0.0, 9.81);
        let one = gravity_torques(&arm, &theta, 1.0, 9.81);
        let two = gravity_torques(&arm, &theta, 2.0, 9.81);
        let lhs = two - base;
        let rhs = (one - base) * 2.0;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rest_equilibrium_is_exact() {
        let plant = test_plant();
        let state = PlantState::at_rest();
        let (next, diag) = plant
            .step(&state, &ActuatorCommand::zeros(), 276.0)
            .unwrap();
        assert_eq!(next.theta, JointVector::zeros());
        assert_eq!(next.theta_dot, JointVector::zeros());
        assert_eq!(diag.fill_pv_kpa_l, 0.0);
    }

    #[test]
    fn inertias_are_positive_and_payload_increases_them() {
        let arm = test_arm();
        let bare = rest_inertias(&arm, 0.0, 5e-4);
        let loaded = rest_inertias(&arm, 3.0, 5e-4);
        for i in 0..12 {
            assert!(bare[i] >= 5e-4);
            assert!(loaded[i] >= bare[i]);
        }
        // Base joint sees the whole chain: clearly above the floor.
        assert!(bare[0] > 0.01);
        // Payload dominates the base joint when heavy.
        assert!(loaded[0] > 0.2);
    }

    #[test]
    fn energy_is_conserved_without_damping_or_pressure() {
        let mut plant = test_plant();
        plant.config.damping_base = 0.0;
        plant.config.damping_pressure = 0.0;
        // Pendulum mode: gravity exchange may swing lightly sprung distal
        // joints well past the working range, so park the hard stops out of
        // the way; they are a separate, dissipative mechanism.
        plant.limits = JointLimits::symmetric(std::f64::consts::FRAC_PI_2);
        let mut state = PlantState::at_rest();
        state.theta[0] = 0.12;
        state.theta[5] = -0.08;
        state.theta[9] = 0.05;

        let u0 = potential_energy(&plant.arm, &JointVector::zeros(), 0.0, 9.81);
        let e0 = plant.mechanical_energy(&state.theta, &state.theta_dot) - u0;
        assert!(e0 > 0.0);

        let cmd = ActuatorCommand::zeros();
        let steps = (10.0 / plant.config.dt) as usize;
        let mut max_drift: f64 = 0.0;
        for _ in 0..steps {
            let v_prev = state.theta_dot;
            let (next, _) = plant.step(&state, &cmd, 276.0).unwrap();
            // Leapfrog readout: velocity synchronized to the position time by
            // averaging the surrounding half-step velocities.
            let v_sync = (v_prev + next.theta_dot) * 0.5;
            let e = kinetic_energy(&plant.config, &v_sync)
                + potential_energy(&plant.arm, &state.theta, 0.0, 9.81)
                - u0;
            max_drift = max_drift.max(((e - e0) / e0).abs());
            state = next;
        }
        assert!(
            max_drift <= 1e-3,
            "energy drift {max_drift} exceeds 0.1% over 10 s"
        );
    }

    #[test]
    fn damping_power_is_never_positive() {
        let plant = test_plant();
        let mut state = PlantState::at_rest();
        state.theta[2] = 0.2;
        state.theta_dot[2] = -1.0;
        state.theta_dot[7] = 0.5;
        let mut cmd = ActuatorCommand::zeros();
        cmd.pairs[2] = [200.0, 100.0];
        for _ in 0..2000 {
            let (next, diag) = plant.step(&state, &cmd, 276.0).unwrap();
            for p in diag.damping_power {
                assert!(p <= 0.0, "damping injected energy: {p}");
            }
            state = next;
        }
    }

    #[test]
    fn hard_stops_bound_excursion_under_full_pressure() {
        let plant = test_plant();
        let mut state = PlantState::at_rest();
        // One-sided max pressure on every joint.
        let mut cmd = ActuatorCommand::zeros();
        for i in 0..12 {
            cmd.pairs[i] = [276.0, 0.0];
        }
        let steps = (5.0 / plant.config.dt) as usize;
        let bound = 15f64.to_radians() + plant.config.hardstop_margin_rad;
        for _ in 0..steps {
            let (next, _) = plant.step(&state, &cmd, 276.0).unwrap();
            state = next;
            for i in 0..12 {
                assert!(
                    state.theta[i].abs() <= bound,
                    "joint {i} broke the hard stop: {}",
                    state.theta[i]
                );
            }
        }
        // The drive actually pushed the joints onto the stops.
        assert!(state.theta[0] > 15f64.to_radians() - 0.02);
    }

    #[test]
    fn trajectories_are_bitwise_deterministic() {
        let plant = test_plant();
        let run = || {
            let mut state = PlantState::at_rest();
            let mut cmd = ActuatorCommand::zeros();
            cmd.pairs[4] = [150.0, 20.0];
            cmd.pairs[9] = [10.0, 90.0];
            for _ in 0..500 {
                let (next, _) = plant.step(&state, &cmd, 276.0).unwrap();
                state = next;
            }
            state
        };
        let a = run();
        let b = run();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.theta_dot, b.theta_dot);
        for i in 0..24 {
            assert_eq!(a.actuators[i].pressure, b.actuators[i].pressure);
        }
    }

    #[test]
    fn tank_zero_flow_is_unchanged() {
        let tank = TankState {
            volume_l: 1.11,
            pressure_kpa: 31000.0,
            regulator_setpoint_kpa: 276.0,
        };
        let next = tank_step(&tank, 0.0, 1.0);
        assert_eq!(next, tank);
        assert!(tank.supply_available());
        assert_eq!(tank.supply_pressure(), 276.0);
    }

    #[test]
    fn tank_depletion_matches_the_closed_form() {
        let mut tank = TankState {
            volume_l: 1.11,
            pressure_kpa: 31000.0,
            regulator_setpoint_kpa: 276.0,
        };
        let flow = 40.0f64; // kPa L / s
        let dt = 1e-3;
        let expected = (31000.0 - 276.0) * 1.11 / flow;
        let mut t = 0.0;
        while tank.supply_available() {
            tank = tank_step(&tank, flow, dt);
            t += dt;
            assert!(t < 2.0 * expected, "tank failed to deplete");
        }
        assert!(
            (t - expected).abs() <= expected * 1e-3 + dt,
            "depletion time {t} vs closed form {expected}"
        );
    }

    #[test]
    fn halving_the_volume_halves_depletion_time() {
        let deplete = |volume: f64| {
            let mut tank = TankState {
                volume_l: volume,
                pressure_kpa: 31000.0,
                regulator_setpoint_kpa: 276.0,
            };
            let mut t = 0.0f64;
            while tank.supply_available() {
                tank = tank_step(&tank, 55.0, 1e-2);
                t += 1e-2;
            }
            t
        };
        let full = deplete(1.11);
        let half = deplete(0.555);
        assert!(((full / half) - 2.0).abs() < 0.05);
    }

    #[test]
    fn non_finite_commands_surface_as_faults() {
        let plant = test_plant();
        let mut state = PlantState::at_rest();
        state.theta_dot[0] = f64::NAN;
        let err = plant
            .step(&state, &ActuatorCommand::zeros(), 276.0)
            .unwrap_err();
        assert!(matches!(err, SimFault::NonFinite { .. }));
    }

    #[test]
    fn oscillation_frequency_rises_with_common_pressure() {
        // Small-signal spring property: pressurize joint 0 symmetrically,
        // hold the others stiff, release from a small angle, and count zero
        // crossings. Pressure-dependent damping is zeroed so the measurement
        // sees the spring constant, not the friction growth (high supply
        // pressure overdamps the joint outright).
        let mut plant = test_plant();
        plant.config.damping_pressure = 0.0;
        let mut prev_freq = -1.0;
        for p in [0.0, 14.0, 28.0, 55.0, 83.0, 276.0] {
            let mut cmd = ActuatorCommand::zeros();
            cmd.pairs[0] = [p, p];
            for i in 1..12 {
                cmd.pairs[i] = [276.0, 276.0];
            }
            let mut state = PlantState::at_rest();
            state.theta[0] = 0.03;
            // Pre-charge the muscles so the release is at pressure.
            for i in 0..12 {
                state.actuators[2 * i].pressure = cmd.pairs[i][0];
                state.actuators[2 * i + 1].pressure = cmd.pairs[i][1];
            }
            let mut crossings = 0usize;
            let mut prev_sign = state.theta[0] > 0.0;
            let steps = (4.0 / plant.config.dt) as usize;
            for _ in 0..steps {
                let (next, _) = plant.step(&state, &cmd, 276.0).unwrap();
                state = next;
                let sign = state.theta[0] > 0.0;
                if sign != prev_sign {
                    crossings += 1;
                    prev_sign = sign;
                }
            }
            let freq = crossings as f64 / 2.0 / 4.0; // Hz
            assert!(
                freq > prev_freq,
                "frequency not increasing at p = {p}: {freq} Hz vs {prev_freq} Hz"
            );
            prev_freq = freq;
        }
    }
}
