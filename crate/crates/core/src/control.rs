//! Closed-loop joint-angle controller: twelve independent PID loops whose
//! outputs are turned into 24 muscle pressure targets.
//!
//! Per tick and per joint: the PID maps the angle error to a log pressure
//! ratio, the antagonistic floor is derated toward large targets, and the
//! ratio is split into the two muscle pressures with the floor on the
//! retreating side. The twelve loops are independent; assembling the
//! 24-value command is the only synchronization point of a tick.

use crate::actuation::{
    derate_pa, pid_step, ratio_to_pressures, PidGains, PidState, StiffnessProfile,
};
use crate::arm::{JointLimits, JointVector, JOINT_COUNT};
use crate::real::Real;

/// Target pressures for all 24 muscles, kPa: `pairs[joint] = [p1, p2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorCommand<T: Real> {
    pub pairs: [[T; 2]; 12],
}

impl<T: Real> ActuatorCommand<T> {
    /// Both muscles of every joint at the profile floor (no net torque).
    pub fn balanced(profile: &StiffnessProfile<T>) -> Self {
        let mut pairs = [[T::zero(); 2]; 12];
        for (i, pair) in pairs.iter_mut().enumerate() {
            *pair = [profile.p_a[i], profile.p_a[i]];
        }
        ActuatorCommand { pairs }
    }

    pub fn zeros() -> Self {
        ActuatorCommand {
            pairs: [[T::zero(); 2]; 12],
        }
    }

    /// Flat view in actuator order: joint 0 side 1, joint 0 side 2, joint 1
    /// side 1, ...
    pub fn flat(&self) -> [T; 24] {
        let mut out = [T::zero(); 24];
        for (i, pair) in self.pairs.iter().enumerate() {
            out[2 * i] = pair[0];
            out[2 * i + 1] = pair[1];
        }
        out
    }
}

/// The 12-joint controller: shared gains, per-joint PID state, stiffness
/// profile, and the derating heuristic.
#[derive(Debug, Clone)]
pub struct ArmController<T: Real> {
    pub gains: PidGains<T>,
    pub profile: StiffnessProfile<T>,
    pub limits: JointLimits<T>,
    pub max_pressure: T,
    /// Exponent of the floor-derating ramp; zero disables derating.
    pub derate_gamma: T,
    states: [PidState<T>; 12],
}

impl<T: Real> ArmController<T> {
    pub fn new(
        gains: PidGains<T>,
        profile: StiffnessProfile<T>,
        limits: JointLimits<T>,
        max_pressure: T,
        derate_gamma: T,
    ) -> Self {
        ArmController {
            gains,
            profile,
            limits,
            max_pressure,
            derate_gamma,
            states: [PidState::default(); 12],
        }
    }

    /// Clear all integral/derivative history.
    pub fn reset(&mut self) {
        self.states = [PidState::default(); 12];
    }

    /// One control tick: angle errors in, 24 pressure targets out.
    pub fn tick(
        &mut self,
        measured: &JointVector<T>,
        target: &JointVector<T>,
        dt: T,
    ) -> ActuatorCommand<T> {
        let mut command = ActuatorCommand::zeros();
        for i in 0..JOINT_COUNT {
            let error = target[i] - measured[i];
            let u = pid_step(&mut self.states[i], error, dt, &self.gains);
            let ratio = u.exp();
            let p_a = if self.derate_gamma > T::zero() {
                derate_pa(
                    self.profile.p_a[i],
                    target[i],
                    self.limits.bound_toward(i, target[i]),
                    self.derate_gamma,
                )
            } else {
                self.profile.p_a[i]
            };
            let pair = ratio_to_pressures(ratio, p_a, self.max_pressure)
                .expect("clamped PID output always yields a valid ratio");
            command.pairs[i] = [pair.p1, pair.p2];
        }
        command
    }
}
