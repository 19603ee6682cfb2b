//! McKibben actuator model, antagonistic pair torque/stiffness mapping,
//! per-joint PID pressure-ratio control, and task-space compliance analysis.
//!
//! Each revolute joint is driven by two muscles pulling on opposite sides of
//! a lever. The lower of the two pressures is held at the antagonistic floor
//! `p_A`, which sets the joint's structural stiffness without changing its
//! equilibrium; the PID controller outputs the log of the pressure ratio
//! `p1/p2`, which steers torque direction and magnitude.

use nalgebra::{Matrix3, SMatrix, Vector3};
use thiserror::Error;

use crate::arm::{ArmGeometry, JointVector};
use crate::real::{is_finite, real, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuationError {
    #[error("pressure {pressure} kPa outside [0, {max}] kPa")]
    PressureOutOfRange { pressure: f64, max: f64 },
    #[error("muscle length {length} m outside contraction range [{min}, {max}] m")]
    LengthOutOfRange { length: f64, min: f64, max: f64 },
    #[error("pressure ratio must be finite and > 0, got {ratio}")]
    BadRatio { ratio: f64 },
    #[error("antagonistic floor {p_a} kPa outside [0, {max}] kPa")]
    BadFloor { p_a: f64, max: f64 },
    #[error("joint stiffness must be > 0, got {value} at joint {joint}")]
    NonPositiveStiffness { joint: usize, value: f64 },
    #[error("invalid actuator parameter: {0}")]
    BadParams(&'static str),
}

/// Affine McKibben force model.
///
/// Tension at pressure `p` and length `l`:
/// `F = p * a * (l/L0 - 1 + eps_max)`, i.e. zero at full contraction
/// `l = L0 (1 - eps_max)` and increasing with length, so an elongated muscle
/// pulls harder at the same pressure. The model extrapolates monotonically up
/// to `L0 (1 + max_elongation)` to cover the stretched antagonist side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McKibbenParams<T: Real> {
    /// Rest length, m.
    pub rest_length: T,
    /// Maximum contraction ratio (default 0.34).
    pub max_contraction: T,
    /// Force slope, N per kPa at unit strain offset.
    pub force_coeff: T,
    /// Allowed elongation ratio beyond rest length (default 0.20).
    pub max_elongation: T,
    /// Supply/regulator ceiling, kPa (default 276).
    pub max_pressure: T,
}

impl<T: Real> McKibbenParams<T> {
    pub fn new(
        rest_length: T,
        max_contraction: T,
        force_coeff: T,
        max_elongation: T,
        max_pressure: T,
    ) -> Result<Self, ActuationError> {
        if rest_length <= T::zero() {
            return Err(ActuationError::BadParams("rest_length must be > 0"));
        }
        if max_contraction <= T::zero() || max_contraction >= T::one() {
            return Err(ActuationError::BadParams("max_contraction must be in (0, 1)"));
        }
        if force_coeff <= T::zero() {
            return Err(ActuationError::BadParams("force_coeff must be > 0"));
        }
        if max_elongation < T::zero() {
            return Err(ActuationError::BadParams("max_elongation must be >= 0"));
        }
        if max_pressure <= T::zero() {
            return Err(ActuationError::BadParams("max_pressure must be > 0"));
        }
        Ok(McKibbenParams {
            rest_length,
            max_contraction,
            force_coeff,
            max_elongation,
            max_pressure,
        })
    }

    /// Constant term of the affine model, fixed so force vanishes at full
    /// contraction: `b = -a (1 - eps_max)`.
    pub fn force_offset(&self) -> T {
        -self.force_coeff * (T::one() - self.max_contraction)
    }

    pub fn min_length(&self) -> T {
        self.rest_length * (T::one() - self.max_contraction)
    }

    pub fn max_length(&self) -> T {
        self.rest_length * (T::one() + self.max_elongation)
    }
}

/// Tensile force of a muscle at pressure `p` (kPa) and length `l` (m).
pub fn mckibben_force<T: Real>(
    params: &McKibbenParams<T>,
    pressure: T,
    length: T,
) -> Result<T, ActuationError> {
    if pressure < T::zero() || pressure > params.max_pressure {
        return Err(ActuationError::PressureOutOfRange {
            pressure: to_f64(pressure),
            max: to_f64(params.max_pressure),
        });
    }
    let slack = params.rest_length * real::<T>(1e-9);
    if length < params.min_length() - slack || length > params.max_length() + slack {
        return Err(ActuationError::LengthOutOfRange {
            length: to_f64(length),
            min: to_f64(params.min_length()),
            max: to_f64(params.max_length()),
        });
    }
    let strain = length / params.rest_length - T::one() + params.max_contraction;
    let f = pressure * params.force_coeff * strain;
    Ok(if f > T::zero() { f } else { T::zero() })
}

/// Which muscle of an antagonistic pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Shortens as the joint angle increases; produces positive torque.
    One,
    /// Lengthens as the joint angle increases.
    Two,
}

/// Antagonistic muscle pair across one revolute joint.
///
/// Anchor geometry in the joint's bending plane: the parent anchor sits at
/// signed radius `+-r` and axial height `+h` above the joint center; the
/// child anchor at radius `+-(r - d_in)` and `-h` below, where
/// `d_in = L0 sin(attachment_angle)` tilts the muscle toward the center. `h`
/// is fixed so that both lengths equal the rest length at zero angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntagonisticJoint<T: Real> {
    pub lever_arm: T,
    pub attachment_angle: T,
    pub actuators: [McKibbenParams<T>; 2],
    anchor_inset: T,
    anchor_half_height: T,
}

impl<T: Real> AntagonisticJoint<T> {
    pub fn new(
        lever_arm: T,
        attachment_angle: T,
        actuators: [McKibbenParams<T>; 2],
    ) -> Result<Self, ActuationError> {
        if lever_arm <= T::zero() {
            return Err(ActuationError::BadParams("lever_arm must be > 0"));
        }
        let l0 = actuators[0].rest_length;
        if actuators[1].rest_length != l0 {
            return Err(ActuationError::BadParams(
                "both muscles of a pair must share the rest length",
            ));
        }
        let inset = l0 * attachment_angle.sin();
        if inset.abs() >= lever_arm {
            return Err(ActuationError::BadParams(
                "attachment angle pulls the child anchor past the joint axis",
            ));
        }
        let half_height_sq = (l0 * l0 - inset * inset) / real::<T>(4.0);
        if half_height_sq <= T::zero() {
            return Err(ActuationError::BadParams(
                "attachment angle leaves no axial span for the muscle",
            ));
        }
        Ok(AntagonisticJoint {
            lever_arm,
            attachment_angle,
            actuators,
            anchor_inset: inset,
            anchor_half_height: half_height_sq.sqrt(),
        })
    }

    pub fn rest_length(&self) -> T {
        self.actuators[0].rest_length
    }

    fn signed_offsets(&self, side: Side) -> (T, T) {
        let sign = match side {
            Side::One => T::one(),
            Side::Two => -T::one(),
        };
        let parent = sign * self.lever_arm;
        let child = sign * (self.lever_arm - self.anchor_inset);
        (parent, child)
    }

    /// Muscle length, its first and second derivatives with respect to the
    /// joint angle (chord between the rotated anchors).
    pub fn length_derivatives(&self, theta: T, side: Side) -> (T, T, T) {
        let (u, v) = self.signed_offsets(side);
        let h = self.anchor_half_height;
        let (s, c) = (theta.sin(), theta.cos());
        let e1 = u - v * c - h * s;
        let e2 = h + h * c - v * s;
        let e1d = v * s - h * c;
        let e2d = -h * s - v * c;
        let e1dd = v * c + h * s;
        let e2dd = -h * c + v * s;
        let len = (e1 * e1 + e2 * e2).sqrt();
        let lend = (e1 * e1d + e2 * e2d) / len;
        let lendd = (e1d * e1d + e1 * e1dd + e2d * e2d + e2 * e2dd - lend * lend) / len;
        (len, lend, lendd)
    }

    /// Muscle length at joint angle `theta`.
    pub fn actuator_length(&self, theta: T, side: Side) -> T {
        self.length_derivatives(theta, side).0
    }

    /// Effective lever `r_eff(theta)`: mean of the two virtual-work moment
    /// arms `-dL1/dtheta` and `+dL2/dtheta`. Even in `theta` by the mirror
    /// symmetry of the pair.
    pub fn effective_lever(&self, theta: T) -> T {
        let (_, l1d, _) = self.length_derivatives(theta, Side::One);
        let (_, l2d, _) = self.length_derivatives(theta, Side::Two);
        (-l1d + l2d) / real::<T>(2.0)
    }

    /// Joint torque: `tau = r_eff(theta) * (F1(p1, L1) - F2(p2, L2))`.
    pub fn pair_torque(&self, theta: T, p1: T, p2: T) -> Result<T, ActuationError> {
        let (l1, l1d, _) = self.length_derivatives(theta, Side::One);
        let (l2, l2d, _) = self.length_derivatives(theta, Side::Two);
        let f1 = mckibben_force(&self.actuators[0], p1, l1)?;
        let f2 = mckibben_force(&self.actuators[1], p2, l2)?;
        let r_eff = (-l1d + l2d) / real::<T>(2.0);
        Ok(r_eff * (f1 - f2))
    }

    /// Analytic joint stiffness `k = -d tau / d theta` at fixed pressures.
    pub fn joint_stiffness(&self, theta: T, p1: T, p2: T) -> Result<T, ActuationError> {
        let (l1, l1d, l1dd) = self.length_derivatives(theta, Side::One);
        let (l2, l2d, l2dd) = self.length_derivatives(theta, Side::Two);
        let f1 = mckibben_force(&self.actuators[0], p1, l1)?;
        let f2 = mckibben_force(&self.actuators[1], p2, l2)?;
        let two = real::<T>(2.0);
        let r_eff = (-l1d + l2d) / two;
        let r_eff_d = (-l1dd + l2dd) / two;
        // dF/dtheta = p a / L0 * dL/dtheta (zero on a slack muscle).
        let df1 = if f1 > T::zero() {
            p1 * self.actuators[0].force_coeff / self.actuators[0].rest_length * l1d
        } else {
            T::zero()
        };
        let df2 = if f2 > T::zero() {
            p2 * self.actuators[1].force_coeff / self.actuators[1].rest_length * l2d
        } else {
            T::zero()
        };
        Ok(-(r_eff_d * (f1 - f2) + r_eff * (df1 - df2)))
    }
}

/// Per-joint PID gains acting on the log pressure ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains<T: Real> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    /// Bound on the magnitude of the integral term `ki * integral`.
    pub integral_clamp: T,
    /// Bound on the magnitude of the output (log ratio).
    pub output_clamp: T,
}

impl<T: Real> PidGains<T> {
    pub fn validate(&self) -> Result<(), ActuationError> {
        if self.kp < T::zero() || self.ki < T::zero() || self.kd < T::zero() {
            return Err(ActuationError::BadParams("PID gains must be >= 0"));
        }
        if self.integral_clamp < T::zero() || self.output_clamp <= T::zero() {
            return Err(ActuationError::BadParams("PID clamps must be positive"));
        }
        Ok(())
    }

    pub fn zero() -> Self {
        PidGains {
            kp: T::zero(),
            ki: T::zero(),
            kd: T::zero(),
            integral_clamp: T::one(),
            output_clamp: T::one(),
        }
    }
}

/// Mutable state of one discrete PID loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState<T: Real> {
    pub integral: T,
    pub prev_error: T,
}

/// One discrete PID update on the angle error; returns the clamped log
/// pressure ratio `u = log(p1/p2)` and advances the state.
pub fn pid_step<T: Real>(
    state: &mut PidState<T>,
    error: T,
    dt: T,
    gains: &PidGains<T>,
) -> T {
    debug_assert!(dt > T::zero());
    state.integral += error * dt;
    if gains.ki > T::zero() {
        let bound = gains.integral_clamp / gains.ki;
        state.integral = state.integral.clamp(-bound, bound);
    }
    let derivative = (error - state.prev_error) / dt;
    state.prev_error = error;
    let u = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
    u.clamp(-gains.output_clamp, gains.output_clamp)
}

/// Pressure pair produced by [`ratio_to_pressures`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressurePair<T: Real> {
    pub p1: T,
    pub p2: T,
    /// True when the driven side hit the supply ceiling.
    pub clamped: bool,
}

/// Split a pressure ratio into the two muscle pressures: the retreating side
/// holds the antagonistic floor `p_A`, the driving side is `p_A` scaled by
/// the ratio and clamped to the supply ceiling. `min(p1, p2) == p_A` always.
pub fn ratio_to_pressures<T: Real>(
    p_ratio: T,
    p_a: T,
    max_pressure: T,
) -> Result<PressurePair<T>, ActuationError> {
    if !is_finite(p_ratio) || p_ratio <= T::zero() {
        return Err(ActuationError::BadRatio {
            ratio: to_f64(p_ratio),
        });
    }
    if p_a < T::zero() || p_a > max_pressure {
        return Err(ActuationError::BadFloor {
            p_a: to_f64(p_a),
            max: to_f64(max_pressure),
        });
    }
    let (driven_raw, driven) = if p_ratio >= T::one() {
        let raw = p_a * p_ratio;
        (raw, raw.clamp(T::zero(), max_pressure))
    } else {
        let raw = p_a / p_ratio;
        (raw, raw.clamp(T::zero(), max_pressure))
    };
    let clamped = driven_raw != driven;
    if p_ratio >= T::one() {
        Ok(PressurePair {
            p1: driven,
            p2: p_a,
            clamped,
        })
    } else {
        Ok(PressurePair {
            p1: p_a,
            p2: driven,
            clamped,
        })
    }
}

/// Lower the antagonistic floor as the joint target approaches its limit:
/// `p_A * max(0, 1 - |theta_target| / theta_limit)^gamma`.
pub fn derate_pa<T: Real>(p_a: T, theta_target: T, theta_limit: T, gamma: T) -> T {
    debug_assert!(theta_limit > T::zero());
    let ramp = T::one() - theta_target.abs() / theta_limit;
    let ramp = if ramp > T::zero() { ramp } else { T::zero() };
    p_a * ramp.powf(gamma)
}

/// Antagonistic pressure floor per joint, kPa.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessProfile<T: Real> {
    pub p_a: [T; 12],
}

impl<T: Real> StiffnessProfile<T> {
    pub fn uniform(p_a: T) -> Self {
        StiffnessProfile { p_a: [p_a; 12] }
    }

    /// Same floor for all four joints of each segment.
    pub fn per_segment(p_a: [T; 3]) -> Self {
        let mut out = [T::zero(); 12];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = p_a[i / 4];
        }
        StiffnessProfile { p_a: out }
    }

    pub fn validate(&self, max_pressure: T) -> Result<(), ActuationError> {
        for &p in &self.p_a {
            if p < T::zero() || p > max_pressure {
                return Err(ActuationError::BadFloor {
                    p_a: to_f64(p),
                    max: to_f64(max_pressure),
                });
            }
        }
        Ok(())
    }
}

/// Position compliance of the tool point: `C = J_p diag(1/k) J_p^T`,
/// symmetric positive semidefinite. Its eigenvectors are the directional
/// compliance axes of the current posture.
pub fn task_space_compliance<T: Real>(
    arm: &ArmGeometry<T>,
    theta: &JointVector<T>,
    joint_stiffness: &[T; 12],
) -> Result<Matrix3<T>, ActuationError> {
    for (i, &k) in joint_stiffness.iter().enumerate() {
        if k <= T::zero() {
            return Err(ActuationError::NonPositiveStiffness {
                joint: i,
                value: to_f64(k),
            });
        }
    }
    let jac = arm.position_jacobian(theta);
    let mut scaled: SMatrix<T, 3, 12> = jac;
    for (i, &k) in joint_stiffness.iter().enumerate() {
        let mut col = scaled.column_mut(i);
        col /= k;
    }
    Ok(scaled * jac.transpose())
}

/// Ratio of extreme eigenvalues (most / least compliant direction) restricted
/// to directions orthogonal to `axis`, or of the full matrix when `axis` is
/// `None`. Used to quantify directional compliance.
pub fn compliance_anisotropy<T: Real>(c: &Matrix3<T>, along: &Vector3<T>, across: &Vector3<T>) -> T {
    let num = (along.transpose() * c * along)[(0, 0)];
    let den = (across.transpose() * c * across)[(0, 0)];
    num / den
}
