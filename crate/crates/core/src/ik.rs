//! Position-only inverse kinematics for the redundant 12-joint arm.
//!
//! Damped-least-squares inverse Jacobian iteration on the 3-row position
//! Jacobian, with two joint-limit devices layered on top:
//!
//! - gradient projection: a null-space step down the limit-centering
//!   objective `H(theta) = sum_i ((theta_i - mid_i) / range_i)^2`, which
//!   redistributes motion without disturbing the tool position;
//! - weighted least norm: joints moving toward their nearer limit are
//!   penalized in the pseudoinverse by `w_i = 1 + |dH/dtheta_i|`.
//!
//! Iterates are clamped to the limit box every step, so returned solutions
//! are always feasible. Orientation is not solved here; the 6-row Jacobian
//! stays available in `arm` for compliance analysis.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::arm::{ArmGeometry, JointLimits, JointVector, JOINT_COUNT};
use crate::real::{is_finite, real, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("target position is not finite: ({x}, {y}, {z})")]
    NonFiniteTarget { x: f64, y: f64, z: f64 },
    #[error("invalid solver parameter: {0}")]
    BadParams(&'static str),
}

/// Solver knobs. Defaults: 200 iterations, 1e-4 m tolerance, damping 1e-3 m,
/// step scale 0.5, null-space gain 0.01, weighted least norm on.
///
/// The null gain is deliberately small: the centering gradient reaches
/// magnitude ~4 near the limits, and larger gains make the null-space kick
/// overshoot the centering objective instead of settling it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkParams<T: Real> {
    pub max_iters: usize,
    pub position_tolerance: T,
    pub damping: T,
    pub step_scale: T,
    pub null_gain: T,
    pub wln_enabled: bool,
}

impl<T: Real> Default for IkParams<T> {
    fn default() -> Self {
        IkParams {
            max_iters: 200,
            position_tolerance: real(1e-4),
            damping: real(1e-3),
            step_scale: real(0.5),
            null_gain: real(0.01),
            wln_enabled: true,
        }
    }
}

impl<T: Real> IkParams<T> {
    pub fn validate(&self) -> Result<(), IkError> {
        if self.max_iters < 1 {
            return Err(IkError::BadParams("max_iters must be >= 1"));
        }
        if self.position_tolerance <= T::zero() {
            return Err(IkError::BadParams("position_tolerance must be > 0"));
        }
        if self.damping < T::zero() {
            return Err(IkError::BadParams("damping must be >= 0"));
        }
        if self.step_scale <= T::zero() || self.step_scale > T::one() {
            return Err(IkError::BadParams("step_scale must be in (0, 1]"));
        }
        if self.null_gain < T::zero() {
            return Err(IkError::BadParams("null_gain must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult<T: Real> {
    pub theta: JointVector<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Final position error of `theta`, meters.
    pub residual: T,
}

/// Gradient of the limit-centering objective
/// `H = sum_i ((theta_i - mid_i) / range_i)^2`.
///
/// Zero at the limit midpoints; each component points away from the nearer
/// limit.
pub fn limit_avoidance_gradient<T: Real>(
    theta: &JointVector<T>,
    limits: &JointLimits<T>,
) -> SVector<T, 12> {
    let two = real::<T>(2.0);
    let mut g = SVector::<T, 12>::zeros();
    for i in 0..JOINT_COUNT {
        let range = limits.range(i);
        g[i] = two * (theta[i] - limits.midpoint(i)) / (range * range);
    }
    g
}

/// Weighted-least-norm diagonal: `w_i = 1 + |dH/dtheta_i|` while joint i is
/// moving toward its nearer limit (judged from `motion`, the displacement
/// since the previous iterate), else 1.
pub fn wln_weights<T: Real>(
    theta: &JointVector<T>,
    motion: &SVector<T, 12>,
    limits: &JointLimits<T>,
) -> SVector<T, 12> {
    let grad = limit_avoidance_gradient(theta, limits);
    let mut w = SVector::<T, 12>::repeat(T::one());
    for i in 0..JOINT_COUNT {
        // The nearer limit lies in the direction of (theta - mid); motion
        // with the same sign approaches it.
        let toward = (theta[i] - limits.midpoint(i)) * motion[i] > T::zero();
        if toward {
            w[i] = T::one() + grad[i].abs();
        }
    }
    w
}

/// One damped, weighted, null-space-augmented update:
/// `theta' = clamp(theta + alpha * dtheta_task + k0 * N * (-grad H))`.
///
/// `motion` is the displacement of the previous step (drives the directional
/// weighted-least-norm rule); pass `None` on the first iterate.
pub fn ik_step<T: Real>(
    arm: &ArmGeometry<T>,
    limits: &JointLimits<T>,
    theta: &JointVector<T>,
    motion: Option<&SVector<T, 12>>,
    target: &Vector3<T>,
    params: &IkParams<T>,
) -> JointVector<T> {
    let (pose, jac) = arm.fk_and_position_jacobian(theta);
    let error = target - pose.translation;

    let weights = match (params.wln_enabled, motion) {
        (true, Some(m)) => wln_weights(theta, m, limits),
        _ => SVector::<T, 12>::repeat(T::one()),
    };

    // Damped weighted pseudoinverse step:
    //   dtheta = W^-1 J^T (J W^-1 J^T + lambda^2 I)^-1 e
    let mut jw = jac;
    for i in 0..JOINT_COUNT {
        let wi_inv = T::one() / weights[i];
        let mut col = jw.column_mut(i);
        col *= wi_inv;
    }
    let lambda2 = params.damping * params.damping;
    let a = jw * jac.transpose() + Matrix3::identity() * lambda2;
    let y = a
        .cholesky()
        .map(|c| c.solve(&error))
        .unwrap_or_else(Vector3::zeros);
    let mut dtheta_task = jac.transpose() * y;
    for i in 0..JOINT_COUNT {
        dtheta_task[i] /= weights[i];
    }

    let mut next = theta + dtheta_task * params.step_scale;
    if params.null_gain > T::zero() {
        let n = null_space_projector(&jac);
        let descent = -limit_avoidance_gradient(theta, limits);
        next += n * descent * params.null_gain;
    }
    limits.clamp(&next)
}

/// Exact null-space projector `N = I - J^+ J` of the position Jacobian,
/// with `J^+` the Moore-Penrose pseudoinverse (rank-truncated eigen
/// decomposition of `J J^T`, no damping).
pub fn null_space_projector<T: Real>(jac: &SMatrix<T, 3, 12>) -> SMatrix<T, 12, 12> {
    let jpinv = pseudoinverse(jac);
    SMatrix::<T, 12, 12>::identity() - jpinv * jac
}

/// Moore-Penrose pseudoinverse of the 3x12 Jacobian via the symmetric
/// eigendecomposition of `J J^T`, truncating eigenvalues below
/// `1e-12 * max_eig`.
pub fn pseudoinverse<T: Real>(jac: &SMatrix<T, 3, 12>) -> SMatrix<T, 12, 3> {
    let m = jac * jac.transpose();
    let eig = m.symmetric_eigen();
    let max_eig = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &e| if e > acc { e } else { acc });
    let cutoff = max_eig * real::<T>(1e-12);
    let mut m_pinv = Matrix3::<T>::zeros();
    for k in 0..3 {
        let lambda = eig.eigenvalues[k];
        if lambda > cutoff && lambda > T::zero() {
            let u = eig.eigenvectors.column(k);
            m_pinv += u * u.transpose() / lambda;
        }
    }
    jac.transpose() * m_pinv
}

/// Iterate [`ik_step`] from `theta0` until the position residual drops below
/// tolerance or the iteration budget runs out. Returns the best iterate seen;
/// every returned configuration satisfies the joint limits.
pub fn solve_position_ik<T: Real>(
    arm: &ArmGeometry<T>,
    limits: &JointLimits<T>,
    theta0: &JointVector<T>,
    target: &Vector3<T>,
    params: &IkParams<T>,
) -> Result<IkResult<T>, IkError> {
    if !(is_finite(target.x) && is_finite(target.y) && is_finite(target.z)) {
        return Err(IkError::NonFiniteTarget {
            x: to_f64(target.x),
            y: to_f64(target.y),
            z: to_f64(target.z),
        });
    }
    params.validate()?;

    let mut theta = limits.clamp(theta0);
    let mut motion: Option<SVector<T, 12>> = None;
    let mut best_theta = theta;
    let mut best_residual = (target - arm.tool_position(&theta)).norm();

    for iteration in 0..params.max_iters {
        let residual = (target - arm.tool_position(&theta)).norm();
        if residual < best_residual {
            best_residual = residual;
            best_theta = theta;
        }
        if residual <= params.position_tolerance {
            return Ok(IkResult {
                theta,
                converged: true,
                iterations: iteration,
                residual,
            });
        }
        let next = ik_step(arm, limits, &theta, motion.as_ref(), target, params);
        motion = Some(next - theta);
        theta = next;
    }

    let residual = (target - arm.tool_position(&theta)).norm();
    if residual <= params.position_tolerance {
        return Ok(IkResult {
            theta,
            converged: true,
            iterations: params.max_iters,
            residual,
        });
    }
    if residual < best_residual {
        best_residual = residual;
        best_theta = theta;
    }
    Ok(IkResult {
        theta: best_theta,
        converged: false,
        iterations: params.max_iters,
        residual: best_residual,
    })
}

/// Sample a uniformly random feasible joint vector.
pub fn sample_feasible<T: Real, R: rand::Rng>(
    limits: &JointLimits<T>,
    rng: &mut R,
) -> JointVector<T> {
    let mut theta = JointVector::<T>::zeros();
    for i in 0..JOINT_COUNT {
        let lo = to_f64(limits.lower[i]);
        let hi = to_f64(limits.upper[i]);
        theta[i] = real(rng.random_range(lo..=hi));
    }
    theta
}
