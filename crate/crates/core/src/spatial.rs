//! Screw-theory primitives: rotations, rigid transforms, twists, matrix
//! exponentials, and adjoints.
//!
//! Conventions: 6-vectors stack the linear part on top of the angular part,
//! `[v; w]`, matching the twist construction `xi = [-w x q, w]` for a revolute
//! axis `w` through the point `q`. Rotations are stored as 3x3 matrices and
//! are only re-orthonormalized at construction time, never silently inside
//! group operations.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use thiserror::Error;

use crate::real::{real, to_f64, Real};

/// Orthonormality / unit-norm tolerance enforced on construction (for f64).
pub const CONSTRUCTION_TOL: f64 = 1e-9;

/// Construction tolerance for the working scalar: 1e-9, widened to
/// 100 epsilon for scalars too coarse to represent that (f32).
pub fn construction_tol<T: Real>() -> f64 {
    let eps100 = to_f64(T::default_epsilon()) * 100.0;
    CONSTRUCTION_TOL.max(eps100)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    /// Angular part of a twist must be unit (revolute) or zero (prismatic).
    #[error("invalid twist: |angular| = {angular_norm} is neither 0 nor 1")]
    InvalidTwist { angular_norm: f64 },
    /// Matrix is not orthonormal within tolerance.
    #[error("matrix is not orthonormal: max |R^T R - I| = {defect}")]
    NotOrthonormal { defect: f64 },
    /// Matrix is orthonormal but left-handed.
    #[error("matrix is not a proper rotation: det = {det}")]
    ImproperRotation { det: f64 },
    /// Axis used to build a rotation or twist is not unit length.
    #[error("axis is not unit length: |axis| = {norm}")]
    NonUnitAxis { norm: f64 },
}

/// Skew-symmetric (cross-product) matrix: `hat(w) * u == w x u`.
pub fn hat<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -w.z, w.y, w.z, z, -w.x, -w.y, w.x, z)
}

/// Rotation in SO(3), stored as an orthonormal 3x3 matrix with det +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation<T: Real>(Matrix3<T>);

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validate a raw matrix (orthonormal within 1e-9, det +1 within 1e-9),
    /// then re-orthonormalize it by Gram-Schmidt so downstream products start
    /// from machine precision.
    pub fn from_matrix(m: Matrix3<T>) -> Result<Self, SpatialError> {
        let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
        if to_f64(defect) > construction_tol::<T>() {
            return Err(SpatialError::NotOrthonormal {
                defect: to_f64(defect),
            });
        }
        let det = m.determinant();
        if (to_f64(det) - 1.0).abs() > construction_tol::<T>() {
            return Err(SpatialError::ImproperRotation { det: to_f64(det) });
        }
        let c0 = m.column(0).normalize();
        let mut c1 = m.column(1).into_owned();
        c1 -= c0 * c0.dot(&c1);
        let c1 = c1.normalize();
        let c2 = c0.cross(&c1);
        Ok(Rotation(Matrix3::from_columns(&[c0, c1, c2])))
    }

    /// Closed-form axis-angle rotation (Rodrigues). The axis must be unit.
    pub fn from_axis_angle(axis: &Vector3<T>, angle: T) -> Result<Self, SpatialError> {
        let norm = to_f64(axis.norm());
        if (norm - 1.0).abs() > construction_tol::<T>() {
            return Err(SpatialError::NonUnitAxis { norm });
        }
        Ok(Self::from_unit_axis_angle(axis, angle))
    }

    pub(crate) fn from_unit_axis_angle(axis: &Vector3<T>, angle: T) -> Self {
        let k = hat(axis);
        let two = real::<T>(2.0);
        let half_sin = (angle / two).sin();
        // 1 - cos(t) == 2 sin^2(t/2), stable for small angles.
        let one_minus_cos = two * half_sin * half_sin;
        Rotation(Matrix3::identity() + k * angle.sin() + k * k * one_minus_cos)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in [0, pi], accurate for both tiny and near-pi angles.
    pub fn angle(&self) -> T {
        let two = real::<T>(2.0);
        let skew = (self.0 - self.0.transpose()) / two;
        let sin = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]).norm();
        let cos = (self.0.trace() - T::one()) / two;
        sin.atan2(cos)
    }

    /// Geodesic distance to another rotation, in radians.
    pub fn angle_to(&self, other: &Self) -> T {
        Rotation(self.0.transpose() * other.0).angle()
    }

    /// Worst orthonormality defect, `max |R^T R - I|`.
    pub fn orthonormality_defect(&self) -> T {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }
}

impl<T: Real> std::ops::Mul for Rotation<T> {
    type Output = Rotation<T>;
    fn mul(self, rhs: Self) -> Self {
        Rotation(self.0 * rhs.0)
    }
}

impl<T: Real> std::ops::Mul<Vector3<T>> for Rotation<T> {
    type Output = Vector3<T>;
    fn mul(self, rhs: Vector3<T>) -> Vector3<T> {
        self.0 * rhs
    }
}

/// Rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation<T>, translation: Vector3<T>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation,
        }
    }

    /// `g^-1 = [R^T, -R^T t]`.
    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation.inverse();
        Pose {
            translation: -(rot_inv * self.translation),
            rotation: rot_inv,
        }
    }

    /// Apply the transform to a point: `R p + t`.
    pub fn act(&self, point: &Vector3<T>) -> Vector3<T> {
        self.rotation * *point + self.translation
    }

    /// Rotate a free vector (no translation applied).
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * *v
    }
}

impl<T: Real> std::ops::Mul for Pose<T> {
    type Output = Pose<T>;
    fn mul(self, rhs: Self) -> Pose<T> {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

/// Twist `[v; w]`: linear velocity part `v`, angular part `w`.
///
/// For a revolute joint, `|w| = 1` and `v = -w x q` for any point `q` on the
/// joint axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist<T: Real> {
    pub linear: Vector3<T>,
    pub angular: Vector3<T>,
}

impl<T: Real> Twist<T> {
    pub fn new(linear: Vector3<T>, angular: Vector3<T>) -> Self {
        Twist { linear, angular }
    }

    /// Twist of a revolute joint with unit axis `w` through point `q`.
    pub fn revolute(axis: &Vector3<T>, point: &Vector3<T>) -> Result<Self, SpatialError> {
        let norm = to_f64(axis.norm());
        if (norm - 1.0).abs() > construction_tol::<T>() {
            return Err(SpatialError::NonUnitAxis { norm });
        }
        Ok(Twist {
            linear: -axis.cross(point),
            angular: *axis,
        })
    }

    pub fn as_vector(&self) -> Vector6<T> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        v
    }

    pub fn from_vector(v: &Vector6<T>) -> Self {
        Twist {
            linear: v.fixed_rows::<3>(0).into_owned(),
            angular: v.fixed_rows::<3>(3).into_owned(),
        }
    }
}

/// Angle magnitude below which the exponential switches to series expansion.
const SMALL_ANGLE: f64 = 1e-7;

/// Exponential of a twist scaled by `theta`.
///
/// The angular part must be unit (revolute) or zero (prismatic); anything
/// else is rejected.
pub fn exp_twist<T: Real>(xi: &Twist<T>, theta: T) -> Result<Pose<T>, SpatialError> {
    let w_norm = to_f64(xi.angular.norm());
    if w_norm > CONSTRUCTION_TOL && (w_norm - 1.0).abs() > construction_tol::<T>() {
        return Err(SpatialError::InvalidTwist {
            angular_norm: w_norm,
        });
    }
    Ok(exp_twist_unchecked(xi, theta))
}

/// Exponential without the unit-axis check, for twists validated at
/// geometry-construction time.
pub(crate) fn exp_twist_unchecked<T: Real>(xi: &Twist<T>, theta: T) -> Pose<T> {
    if to_f64(xi.angular.norm()) < 0.5 {
        // Prismatic: pure translation.
        return Pose::from_translation(xi.linear * theta);
    }
    let k = hat(&xi.angular);
    let k2 = k * k;

    // Rodrigues coefficients with a series branch against cancellation:
    //   R = I + sin(t) K + (1 - cos(t)) K^2
    //   p = (I t + (1 - cos(t)) K + (t - sin(t)) K^2) v
    let (sin_t, one_minus_cos, t_minus_sin) = if to_f64(theta).abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        let six = real::<T>(6.0);
        let half = real::<T>(0.5);
        (
            theta - theta * t2 / six,
            half * t2,
            theta * t2 / six,
        )
    } else {
        let two = real::<T>(2.0);
        let hs = (theta / two).sin();
        (theta.sin(), two * hs * hs, theta - theta.sin())
    };

    let rot = Matrix3::identity() + k * sin_t + k2 * one_minus_cos;
    let g = Matrix3::identity() * theta + k * one_minus_cos + k2 * t_minus_sin;
    Pose {
        rotation: Rotation(rot),
        translation: g * xi.linear,
    }
}

/// Adjoint of a rigid transform for the `[v; w]` twist ordering:
///
/// ```text
/// Ad(g) = [ R   hat(t) R ]
///         [ 0       R    ]
/// ```
pub fn adjoint<T: Real>(g: &Pose<T>) -> Matrix6<T> {
    let r = g.rotation.matrix();
    let tr = hat(&g.translation) * r;
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    ad.fixed_view_mut::<3, 3>(0, 3).copy_from(&tr);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    ad
}

/// Transform a twist by the adjoint of `g` without building the 6x6 matrix.
pub fn adjoint_apply<T: Real>(g: &Pose<T>, xi: &Twist<T>) -> Twist<T> {
    let w = g.rotation * xi.angular;
    Twist {
        linear: g.rotation * xi.linear + g.translation.cross(&w),
        angular: w,
    }
}
