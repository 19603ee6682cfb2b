//! Arm geometric description, forward kinematics, geometric Jacobian,
//! and joint-angle extraction from rigid-body frames.
//!
//! The arm is three structurally identical segments in series. A segment is
//! an upper plate, a central rod, and a lower plate connected by two
//! universal joints; each U-joint is two perpendicular revolute axes
//! intersecting at a shared center, so the full arm is a 12-revolute-joint
//! chain. The second axis group of a segment is rotated 45 degrees about the
//! segment z-axis relative to the first. The robot base frame is the first
//! segment's base frame; at the rest configuration (all joint angles zero)
//! the chain hangs straight down the -z axis.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::real::{real, to_f64, Real};
use crate::spatial::{
    adjoint_apply, construction_tol, exp_twist_unchecked, Pose, Rotation, SpatialError, Twist,
};

/// 12 joint angles, base to tip, in radians.
pub type JointVector<T> = SVector<T, 12>;

pub const JOINT_COUNT: usize = 12;
pub const SEGMENT_COUNT: usize = 3;
pub const JOINTS_PER_SEGMENT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("joint {joint}: {source}")]
    BadAxis { joint: usize, source: SpatialError },
    #[error("U-joint axes {a} and {b} are not perpendicular: dot = {dot}")]
    AxesNotPerpendicular { a: usize, b: usize, dot: f64 },
    #[error("U-joint axes {a} and {b} do not intersect at a shared center")]
    CentersMismatch { a: usize, b: usize },
    #[error("second axis group is not the first rotated 45 degrees about z (joint {joint})")]
    Not45DegreePattern { joint: usize },
    #[error("link mass must be positive, got {mass} (segment {segment}, link {link})")]
    NonPositiveMass { segment: usize, link: usize, mass: f64 },
    #[error("dimension must be positive: {name} = {value}")]
    NonPositiveDimension { name: &'static str, value: f64 },
    #[error("joint limits must satisfy lower < upper (joint {joint})")]
    BadLimits { joint: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("relative rotation not reachable by the U-joint: rotation residual {rotation_residual} rad, translation residual {translation_residual} m")]
    Unreachable {
        rotation_residual: f64,
        translation_residual: f64,
    },
    #[error("extracted angle at or beyond the pi/2 gimbal degeneracy: ({theta_a}, {theta_b})")]
    GimbalDegenerate { theta_a: f64, theta_b: f64 },
    #[error("U-joint axes are invalid: {0}")]
    BadAxes(SpatialError),
}

/// Segment dimensions. All meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDims<T: Real> {
    pub rod_length: T,
    pub upper_plate_half_height: T,
    pub lower_plate_half_height: T,
    pub lever_arm_radius: T,
    pub actuator_rest_length: T,
}

impl<T: Real> SegmentDims<T> {
    fn validate(&self) -> Result<(), GeometryError> {
        let checks = [
            ("rod_length", self.rod_length),
            ("upper_plate_half_height", self.upper_plate_half_height),
            ("lower_plate_half_height", self.lower_plate_half_height),
            ("lever_arm_radius", self.lever_arm_radius),
            ("actuator_rest_length", self.actuator_rest_length),
        ];
        for (name, value) in checks {
            if value <= T::zero() {
                return Err(GeometryError::NonPositiveDimension {
                    name,
                    value: to_f64(value),
                });
            }
        }
        Ok(())
    }
}

/// One spine segment: 4 revolute joints (two U-joints) plus the rest pose of
/// its tool frame (lower U-joint center) in its base frame (upper U-joint
/// center).
#[derive(Debug, Clone)]
pub struct SegmentGeometry<T: Real> {
    pub joint_axes: [Vector3<T>; 4],
    pub joint_centers: [Vector3<T>; 4],
    pub rest_tool_pose: Pose<T>,
    pub dims: SegmentDims<T>,
    twists: [Twist<T>; 4],
}

impl<T: Real> SegmentGeometry<T> {
    /// Build the standard segment: upper U-joint axes along x and y at the
    /// origin, lower U-joint axes rotated 45 degrees about z at the far end
    /// of the rod.
    pub fn standard(dims: SegmentDims<T>) -> Result<Self, GeometryError> {
        dims.validate()?;
        let z = T::zero();
        let o = T::one();
        let c45 = real::<T>(std::f64::consts::FRAC_1_SQRT_2);
        let axes = [
            Vector3::new(o, z, z),
            Vector3::new(z, o, z),
            Vector3::new(c45, c45, z),
            Vector3::new(-c45, c45, z),
        ];
        let lower = Vector3::new(z, z, -dims.rod_length);
        let centers = [Vector3::zeros(), Vector3::zeros(), lower, lower];
        let mut twists = [Twist::new(Vector3::zeros(), Vector3::zeros()); 4];
        for i in 0..4 {
            twists[i] = Twist::revolute(&axes[i], &centers[i])
                .map_err(|source| GeometryError::BadAxis { joint: i, source })?;
        }
        let seg = SegmentGeometry {
            joint_axes: axes,
            joint_centers: centers,
            rest_tool_pose: Pose::from_translation(lower),
            dims,
            twists,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Check the structural invariants: unit axes, perpendicular intersecting
    /// pairs, and the 45-degree stagger of the second group.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (i, axis) in self.joint_axes.iter().enumerate() {
            let norm = to_f64(axis.norm());
            if (norm - 1.0).abs() > construction_tol::<T>() {
                return Err(GeometryError::BadAxis {
                    joint: i,
                    source: SpatialError::NonUnitAxis { norm },
                });
            }
        }
        for pair in [(0usize, 1usize), (2, 3)] {
            let dot = to_f64(self.joint_axes[pair.0].dot(&self.joint_axes[pair.1]));
            if dot.abs() > construction_tol::<T>() {
                return Err(GeometryError::AxesNotPerpendicular {
                    a: pair.0,
                    b: pair.1,
                    dot,
                });
            }
            let gap = to_f64((self.joint_centers[pair.0] - self.joint_centers[pair.1]).norm());
            if gap > construction_tol::<T>() {
                return Err(GeometryError::CentersMismatch {
                    a: pair.0,
                    b: pair.1,
                });
            }
        }
        let rot45 = Rotation::from_unit_axis_angle(
            &Vector3::new(T::zero(), T::zero(), T::one()),
            real::<T>(std::f64::consts::FRAC_PI_4),
        );
        for i in 0..2 {
            let expected = rot45 * self.joint_axes[i];
            if to_f64((expected - self.joint_axes[i + 2]).norm()) > construction_tol::<T>() {
                return Err(GeometryError::Not45DegreePattern { joint: i + 2 });
            }
        }
        Ok(())
    }

    pub fn twists(&self) -> &[Twist<T>; 4] {
        &self.twists
    }

    /// Segment forward kinematics: product of the four joint exponentials
    /// with the rest tool pose.
    pub fn fk(&self, theta: &[T; 4]) -> Pose<T> {
        let mut g = Pose::identity();
        for (xi, &angle) in self.twists.iter().zip(theta) {
            g = g * exp_twist_unchecked(xi, angle);
        }
        g * self.rest_tool_pose
    }

    /// The two U-joints of this segment in segment-base coordinates.
    /// `index` 0 is the upper U-joint, 1 the lower.
    pub fn ujoint(&self, index: usize) -> UJointAxes<T> {
        let k = index * 2;
        UJointAxes {
            axis_a: self.joint_axes[k],
            axis_b: self.joint_axes[k + 1],
            center: self.joint_centers[k],
        }
    }
}

/// Full arm: three segments plus the fixed plate-to-plate offsets between
/// consecutive segments and the lumped link masses.
#[derive(Debug, Clone)]
pub struct ArmGeometry<T: Real> {
    pub segments: [SegmentGeometry<T>; 3],
    pub inter_segment_offsets: [Pose<T>; 2],
    /// Per segment: [upper plate, rod, lower plate] point masses, kg.
    pub link_masses: [[T; 3]; 3],
    /// Lever/force scale factor of the base segment's larger actuators.
    pub base_segment_scale: T,
}

/// A lumped point mass rigidly attached to the chain after `joints_before`
/// joints, at the given world position for the queried configuration.
#[derive(Debug, Clone, Copy)]
pub struct MassParticle<T: Real> {
    pub mass: T,
    pub position: Vector3<T>,
    pub joints_before: usize,
}

impl<T: Real> ArmGeometry<T> {
    /// Standard arm: three identical segments, inter-segment offsets from the
    /// plate half-heights, lumped masses per link.
    pub fn standard(
        dims: SegmentDims<T>,
        link_masses: [[T; 3]; 3],
        base_segment_scale: T,
    ) -> Result<Self, GeometryError> {
        for (s, seg) in link_masses.iter().enumerate() {
            for (l, &m) in seg.iter().enumerate() {
                if m <= T::zero() {
                    return Err(GeometryError::NonPositiveMass {
                        segment: s,
                        link: l,
                        mass: to_f64(m),
                    });
                }
            }
        }
        if base_segment_scale <= T::zero() {
            return Err(GeometryError::NonPositiveDimension {
                name: "base_segment_scale",
                value: to_f64(base_segment_scale),
            });
        }
        let seg = SegmentGeometry::standard(dims)?;
        let gap = dims.lower_plate_half_height + dims.upper_plate_half_height;
        let offset = Pose::from_translation(Vector3::new(T::zero(), T::zero(), -gap));
        Ok(ArmGeometry {
            segments: [seg.clone(), seg.clone(), seg],
            inter_segment_offsets: [offset, offset],
            link_masses,
            base_segment_scale,
        })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for seg in &self.segments {
            seg.validate()?;
        }
        Ok(())
    }

    pub fn total_mass(&self) -> T {
        self.link_masses
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &m| acc + m)
    }

    /// Sum of rigid-chain lengths; no configuration can put the tool farther
    /// from the base than this.
    pub fn total_kinematic_length(&self) -> T {
        let rods = self
            .segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.dims.rod_length);
        let offsets = self
            .inter_segment_offsets
            .iter()
            .fold(T::zero(), |acc, h| acc + h.translation.norm());
        rods + offsets
    }

    /// Walk the chain once, producing the tool pose and the current-config
    /// twist of every joint (the spatial Jacobian columns).
    fn fk_walk(&self, theta: &JointVector<T>) -> (Pose<T>, [Twist<T>; 12]) {
        let mut g = Pose::identity();
        let mut cols = [Twist::new(Vector3::zeros(), Vector3::zeros()); 12];
        for (s, seg) in self.segments.iter().enumerate() {
            if s > 0 {
                g = g * self.inter_segment_offsets[s - 1];
            }
            for j in 0..JOINTS_PER_SEGMENT {
                let idx = s * JOINTS_PER_SEGMENT + j;
                cols[idx] = adjoint_apply(&g, &seg.twists[j]);
                g = g * exp_twist_unchecked(&seg.twists[j], theta[idx]);
            }
            g = g * seg.rest_tool_pose;
        }
        (g, cols)
    }

    /// Full-robot forward kinematics: tool pose in the base frame.
    pub fn fk(&self, theta: &JointVector<T>) -> Pose<T> {
        self.fk_walk(theta).0
    }

    pub fn tool_position(&self, theta: &JointVector<T>) -> Vector3<T> {
        self.fk(theta).translation
    }

    /// Current-configuration twist of each joint, base frame, `[v; w]`.
    pub fn joint_twists(&self, theta: &JointVector<T>) -> [Twist<T>; 12] {
        self.fk_walk(theta).1
    }

    /// 6x12 spatial Jacobian; column i is the twist of joint i at the current
    /// configuration, rows [v; w].
    pub fn spatial_jacobian(&self, theta: &JointVector<T>) -> SMatrix<T, 6, 12> {
        let (_, cols) = self.fk_walk(theta);
        let mut j = SMatrix::<T, 6, 12>::zeros();
        for (i, xi) in cols.iter().enumerate() {
            j.fixed_view_mut::<3, 1>(0, i).copy_from(&xi.linear);
            j.fixed_view_mut::<3, 1>(3, i).copy_from(&xi.angular);
        }
        j
    }

    /// 3x12 tool-position Jacobian: `dp = J_p dtheta`. Column i is
    /// `v_i + w_i x p` for the current tool position `p`.
    pub fn position_jacobian(&self, theta: &JointVector<T>) -> SMatrix<T, 3, 12> {
        let (g, cols) = self.fk_walk(theta);
        position_jacobian_from_twists(&cols, &g.translation)
    }

    /// Tool pose and position Jacobian from one chain walk.
    pub fn fk_and_position_jacobian(
        &self,
        theta: &JointVector<T>,
    ) -> (Pose<T>, SMatrix<T, 3, 12>) {
        let (g, cols) = self.fk_walk(theta);
        let j = position_jacobian_from_twists(&cols, &g.translation);
        (g, j)
    }

    /// Lumped link masses at their current world positions: per segment the
    /// upper plate (at the segment base origin), the rod midpoint, and the
    /// lower plate (at the segment tool origin).
    pub fn mass_particles(&self, theta: &JointVector<T>) -> [MassParticle<T>; 9] {
        let zero = MassParticle {
            mass: T::zero(),
            position: Vector3::zeros(),
            joints_before: 0,
        };
        let mut particles = [zero; 9];
        let two = real::<T>(2.0);
        let mut g = Pose::identity();
        for (s, seg) in self.segments.iter().enumerate() {
            if s > 0 {
                g = g * self.inter_segment_offsets[s - 1];
            }
            let rod_mid = Vector3::new(T::zero(), T::zero(), -seg.dims.rod_length / two);
            let rod_end = Vector3::new(T::zero(), T::zero(), -seg.dims.rod_length);
            particles[3 * s] = MassParticle {
                mass: self.link_masses[s][0],
                position: g.translation,
                joints_before: 4 * s,
            };
            let mut g_inner = g;
            for j in 0..2 {
                let idx = s * JOINTS_PER_SEGMENT + j;
                g_inner = g_inner * exp_twist_unchecked(&seg.twists[j], theta[idx]);
            }
            particles[3 * s + 1] = MassParticle {
                mass: self.link_masses[s][1],
                position: g_inner.act(&rod_mid),
                joints_before: 4 * s + 2,
            };
            for j in 2..4 {
                let idx = s * JOINTS_PER_SEGMENT + j;
                g_inner = g_inner * exp_twist_unchecked(&seg.twists[j], theta[idx]);
            }
            particles[3 * s + 2] = MassParticle {
                mass: self.link_masses[s][2],
                position: g_inner.act(&rod_end),
                joints_before: 4 * s + 4,
            };
            g = g_inner * seg.rest_tool_pose;
        }
        particles
    }

    /// U-joint `u` (0..6, base to tip) with axes and center expressed in the
    /// parent link's at-rest frame.
    pub fn ujoint(&self, u: usize) -> UJointAxes<T> {
        let seg = &self.segments[u / 2];
        let mut uj = seg.ujoint(u % 2);
        if u % 2 == 1 {
            // Parent of the lower U-joint is the rod; its at-rest frame sits
            // at the lower U-joint center, so the center is the local origin.
            uj.center = Vector3::zeros();
        }
        uj
    }
}

fn position_jacobian_from_twists<T: Real>(
    cols: &[Twist<T>; 12],
    tool: &Vector3<T>,
) -> SMatrix<T, 3, 12> {
    let mut j = SMatrix::<T, 3, 12>::zeros();
    for (i, xi) in cols.iter().enumerate() {
        let col = xi.linear + xi.angular.cross(tool);
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&col);
    }
    j
}

/// Per-joint angle limits, radians.
#[derive(Debug, Clone)]
pub struct JointLimits<T: Real> {
    pub lower: JointVector<T>,
    pub upper: JointVector<T>,
}

impl<T: Real> JointLimits<T> {
    /// Symmetric limits of +-`magnitude` on all 12 joints.
    pub fn symmetric(magnitude: T) -> Self {
        JointLimits {
            lower: JointVector::repeat(-magnitude),
            upper: JointVector::repeat(magnitude),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for i in 0..JOINT_COUNT {
            if self.lower[i] >= self.upper[i] {
                return Err(GeometryError::BadLimits { joint: i });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, theta: &JointVector<T>) -> JointVector<T> {
        let mut out = *theta;
        for i in 0..JOINT_COUNT {
            out[i] = out[i].clamp(self.lower[i], self.upper[i]);
        }
        out
    }

    pub fn contains(&self, theta: &JointVector<T>, slack: T) -> bool {
        (0..JOINT_COUNT)
            .all(|i| theta[i] >= self.lower[i] - slack && theta[i] <= self.upper[i] + slack)
    }

    pub fn midpoint(&self, i: usize) -> T {
        (self.lower[i] + self.upper[i]) / real::<T>(2.0)
    }

    pub fn range(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    /// Magnitude of the limit in the direction of `theta_target` for joint i.
    pub fn bound_toward(&self, i: usize, theta_target: T) -> T {
        if theta_target >= T::zero() {
            self.upper[i]
        } else {
            -self.lower[i]
        }
    }
}

/// A U-joint described by its two perpendicular unit axes and shared center,
/// in the parent link's at-rest frame.
#[derive(Debug, Clone, Copy)]
pub struct UJointAxes<T: Real> {
    pub axis_a: Vector3<T>,
    pub axis_b: Vector3<T>,
    pub center: Vector3<T>,
}

/// Recover the two U-joint angles from the parent and child rigid-body
/// frames (e.g. motion-capture bodies whose origins sit at the U-joint
/// center at rest).
///
/// The relative rotation is factored as a rotation about `axis_a` followed by
/// one about `axis_b`. Both angles are restricted to (-pi/2, pi/2); a
/// relative pose the two axes cannot reproduce within `tol` (such as any
/// z-axis rotation content, which the U-joint blocks) is an error carrying
/// the residual.
pub fn joint_angles_from_frames<T: Real>(
    parent: &Pose<T>,
    child: &Pose<T>,
    ujoint: &UJointAxes<T>,
    tol: T,
) -> Result<(T, T), ExtractionError> {
    let a = &ujoint.axis_a;
    let b = &ujoint.axis_b;
    for axis in [a, b] {
        let norm = to_f64(axis.norm());
        if (norm - 1.0).abs() > construction_tol::<T>() {
            return Err(ExtractionError::BadAxes(SpatialError::NonUnitAxis { norm }));
        }
    }
    let dot = to_f64(a.dot(b));
    if dot.abs() > construction_tol::<T>() {
        return Err(ExtractionError::BadAxes(SpatialError::NotOrthonormal {
            defect: dot.abs(),
        }));
    }

    let rel = parent.inverse() * *child;
    let r_rel = rel.rotation;

    // Change of basis sending axis_a -> x, axis_b -> y; in that basis the
    // factorization is Rx(theta_a) * Ry(theta_b).
    let basis = Matrix3::from_columns(&[*a, *b, a.cross(b)]);
    let rc = basis.transpose() * r_rel.matrix() * basis;

    let one = T::one();
    let sb = rc[(0, 2)].clamp(-one, one);
    let theta_b = sb.asin();
    let theta_a = (-rc[(1, 2)]).atan2(rc[(2, 2)]);

    let half_pi = T::pi() / real::<T>(2.0);
    let margin = real::<T>(1e-9);
    if theta_a.abs() >= half_pi - margin || theta_b.abs() >= half_pi - margin {
        return Err(ExtractionError::GimbalDegenerate {
            theta_a: to_f64(theta_a),
            theta_b: to_f64(theta_b),
        });
    }

    let fit = Rotation::from_unit_axis_angle(a, theta_a)
        * Rotation::from_unit_axis_angle(b, theta_b);
    let rotation_residual = fit.angle_to(&r_rel);
    // Rotation about axes through the center fixes the center, so the
    // relative translation must equal q - R q.
    let expected_t = ujoint.center - r_rel * ujoint.center;
    let translation_residual = (rel.translation - expected_t).norm();
    if rotation_residual > tol || translation_residual > tol {
        return Err(ExtractionError::Unreachable {
            rotation_residual: to_f64(rotation_residual),
            translation_residual: to_f64(translation_residual),
        });
    }
    Ok((theta_a, theta_b))
}
