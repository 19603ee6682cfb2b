//! Independent chained-frame forward-kinematics oracle.
//!
//! Builds the tool pose joint by joint from homogeneous matrices:
//! each joint contributes `T(q) R(axis, angle) T(-q)` with the rotation
//! obtained through a unit quaternion, and everything is multiplied with a
//! hand-rolled 4x4 product. No twist exponentials, no shared math path with
//! the implementation under test.

use pneumarm::arm::{ArmGeometry, JointVector};
use pneumarm::spatial::Pose;

pub type Mat4 = [[f64; 4]; 4];

pub fn identity4() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for (k, bk) in b.iter().enumerate() {
                acc += a[i][k] * bk[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Rotation matrix about a unit axis via quaternion components.
fn quaternion_rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = (0.5 * angle).sin_cos();
    let (w, x, y, z) = (c, s * axis[0], s * axis[1], s * axis[2]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Homogeneous rotation about an axis through point `q`:
/// rotation block R, translation `q - R q`.
fn joint_transform(axis: [f64; 3], center: [f64; 3], angle: f64) -> Mat4 {
    let r = quaternion_rotation(axis, angle);
    let mut m = identity4();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j];
        }
        m[i][3] = center[i] - (r[i][0] * center[0] + r[i][1] * center[1] + r[i][2] * center[2]);
    }
    m
}

fn pose_to_mat4(pose: &Pose<f64>) -> Mat4 {
    let mut m = identity4();
    let r = pose.rotation.matrix();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[(i, j)];
        }
        m[i][3] = pose.translation[i];
    }
    m
}

/// Chained-frame oracle for the full arm at configuration `theta`.
pub fn robot_fk_oracle(arm: &ArmGeometry<f64>, theta: &JointVector<f64>) -> Mat4 {
    let mut m = identity4();
    for (s, seg) in arm.segments.iter().enumerate() {
        if s > 0 {
            m = mat4_mul(&m, &pose_to_mat4(&arm.inter_segment_offsets[s - 1]));
        }
        for j in 0..4 {
            let axis = seg.joint_axes[j];
            let center = seg.joint_centers[j];
            let h = joint_transform(
                [axis.x, axis.y, axis.z],
                [center.x, center.y, center.z],
                theta[4 * s + j],
            );
            m = mat4_mul(&m, &h);
        }
        m = mat4_mul(&m, &pose_to_mat4(&seg.rest_tool_pose));
    }
    m
}

/// Translation gap between the oracle matrix and a pose, meters.
pub fn position_difference(m: &Mat4, pose: &Pose<f64>) -> f64 {
    let dx = m[0][3] - pose.translation.x;
    let dy = m[1][3] - pose.translation.y;
    let dz = m[2][3] - pose.translation.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Geodesic angle between the oracle rotation and a pose rotation, radians.
pub fn rotation_difference(m: &Mat4, pose: &Pose<f64>) -> f64 {
    let r = pose.rotation.matrix();
    // D = M_rot^T * R
    let mut d = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                acc += m[k][i] * r[(k, j)];
            }
            d[i][j] = acc;
        }
    }
    let trace = d[0][0] + d[1][1] + d[2][2];
    let sx = 0.5 * (d[2][1] - d[1][2]);
    let sy = 0.5 * (d[0][2] - d[2][0]);
    let sz = 0.5 * (d[1][0] - d[0][1]);
    let sin = (sx * sx + sy * sy + sz * sz).sqrt();
    sin.atan2(0.5 * (trace - 1.0))
}
