//! Geometric primitives in the earth-fixed NED frame (z down).
//!
//! Vectors and matrices are `nalgebra` fixed-size types; the rotation helpers
//! (skew maps, Rodrigues rotations, scalar-first unit quaternions and the
//! shortest-path axis-angle error) live here.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Tolerance on `‖axis‖ − 1` accepted by [`rodrigues`].
pub const AXIS_NORM_TOL: f64 = 1e-6;

/// Column-orthonormality residual accepted by [`UnitQuat::from_rotation`].
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Below this rotation angle the axis-angle extraction switches to a series.
pub const SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeomError {
    #[error("rotation axis is not unit length (norm {norm})")]
    NonUnitAxis { norm: f64 },
    #[error("matrix is not a proper rotation (residual {residual:e})")]
    NonOrthonormal { residual: f64 },
}

/// Gravity vector `[0, 0, g]` in NED.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, GRAVITY)
}

/// `[v]×`, so that `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation by `angle` about the unit vector `axis`.
pub fn rodrigues(axis: &Vec3, angle: f64) -> Result<Mat3, GeomError> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOL {
        return Err(GeomError::NonUnitAxis { norm });
    }
    let a = axis / norm;
    let (s, c) = angle.sin_cos();
    Ok(Mat3::identity() * c + (a * a.transpose()) * (1.0 - c) + skew(&a) * s)
}

/// Frobenius norm of `RᵀR − I`.
pub fn orthonormality_residual(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

/// True when `r` is orthonormal to `tol` and has positive determinant.
pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    orthonormality_residual(r) <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Gram-Schmidt re-orthonormalization: keeps the direction of the first
/// column, the plane of the first two, and rebuilds the third as their cross
/// product.
pub fn orthonormalize(r: &Mat3) -> Mat3 {
    let x = r.column(0).normalize();
    let y0 = r.column(1).into_owned();
    let y = (y0 - x * x.dot(&y0)).normalize();
    let z = x.cross(&y);
    Mat3::from_columns(&[x, y, z])
}

/// Wrap an angle into `[-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..=PI).contains(&angle) {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI && angle > 0.0 {
        PI
    } else {
        wrapped
    }
}

/// Scalar-first unit quaternion. `q` and `-q` encode the same rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuat {
    pub const fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Builds a quaternion from raw components, normalizing them.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let a = axis.normalize();
        let (s, c) = (0.5 * angle).sin_cos();
        Self { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conj(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn neg(&self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    /// Active rotation matrix of this quaternion.
    pub fn to_rotation(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Shepperd's method; the result has a non-negative scalar part.
    pub fn from_rotation(r: &Mat3) -> Result<Self, GeomError> {
        let residual = orthonormality_residual(r);
        if !(residual <= ORTHONORMAL_TOL) || r.determinant() <= 0.0 {
            return Err(GeomError::NonOrthonormal { residual });
        }
        let trace = r.trace();
        let q = if trace > r[(0, 0)] && trace > r[(1, 1)] && trace > r[(2, 2)] {
            let s = 2.0 * (1.0 + trace).sqrt();
            Self {
                w: 0.25 * s,
                x: (r[(2, 1)] - r[(1, 2)]) / s,
                y: (r[(0, 2)] - r[(2, 0)]) / s,
                z: (r[(1, 0)] - r[(0, 1)]) / s,
            }
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            Self {
                w: (r[(2, 1)] - r[(1, 2)]) / s,
                x: 0.25 * s,
                y: (r[(0, 1)] + r[(1, 0)]) / s,
                z: (r[(0, 2)] + r[(2, 0)]) / s,
            }
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
            Self {
                w: (r[(0, 2)] - r[(2, 0)]) / s,
                x: (r[(0, 1)] + r[(1, 0)]) / s,
                y: 0.25 * s,
                z: (r[(1, 2)] + r[(2, 1)]) / s,
            }
        } else {
            let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
            Self {
                w: (r[(1, 0)] - r[(0, 1)]) / s,
                x: (r[(0, 2)] + r[(2, 0)]) / s,
                y: (r[(1, 2)] + r[(2, 1)]) / s,
                z: 0.25 * s,
            }
        };
        let q = Self::new(q.w, q.x, q.y, q.z);
        Ok(if q.w < 0.0 { q.neg() } else { q })
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;

    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        self.compose(&rhs)
    }
}

/// Shortest-path axis-angle form of an error quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngleError {
    /// Signed angle in `[-π, π]`; negative when the quaternion is stored the
    /// long way round (`q0 < 0`).
    pub angle: f64,
    /// Rotation vector of the shortest rotation; `‖vector‖ == |angle|`.
    pub vector: Vec3,
}

/// `ϑ = wrap_π(2·acos q0)`, `ξ = sign(q0)·ϑ/sin(ϑ/2)·q_v`.
///
/// Evaluated through `atan2(‖q_v‖, |q0|)` so it stays well conditioned near
/// zero and near π; below [`SMALL_ANGLE`] the ratio uses its series.
pub fn quat_to_axis_angle(q: &UnitQuat) -> AxisAngleError {
    let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
    let qv = q.vector();
    let s = qv.norm();
    let w = q.w.abs();
    let magnitude = 2.0 * s.atan2(w);
    let scale = if magnitude < SMALL_ANGLE {
        // 2·atan(s/w)/s = (2/w)(1 − s²/(3w²) + …)
        (2.0 / w) * (1.0 - s * s / (3.0 * w * w))
    } else {
        magnitude / s
    };
    AxisAngleError { angle: sign * magnitude, vector: qv * (sign * scale) }
}

pub fn quat_to_mat(q: &UnitQuat) -> Mat3 {
    q.to_rotation()
}

pub fn mat_to_quat(r: &Mat3) -> Result<UnitQuat, GeomError> {
    UnitQuat::from_rotation(r)
}

pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    a.compose(b)
}

pub fn quat_conj(q: &UnitQuat) -> UnitQuat {
    q.conj()
}
