//! Superquadric geometry kernel.
//!
//! A primitive is described by 11 numbers: per-axis scale `a`, the two shape
//! exponents `ε1, ε2`, a translation and an intrinsic X-Y-Z Euler rotation in
//! radians. Its local-to-world pose is `M = T·R·S`, so the local frame used by
//! [`SuperquadricParams::implicit_local`] is the unit-scaled canonical frame.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};

pub type Vec3 = Vector3<f64>;

pub const SHAPE_MIN: f64 = 0.1;
pub const SHAPE_MAX: f64 = 1.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SqError {
    #[error("scale component {axis} must be positive, got {value}")]
    NonPositiveScale { axis: usize, value: f64 },
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Rotation matrix for intrinsic X-Y-Z Euler angles: `R = Rx(rx)·Ry(ry)·Rz(rz)`.
pub fn euler_xyz_to_matrix(r: [f64; 3]) -> Matrix3<f64> {
    let (sa, ca) = r[0].sin_cos();
    let (sb, cb) = r[1].sin_cos();
    let (sc, cc) = r[2].sin_cos();
    Matrix3::new(
        cb * cc,
        -cb * sc,
        sb,
        ca * sc + sa * sb * cc,
        ca * cc - sa * sb * sc,
        -sa * cb,
        sa * sc - ca * sb * cc,
        sa * cc + ca * sb * sc,
        ca * cb,
    )
}

/// Inverse of [`euler_xyz_to_matrix`] for a proper rotation matrix. At gimbal
/// lock (`|R[0,2]| ≈ 1`) the z angle is set to zero.
pub fn matrix_to_euler_xyz(m: &Matrix3<f64>) -> [f64; 3] {
    let sb = m[(0, 2)].clamp(-1.0, 1.0);
    let b = sb.asin();
    if sb.abs() < 1.0 - 1e-12 {
        let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
        let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
        [wrap_angle(a), wrap_angle(b), wrap_angle(c)]
    } else {
        let a = m[(2, 1)].atan2(m[(1, 1)]);
        [wrap_angle(a), b, 0.0]
    }
}

/// Homogeneous 3D transform. Row-major when exported as 16 numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub Matrix4<f64>);

impl Mat4 {
    pub fn identity() -> Self {
        Mat4(Matrix4::identity())
    }

    pub fn translation(t: Vec3) -> Self {
        Mat4(Matrix4::new_translation(&t))
    }

    pub fn from_row_major(v: [f64; 16]) -> Self {
        Mat4(Matrix4::from_row_slice(&v))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Option<Mat4> {
        self.0.try_inverse().map(Mat4)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)] * p.z + m[(0, 3)],
            m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)] * p.z + m[(1, 3)],
            m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] * p.z + m[(2, 3)],
        )
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        (self.0 - other.0).abs().max()
    }

    pub fn is_affine(&self) -> bool {
        let m = &self.0;
        m[(3, 0)] == 0.0 && m[(3, 1)] == 0.0 && m[(3, 2)] == 0.0 && m[(3, 3)] == 1.0
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        Mat4(self.0 * rhs.0)
    }
}

/// The 11 parameters of one superquadric primitive.
///
/// Construction validates and normalizes: scale must be positive, shape
/// exponents are clamped to `[0.1, 1.9]` and angles wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperquadricParams {
    scale: [f64; 3],
    shape: [f64; 2],
    translation: [f64; 3],
    rotation: [f64; 3],
}

impl Default for SuperquadricParams {
    fn default() -> Self {
        Self::unit_sphere()
    }
}

impl fmt::Display for SuperquadricParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={:?} eps={:?} t={:?} r={:?}",
            self.scale, self.shape, self.translation, self.rotation
        )
    }
}

impl SuperquadricParams {
    pub fn new(
        scale: [f64; 3],
        shape: [f64; 2],
        translation: [f64; 3],
        rotation: [f64; 3],
    ) -> Result<Self, SqError> {
        let finite = |name, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(SqError::NonFinite { name })
            }
        };
        finite("scale", &scale)?;
        finite("shape", &shape)?;
        finite("translation", &translation)?;
        finite("rotation", &rotation)?;
        for (axis, &value) in scale.iter().enumerate() {
            if value <= 0.0 {
                return Err(SqError::NonPositiveScale { axis, value });
            }
        }
        Ok(SuperquadricParams {
            scale,
            shape: shape.map(|e| e.clamp(SHAPE_MIN, SHAPE_MAX)),
            translation,
            rotation: rotation.map(wrap_angle),
        })
    }

    /// Parameter order: `a1 a2 a3 ε1 ε2 tx ty tz rx ry rz`.
    pub fn from_array(v: [f64; 11]) -> Result<Self, SqError> {
        Self::new(
            [v[0], v[1], v[2]],
            [v[3], v[4]],
            [v[5], v[6], v[7]],
            [v[8], v[9], v[10]],
        )
    }

    pub fn to_array(&self) -> [f64; 11] {
        let [a1, a2, a3] = self.scale;
        let [e1, e2] = self.shape;
        let [tx, ty, tz] = self.translation;
        let [rx, ry, rz] = self.rotation;
        [a1, a2, a3, e1, e2, tx, ty, tz, rx, ry, rz]
    }

    pub fn unit_sphere() -> Self {
        SuperquadricParams {
            scale: [1.0; 3],
            shape: [1.0; 2],
            translation: [0.0; 3],
            rotation: [0.0; 3],
        }
    }

    /// Sphere of the given radius and center.
    pub fn sphere(radius: f64, center: [f64; 3]) -> Result<Self, SqError> {
        Self::new([radius; 3], [1.0, 1.0], center, [0.0; 3])
    }

    pub fn scale(&self) -> [f64; 3] {
        self.scale
    }
    pub fn shape(&self) -> [f64; 2] {
        self.shape
    }
    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }
    pub fn rotation(&self) -> [f64; 3] {
        self.rotation
    }
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn with_scale(self, scale: [f64; 3]) -> Result<Self, SqError> {
        Self::new(scale, self.shape, self.translation, self.rotation)
    }
    pub fn with_shape(self, shape: [f64; 2]) -> Result<Self, SqError> {
        Self::new(self.scale, shape, self.translation, self.rotation)
    }
    pub fn with_translation(self, translation: [f64; 3]) -> Result<Self, SqError> {
        Self::new(self.scale, self.shape, translation, self.rotation)
    }
    pub fn with_rotation(self, rotation: [f64; 3]) -> Result<Self, SqError> {
        Self::new(self.scale, self.shape, self.translation, rotation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        euler_xyz_to_matrix(self.rotation)
    }

    /// Local-to-world pose `T·R·S`.
    pub fn pose_matrix(&self) -> Mat4 {
        let rs = self.rotation_matrix() * Matrix3::from_diagonal(&Vec3::from(self.scale));
        let mut m = rs.to_homogeneous();
        m[(0, 3)] = self.translation[0];
        m[(1, 3)] = self.translation[1];
        m[(2, 3)] = self.translation[2];
        Mat4(m)
    }

    /// Closed-form inverse of [`pose_matrix`](Self::pose_matrix): `S⁻¹·Rᵀ·T⁻¹`.
    pub fn pose_inverse(&self) -> Mat4 {
        let inv_s = Matrix3::from_diagonal(&Vec3::from(self.scale.map(|a| 1.0 / a)));
        let lin = inv_s * self.rotation_matrix().transpose();
        let t = lin * self.center();
        let mut m = lin.to_homogeneous();
        m[(0, 3)] = -t.x;
        m[(1, 3)] = -t.y;
        m[(2, 3)] = -t.z;
        Mat4(m)
    }

    /// Precomputes the world-to-local map for repeated evaluation.
    pub fn prepare(&self) -> PreparedSq {
        PreparedSq {
            rot_t: self.rotation_matrix().transpose(),
            center: self.center(),
            inv_scale: Vec3::from(self.scale.map(|a| 1.0 / a)),
            shape: self.shape,
        }
    }

    /// World point to the unit-scaled local frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.prepare().to_local(p)
    }

    /// Inside-outside function evaluated in the unit-scaled local frame.
    pub fn implicit_local(&self, u: &Vec3) -> f64 {
        implicit_unit(self.shape, u)
    }

    /// Below 1 inside, 1 on the surface, above 1 outside.
    pub fn implicit_value(&self, p: &Vec3) -> f64 {
        self.prepare().implicit_value(p)
    }

    /// Surface points count as inside.
    pub fn inside(&self, p: &Vec3) -> bool {
        self.implicit_value(p) <= 1.0
    }

    /// Radial gap `|r0|·|1 − F^(−ε1/2)|` along the ray from the center
    /// through `p`. Zero for `p` at the center.
    pub fn radial_distance(&self, p: &Vec3) -> f64 {
        let r0 = (p - self.center()).norm();
        if r0 == 0.0 {
            return 0.0;
        }
        let f = self.implicit_value(p);
        r0 * (1.0 - f.powf(-self.shape[0] / 2.0)).abs()
    }

    /// `n` deterministic surface points from the signed-power parametric
    /// form, laid out on a Fibonacci spiral in (η, ω).
    pub fn sample_surface(&self, n: usize) -> Vec<Vec3> {
        let [e1, e2] = self.shape;
        let golden = PI * (3.0 - 5f64.sqrt());
        let pose = self.pose_matrix();
        (0..n)
            .map(|i| {
                let s = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                let eta = s.clamp(-1.0, 1.0).asin();
                let omega = (i as f64 * golden).rem_euclid(2.0 * PI) - PI;
                let (se, ce) = eta.sin_cos();
                let (so, co) = omega.sin_cos();
                let local = Vec3::new(
                    signed_pow(ce, e1) * signed_pow(co, e2),
                    signed_pow(ce, e1) * signed_pow(so, e2),
                    signed_pow(se, e1),
                );
                pose.transform_point(&local)
            })
            .collect()
    }
}

/// A primitive with its world-to-local transform cached. Evaluates exactly
/// like the [`SuperquadricParams`] methods it was prepared from.
#[derive(Debug, Clone, Copy)]
pub struct PreparedSq {
    rot_t: Matrix3<f64>,
    center: Vec3,
    inv_scale: Vec3,
    shape: [f64; 2],
}

impl PreparedSq {
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        (self.rot_t * (p - self.center)).component_mul(&self.inv_scale)
    }

    pub fn implicit_value(&self, p: &Vec3) -> f64 {
        implicit_unit(self.shape, &self.to_local(p))
    }

    pub fn inside(&self, p: &Vec3) -> bool {
        self.implicit_value(p) <= 1.0
    }
}

fn implicit_unit(shape: [f64; 2], u: &Vec3) -> f64 {
    let [e1, e2] = shape;
    let xy = abs_pow(u.x, 2.0 / e2) + abs_pow(u.y, 2.0 / e2);
    abs_pow(xy, e2 / e1) + abs_pow(u.z, 2.0 / e1)
}

/// `|x|^k` with `0^k := 0`.
fn abs_pow(x: f64, k: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(k)
    }
}

fn signed_pow(x: f64, k: f64) -> f64 {
    x.signum() * abs_pow(x, k)
}
