//! Rotations, poses and similarity transforms.
//!
//! Conventions used throughout the crate:
//!
//! * A [`Pose`] rotation maps camera-frame vectors into the world frame, so a
//!   world point `p` has camera coordinates `Rᵀ (p − C)`.
//! * The photogrammetric camera frame has x right, y down and z along the
//!   optical axis.
//! * The world frame is local ENU (x east, y north, z up).
//! * Aircraft body axes are x forward, y right, z down, and navigation angles
//!   follow the aerospace z-y-x (yaw, pitch, roll) sequence relative to NED.

use std::f64::consts::FRAC_PI_2;
use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

/// Points, translations and directions.
pub type Vec3 = Vector3<f64>;

/// Orthonormality tolerance accepted by [`RotationMatrix::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-10;

/// Distance from ±π/2 of the middle Euler angle below which the extraction is
/// declared gimbal locked.
pub const GIMBAL_LOCK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(
        "matrix is not a proper rotation (orthonormality error {orthonormality:e}, det {det})"
    )]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("pose time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
    #[error("similarity scale must be strictly positive, got {0}")]
    InvalidScale(f64),
}

/// A proper 3×3 rotation (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and determinant within [`ROTATION_TOLERANCE`].
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let orthonormality = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(orthonormality <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(GeometryError::NotARotation {
                orthonormality,
                det,
            });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller knows to be a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Row-major construction, validated.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    /// Closest rotation in the Frobenius sense (SVD projection onto SO(3)).
    pub fn nearest(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self(u * d * v_t)
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation of `|v|` radians about `v / |v|`.
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Self(*Rotation3::from_scaled_axis(v).matrix())
    }

    /// Inverse of [`from_scaled_axis`](Self::from_scaled_axis); the angle lies in `[0, π]`.
    pub fn scaled_axis(&self) -> Vec3 {
        let angle = self.angle();
        if angle < 1e-6 {
            // sin θ ≈ θ: the skew part already is the scaled axis.
            return skew_part(&self.0);
        }
        if std::f64::consts::PI - angle < 1e-6 {
            return Rotation3::from_matrix_unchecked(self.0).scaled_axis();
        }
        skew_part(&self.0) * (angle / angle.sin())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)]))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Rotation angle in `[0, π]`, accurate near zero.
    pub fn angle(&self) -> f64 {
        let sin_part = skew_part(&self.0).norm();
        let cos_part = (self.0.trace() - 1.0) / 2.0;
        sin_part.atan2(cos_part)
    }

    /// Angle of the relative rotation `selfᵀ · other`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        (self.transpose() * *other).angle()
    }

    /// Geodesic interpolation: `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn slerp(&self, other: &Self, t: f64) -> Self {
        let relative = self.transpose() * *other;
        *self * Self::from_scaled_axis(relative.scaled_axis() * t)
    }

    /// Orthonormality and determinant errors, for diagnostics.
    pub fn defect(&self) -> (f64, f64) {
        (
            (self.0.transpose() * self.0 - Matrix3::identity())
                .abs()
                .max(),
            (self.0.determinant() - 1.0).abs(),
        )
    }
}

fn skew_part(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) * 0.5
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Photogrammetric attitude angles (ω, ϕ, κ), radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhotoAngles {
    pub omega: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl PhotoAngles {
    pub fn new(omega: f64, phi: f64, kappa: f64) -> Self {
        Self { omega, phi, kappa }
    }
}

/// Aircraft navigation angles, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NavAngles {
    /// θ, nose up positive.
    pub pitch: f64,
    /// φ, right wing down positive.
    pub roll: f64,
    /// ψ, heading clockwise from north.
    pub yaw: f64,
}

impl NavAngles {
    pub fn new(pitch: f64, roll: f64, yaw: f64) -> Self {
        Self { pitch, roll, yaw }
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.pitch.to_degrees(),
            self.roll.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }
}

/// Result of an Euler extraction. When `gimbal_lock` is set the last angle of
/// the sequence was forced to zero and the first absorbs the whole rotation
/// about the degenerate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction<A> {
    pub angles: A,
    pub gimbal_lock: bool,
}

/// `Rx(ω)·Ry(ϕ)·Rz(κ)`.
///
/// Expanded, with `c·`/`s·` for cosine/sine:
///
/// ```text
/// | cϕcκ              −cϕsκ              sϕ    |
/// | cωsκ + sωsϕcκ     cωcκ − sωsϕsκ     −sωcϕ  |
/// | sωsκ − cωsϕcκ     sωcκ + cωsϕsκ      cωcϕ  |
/// ```
pub fn rot_from_photo(a: PhotoAngles) -> RotationMatrix {
    let (so, co) = a.omega.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let (sk, ck) = a.kappa.sin_cos();
    RotationMatrix(Matrix3::new(
        cp * ck,
        -cp * sk,
        sp,
        co * sk + so * sp * ck,
        co * ck - so * sp * sk,
        -so * cp,
        so * sk - co * sp * ck,
        so * ck + co * sp * sk,
        co * cp,
    ))
}

/// Inverse of [`rot_from_photo`], with ϕ in `[−π/2, π/2]`.
pub fn photo_from_rot(r: &RotationMatrix) -> Extraction<PhotoAngles> {
    let m = r.matrix();
    let cos_phi = m[(0, 0)].hypot(m[(0, 1)]);
    let phi = m[(0, 2)].atan2(cos_phi);
    if FRAC_PI_2 - phi.abs() < GIMBAL_LOCK_TOLERANCE {
        // Row 1 reduces to [sin(κ ± ω), cos(κ ± ω), 0]; with κ = 0 it carries ω.
        let omega = if phi > 0.0 {
            m[(1, 0)].atan2(m[(1, 1)])
        } else {
            (-m[(1, 0)]).atan2(m[(1, 1)])
        };
        return Extraction {
            angles: PhotoAngles::new(omega, phi, 0.0),
            gimbal_lock: true,
        };
    }
    Extraction {
        angles: PhotoAngles::new(
            (-m[(1, 2)]).atan2(m[(2, 2)]),
            phi,
            (-m[(0, 1)]).atan2(m[(0, 0)]),
        ),
        gimbal_lock: false,
    }
}

/// Body-to-NED attitude `Rz(ψ)·Ry(θ)·Rx(φ)`.
pub fn rot_from_nav(a: NavAngles) -> RotationMatrix {
    RotationMatrix::about_z(a.yaw)
        * RotationMatrix::about_y(a.pitch)
        * RotationMatrix::about_x(a.roll)
}

/// z-y-x extraction of a body-to-NED attitude.
pub fn nav_from_rot(r: &RotationMatrix) -> Extraction<NavAngles> {
    let m = r.matrix();
    let cos_pitch = m[(0, 0)].hypot(m[(1, 0)]);
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if FRAC_PI_2 - pitch.abs() < GIMBAL_LOCK_TOLERANCE {
        // Roll folded into yaw; row 1 holds [0, cos(ψ ∓ φ), ...] either way.
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return Extraction {
            angles: NavAngles::new(pitch, 0.0, yaw),
            gimbal_lock: true,
        };
    }
    Extraction {
        angles: NavAngles::new(
            pitch,
            m[(2, 1)].atan2(m[(2, 2)]),
            m[(1, 0)].atan2(m[(0, 0)]),
        ),
        gimbal_lock: false,
    }
}

/// Fixed basis changes between the photogrammetric and navigation frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavConvention {
    /// Maps world-frame vectors to the navigation (NED) frame.
    pub world_to_nav: Matrix3<f64>,
    /// Maps camera-frame vectors to aircraft body axes for a camera aligned
    /// with the airframe (optical axis forward, image x toward the right wing).
    pub camera_to_body: Matrix3<f64>,
}

impl Default for NavConvention {
    fn default() -> Self {
        Self {
            // ENU -> NED
            world_to_nav: Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0),
            // camera (right, down, forward) -> body (forward, right, down)
            camera_to_body: Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        }
    }
}

impl NavConvention {
    /// Body-to-NED attitude of the aircraft carrying a camera with world
    /// attitude `camera_to_world`. `boresight` is the camera mounting
    /// rotation expressed in body axes (identity for an aligned camera).
    pub fn body_attitude(
        &self,
        camera_to_world: &RotationMatrix,
        boresight: &RotationMatrix,
    ) -> RotationMatrix {
        // camera -> body is boresight · camera_to_body, so
        // body -> NED = world_to_nav · camera_to_world · (boresight · camera_to_body)ᵀ
        RotationMatrix(
            self.world_to_nav
                * camera_to_world.matrix()
                * self.camera_to_body.transpose()
                * boresight.matrix().transpose(),
        )
    }

    /// Camera-to-world rotation producing the given body attitude.
    pub fn camera_rotation(
        &self,
        body_to_nav: &RotationMatrix,
        boresight: &RotationMatrix,
    ) -> RotationMatrix {
        RotationMatrix(
            self.world_to_nav.transpose()
                * body_to_nav.matrix()
                * boresight.matrix()
                * self.camera_to_body,
        )
    }

    /// Camera-to-world rotation of a level, north-facing aligned camera.
    pub fn level_camera_rotation(&self) -> RotationMatrix {
        RotationMatrix(self.world_to_nav.transpose() * self.camera_to_body)
    }
}

/// Navigation angles of the aircraft carrying the camera of `pose`, using the
/// default ENU/NED convention.
pub fn nav_from_pose(pose: &Pose, boresight: &RotationMatrix) -> Extraction<NavAngles> {
    nav_from_pose_with(pose, boresight, &NavConvention::default())
}

pub fn nav_from_pose_with(
    pose: &Pose,
    boresight: &RotationMatrix,
    convention: &NavConvention,
) -> Extraction<NavAngles> {
    nav_from_rot(&convention.body_attitude(&pose.rotation, boresight))
}

/// Camera exterior orientation at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Camera-to-world rotation.
    pub rotation: RotationMatrix,
    /// Projection center, world frame, meters.
    pub center: Vec3,
    /// Seconds since the start of the video.
    pub time: f64,
}

impl Pose {
    pub fn new(rotation: RotationMatrix, center: Vec3, time: f64) -> Result<Self, GeometryError> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(GeometryError::InvalidTime(time));
        }
        Ok(Self {
            rotation,
            center,
            time,
        })
    }

    /// Camera-frame coordinates of a world point.
    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.rotation.matrix().tr_mul(&(world - self.center))
    }

    pub fn to_world(&self, camera: &Vec3) -> Vec3 {
        self.rotation * *camera + self.center
    }

    /// The pose of the world frame seen from the camera, i.e. the inverse
    /// rigid transform (used to swap object and camera roles).
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            center: -(rt * self.center),
            time: self.time,
        }
    }
}

/// `p ↦ scale·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity7 {
    pub scale: f64,
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl Similarity7 {
    pub fn new(
        scale: f64,
        rotation: RotationMatrix,
        translation: Vec3,
    ) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: RotationMatrix::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * *p * self.scale + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Similarity7) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.apply_point(&other.translation),
        }
    }
}

/// Moves a pose by a similarity; the time is untouched.
pub fn apply_similarity(s: &Similarity7, p: &Pose) -> Pose {
    Pose {
        rotation: s.rotation * p.rotation,
        center: s.apply_point(&p.center),
        time: p.time,
    }
}
