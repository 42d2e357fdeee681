//! Rigid-body transforms.
//!
//! A [`Pose`] is a unit quaternion plus a translation in millimetres. Every
//! frame relationship in the system (arm flange, snake base, interface
//! frames, stylus) is a `Pose`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: UnitQuaternion<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: T, y: T, z: T) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: UnitQuaternion<T>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle` about the z axis.
    pub fn rot_z(angle: T) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    /// `self ∘ other`: the pose of frame `other` (given relative to `self`)
    /// expressed in the frame `self` is relative to.
    pub fn compose(&self, other: &Self) -> Self {
        let mut rotation = self.rotation * other.rotation;
        rotation.renormalize();
        Self {
            rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn transform_point(&self, point: &Vector3<T>) -> Vector3<T> {
        self.rotation * point + self.translation
    }

    /// Euclidean distance between the two origins.
    pub fn position_distance(&self, other: &Self) -> T {
        (self.translation - other.translation).norm()
    }

    /// Angle of the relative rotation between the two frames, in radians.
    pub fn rotation_distance(&self, other: &Self) -> T {
        self.rotation.angle_to(&other.rotation)
    }

    /// Error twist from `self` to `target`: translation difference followed by
    /// the axis-angle vector of `R_target · R_selfᵀ`, both in the base frame.
    pub fn error_twist(&self, target: &Self) -> Vector6<T> {
        let dp = target.translation - self.translation;
        let dr = rotation_vector(&(target.rotation * self.rotation.inverse()));
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }

    /// `[w, x, y, z]` of the rotation quaternion.
    pub fn quaternion_wxyz(&self) -> [T; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn from_wxyz(wxyz: [T; 4], translation: [T; 3]) -> Self {
        let rotation = unit_from_wxyz(wxyz).unwrap_or_else(|_| {
            UnitQuaternion::from_quaternion(Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]))
        });
        Self::new(rotation, Vector3::new(translation[0], translation[1], translation[2]))
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.quaternion_wxyz().iter().all(|v| v.is_finite())
    }
}

/// Axis-angle vector of a rotation, with the angle in `[0, π]`.
pub fn rotation_vector<T: Real>(rotation: &UnitQuaternion<T>) -> Vector3<T> {
    rotation.scaled_axis()
}

/// Scales the angle of `rotation` about its own axis.
pub fn scale_rotation<T: Real>(rotation: &UnitQuaternion<T>, factor: T) -> UnitQuaternion<T> {
    UnitQuaternion::from_scaled_axis(rotation.scaled_axis() * factor)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr<T> {
    position: [T; 3],
    orientation: [T; 4],
}

impl<T: Real + Serialize> Serialize for Pose<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: [self.translation.x, self.translation.y, self.translation.z],
            orientation: self.quaternion_wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Pose<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::<T>::deserialize(deserializer)?;
        let rotation = unit_from_wxyz(repr.orientation).map_err(serde::de::Error::custom)?;
        Ok(Pose::new(rotation, Vector3::from(repr.position)))
    }
}

/// Quaternions that are already unit to within rounding keep their exact
/// components, so serialised poses read back bit-identical.
fn unit_from_wxyz<T: Real>(wxyz: [T; 4]) -> Result<UnitQuaternion<T>, &'static str> {
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    let norm = q.norm();
    if !norm.is_finite() || norm < crate::real::lit(1e-9) {
        return Err("orientation quaternion has zero norm");
    }
    if (norm - T::one()).abs() <= T::default_epsilon() * crate::real::lit(16.0) {
        Ok(UnitQuaternion::new_unchecked(q))
    } else {
        Ok(UnitQuaternion::from_quaternion(q))
    }
}

/// Serde adapter writing a rotation as `[w, x, y, z]`, for use with
/// `#[serde(with = "wxyz")]`.
pub mod wxyz {
    use super::*;

    pub fn serialize<T: Real + Serialize, S: Serializer>(q: &UnitQuaternion<T>, serializer: S) -> Result<S::Ok, S::Error> {
        let q = q.quaternion();
        [q.w, q.i, q.j, q.k].serialize(serializer)
    }

    pub fn deserialize<'de, T: Real + Deserialize<'de>, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<UnitQuaternion<T>, D::Error> {
        let wxyz = <[T; 4]>::deserialize(deserializer)?;
        unit_from_wxyz(wxyz).map_err(serde::de::Error::custom)
    }
}
