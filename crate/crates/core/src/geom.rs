//! Rigid-transform helpers and the JSON encodings shared by every file format.

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;
pub type Transform = Isometry3<f64>;

/// Quaternion as it appears on disk: `{"w":..,"x":..,"y":..,"z":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuatRepr {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<&Quat> for QuatRepr {
    fn from(q: &Quat) -> Self {
        let q = q.quaternion();
        QuatRepr {
            w: q.w,
            x: q.i,
            y: q.j,
            z: q.k,
        }
    }
}

impl QuatRepr {
    /// Normalizes on the way in; a zero quaternion falls back to identity.
    pub fn to_unit(self) -> Quat {
        let q = Quaternion::new(self.w, self.x, self.y, self.z);
        if q.norm() < 1e-12 {
            Quat::identity()
        } else {
            UnitQuaternion::from_quaternion(q)
        }
    }
}

pub mod quat_serde {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Quat, s: S) -> Result<S::Ok, S::Error> {
        QuatRepr::from(q).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Quat, D::Error> {
        let raw = QuatRepr::deserialize(d)?;
        let norm = (raw.w * raw.w + raw.x * raw.x + raw.y * raw.y + raw.z * raw.z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(serde::de::Error::custom("quaternion must be finite and non-zero"));
        }
        Ok(raw.to_unit())
    }
}

/// Position + orientation, the on-disk form of a rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    #[serde(with = "quat_serde")]
    pub orientation: Quat,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vec3::zeros(),
            orientation: Quat::identity(),
        }
    }

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Vec3::new(x, y, z), Quat::identity())
    }

    pub fn to_isometry(&self) -> Transform {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Transform) -> Self {
        Pose::new(iso.translation.vector, iso.rotation)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

/// SplitMix64 finalizer; derives independent per-item seeds from a run seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn is_finite_vec(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Any unit vector orthogonal to `v` (deterministic).
pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let axis = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&axis).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_json_uses_named_quaternion_fields() {
        let p = Pose::new(
            Vec3::new(1.0, 2.0, 3.0),
            Quat::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
        );
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"w\""));
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert!((back.position - p.position).norm() < 1e-15);
        assert!(back.orientation.angle_to(&p.orientation) < 1e-12);
    }

    #[test]
    fn zero_quaternion_rejected() {
        let r: Result<Pose, _> = serde_json::from_str(
            r#"{"position":[0,0,0],"orientation":{"w":0,"x":0,"y":0,"z":0}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn mix_seed_spreads_neighbors() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
    }
}
