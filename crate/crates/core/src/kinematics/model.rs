use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::collide::Capsule;
use crate::geom::{Pose, Vec3};

pub const ROBOT_VERSION: u32 = 1;

fn version() -> u32 {
    ROBOT_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    #[default]
    Revolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    /// Rotation axis in the joint frame.
    pub axis: Vec3,
    /// Joint frame relative to the parent link frame.
    pub origin: Pose,
    /// Radians, `[lo, hi]`.
    pub limits: [f64; 2],
    #[serde(rename = "type", default)]
    pub kind: JointType,
}

/// Serial revolute manipulator. Link 0 is the fixed base; link `i` moves
/// with joint `i`, so `link_capsules` has one entry per joint plus one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    #[serde(default = "version")]
    pub v: u32,
    pub name: String,
    pub joints: Vec<Joint>,
    pub link_capsules: Vec<Vec<Capsule>>,
    pub tool_transform: Pose,
    /// Extra link pairs excluded from self-collision (adjacent links always are).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collision_exempt: Vec<[usize; 2]>,
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: String| Err(KinematicsError::InvalidModel(m));
        if self.v != ROBOT_VERSION {
            return bad(format!("unsupported robot schema version {}", self.v));
        }
        if self.joints.len() < 2 {
            return bad("a robot needs at least 2 joints".into());
        }
        for (i, j) in self.joints.iter().enumerate() {
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("joint {i} axis is not unit length"));
            }
            if !(j.limits[0] < j.limits[1]) {
                return bad(format!("joint {i} limits must satisfy lo < hi"));
            }
        }
        if self.link_capsules.len() != self.joints.len() + 1 {
            return bad(format!(
                "expected {} link capsule lists (base + one per joint), found {}",
                self.joints.len() + 1,
                self.link_capsules.len()
            ));
        }
        for caps in &self.link_capsules {
            if caps.iter().any(|c| !(c.radius > 0.0)) {
                return bad("capsule radius must be > 0".into());
            }
        }
        Ok(())
    }

    pub fn is_exempt_pair(&self, a: usize, b: usize) -> bool {
        self.collision_exempt
            .iter()
            .any(|&[x, y]| (x == a && y == b) || (x == b && y == a))
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.limits[0]).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.limits[1]).collect()
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.limits[0], j.limits[1]);
        }
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let model: RobotModel =
            serde_json::from_str(text).map_err(|e| KinematicsError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| KinematicsError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot model serializes")
    }
}

fn revolute(axis: Vec3, origin: Vec3, lo: f64, hi: f64) -> Joint {
    Joint {
        axis,
        origin: Pose::translation(origin.x, origin.y, origin.z),
        limits: [lo, hi],
        kind: JointType::Revolute,
    }
}

/// Two-link planar arm moving in the base xy plane, both joints about z.
/// Link 0 carries a small base sphere so that a fully folded arm self-collides.
pub fn planar_2link(l1: f64, l2: f64) -> RobotModel {
    use std::f64::consts::PI;
    let link = |len: f64| vec![Capsule::new(Vec3::zeros(), Vec3::new(len, 0.0, 0.0), 0.02)];
    RobotModel {
        v: ROBOT_VERSION,
        name: format!("planar2-{l1}-{l2}"),
        joints: vec![
            revolute(Vec3::z(), Vec3::zeros(), -PI, PI),
            revolute(Vec3::z(), Vec3::new(l1, 0.0, 0.0), -PI, PI),
        ],
        link_capsules: vec![vec![Capsule::sphere(Vec3::zeros(), 0.05)], link(l1), link(l2)],
        tool_transform: Pose::translation(l2, 0.0, 0.0),
        collision_exempt: Vec::new(),
    }
}

/// The built-in 0.5 m + 0.5 m planar test arm.
pub fn planar2() -> RobotModel {
    let mut m = planar_2link(0.5, 0.5);
    m.name = "planar2".into();
    m
}

/// Generic desk-scale 6R arm: base yaw, shoulder and elbow pitch, then a
/// pitch-roll-pitch wrist. Zero configuration points straight up; the tool
/// z axis is the approach axis.
pub fn generic6r() -> RobotModel {
    use std::f64::consts::PI;
    let z = |a: f64, b: f64, r: f64| Capsule::new(Vec3::new(0.0, 0.0, a), Vec3::new(0.0, 0.0, b), r);
    RobotModel {
        v: ROBOT_VERSION,
        name: "generic6r".into(),
        joints: vec![
            revolute(Vec3::z(), Vec3::new(0.0, 0.0, 0.10), -PI, PI),
            revolute(Vec3::y(), Vec3::new(0.0, 0.0, 0.05), -2.0, 2.0),
            revolute(Vec3::y(), Vec3::new(0.0, 0.0, 0.40), -2.6, 2.6),
            revolute(Vec3::y(), Vec3::new(0.0, 0.0, 0.35), -2.0, 2.0),
            revolute(Vec3::z(), Vec3::new(0.0, 0.0, 0.10), -PI, PI),
            revolute(Vec3::y(), Vec3::new(0.0, 0.0, 0.06), -2.0, 2.0),
        ],
        link_capsules: vec![
            vec![z(0.0, 0.06, 0.06)],
            vec![z(-0.02, 0.03, 0.05)],
            vec![z(0.06, 0.34, 0.04)],
            vec![z(0.06, 0.30, 0.035)],
            vec![z(0.03, 0.08, 0.035)],
            vec![],
            vec![z(0.03, 0.10, 0.03)],
        ],
        tool_transform: Pose::translation(0.0, 0.0, 0.12),
        collision_exempt: Vec::new(),
    }
}
