//! Serial-manipulator kinematics: forward kinematics, the geometric
//! Jacobian, damped-least-squares IK with a free tool yaw, and the per-target
//! reach check used by the placement objective.

mod ik;
mod model;
mod reach;

pub use ik::{solve_ik, IkConfig, IkResult, AXIS_WEIGHT};
pub use model::{generic6r, planar2, planar_2link, Joint, JointType, RobotModel, ROBOT_VERSION};
pub use reach::{candidate_solutions, reach_check, reach_check_in, CandidateSet, FailureReason, ReachConfig, ReachOutcome};
pub(crate) use reach::path_clear;

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, Translation3, UnitQuaternion, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Transform, Vec3};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("seed joint {joint} = {value} outside limits [{lo}, {hi}]")]
    SeedOutOfLimits { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(n: usize) -> Self {
        JointVector(vec![0.0; n])
    }
}

impl Deref for JointVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for JointVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        JointVector(v)
    }
}

/// A point the tool must reach with its z axis along `approach_axis`; rotation
/// about that axis is free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTarget {
    pub position: Vec3,
    pub approach_axis: Vec3,
    pub zone_id: String,
}

impl TaskTarget {
    pub fn new(position: Vec3, approach_axis: Vec3, zone_id: impl Into<String>) -> Result<Self, KinematicsError> {
        let n = approach_axis.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(KinematicsError::InvalidTarget("approach axis must be unit length".into()));
        }
        Ok(TaskTarget {
            position,
            approach_axis,
            zone_id: zone_id.into(),
        })
    }
}

/// Link frames in the robot base frame. `links[0]` is the base itself,
/// `joints[i]` is joint i's frame before its rotation is applied.
#[derive(Debug, Clone)]
pub struct Frames {
    pub links: Vec<Transform>,
    pub joints: Vec<Transform>,
    pub tool: Transform,
}

fn check_len(model: &RobotModel, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != model.dof() {
        return Err(KinematicsError::LengthMismatch {
            expected: model.dof(),
            got: q.len(),
        });
    }
    Ok(())
}

pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Frames, KinematicsError> {
    check_len(model, q)?;
    let mut links = Vec::with_capacity(model.dof() + 1);
    let mut joints = Vec::with_capacity(model.dof());
    let mut current = Transform::identity();
    links.push(current);
    for (joint, &angle) in model.joints.iter().zip(q) {
        let joint_frame = current * joint.origin.to_isometry();
        joints.push(joint_frame);
        let rot = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(joint.axis), angle);
        current = joint_frame * Transform::from_parts(Translation3::identity(), rot);
        links.push(current);
    }
    let tool = current * model.tool_transform.to_isometry();
    Ok(Frames { links, joints, tool })
}

/// 6 x n geometric Jacobian of the tool origin in the base frame, linear rows
/// first.
pub fn jacobian(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>, KinematicsError> {
    let frames = forward_kinematics(model, q)?;
    Ok(jacobian_from_frames(model, &frames))
}

pub fn jacobian_from_frames(model: &RobotModel, frames: &Frames) -> DMatrix<f64> {
    let p_tool = frames.tool.translation.vector;
    let mut j = DMatrix::zeros(6, model.dof());
    for (i, (joint, frame)) in model.joints.iter().zip(&frames.joints).enumerate() {
        let z = frame.rotation * joint.axis;
        let lin = z.cross(&(p_tool - frame.translation.vector));
        for r in 0..3 {
            j[(r, i)] = lin[r];
            j[(r + 3, i)] = z[r];
        }
    }
    j
}
