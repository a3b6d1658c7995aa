use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::{forward_kinematics, JointVector, KinematicsError, RobotModel, TaskTarget};
use crate::geom::{any_orthogonal, Transform, Vec3};

/// Meters per radian when ranking iterates by a combined position/axis error.
pub const AXIS_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkConfig {
    pub pos_tol: f64,
    pub axis_tol: f64,
    pub damping: f64,
    pub max_iters: usize,
    pub step_cap: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        IkConfig {
            pos_tol: 1e-3,
            axis_tol: 2e-3,
            damping: 0.05,
            max_iters: 300,
            step_cap: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResult {
    pub success: bool,
    /// Best iterate (the solution when `success`).
    pub q: JointVector,
    pub position_error: f64,
    pub axis_error: f64,
    pub iterations: usize,
}

// Iterations without improving the best iterate before giving up.
const STALL_ITERS: usize = 40;

/// Damped-least-squares IK on a 5-row task: 3 position rows and the two
/// tool-frame angular rows that tilt the tool z axis. The yaw row is dropped,
/// leaving rotation about the approach axis free.
pub fn solve_ik(
    model: &RobotModel,
    base: &Transform,
    target: &TaskTarget,
    seed_q: &[f64],
    cfg: &IkConfig,
) -> Result<IkResult, KinematicsError> {
    if seed_q.len() != model.dof() {
        return Err(KinematicsError::LengthMismatch {
            expected: model.dof(),
            got: seed_q.len(),
        });
    }
    for (i, (j, &v)) in model.joints.iter().zip(seed_q).enumerate() {
        if !(v >= j.limits[0] && v <= j.limits[1]) {
            return Err(KinematicsError::SeedOutOfLimits {
                joint: i,
                value: v,
                lo: j.limits[0],
                hi: j.limits[1],
            });
        }
    }

    let goal = base.inverse_transform_point(&target.position.into()).coords;
    let goal_axis = base.inverse_transform_vector(&target.approach_axis).normalize();
    let n = model.dof();
    let lambda2 = cfg.damping * cfg.damping;

    let mut q = seed_q.to_vec();
    let mut best: Option<(f64, IkResult)> = None;
    let mut since_best = 0;
    let mut lin = vec![Vec3::zeros(); n];
    let mut ang = vec![Vec3::zeros(); n];

    for iter in 0..=cfg.max_iters {
        let frames = forward_kinematics(model, &q)?;
        let p = frames.tool.translation.vector;
        let rot = frames.tool.rotation;
        let axis = rot * Vec3::z();
        let e_pos = goal - p;
        let pos_err = e_pos.norm();
        let cross = axis.cross(&goal_axis);
        let axis_err = cross.norm().atan2(axis.dot(&goal_axis));

        let score = pos_err + AXIS_WEIGHT * axis_err;
        if best.as_ref().is_none_or(|(s, _)| score < *s - 1e-15) {
            let improved_enough = best.as_ref().is_none_or(|(s, _)| score < *s * (1.0 - 1e-9));
            best = Some((
                score,
                IkResult {
                    success: false,
                    q: JointVector(q.clone()),
                    position_error: pos_err,
                    axis_error: axis_err,
                    iterations: iter,
                },
            ));
            if improved_enough {
                since_best = 0;
            }
        } else {
            since_best += 1;
        }

        if pos_err <= cfg.pos_tol && axis_err <= cfg.axis_tol {
            return Ok(IkResult {
                success: true,
                q: JointVector(q),
                position_error: pos_err,
                axis_error: axis_err,
                iterations: iter,
            });
        }
        if iter == cfg.max_iters || since_best >= STALL_ITERS {
            break;
        }

        // Rotation vector taking the tool axis onto the goal axis.
        let omega = if cross.norm() > 1e-12 {
            cross.normalize() * axis_err
        } else if axis_err > 1.0 {
            any_orthogonal(&axis) * axis_err
        } else {
            Vec3::zeros()
        };
        let omega_tool = rot.inverse_transform_vector(&omega);
        let e = Vector5::new(e_pos.x, e_pos.y, e_pos.z, omega_tool.x, omega_tool.y);

        for i in 0..n {
            let jf = &frames.joints[i];
            let z = jf.rotation * model.joints[i].axis;
            lin[i] = z.cross(&(p - jf.translation.vector));
            ang[i] = rot.inverse_transform_vector(&z);
        }
        let col = |i: usize| Vector5::new(lin[i].x, lin[i].y, lin[i].z, ang[i].x, ang[i].y);
        // Joints sitting on a limit and pushed further are frozen and the
        // step re-solved without them.
        let mut active = vec![true; n];
        let mut dq = vec![0.0; n];
        loop {
            let mut jjt = Matrix5::identity() * lambda2;
            for i in (0..n).filter(|&i| active[i]) {
                let c = col(i);
                jjt += c * c.transpose();
            }
            let Some(chol) = jjt.cholesky() else { break };
            let y = chol.solve(&e);
            for i in 0..n {
                dq[i] = if active[i] { col(i).dot(&y) } else { 0.0 };
            }
            let mut changed = false;
            for i in 0..n {
                let [lo, hi] = model.joints[i].limits;
                if active[i] && ((q[i] <= lo && dq[i] < 0.0) || (q[i] >= hi && dq[i] > 0.0)) {
                    active[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let max_step = dq.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if max_step < 1e-12 {
            break;
        }
        if max_step > cfg.step_cap {
            let s = cfg.step_cap / max_step;
            dq.iter_mut().for_each(|d| *d *= s);
        }
        for (v, d) in q.iter_mut().zip(&dq) {
            *v += d;
        }
        model.clamp(&mut q);
    }

    Ok(best.expect("at least one iterate").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{generic6r, planar2};

    #[test]
    fn seed_pose_succeeds_immediately() {
        let m = generic6r();
        let q = vec![0.3, 0.4, 0.9, 0.5, -0.2, 0.7];
        let f = forward_kinematics(&m, &q).unwrap();
        let t = TaskTarget::new(f.tool.translation.vector, f.tool.rotation * Vec3::z(), "z").unwrap();
        let r = solve_ik(&m, &Transform::identity(), &t, &q, &IkConfig::default()).unwrap();
        assert!(r.success);
        assert!(r.iterations <= 1);
        assert!(r.position_error < 1e-12);
    }

    #[test]
    fn out_of_reach_reports_shortfall() {
        let m = planar2();
        let t = TaskTarget::new(Vec3::new(2.0, 0.0, 0.0), Vec3::z(), "z").unwrap();
        let r = solve_ik(&m, &Transform::identity(), &t, &[0.4, 0.6], &IkConfig::default()).unwrap();
        assert!(!r.success);
        assert!((r.position_error - 1.0).abs() < 5e-3, "{}", r.position_error);
    }

    #[test]
    fn seed_outside_limits_rejected() {
        let m = planar2();
        let t = TaskTarget::new(Vec3::new(0.5, 0.0, 0.0), Vec3::z(), "z").unwrap();
        assert!(matches!(
            solve_ik(&m, &Transform::identity(), &t, &[4.0, 0.0], &IkConfig::default()),
            Err(KinematicsError::SeedOutOfLimits { joint: 0, .. })
        ));
    }
}
