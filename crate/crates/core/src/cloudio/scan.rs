use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CloudError, PointCloud};
use crate::geom::{mix_seed, Pose, Vec3};

pub type Triangle = [Vec3; 3];

const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshScene {
    pub triangles: Vec<Triangle>,
}

impl MeshScene {
    pub fn new(triangles: Vec<Triangle>) -> Result<Self, CloudError> {
        let scene = MeshScene { triangles };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        for (i, t) in self.triangles.iter().enumerate() {
            let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(CloudError::Scan(format!("triangle {i} is degenerate (area {area:e})")));
            }
        }
        Ok(())
    }

    /// Two triangles covering the quad `a b c d` (counter-clockwise).
    pub fn push_quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    /// Axis-aligned box surface, 12 triangles.
    pub fn push_box(&mut self, lo: Vec3, hi: Vec3) {
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { hi.x } else { lo.x },
                if y { hi.y } else { lo.y },
                if z { hi.z } else { lo.z },
            )
        };
        let (f, t) = (false, true);
        self.push_quad(v(f, f, f), v(f, t, f), v(t, t, f), v(t, f, f));
        self.push_quad(v(f, f, t), v(t, f, t), v(t, t, t), v(f, t, t));
        self.push_quad(v(f, f, f), v(t, f, f), v(t, f, t), v(f, f, t));
        self.push_quad(v(f, t, f), v(f, t, t), v(t, t, t), v(t, t, f));
        self.push_quad(v(f, f, f), v(f, f, t), v(f, t, t), v(f, t, f));
        self.push_quad(v(t, f, f), v(t, t, f), v(t, t, t), v(t, f, t));
    }

    /// Nearest hit distance along a unit ray, if any.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        self.triangles
            .iter()
            .filter_map(|t| ray_triangle(origin, dir, t))
            .min_by(f64::total_cmp)
    }
}

// Moller-Trumbore.
fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &Triangle) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-12).then_some(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraTrajectory {
    pub poses: Vec<Pose>,
}

impl CameraTrajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self, CloudError> {
        if poses.is_empty() {
            return Err(CloudError::Scan("trajectory has no poses".into()));
        }
        Ok(CameraTrajectory { poses })
    }
}

/// Capture settings. The camera looks along its local +z axis; rays pass
/// through a grid on the virtual image plane at z = 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub grid_size: f64,
    /// Degrees.
    pub rotation_trigger: f64,
    pub translation_trigger: f64,
    pub points_per_frame_cap: usize,
    /// Full field of view in degrees (square frustum).
    pub fov: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            grid_size: 0.0087,
            rotation_trigger: 1.0,
            translation_trigger: 0.01,
            points_per_frame_cap: 2000,
            fov: 60.0,
            max_range: 5.0,
            noise_sigma: 0.0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), CloudError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.grid_size) {
            return Err(CloudError::Scan("grid_size must be > 0".into()));
        }
        if !positive(self.rotation_trigger) || !positive(self.translation_trigger) {
            return Err(CloudError::Scan("frame triggers must be > 0".into()));
        }
        if self.points_per_frame_cap < 1 {
            return Err(CloudError::Scan("points_per_frame_cap must be >= 1".into()));
        }
        if !positive(self.fov) || self.fov >= 180.0 {
            return Err(CloudError::Scan("fov must be in (0, 180) degrees".into()));
        }
        if !positive(self.max_range) || !(self.noise_sigma >= 0.0) {
            return Err(CloudError::Scan("max_range must be > 0 and noise_sigma >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub cloud: PointCloud,
    /// Trajectory indices at which a frame was captured.
    pub frame_poses: Vec<usize>,
}

impl ScanOutput {
    pub fn frames(&self) -> usize {
        self.frame_poses.len()
    }
}

/// Pose indices that trigger a capture: pose 0, then every pose that has
/// rotated or moved past a trigger relative to the last captured pose.
pub fn count_frames(trajectory: &CameraTrajectory, config: &ScanConfig) -> Vec<usize> {
    let mut captured = Vec::new();
    let mut last: Option<&Pose> = None;
    let rot_trigger = config.rotation_trigger.to_radians();
    for (i, pose) in trajectory.poses.iter().enumerate() {
        let fire = match last {
            None => true,
            Some(prev) => {
                prev.orientation.angle_to(&pose.orientation) >= rot_trigger
                    || (pose.position - prev.position).norm() >= config.translation_trigger
            }
        };
        if fire {
            captured.push(i);
            last = Some(pose);
        }
    }
    captured
}

/// Camera-frame unit ray directions for one frame, in (row, column) order.
/// When the field of view holds more grid nodes than the cap, the nodes
/// closest to the optical axis are kept.
pub fn frame_rays(config: &ScanConfig) -> Vec<Vec3> {
    let half = (config.fov.to_radians() / 2.0).tan();
    let m = (half / config.grid_size + 1e-9).floor() as i64;
    let mut nodes: Vec<(i64, i64)> = Vec::with_capacity(((2 * m + 1) * (2 * m + 1)) as usize);
    for row in -m..=m {
        for col in -m..=m {
            nodes.push((row, col));
        }
    }
    if nodes.len() > config.points_per_frame_cap {
        nodes.sort_by_key(|&(r, c)| (r * r + c * c, r, c));
        nodes.truncate(config.points_per_frame_cap);
        nodes.sort();
    }
    nodes
        .into_iter()
        .map(|(r, c)| {
            Vec3::new(c as f64 * config.grid_size, r as f64 * config.grid_size, 1.0).normalize()
        })
        .collect()
}

pub fn simulate_scan(
    scene: &MeshScene,
    trajectory: &CameraTrajectory,
    config: &ScanConfig,
    seed: u64,
) -> Result<ScanOutput, CloudError> {
    config.validate()?;
    scene.validate()?;
    if trajectory.poses.is_empty() {
        return Err(CloudError::Scan("trajectory has no poses".into()));
    }
    let frame_poses = count_frames(trajectory, config);
    let rays = frame_rays(config);

    let per_frame: Vec<Vec<Vec3>> = frame_poses
        .par_iter()
        .enumerate()
        .map(|(frame, &pose_idx)| {
            let pose = &trajectory.poses[pose_idx];
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, frame as u64));
            let noise = (config.noise_sigma > 0.0)
                .then(|| Normal::new(0.0, config.noise_sigma).expect("sigma checked"));
            let mut out = Vec::new();
            for local in &rays {
                let dir = pose.orientation * local;
                if let Some(t) = scene.raycast(&pose.position, &dir) {
                    if t <= config.max_range {
                        let t = match &noise {
                            Some(n) => t + n.sample(&mut rng),
                            None => t,
                        };
                        out.push(pose.position + dir * t);
                    }
                }
            }
            out
        })
        .collect();

    let points: Vec<Vec3> = per_frame.into_iter().flatten().collect();
    Ok(ScanOutput {
        cloud: PointCloud {
            points,
            colors: None,
            frame_id: format!("scan seed={seed}"),
        },
        frame_poses,
    })
}
