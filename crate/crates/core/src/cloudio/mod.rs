//! Point clouds: data model, ASCII PLY I/O, cropping, statistical outlier
//! removal and a ray-casting scan simulator standing in for a handheld LiDAR.

mod filter;
mod ply;
mod scan;

pub use filter::{filter_outliers, FilterOutcome, DEFAULT_K, DEFAULT_STD_RATIO};
pub use ply::{load_cloud, parse_ply, save_cloud, write_ply};
pub use scan::{
    count_frames, frame_rays, simulate_scan, CameraTrajectory, MeshScene, ScanConfig, ScanOutput,
    Triangle,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{is_finite_vec, quat_serde, Quat, Vec3};

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid cloud: {0}")]
    Invalid(String),
    #[error("invalid scan input: {0}")]
    Scan(String),
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub colors: Option<Vec<Rgb>>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, colors: Option<Vec<Rgb>>, frame_id: impl Into<String>) -> Result<Self, CloudError> {
        let cloud = PointCloud {
            points,
            colors,
            frame_id: frame_id.into(),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn from_points(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            colors: None,
            frame_id: "workcell".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if let Some(colors) = &self.colors {
            if colors.len() != self.points.len() {
                return Err(CloudError::Invalid(format!(
                    "{} colors for {} points",
                    colors.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(i) = self.points.iter().position(|p| !is_finite_vec(p)) {
            return Err(CloudError::Invalid(format!("point {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud with the given indices, colors kept in step.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            frame_id: self.frame_id.clone(),
        }
    }

    /// Axis-aligned bounds, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    #[serde(with = "quat_serde")]
    pub orientation: Quat,
}

impl CropBox {
    pub fn new(center: Vec3, half_extents: Vec3, orientation: Quat) -> Result<Self, CloudError> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(CloudError::Invalid(
                "crop box half extents must be positive".into(),
            ));
        }
        Ok(CropBox {
            center,
            half_extents,
            orientation,
        })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.orientation.inverse_transform_vector(&(p - self.center));
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }
}

/// Keeps exactly the points inside the box (boundary inclusive), in order.
pub fn crop_to_box(cloud: &PointCloud, bbox: &CropBox) -> PointCloud {
    let keep: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| bbox.contains(p))
        .map(|(i, _)| i)
        .collect();
    cloud.select(&keep)
}
