//! Spray annotation: turning brush strokes over a cloud into interaction
//! zones (green), avoidance hulls (red) and the search-space plane.

mod document;
mod hull;

pub use document::{derive_annotations, Annotations, DerivedGeometry, ANNOTATIONS_VERSION};
pub use hull::{quickhull, ConvexHull, RANK_TOL};

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloudio::{filter_outliers, PointCloud, DEFAULT_K, DEFAULT_STD_RATIO};
use crate::geom::{quat_serde, Quat, Transform, Vec3};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("zone '{id}': only {count} points left after filtering, need at least 4; spray more of the surface")]
    InsufficientSpray { id: String, count: usize },
    #[error("{}degenerate geometry (rank {rank}): {reason}; spray more of the surface", .id.as_ref().map(|i| format!("region '{i}': ")).unwrap_or_default())]
    Degenerate {
        id: Option<String>,
        rank: usize,
        reason: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),
}

impl AnnotateError {
    /// The zone or region the error refers to, if any.
    pub fn subject(&self) -> Option<&str> {
        match self {
            AnnotateError::InsufficientSpray { id, .. } => Some(id),
            AnnotateError::Degenerate { id, .. } => id.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SprayLabel {
    Interact,
    Avoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpraySample {
    pub origin: Vec3,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprayStroke {
    pub label: SprayLabel,
    pub zone_id: String,
    pub radius: f64,
    pub samples: Vec<SpraySample>,
    /// Task approach direction; required on at least one stroke of each interaction zone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_dir: Option<Vec3>,
}

impl SprayStroke {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(AnnotateError::InvalidInput(format!(
                "stroke '{}': radius must be > 0",
                self.zone_id
            )));
        }
        for s in &self.samples {
            if (s.direction.norm() - 1.0).abs() > 1e-9 || !s.origin.iter().all(|c| c.is_finite()) {
                return Err(AnnotateError::InvalidInput(format!(
                    "stroke '{}': sample directions must be unit vectors",
                    self.zone_id
                )));
            }
        }
        Ok(())
    }
}

/// Brush depth past the first contact, in radii.
pub const BRUSH_DEPTH_RADII: f64 = 2.0;

fn sample_select(cloud: &PointCloud, sample: &SpraySample, radius: f64, out: &mut Vec<usize>) {
    let d = sample.direction;
    let contact = cloud
        .points
        .iter()
        .filter_map(|p| {
            let rel = p - sample.origin;
            let t = rel.dot(&d);
            (t >= 0.0 && (rel - d * t).norm() <= radius).then_some(t)
        })
        .min_by(f64::total_cmp);
    let Some(contact) = contact else { return };
    let depth = contact + BRUSH_DEPTH_RADII * radius;
    for (i, p) in cloud.points.iter().enumerate() {
        let rel = p - sample.origin;
        let t = rel.dot(&d).clamp(0.0, depth);
        if (rel - d * t).norm() <= radius {
            out.push(i);
        }
    }
}

/// Points inside the capsule brush of any sample: radius around the view
/// ray, from the sample origin to two radii past the first cloud contact.
/// Sorted ascending, no duplicates.
pub fn spray_select(cloud: &PointCloud, stroke: &SprayStroke) -> Vec<usize> {
    let mut out = Vec::new();
    for s in &stroke.samples {
        sample_select(cloud, s, stroke.radius, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionZone {
    pub zone_id: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    #[serde(with = "quat_serde")]
    pub orientation: Quat,
    pub corners: [Vec3; 8],
    pub approach_dir: Vec3,
}

impl InteractionZone {
    /// Corner `i` has sign bit 0 for x, bit 1 for y and bit 2 for z (set = +).
    pub fn box_corners(center: &Vec3, half: &Vec3, orientation: &Quat) -> [Vec3; 8] {
        std::array::from_fn(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            center + orientation * Vec3::new(s(0) * half.x, s(1) * half.y, s(2) * half.z)
        })
    }

    pub fn new(zone_id: impl Into<String>, center: Vec3, half_extents: Vec3, orientation: Quat, approach_dir: Vec3) -> Result<Self, AnnotateError> {
        let zone_id = zone_id.into();
        if half_extents.iter().any(|h| !(*h >= 0.0)) {
            return Err(AnnotateError::InvalidInput(format!("zone '{zone_id}': negative extent")));
        }
        let n = approach_dir.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(AnnotateError::InvalidInput(format!(
                "zone '{zone_id}': approach direction must be non-zero"
            )));
        }
        Ok(InteractionZone {
            corners: Self::box_corners(&center, &half_extents, &orientation),
            zone_id,
            center,
            half_extents,
            orientation,
            approach_dir: approach_dir / n,
        })
    }

    /// Box-local coordinates of `p`.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(p - self.center))
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i] + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceRegion {
    pub region_id: String,
    pub hull: ConvexHull,
}

/// Filter parameters used when deriving zones and regions from sprays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub k: usize,
    pub std_ratio: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            k: DEFAULT_K,
            std_ratio: DEFAULT_STD_RATIO,
        }
    }
}

/// Filters the sprayed points, then fits the tightest box whose axes are the
/// given frame's axes (normally the search-space plane frame).
pub fn make_interaction_zone(
    cloud: &PointCloud,
    indices: &[usize],
    approach_dir: Vec3,
    zone_id: &str,
    frame: &Quat,
    filter: FilterParams,
) -> Result<InteractionZone, AnnotateError> {
    let selected = cloud.select(indices);
    let kept = filter_outliers(&selected, filter.k, filter.std_ratio).cloud;
    if kept.len() < 4 {
        return Err(AnnotateError::InsufficientSpray {
            id: zone_id.to_string(),
            count: kept.len(),
        });
    }
    let local: Vec<Vec3> = kept
        .points
        .iter()
        .map(|p| frame.inverse_transform_vector(p))
        .collect();
    let (lo, hi) = local
        .iter()
        .fold((local[0], local[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let center = frame * ((lo + hi) / 2.0);
    InteractionZone::new(zone_id, center, (hi - lo) / 2.0, *frame, approach_dir)
}

pub fn make_avoidance_region(
    cloud: &PointCloud,
    indices: &[usize],
    region_id: &str,
    filter: FilterParams,
) -> Result<AvoidanceRegion, AnnotateError> {
    let selected = cloud.select(indices);
    let kept = filter_outliers(&selected, filter.k, filter.std_ratio).cloud;
    let hull = quickhull(&kept.points).map_err(|e| match e {
        AnnotateError::Degenerate { rank, reason, .. } => AnnotateError::Degenerate {
            id: Some(region_id.to_string()),
            rank,
            reason,
        },
        other => other,
    })?;
    Ok(AvoidanceRegion {
        region_id: region_id.to_string(),
        hull,
    })
}

/// Admissible base positions: a rectangle of half extents (Wx, Wy) in the
/// plane through `center` whose normal is the frame's z axis. The center is
/// the workcell origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub center: Vec3,
    #[serde(with = "quat_serde")]
    pub orientation: Quat,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.half_extent_x) || !ok(self.half_extent_y) {
            return Err(AnnotateError::InvalidSearchSpace(format!(
                "extents must be positive, got Wx={} Wy={}",
                self.half_extent_x, self.half_extent_y
            )));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(AnnotateError::InvalidSearchSpace("center must be finite".into()));
        }
        Ok(())
    }

    /// Plane frame expressed in the world (scan) frame.
    pub fn frame(&self) -> Transform {
        Isometry3::from_parts(self.center.into(), self.orientation)
    }

    pub fn normal(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extent_x * self.half_extent_y
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(-self.half_extent_x, self.half_extent_x),
            y.clamp(-self.half_extent_y, self.half_extent_y),
        )
    }
}

pub fn define_search_space(center: Vec3, orientation: Quat, wx: f64, wy: f64) -> Result<SearchSpace, AnnotateError> {
    let s = SearchSpace {
        center,
        orientation,
        half_extent_x: wx,
        half_extent_y: wy,
    };
    s.validate()?;
    Ok(s)
}

/// Geometry that can be moved by a rigid transform.
pub trait RigidTransformable: Sized {
    fn transformed(&self, iso: &Transform) -> Self;
}

impl RigidTransformable for PointCloud {
    fn transformed(&self, iso: &Transform) -> Self {
        PointCloud {
            points: self.points.iter().map(|p| iso.transform_point(&(*p).into()).coords).collect(),
            colors: self.colors.clone(),
            frame_id: self.frame_id.clone(),
        }
    }
}

impl RigidTransformable for ConvexHull {
    fn transformed(&self, iso: &Transform) -> Self {
        ConvexHull {
            vertices: self.vertices.iter().map(|p| iso.transform_point(&(*p).into()).coords).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

impl RigidTransformable for AvoidanceRegion {
    fn transformed(&self, iso: &Transform) -> Self {
        AvoidanceRegion {
            region_id: self.region_id.clone(),
            hull: self.hull.transformed(iso),
        }
    }
}

impl RigidTransformable for InteractionZone {
    fn transformed(&self, iso: &Transform) -> Self {
        let p = |v: &Vec3| iso.transform_point(&(*v).into()).coords;
        InteractionZone {
            zone_id: self.zone_id.clone(),
            center: p(&self.center),
            half_extents: self.half_extents,
            orientation: iso.rotation * self.orientation,
            corners: self.corners.map(|c| p(&c)),
            approach_dir: iso.rotation * self.approach_dir,
        }
    }
}

/// Re-expresses world-frame geometry in the search-space plane frame.
pub fn to_workcell_frame<T: RigidTransformable>(entity: &T, space: &SearchSpace) -> T {
    entity.transformed(&space.frame().inverse())
}

/// Inverse of [`to_workcell_frame`].
pub fn from_workcell_frame<T: RigidTransformable>(entity: &T, space: &SearchSpace) -> T {
    entity.transformed(&space.frame())
}
