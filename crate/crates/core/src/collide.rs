//! Convex collision queries between link capsules, workcell hulls and points.
//!
//! Intersection is decided by GJK on the Minkowski difference, run as a
//! distance query so that shapes closer than a tolerance count as touching.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AvoidanceRegion, ConvexHull};
use crate::geom::{Transform, Vec3};
use crate::kinematics::{forward_kinematics, JointVector, KinematicsError, RobotModel};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const GJK_MAX_ITERATIONS: usize = 64;

#[derive(Debug, Error)]
pub enum CollideError {
    #[error("joint {joint} = {value} outside limits [{lo}, {hi}]")]
    Domain { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub endpoint_a: Vec3,
    pub endpoint_b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(endpoint_a: Vec3, endpoint_b: Vec3, radius: f64) -> Self {
        Capsule {
            endpoint_a,
            endpoint_b,
            radius,
        }
    }

    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Capsule::new(center, center, radius)
    }

    pub fn posed(&self, pose: &Transform) -> ConvexShape<'static> {
        ConvexShape::Capsule {
            a: pose.transform_point(&self.endpoint_a.into()).coords,
            b: pose.transform_point(&self.endpoint_b.into()).coords,
            radius: self.radius,
        }
    }
}

/// A convex shape in world coordinates.
#[derive(Debug, Clone, Copy)]
pub enum ConvexShape<'a> {
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    Hull(&'a ConvexHull),
    Point(Vec3),
}

/// Extreme point of the shape along `direction` (assumed unit). Capsule ties
/// go to endpoint a, hull ties to the lowest vertex index.
pub fn support(shape: &ConvexShape, direction: &Vec3) -> Vec3 {
    match shape {
        ConvexShape::Point(p) => *p,
        ConvexShape::Capsule { a, b, radius } => {
            let end = if b.dot(direction) > a.dot(direction) { b } else { a };
            end + direction * *radius
        }
        ConvexShape::Hull(h) => {
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for (i, v) in h.vertices.iter().enumerate() {
                let d = v.dot(direction);
                if d > best_d {
                    best_d = d;
                    best = i;
                }
            }
            h.vertices[best]
        }
    }
}

fn minkowski_support(a: &ConvexShape, b: &ConvexShape, dir: &Vec3) -> Vec3 {
    support(a, dir) - support(b, &-dir)
}

/// Closest point to the origin on the convex hull of `simplex`, and the
/// smallest sub-simplex that contains it.
fn closest_on_simplex(simplex: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    let m = simplex.len();
    let mut best: Option<(f64, Vec3, u32)> = None;
    for mask in 1u32..(1 << m) {
        let pts: Vec<Vec3> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| simplex[i]).collect();
        let Some(lambda) = affine_projection(&pts) else {
            continue;
        };
        if lambda.iter().any(|&l| l < -1e-12) {
            continue;
        }
        let p: Vec3 = pts.iter().zip(&lambda).map(|(q, l)| q * *l).sum();
        let d = p.norm_squared();
        if best.is_none_or(|(bd, _, bm)| d < bd - 1e-18 || (d <= bd + 1e-18 && mask.count_ones() < bm.count_ones())) {
            best = Some((d, p, mask));
        }
    }
    let (_, p, mask) = best.expect("vertex subsets always project");
    let reduced = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| simplex[i]).collect();
    (p, reduced)
}

/// Barycentric coordinates of the origin's projection onto the affine hull.
fn affine_projection(pts: &[Vec3]) -> Option<Vec<f64>> {
    let p0 = pts[0];
    let k = pts.len() - 1;
    if k == 0 {
        return Some(vec![1.0]);
    }
    let e: Vec<Vec3> = pts[1..].iter().map(|p| p - p0).collect();
    let mut g = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = e[i].dot(&e[j]);
        }
        rhs[i] = -e[i].dot(&p0);
    }
    let scale = g.diagonal().max();
    if g.determinant().abs() <= 1e-20 * scale.powi(k as i32) {
        return None;
    }
    let mu = g.lu().solve(&rhs)?;
    let mut lambda = Vec::with_capacity(k + 1);
    lambda.push(1.0 - mu.sum());
    lambda.extend(mu.iter());
    Some(lambda)
}

/// True iff the two shapes are within `tolerance` of each other. Hitting the
/// iteration cap answers `true`.
pub fn gjk_intersect(a: &ConvexShape, b: &ConvexShape, tolerance: f64) -> bool {
    let mut v = minkowski_support(a, b, &Vec3::x());
    let mut simplex: Vec<Vec3> = Vec::with_capacity(4);
    for _ in 0..GJK_MAX_ITERATIONS {
        let vn = v.norm();
        if vn <= tolerance {
            return true;
        }
        let dir = -v / vn;
        let w = minkowski_support(a, b, &dir);
        // Every point x of A - B satisfies |x| >= v.w / |v|.
        let vw = v.dot(&w);
        if vw / vn > tolerance {
            return false;
        }
        if vn * vn - vw <= 1e-12 * vn * vn || simplex.iter().any(|s| (s - w).norm_squared() < 1e-24) {
            // Converged: |v| is the distance to within round-off.
            return vn <= tolerance;
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        simplex = reduced;
        v = closest;
        if simplex.len() == 4 {
            return true;
        }
    }
    true
}

/// Boundary counts as inside.
pub fn point_in_hull(hull: &ConvexHull, p: &Vec3) -> bool {
    hull.signed_distance(p) <= 1e-12
}

/// Closest distance between segments [p1,q1] and [p2,q2].
pub fn segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-24 && e <= 1e-24 {
        return r.norm();
    }
    if a <= 1e-24 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-24 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-24 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

struct PreparedRegion<'a> {
    hull: &'a ConvexHull,
    center: Vec3,
    radius: f64,
}

/// Avoidance regions with precomputed bounding spheres for fast rejection.
pub struct CollisionScene<'a> {
    regions: Vec<PreparedRegion<'a>>,
    pub tolerance: f64,
}

impl<'a> CollisionScene<'a> {
    pub fn new(regions: &'a [AvoidanceRegion]) -> Self {
        let regions = regions
            .iter()
            .map(|r| {
                let center = r.hull.centroid();
                let radius = r
                    .hull
                    .vertices
                    .iter()
                    .map(|v| (v - center).norm())
                    .fold(0.0, f64::max);
                PreparedRegion {
                    hull: &r.hull,
                    center,
                    radius,
                }
            })
            .collect();
        CollisionScene {
            regions,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    /// World-frame link capsules for configuration `q` (q assumed in limits).
    pub fn posed_capsules(model: &RobotModel, q: &JointVector, base: &Transform) -> Result<Vec<(usize, Vec3, Vec3, f64)>, KinematicsError> {
        let frames = forward_kinematics(model, q)?;
        let mut out = Vec::new();
        for (link, caps) in model.link_capsules.iter().enumerate() {
            let pose = base * frames.links[link];
            for c in caps {
                let a = pose.transform_point(&c.endpoint_a.into()).coords;
                let b = pose.transform_point(&c.endpoint_b.into()).coords;
                out.push((link, a, b, c.radius));
            }
        }
        Ok(out)
    }

    pub fn robot_in_collision(&self, model: &RobotModel, q: &JointVector, base: &Transform) -> Result<bool, CollideError> {
        check_limits(model, q)?;
        let caps = Self::posed_capsules(model, q, base)?;
        let tol = self.tolerance;
        for &(_, a, b, r) in &caps {
            for region in &self.regions {
                let d = point_segment_distance(&region.center, &a, &b);
                if d > region.radius + r + tol {
                    continue;
                }
                let shape = ConvexShape::Capsule { a, b, radius: r };
                if gjk_intersect(&shape, &ConvexShape::Hull(region.hull), tol) {
                    return Ok(true);
                }
            }
        }
        for i in 0..caps.len() {
            for j in (i + 1)..caps.len() {
                let (li, a1, b1, r1) = caps[i];
                let (lj, a2, b2, r2) = caps[j];
                if li.abs_diff(lj) < 2 || model.is_exempt_pair(li, lj) {
                    continue;
                }
                if segment_distance(&a1, &b1, &a2, &b2) <= r1 + r2 + tol {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

pub fn check_limits(model: &RobotModel, q: &JointVector) -> Result<(), CollideError> {
    for (i, (joint, &v)) in model.joints.iter().zip(q.iter()).enumerate() {
        let [lo, hi] = joint.limits;
        if !(v >= lo - 1e-12 && v <= hi + 1e-12) {
            return Err(CollideError::Domain { joint: i, value: v, lo, hi });
        }
    }
    Ok(())
}

/// Link capsules against avoidance hulls, plus self-collision between
/// non-adjacent links.
pub fn robot_in_collision(
    model: &RobotModel,
    q: &JointVector,
    base: &Transform,
    regions: &[AvoidanceRegion],
) -> Result<bool, CollideError> {
    CollisionScene::new(regions).robot_in_collision(model, q, base)
}
