//! Quickhull for 3-D point sets, producing outward-wound triangles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AnnotateError;
use crate::geom::Vec3;

/// Affine-rank tolerance in meters.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexHull {
    pub vertices: Vec<Vec3>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

impl ConvexHull {
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len().max(1) as f64
    }

    pub fn volume(&self) -> f64 {
        let o = self.centroid();
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a] - o,
                    self.vertices[b] - o,
                    self.vertices[c] - o,
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Largest signed distance to any face plane; <= 0 means inside or on.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let n = self.face_normal(t);
                n.dot(&(p - self.vertices[self.triangles[t][0]]))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn edge_count(&self) -> usize {
        self.triangles.len() * 3 / 2
    }

    /// Closed-manifold, Euler and outward-winding checks.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *edges.entry((u, v)).or_default() += 1;
            }
        }
        for (&(u, v), &count) in &edges {
            if count != 1 || edges.get(&(v, u)) != Some(&1) {
                return Err(format!("edge ({u}, {v}) is not shared by exactly two faces"));
            }
        }
        let (v, e, f) = (
            self.vertices.len() as i64,
            (edges.len() / 2) as i64,
            self.triangles.len() as i64,
        );
        if v - e + f != 2 {
            return Err(format!("Euler characteristic {} != 2", v - e + f));
        }
        let c = self.centroid();
        for t in 0..self.triangles.len() {
            let [a, b, cc] = self.triangles[t];
            let fc = (self.vertices[a] + self.vertices[b] + self.vertices[cc]) / 3.0;
            if self.face_normal(t).dot(&(fc - c)) <= 0.0 {
                return Err(format!("face {t} points inward"));
            }
        }
        Ok(())
    }
}

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Face {
        let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
        let normal = (b - a).cross(&(c - a)).normalize();
        Face {
            v,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

fn line_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    (p - a).cross(&(b - a)).norm() / (b - a).norm()
}

fn farthest<F: Fn(&Vec3) -> f64>(points: &[Vec3], f: F) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, f(p)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

pub fn quickhull(points: &[Vec3]) -> Result<ConvexHull, AnnotateError> {
    let degenerate = |rank: usize, reason: &str| AnnotateError::Degenerate {
        id: None,
        rank,
        reason: reason.to_string(),
    };
    if points.len() < 4 {
        return Err(degenerate(
            points.len().saturating_sub(1).min(3),
            "fewer than 4 points",
        ));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(AnnotateError::InvalidInput("non-finite point".into()));
    }

    // Initial simplex from extreme points.
    let (i0, _) = farthest(points, |p| -p.x);
    let (i1, d1) = farthest(points, |p| (p - points[i0]).norm());
    if d1 <= RANK_TOL {
        return Err(degenerate(0, "all points coincide"));
    }
    let (i2, d2) = farthest(points, |p| line_distance(p, &points[i0], &points[i1]));
    if d2 <= RANK_TOL {
        return Err(degenerate(1, "points are collinear"));
    }
    let n0 = (points[i1] - points[i0])
        .cross(&(points[i2] - points[i0]))
        .normalize();
    let (i3, d3) = farthest(points, |p| n0.dot(&(p - points[i0])).abs());
    if d3 <= RANK_TOL {
        return Err(degenerate(2, "points are coplanar"));
    }

    let scale = points
        .iter()
        .map(|p| p.amax())
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale;

    let mut faces: Vec<Face> = Vec::new();
    let simplex = [i0, i1, i2, i3];
    let inner = simplex.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;
    for (a, b, c) in [(i0, i1, i2), (i0, i3, i1), (i0, i2, i3), (i1, i3, i2)] {
        let mut f = Face::new(points, [a, b, c]);
        if f.distance(&inner) > 0.0 {
            f = Face::new(points, [a, c, b]);
        }
        faces.push(f);
    }
    let mut edge_face: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_face.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    let assign = |faces: &mut Vec<Face>, candidates: &[usize], p: usize| {
        let mut best: Option<(usize, f64)> = None;
        for &fi in candidates {
            let d = faces[fi].distance(&points[p]);
            if d > eps && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((fi, d));
            }
        }
        if let Some((fi, _)) = best {
            faces[fi].outside.push(p);
        }
    };

    let initial: Vec<usize> = (0..4).collect();
    for p in 0..points.len() {
        if !simplex.contains(&p) {
            assign(&mut faces, &initial, p);
        }
    }

    while let Some(start) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
        let eye = *faces[start]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[start]
                    .distance(&points[a])
                    .total_cmp(&faces[start].distance(&points[b]))
                    .then(b.cmp(&a))
            })
            .expect("non-empty outside set");
        let eye_p = points[eye];

        // Flood the faces visible from the eye.
        let mut visible = vec![start];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(start, true);
        let mut stack = vec![start];
        while let Some(fi) = stack.pop() {
            let v = faces[fi].v;
            for k in 0..3 {
                let twin = edge_face[&(v[(k + 1) % 3], v[k])];
                if is_visible.contains_key(&twin) {
                    continue;
                }
                let vis = faces[twin].distance(&eye_p) > eps;
                is_visible.insert(twin, vis);
                if vis {
                    visible.push(twin);
                    stack.push(twin);
                }
            }
        }

        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let twin = edge_face[&(b, a)];
                if !is_visible[&twin] {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &fi in &visible {
            faces[fi].alive = false;
            orphans.append(&mut faces[fi].outside);
            let v = faces[fi].v;
            for k in 0..3 {
                edge_face.remove(&(v[k], v[(k + 1) % 3]));
            }
        }

        let mut created = Vec::with_capacity(horizon.len());
        for (a, b) in horizon {
            let fi = faces.len();
            faces.push(Face::new(points, [a, b, eye]));
            for (u, v) in [(a, b), (b, eye), (eye, a)] {
                edge_face.insert((u, v), fi);
            }
            created.push(fi);
        }
        for p in orphans {
            if p != eye {
                assign(&mut faces, &created, p);
            }
        }
    }

    // Reindex: hull vertices sorted by input index.
    let alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = alive.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let mut triangles: Vec<[usize; 3]> = alive
        .iter()
        .map(|f| {
            let t = f.v.map(|i| remap[&i]);
            // Rotate so the smallest index leads; winding is preserved.
            let m = (0..3).min_by_key(|&k| t[k]).unwrap();
            [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();
    Ok(ConvexHull {
        vertices: used.iter().map(|&i| points[i]).collect(),
        triangles,
    })
}
