//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use basecamp_core::annotate::ConvexHull;
use basecamp_core::geom::Vec3;
use basecamp_core::registry::Point2;

pub const W: f64 = 0.5;

/// Naive incremental hull: add points one at a time, delete visible faces,
/// patch the horizon. No conflict lists, no ordering tricks.
pub fn naive_hull(points: &[Vec3]) -> (Vec<[usize; 3]>, f64) {
    let n = points.len();
    let (a, b) = (0, 1);
    let c = (2..n)
        .max_by(|&i, &j| {
            let ai = (points[b] - points[a]).cross(&(points[i] - points[a])).norm();
            let aj = (points[b] - points[a]).cross(&(points[j] - points[a])).norm();
            ai.total_cmp(&aj)
        })
        .unwrap();
    let normal = (points[b] - points[a]).cross(&(points[c] - points[a]));
    let d = (0..n)
        .max_by(|&i, &j| normal.dot(&(points[i] - points[a])).abs().total_cmp(&normal.dot(&(points[j] - points[a])).abs()))
        .unwrap();
    let interior = (points[a] + points[b] + points[c] + points[d]) / 4.0;
    let orient = |f: [usize; 3]| {
        let nrm = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
        if nrm.dot(&(points[f[0]] - interior)) < 0.0 {
            [f[0], f[2], f[1]]
        } else {
            f
        }
    };
    let mut faces: Vec<[usize; 3]> = [[a, b, c], [a, b, d], [a, c, d], [b, c, d]].into_iter().map(orient).collect();
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let eps = 1e-12 * scale;
    for p in 0..n {
        if [a, b, c, d].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| {
                let nrm = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]])).normalize();
                nrm.dot(&(points[p] - points[f[0]])) > eps
            })
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut horizon = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            if !visible[fi] {
                continue;
            }
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let shared_visible = faces.iter().enumerate().any(|(gi, g)| {
                    gi != fi && visible[gi] && [(g[0], g[1]), (g[1], g[2]), (g[2], g[0])].contains(&(e.1, e.0))
                });
                if !shared_visible {
                    horizon.push(e);
                }
            }
        }
        let mut kept: Vec<[usize; 3]> = faces.iter().zip(&visible).filter(|(_, &v)| !v).map(|(f, _)| *f).collect();
        kept.extend(horizon.into_iter().map(|(u, v)| [u, v, p]));
        faces = kept;
    }
    let volume = faces
        .iter()
        .map(|f| points[f[0]].dot(&points[f[1]].cross(&points[f[2]])) / 6.0)
        .sum();
    (faces, volume)
}

pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn point_hull_distance(hull: &ConvexHull, p: &Vec3) -> f64 {
    if hull.signed_distance(p) <= 0.0 {
        return 0.0;
    }
    hull.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| hull.vertices[i]);
            (p - closest_on_triangle(p, &a, &b, &c)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Capsule-to-hull distance: axis sampled every millimetre, then the best
/// bracket refined by ternary search (distance to a convex set is convex
/// along a segment).
pub fn capsule_hull_distance(a: &Vec3, b: &Vec3, r: f64, hull: &ConvexHull) -> f64 {
    let len = (b - a).norm();
    let n = ((len / 1e-3).ceil() as usize).max(1);
    let at = |s: f64| point_hull_distance(hull, &(a + (b - a) * s));
    let (best, _) = (0..=n)
        .map(|k| (k, at(k as f64 / n as f64)))
        .fold((0, f64::INFINITY), |m, (k, d)| if d < m.1 { (k, d) } else { m });
    let (mut lo, mut hi) = (best.saturating_sub(1) as f64 / n as f64, ((best + 1).min(n)) as f64 / n as f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) < at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at((lo + hi) / 2.0) - r
}

/// Negated six-hump camel, scaled so [-3, 3] x [-2, 2] maps onto [-W, W]^2.
pub fn camel(p: Point2) -> f64 {
    let x = 3.0 * p[0] / W;
    let y = 2.0 * p[1] / W;
    -((4.0 - 2.1 * x * x + x.powi(4) / 3.0) * x * x + x * y + (-4.0 + 4.0 * y * y) * y * y)
}

/// Maximum over an n x n grid spanning [-W, W]^2.
pub fn grid_max(f: impl Fn(Point2) -> f64, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let u = -W + 2.0 * W * i as f64 / (n - 1) as f64;
            let v = -W + 2.0 * W * j as f64 / (n - 1) as f64;
            best = best.max(f([u, v]));
        }
    }
    best
}
