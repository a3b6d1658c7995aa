//! Synthetic machine-tending cell: a table with a pick area next to a box
//! "machine" whose front wall has a door opening, a chuck inside, and the
//! sliding door parked beside the opening.
//!
//! Geometry is laid out in the mounting-plane frame and shifted by
//! [`PLANE_ORIGIN`] into the scan (world) frame, so the bundle exercises the
//! world to workcell conversion.

use basecamp_core::annotate::{define_search_space, SearchSpace, SprayLabel, SpraySample, SprayStroke};
use basecamp_core::cloudio::{CameraTrajectory, MeshScene};
use basecamp_core::geom::{Pose, Quat, Vec3};

/// Mounting plane center (table top) in the scan frame.
pub const PLANE_ORIGIN: [f64; 3] = [0.25, 0.10, 0.72];
pub const SEARCH_HALF_EXTENT: f64 = 0.4;

pub const PICK_CENTER: [f64; 3] = [-0.3, -0.5, 0.0];
pub const CHUCK_FACE_X: f64 = 0.62;
pub const CHUCK_CENTER: [f64; 3] = [0.62, 0.0, 0.24];

fn origin() -> Vec3 {
    Vec3::from(PLANE_ORIGIN)
}

fn w(x: f64, y: f64, z: f64) -> Vec3 {
    origin() + Vec3::new(x, y, z)
}

fn push_box(scene: &mut MeshScene, lo: [f64; 3], hi: [f64; 3]) {
    scene.push_box(w(lo[0], lo[1], lo[2]), w(hi[0], hi[1], hi[2]));
}

/// The door panel in plane coordinates, `(lo, hi)`.
pub const DOOR_BOX: ([f64; 3], [f64; 3]) = ([0.39, 0.14, 0.08], [0.42, 0.46, 0.42]);

pub fn scene() -> MeshScene {
    let mut s = MeshScene::default();
    // Table.
    push_box(&mut s, [-0.8, -0.8, -0.04], [0.45, 0.5, 0.0]);
    // Machine shell, 2 cm walls; the front wall at x = 0.45 has an opening
    // spanning y in [-0.15, 0.15], z in [0.10, 0.40].
    push_box(&mut s, [0.45, -0.35, -0.04], [0.47, -0.15, 0.56]);
    push_box(&mut s, [0.45, 0.15, -0.04], [0.47, 0.35, 0.56]);
    push_box(&mut s, [0.45, -0.15, -0.04], [0.47, 0.15, 0.10]);
    push_box(&mut s, [0.45, -0.15, 0.40], [0.47, 0.15, 0.56]);
    push_box(&mut s, [0.93, -0.35, -0.04], [0.95, 0.35, 0.56]);
    push_box(&mut s, [0.47, -0.35, -0.04], [0.93, -0.33, 0.56]);
    push_box(&mut s, [0.47, 0.33, -0.04], [0.93, 0.35, 0.56]);
    push_box(&mut s, [0.47, -0.33, 0.54], [0.93, 0.33, 0.56]);
    push_box(&mut s, [0.47, -0.33, -0.04], [0.93, 0.33, -0.02]);
    // Chuck and spindle.
    push_box(&mut s, [CHUCK_FACE_X, -0.06, 0.18], [0.74, 0.06, 0.30]);
    push_box(&mut s, [0.74, -0.03, 0.21], [0.93, 0.03, 0.27]);
    // Door, slid open towards +y.
    push_box(&mut s, DOOR_BOX.0, DOOR_BOX.1);
    s
}

fn look_at(eye: Vec3, focus: Vec3) -> Pose {
    Pose::new(eye, Quat::face_towards(&(focus - eye), &Vec3::z()))
}

/// Three passes: around the pick area, across the machine front and door,
/// then straight through the opening at the chuck.
pub fn trajectory() -> CameraTrajectory {
    let mut poses = Vec::new();
    let pick = w(PICK_CENTER[0], PICK_CENTER[1], PICK_CENTER[2]);
    for k in 0..31 {
        let a = (150.0 + 3.0 * k as f64).to_radians();
        let eye = pick + Vec3::new(0.6 * a.cos(), 0.6 * a.sin(), 0.6);
        poses.push(look_at(eye, pick));
    }
    let door = w(0.40, 0.15, 0.25);
    for k in 0..21 {
        let a = (160.0 + 3.0 * k as f64).to_radians();
        let eye = door + Vec3::new(1.0 * a.cos(), 1.0 * a.sin(), 0.45);
        poses.push(look_at(eye, door));
    }
    let chuck = w(CHUCK_CENTER[0], CHUCK_CENTER[1], CHUCK_CENTER[2]);
    for k in 0..11 {
        let eye = w(-0.3, -0.1 + 0.02 * k as f64, 0.3);
        poses.push(look_at(eye, chuck));
    }
    CameraTrajectory { poses }
}

fn aimed(origin: Vec3, aims: impl IntoIterator<Item = Vec3>) -> Vec<SpraySample> {
    aims.into_iter()
        .map(|a| SpraySample {
            origin,
            direction: (a - origin).normalize(),
        })
        .collect()
}

fn grid(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

pub fn pick_stroke() -> SprayStroke {
    let [px, py, pz] = PICK_CENTER;
    let eye = w(px - 0.2, py, 0.6);
    let aims = grid(6, px - 0.1, px + 0.1).flat_map(move |x| grid(6, py - 0.1, py + 0.1).map(move |y| w(x, y, pz)));
    SprayStroke {
        label: SprayLabel::Interact,
        zone_id: "pick".into(),
        radius: 0.03,
        samples: aimed(eye, aims),
        approach_dir: Some(Vec3::z()),
    }
}

pub fn chuck_stroke() -> SprayStroke {
    let eye = w(0.0, 0.0, 0.24);
    let aims = grid(3, -0.04, 0.04).flat_map(|y| grid(3, 0.20, 0.28).map(move |z| w(CHUCK_FACE_X, y, z)));
    SprayStroke {
        label: SprayLabel::Interact,
        zone_id: "chuck".into(),
        radius: 0.015,
        samples: aimed(eye, aims),
        approach_dir: Some(-Vec3::x()),
    }
}

/// Hits the door's front, top and opening-side faces so the sprayed points
/// span a volume.
pub fn door_stroke() -> SprayStroke {
    let eye = w(0.0, -0.2, 0.7);
    let (lo, hi) = DOOR_BOX;
    let front = grid(4, lo[1] + 0.04, hi[1] - 0.04)
        .flat_map(move |y| grid(4, lo[2] + 0.04, hi[2] - 0.04).map(move |z| w(lo[0], y, z)));
    let top = grid(4, lo[1] + 0.04, hi[1] - 0.04).map(move |y| w(0.405, y, hi[2]));
    let side = grid(4, lo[2] + 0.04, hi[2] - 0.04).map(move |z| w(0.405, lo[1], z));
    SprayStroke {
        label: SprayLabel::Avoid,
        zone_id: "door".into(),
        radius: 0.02,
        samples: aimed(eye, front.chain(top).chain(side)),
        approach_dir: None,
    }
}

pub fn strokes() -> Vec<SprayStroke> {
    vec![pick_stroke(), chuck_stroke(), door_stroke()]
}

pub fn search_space() -> SearchSpace {
    define_search_space(origin(), Quat::identity(), SEARCH_HALF_EXTENT, SEARCH_HALF_EXTENT)
        .expect("demo extents are positive")
}
