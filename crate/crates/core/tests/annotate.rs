use basecamp_core::annotate::{
    define_search_space, from_workcell_frame, make_avoidance_region, make_interaction_zone, quickhull, spray_select,
    to_workcell_frame, FilterParams, InteractionZone, SprayLabel, SpraySample, SprayStroke,
};
use basecamp_core::cloudio::{filter_outliers, PointCloud};
use basecamp_core::geom::{Quat, Vec3};
use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;
use oracles::naive_hull;

fn ball_points(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm() <= 1.0 {
            out.push(p);
        }
    }
    out
}

fn vertex_set(v: &[Vec3]) -> Vec<[u64; 3]> {
    let mut s: Vec<[u64; 3]> = v.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
    s.sort();
    s
}

#[test]
fn ball_hull_matches_incremental_oracle() {
    let pts = ball_points(200, 17);
    let hull = quickhull(&pts).unwrap();
    hull.check_invariants().unwrap();
    for p in &pts {
        assert!(hull.signed_distance(p) <= 1e-9);
    }
    let (faces, volume) = naive_hull(&pts);
    assert!((hull.volume() - volume).abs() <= 1e-9 * volume, "{} vs {}", hull.volume(), volume);
    let mut oracle_vertices: Vec<usize> = faces.iter().flatten().copied().collect();
    oracle_vertices.sort();
    oracle_vertices.dedup();
    let oracle: Vec<Vec3> = oracle_vertices.iter().map(|&i| pts[i]).collect();
    assert_eq!(vertex_set(&hull.vertices), vertex_set(&oracle));
}

fn patch_cloud() -> PointCloud {
    let mut pts = Vec::new();
    for i in -20..=20 {
        for j in -20..=20 {
            pts.push(Vec3::new(i as f64 * 0.01, j as f64 * 0.01, 1.0));
        }
    }
    PointCloud::from_points(pts)
}

fn stroke(samples: Vec<SpraySample>, radius: f64) -> SprayStroke {
    SprayStroke {
        label: SprayLabel::Interact,
        zone_id: "z".into(),
        radius,
        samples,
        approach_dir: Some(Vec3::z()),
    }
}

#[test]
fn spray_selects_exactly_points_near_axis() {
    let cloud = patch_cloud();
    let origin = Vec3::new(0.03, -0.02, 0.0);
    let s = stroke(vec![SpraySample { origin, direction: Vec3::z() }], 0.05);
    let got = spray_select(&cloud, &s);
    let expect: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| ((p.x - origin.x).powi(2) + (p.y - origin.y).powi(2)).sqrt() <= 0.05)
        .map(|(i, _)| i)
        .collect();
    assert!(!expect.is_empty());
    assert_eq!(got, expect);
}

#[test]
fn overlapping_samples_select_union() {
    let cloud = patch_cloud();
    let a = SpraySample { origin: Vec3::new(0.0, 0.0, 0.0), direction: Vec3::z() };
    let b = SpraySample { origin: Vec3::new(0.04, 0.0, 0.0), direction: Vec3::z() };
    let both = spray_select(&cloud, &stroke(vec![a, b], 0.05));
    let mut union = spray_select(&cloud, &stroke(vec![a], 0.05));
    union.extend(spray_select(&cloud, &stroke(vec![b], 0.05)));
    union.sort();
    union.dedup();
    assert_eq!(both, union);
}

fn corners(half: Vec3) -> Vec<Vec3> {
    InteractionZone::box_corners(&Vec3::zeros(), &half, &Quat::identity()).to_vec()
}

#[test]
fn zone_ignores_distant_outlier() {
    let half = Vec3::new(0.2, 0.15, 0.05);
    let mut pts = corners(half);
    pts.push(Vec3::new(5.0, 0.0, 0.0));
    let cloud = PointCloud::from_points(pts);
    // The filter alone must already drop the outlier.
    assert_eq!(filter_outliers(&cloud, 8, 1.0).mask, [vec![true; 8], vec![false]].concat());
    let idx: Vec<usize> = (0..9).collect();
    let z = make_interaction_zone(&cloud, &idx, Vec3::z(), "pick", &Quat::identity(), FilterParams::default()).unwrap();
    assert!(z.center.norm() < 1e-12);
    assert!((z.half_extents - half).norm() < 1e-12);
}

#[test]
fn avoidance_region_ignores_distant_outlier() {
    let mut pts = corners(Vec3::new(0.5, 0.5, 0.5));
    pts.push(Vec3::new(0.0, 6.0, 0.0));
    let cloud = PointCloud::from_points(pts.clone());
    let idx: Vec<usize> = (0..9).collect();
    let region = make_avoidance_region(&cloud, &idx, "door", FilterParams::default()).unwrap();
    assert_eq!(region.hull.vertices.len(), 8);
    assert!((region.hull.volume() - 1.0).abs() < 1e-12);
    assert_eq!(vertex_set(&region.hull.vertices), vertex_set(&pts[..8]));
}

#[test]
fn search_space_examples() {
    let s = define_search_space(Vec3::zeros(), Quat::identity(), 0.5, 0.5).unwrap();
    assert_eq!(s.clamp(0.9, -0.9), (0.5, -0.5));
    assert!(define_search_space(Vec3::zeros(), Quat::identity(), 0.0, 0.5).is_err());
    let tilted = define_search_space(
        Vec3::zeros(),
        UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::FRAC_PI_2),
        0.5,
        0.5,
    )
    .unwrap();
    assert!((tilted.normal() + Vec3::y()).norm() < 1e-12);
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Quat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter_map("zero", |(w, x, y, z)| {
        let q = nalgebra::Quaternion::new(w, x, y, z);
        (q.norm() > 1e-3).then(|| UnitQuaternion::from_quaternion(q))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hull_properties_on_random_sets(seed in 0u64..10_000, n in 4usize..500) {
        let pts = ball_points(n, seed);
        let hull = quickhull(&pts).unwrap();
        prop_assert!(hull.check_invariants().is_ok());
        let v = hull.vertices.len() as i64;
        let f = hull.triangles.len() as i64;
        prop_assert_eq!(v - hull.edge_count() as i64 + f, 2);
        for p in &pts {
            prop_assert!(hull.signed_distance(p) <= 1e-9);
        }
        let input = vertex_set(&pts);
        prop_assert!(vertex_set(&hull.vertices).iter().all(|v| input.binary_search(v).is_ok()));
        let (_, volume) = naive_hull(&pts);
        prop_assert!((hull.volume() - volume).abs() <= 1e-9 * volume);
    }

    #[test]
    fn hull_ignores_input_order(seed in 0u64..10_000, n in 4usize..120, shuffle_seed in any::<u64>()) {
        let pts = ball_points(n, seed);
        let mut shuffled = pts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = quickhull(&pts).unwrap();
        let b = quickhull(&shuffled).unwrap();
        prop_assert_eq!(vertex_set(&a.vertices), vertex_set(&b.vertices));
        prop_assert!((a.volume() - b.volume()).abs() <= 1e-12 * a.volume().max(1.0));
    }

    #[test]
    fn workcell_frame_is_rigid(pts in prop::collection::vec(vec3(), 2..30), center in vec3(), rot in rotation()) {
        let space = define_search_space(center, rot, 0.3, 0.3).unwrap();
        let cloud = PointCloud::from_points(pts);
        let local = to_workcell_frame(&cloud, &space);
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                let d0 = (cloud.points[i] - cloud.points[j]).norm();
                let d1 = (local.points[i] - local.points[j]).norm();
                prop_assert!((d0 - d1).abs() < 1e-9);
            }
        }
        let back = from_workcell_frame(&local, &space);
        for (a, b) in cloud.points.iter().zip(&back.points) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn spray_ignores_sample_order(offsets in prop::collection::vec((-0.15..0.15f64, -0.15..0.15f64), 1..6)) {
        let cloud = patch_cloud();
        let samples: Vec<SpraySample> = offsets
            .iter()
            .map(|&(x, y)| SpraySample { origin: Vec3::new(x, y, 0.0), direction: Vec3::z() })
            .collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        prop_assert_eq!(spray_select(&cloud, &stroke(samples, 0.04)), spray_select(&cloud, &stroke(reversed, 0.04)));
    }

    #[test]
    fn zone_box_holds_filtered_points(seed in 0u64..10_000, n in 4usize..80, rot in rotation()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.random_range(0.0..0.4), rng.random_range(0.0..0.3), rng.random_range(0.0..0.1))).collect();
        let cloud = PointCloud::from_points(pts);
        let idx: Vec<usize> = (0..n).collect();
        let filter = FilterParams::default();
        let kept = filter_outliers(&cloud, filter.k, filter.std_ratio).cloud;
        prop_assume!(kept.len() >= 4);
        let z = make_interaction_zone(&cloud, &idx, Vec3::z(), "z", &rot, filter).unwrap();
        for p in &kept.points {
            prop_assert!(z.contains(p, 1e-9));
        }
    }
}
