use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_ik, IkConfig, IkResult, JointVector, RobotModel, TaskTarget};
use crate::annotate::AvoidanceRegion;
use crate::collide::CollisionScene;
use crate::geom::{mix_seed, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureReason {
    IkFail,
    Collision,
    PathCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachOutcome {
    pub target_index: usize,
    pub reached: bool,
    /// 0 when reached, otherwise the best attempt's distance to the target.
    pub position_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_solution: Option<JointVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<FailureReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachConfig {
    pub restarts: usize,
    /// Distinct solutions kept per target when building a tour.
    pub candidates: usize,
    /// Max joint step between path collision samples, radians.
    pub path_resolution: f64,
    pub seed: u64,
    pub ik: IkConfig,
}

impl Default for ReachConfig {
    fn default() -> Self {
        ReachConfig {
            restarts: 8,
            candidates: 3,
            path_resolution: 0.05,
            seed: 0,
            ik: IkConfig::default(),
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// `count` restart configurations from a Halton sequence under a seeded
/// random shift (mod 1). Each joint is marginally uniform over its limits,
/// and the low discrepancy spreads the restarts across joint-space
/// quadrants so they do not all fall into the same bad basin.
fn restart_seeds(model: &RobotModel, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = model.joints.iter().map(|_| rng.random()).collect();
    let primes = first_primes(model.dof());
    (0..count)
        .map(|k| {
            model
                .joints
                .iter()
                .enumerate()
                .map(|(d, j)| {
                    let u = (radical_inverse(k as u64 + 1, primes[d]) + shift[d]).fract();
                    j.limits[0] + u * (j.limits[1] - j.limits[0])
                })
                .collect()
        })
        .collect()
}

enum Attempt {
    Accepted(IkResult),
    Rejected(IkResult, FailureReason),
}

pub(crate) fn path_clear(scene: &CollisionScene, model: &RobotModel, base: &Transform, from: &[f64], to: &[f64], resolution: f64) -> bool {
    let span = from
        .iter()
        .zip(to)
        .fold(0.0f64, |m, (a, b)| m.max((b - a).abs()));
    let steps = (span / resolution).ceil() as usize;
    // Sample 0 is the previous (collision-free) solution, the last is checked by the caller.
    (1..steps).all(|k| {
        let s = k as f64 / steps as f64;
        let q: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + (b - a) * s).collect();
        !scene
            .robot_in_collision(model, &JointVector(q), base)
            .unwrap_or(true)
    })
}

fn attempt(
    model: &RobotModel,
    base: &Transform,
    target: &TaskTarget,
    scene: &CollisionScene,
    prev_q: Option<&JointVector>,
    seed_q: &[f64],
    cfg: &ReachConfig,
) -> Attempt {
    let ik = solve_ik(model, base, target, seed_q, &cfg.ik).expect("seed within limits");
    if !ik.success {
        return Attempt::Rejected(ik, FailureReason::IkFail);
    }
    if scene.robot_in_collision(model, &ik.q, base).unwrap_or(true) {
        return Attempt::Rejected(ik, FailureReason::Collision);
    }
    if let Some(prev) = prev_q {
        if !path_clear(scene, model, base, prev, &ik.q, cfg.path_resolution) {
            return Attempt::Rejected(ik, FailureReason::PathCollision);
        }
    }
    Attempt::Accepted(ik)
}

/// Tries IK from `cfg.restarts` seeds (the previous solution first, then
/// shifted Halton configurations) and accepts the first solution that is
/// collision-free and, when `prev_q` is given, joined to it by a
/// collision-free straight joint-space path.
pub fn reach_check_in(
    model: &RobotModel,
    base: &Transform,
    target: &TaskTarget,
    target_index: usize,
    scene: &CollisionScene,
    prev_q: Option<&JointVector>,
    cfg: &ReachConfig,
) -> ReachOutcome {
    let restarts = cfg.restarts.max(1);
    let target_seed = mix_seed(cfg.seed, target_index as u64);
    let random = restart_seeds(model, target_seed, restarts);
    let seed_for = |k: usize| -> Vec<f64> {
        match (k, prev_q) {
            (0, Some(p)) => {
                let mut q = p.0.clone();
                model.clamp(&mut q);
                q
            }
            _ => random[k].clone(),
        }
    };

    let mut rejected: Vec<(IkResult, FailureReason)> = Vec::new();
    let accept = |ik: IkResult| ReachOutcome {
        target_index,
        reached: true,
        position_error: 0.0,
        q_solution: Some(ik.q),
        failure_reason: None,
    };

    match attempt(model, base, target, scene, prev_q, &seed_for(0), cfg) {
        Attempt::Accepted(ik) => return accept(ik),
        Attempt::Rejected(ik, why) => rejected.push((ik, why)),
    }
    // Remaining restarts in parallel batches; the lowest accepted index wins.
    let batch = rayon::current_num_threads().max(1);
    let mut k = 1;
    while k < restarts {
        let end = (k + batch).min(restarts);
        let results: Vec<Attempt> = (k..end)
            .into_par_iter()
            .map(|i| attempt(model, base, target, scene, prev_q, &seed_for(i), cfg))
            .collect();
        for r in results {
            match r {
                Attempt::Accepted(ik) => return accept(ik),
                Attempt::Rejected(ik, why) => rejected.push((ik, why)),
            }
        }
        k = end;
    }

    let position_error = rejected
        .iter()
        .map(|(ik, _)| ik.position_error)
        .fold(f64::INFINITY, f64::min);
    let reason = rejected.iter().map(|(_, w)| *w).max();
    ReachOutcome {
        target_index,
        reached: false,
        position_error,
        q_solution: None,
        failure_reason: reason,
    }
}

pub fn reach_check(
    model: &RobotModel,
    base: &Transform,
    target: &TaskTarget,
    target_index: usize,
    regions: &[AvoidanceRegion],
    prev_q: Option<&JointVector>,
    cfg: &ReachConfig,
) -> ReachOutcome {
    reach_check_in(model, base, target, target_index, &CollisionScene::new(regions), prev_q, cfg)
}

/// IK solutions for one target that do not depend on avoidance regions:
/// successful, self-collision-free, pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub solutions: Vec<JointVector>,
    /// Whether any attempt converged, colliding with itself or not.
    pub ik_success: bool,
    /// Smallest position error over all attempts made.
    pub best_error: f64,
}

// Two solutions closer than this in every joint count as one.
const SAME_SOLUTION: f64 = 1e-2;

/// Seeds IK from `carry` (normally the previous target's candidates), then
/// from shifted Halton configurations, and keeps the first
/// `cfg.candidates` distinct solutions in seed order.
pub fn candidate_solutions(
    model: &RobotModel,
    base: &Transform,
    target: &TaskTarget,
    target_index: usize,
    carry: &[JointVector],
    cfg: &ReachConfig,
) -> CandidateSet {
    let want = cfg.candidates.max(1);
    let halton = restart_seeds(model, mix_seed(cfg.seed, target_index as u64), cfg.restarts.max(1));
    let seeds: Vec<Vec<f64>> = carry
        .iter()
        .map(|q| {
            let mut q = q.0.clone();
            model.clamp(&mut q);
            q
        })
        .chain(halton)
        .collect();
    let no_regions = CollisionScene::new(&[]);
    let mut out = CandidateSet {
        solutions: Vec::new(),
        ik_success: false,
        best_error: f64::INFINITY,
    };
    let batch = rayon::current_num_threads().max(1);
    for chunk in seeds.chunks(batch) {
        let results: Vec<IkResult> = chunk
            .par_iter()
            .map(|s| solve_ik(model, base, target, s, &cfg.ik).expect("seed within limits"))
            .collect();
        for ik in results {
            out.best_error = out.best_error.min(ik.position_error);
            if !ik.success {
                continue;
            }
            out.ik_success = true;
            if no_regions.robot_in_collision(model, &ik.q, base).unwrap_or(true) {
                continue;
            }
            let seen = out.solutions.iter().any(|s| {
                s.iter().zip(ik.q.iter()).all(|(a, b)| (a - b).abs() < SAME_SOLUTION)
            });
            if !seen {
                out.solutions.push(ik.q);
                if out.solutions.len() == want {
                    return out;
                }
            }
        }
    }
    out
}
