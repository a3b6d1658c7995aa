//! Base placement search: the reach objective over plane positions, target
//! sampling, and the optimize / adjust / rerun loop.

pub mod global;
pub mod local;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{to_workcell_frame, AnnotateError, AvoidanceRegion, InteractionZone, SearchSpace};
use crate::collide::CollisionScene;
use crate::geom::{mix_seed, quat_serde, Pose, Quat, Transform, Vec3};
use crate::kinematics::{
    candidate_solutions, path_clear, CandidateSet, FailureReason, JointVector, ReachConfig, ReachOutcome, RobotModel,
    TaskTarget,
};
use crate::registry::{Bounds, Point2, Registry, RegistryError, SearchSettings};

pub use global::{critical_radius, mlsl_optimize, Mlsl, MlslConfig, RandomSearch};
pub use local::{nelder_mead, Compass, NelderMead, NelderMeadConfig};

pub const RESULT_VERSION: u32 = 1;
/// Weight of the summed miss distance against the reached count.
pub const MISS_WEIGHT: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("invalid workcell: {0}")]
    InvalidWorkcell(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Space(#[from] AnnotateError),
}

/// Optimization input with all geometry in the search-space plane frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workcell {
    pub zones: Vec<InteractionZone>,
    pub regions: Vec<AvoidanceRegion>,
    pub space: SearchSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_ref: Option<String>,
}

impl Workcell {
    /// Builds a workcell from world-frame (scan-frame) annotations.
    pub fn from_world(
        zones: &[InteractionZone],
        regions: &[AvoidanceRegion],
        space: SearchSpace,
        cloud_ref: Option<String>,
    ) -> Result<Self, OptimizerError> {
        space.validate()?;
        let wc = Workcell {
            zones: zones.iter().map(|z| to_workcell_frame(z, &space)).collect(),
            regions: regions.iter().map(|r| to_workcell_frame(r, &space)).collect(),
            space,
            cloud_ref,
        };
        wc.validate()?;
        Ok(wc)
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.zones.is_empty() {
            return Err(OptimizerError::InvalidWorkcell("at least one interaction zone is required".into()));
        }
        self.space.validate()?;
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.space.half_extent_x, self.space.half_extent_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    /// Zone by zone, in sampling order; this is also the visit order.
    pub targets: Vec<TaskTarget>,
    pub per_zone_count: usize,
    pub seed: u64,
}

impl TargetSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Uniform targets inside each zone's oriented box. Tool z points into the
/// task, against the zone's approach direction.
pub fn sample_targets(workcell: &Workcell, per_zone: usize, seed: u64) -> Result<TargetSet, OptimizerError> {
    if per_zone == 0 {
        return Err(OptimizerError::InvalidConfig("per_zone must be at least 1".into()));
    }
    workcell.validate()?;
    let mut targets = Vec::with_capacity(per_zone * workcell.zones.len());
    for (zi, zone) in workcell.zones.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, zi as u64));
        let axis = -zone.approach_dir.normalize();
        for _ in 0..per_zone {
            let u = Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
            let local = u.component_mul(&zone.half_extents);
            targets.push(TaskTarget {
                position: zone.center + zone.orientation * local,
                approach_axis: axis,
                zone_id: zone.zone_id.clone(),
            });
        }
    }
    Ok(TargetSet {
        targets,
        per_zone_count: per_zone,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementCandidate {
    pub x: f64,
    pub y: f64,
}

impl PlacementCandidate {
    pub fn new(x: f64, y: f64) -> Self {
        PlacementCandidate { x, y }
    }

    pub fn projected(self, bounds: &Bounds) -> Self {
        let [x, y] = bounds.project([self.x, self.y]);
        PlacementCandidate { x, y }
    }

    /// Robot base in the workcell frame: the plane frame shifted in-plane.
    pub fn base_pose(&self) -> Pose {
        Pose::translation(self.x, self.y, 0.0)
    }
}

impl From<Point2> for PlacementCandidate {
    fn from(p: Point2) -> Self {
        PlacementCandidate { x: p[0], y: p[1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEvaluation {
    pub candidate: PlacementCandidate,
    pub n_reached: usize,
    /// Summed position error over unreached targets, meters.
    pub miss_sum: f64,
    pub objective: f64,
    pub outcomes: Vec<ReachOutcome>,
}

pub fn objective(n_reached: usize, miss_sum: f64) -> f64 {
    n_reached as f64 - MISS_WEIGHT * miss_sum
}

/// Reusable evaluation context; holds the collision scene for one workcell.
pub struct PlacementEvaluator<'a> {
    workcell: &'a Workcell,
    targets: &'a TargetSet,
    robot: &'a RobotModel,
    scene: CollisionScene<'a>,
    reach: ReachConfig,
}

impl<'a> PlacementEvaluator<'a> {
    pub fn new(workcell: &'a Workcell, targets: &'a TargetSet, robot: &'a RobotModel, reach: ReachConfig) -> Self {
        PlacementEvaluator {
            workcell,
            targets,
            robot,
            scene: CollisionScene::new(&workcell.regions),
            reach,
        }
    }

    /// Counts the targets on the longest collision-free tour in visit order.
    ///
    /// Each target contributes a region-independent set of IK candidates
    /// (seeded from the previous target's candidates). A candidate is a node
    /// when it clears the avoidance regions; node `b` may follow node `a` of
    /// an earlier target when the straight joint-space path between them is
    /// clear. N is the longest such chain, so adding a region, which only
    /// removes nodes and edges, can never raise it.
    pub fn evaluate(&self, cand: PlacementCandidate) -> PlacementEvaluation {
        let candidate = cand.projected(&self.workcell.bounds());
        let base = candidate.base_pose().to_isometry();
        let mut nodes: Vec<TourNode> = Vec::new();
        // Node indices by tour length; index 0 unused.
        let mut levels: Vec<Vec<usize>> = vec![Vec::new()];
        let mut sets: Vec<CandidateSet> = Vec::with_capacity(self.targets.len());
        let mut carry: Vec<JointVector> = Vec::new();

        for (i, target) in self.targets.targets.iter().enumerate() {
            let set = candidate_solutions(self.robot, &base, target, i, &carry, &self.reach);
            let valid: Vec<&JointVector> = set
                .solutions
                .iter()
                .filter(|q| !self.scene.robot_in_collision(self.robot, q, &base).unwrap_or(true))
                .collect();
            let links: Vec<Option<usize>> = valid
                .par_iter()
                .map(|q| self.best_predecessor(&base, &nodes, &levels, q))
                .collect();
            for (q, parent) in valid.into_iter().zip(links) {
                let value = parent.map_or(1, |p| nodes[p].value + 1);
                if levels.len() <= value {
                    levels.push(Vec::new());
                }
                levels[value].push(nodes.len());
                nodes.push(TourNode {
                    target: i,
                    q: q.clone(),
                    value,
                    parent,
                });
            }
            carry = set.solutions.clone();
            sets.push(set);
        }

        let mut on_tour: Vec<Option<usize>> = vec![None; self.targets.len()];
        let end = levels.last().and_then(|l| l.first()).copied();
        let mut cursor = end;
        while let Some(n) = cursor {
            on_tour[nodes[n].target] = Some(n);
            cursor = nodes[n].parent;
        }

        let outcomes: Vec<ReachOutcome> = sets
            .iter()
            .enumerate()
            .map(|(i, set)| match on_tour[i] {
                Some(n) => ReachOutcome {
                    target_index: i,
                    reached: true,
                    position_error: 0.0,
                    q_solution: Some(nodes[n].q.clone()),
                    failure_reason: None,
                },
                None => {
                    let reason = if !set.ik_success {
                        FailureReason::IkFail
                    } else if nodes.iter().any(|n| n.target == i) {
                        FailureReason::PathCollision
                    } else {
                        FailureReason::Collision
                    };
                    ReachOutcome {
                        target_index: i,
                        reached: false,
                        position_error: set.best_error,
                        q_solution: None,
                        failure_reason: Some(reason),
                    }
                }
            })
            .collect();
        let n_reached = outcomes.iter().filter(|o| o.reached).count();
        let miss_sum = outcomes.iter().filter(|o| !o.reached).fold(0.0, |s, o| s + o.position_error);
        PlacementEvaluation {
            candidate,
            n_reached,
            miss_sum,
            objective: objective(n_reached, miss_sum),
            outcomes,
        }
    }

    /// Highest-valued earlier node joined to `q` by a clear path; ties go to
    /// the most recent node.
    fn best_predecessor(&self, base: &Transform, nodes: &[TourNode], levels: &[Vec<usize>], q: &JointVector) -> Option<usize> {
        levels.iter().rev().flat_map(|l| l.iter().rev()).copied().find(|&p| {
            path_clear(&self.scene, self.robot, base, &nodes[p].q, q, self.reach.path_resolution)
        })
    }
}

struct TourNode {
    target: usize,
    q: JointVector,
    value: usize,
    parent: Option<usize>,
}

pub fn evaluate_placement(
    cand: PlacementCandidate,
    workcell: &Workcell,
    targets: &TargetSet,
    robot: &RobotModel,
    reach: &ReachConfig,
) -> PlacementEvaluation {
    PlacementEvaluator::new(workcell, targets, robot, *reach).evaluate(cand)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub targets: u64,
    pub optimizer: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { targets: 1, optimizer: 2 }
    }
}

impl Seeds {
    /// Seed for IK restarts, derived so it differs from the sampler's stream.
    pub fn reach(&self) -> u64 {
        mix_seed(self.optimizer, 0x0072_6561_6368)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub per_zone: usize,
    /// Percent of targets that must be reached.
    pub threshold: f64,
    pub seeds: Seeds,
    pub global: String,
    pub local: String,
    /// Optimizer tunables; the global seed is replaced by `seeds.optimizer`.
    pub search: SearchSettings,
    /// IK and path settings; the seed is replaced by `seeds.reach()`.
    pub reach: ReachConfig,
    /// Worker threads; `None` uses the ambient rayon pool. Not serialized,
    /// so results do not depend on the worker count.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            per_zone: 100,
            threshold: 90.0,
            seeds: Seeds::default(),
            global: "mlsl".into(),
            local: "nelder-mead".into(),
            search: SearchSettings::default(),
            reach: ReachConfig::default(),
            threads: None,
        }
    }
}

impl OptimizeConfig {
    /// The config with derived seeds filled in, as echoed in the result.
    pub fn resolved(&self) -> OptimizeConfig {
        let mut c = self.clone();
        c.search.global.seed = self.seeds.optimizer;
        c.reach.seed = self.seeds.reach();
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub candidate: PlacementCandidate,
    pub objective: f64,
    pub n_reached: usize,
    pub miss_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub v: u32,
    pub robot: String,
    pub best: PlacementEvaluation,
    pub reach_percentage: f64,
    pub meets_threshold: bool,
    pub threshold: f64,
    pub local_runs: usize,
    pub evaluations: usize,
    pub seeds: Seeds,
    /// Best base pose in the workcell (plane) frame.
    pub base_pose: Pose,
    /// Best base pose in the scan frame.
    pub base_pose_world: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    pub config: OptimizeConfig,
    pub targets: TargetSet,
    pub trace: Vec<TraceEntry>,
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, OptimizerError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Samples targets once, then runs the configured global search over the
/// placement objective. A result below threshold is still `Ok`.
pub fn optimize_base(
    workcell: &Workcell,
    robot: &RobotModel,
    cfg: &OptimizeConfig,
    progress: Option<&AtomicUsize>,
) -> Result<OptimizationResult, OptimizerError> {
    optimize_base_with(&Registry::builtin(), workcell, robot, cfg, progress)
}

pub fn optimize_base_with(
    registry: &Registry,
    workcell: &Workcell,
    robot: &RobotModel,
    cfg: &OptimizeConfig,
    progress: Option<&AtomicUsize>,
) -> Result<OptimizationResult, OptimizerError> {
    workcell.validate()?;
    robot
        .validate()
        .map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?;
    if !(cfg.threshold.is_finite() && (0.0..=100.0).contains(&cfg.threshold)) {
        return Err(OptimizerError::InvalidConfig(format!("threshold {} outside [0, 100]", cfg.threshold)));
    }
    let cfg = cfg.resolved();
    let global = registry.global(&cfg.global, &cfg.search)?;
    let local = registry.local(&cfg.local, &cfg.search)?;
    let targets = sample_targets(workcell, cfg.per_zone, cfg.seeds.targets)?;
    let bounds = workcell.bounds();

    let (outcome, trace, best) = with_threads(cfg.threads, || {
        let evaluator = PlacementEvaluator::new(workcell, &targets, robot, cfg.reach);
        let mut trace: Vec<TraceEntry> = Vec::new();
        let mut best: Option<PlacementEvaluation> = None;
        let mut f = |p: Point2| {
            let e = evaluator.evaluate(p.into());
            trace.push(TraceEntry {
                candidate: e.candidate,
                objective: e.objective,
                n_reached: e.n_reached,
                miss_sum: e.miss_sum,
            });
            if let Some(c) = progress {
                c.fetch_add(1, Ordering::Relaxed);
            }
            let v = e.objective;
            if best.as_ref().is_none_or(|b| v > b.objective) {
                best = Some(e);
            }
            v
        };
        let outcome = global.maximize(&mut f, &bounds, local.as_ref());
        (outcome, trace, best)
    })?;
    let best = best.ok_or_else(|| OptimizerError::InvalidConfig("evaluation budget is zero".into()))?;

    let reach_percentage = 100.0 * best.n_reached as f64 / targets.len() as f64;
    let meets_threshold = reach_percentage >= cfg.threshold;
    let base_pose = best.candidate.base_pose();
    let base_pose_world = Pose::from_isometry(&(workcell.space.frame() * base_pose.to_isometry()));
    let hint = (!meets_threshold).then(|| {
        format!(
            "reached {:.1}% of targets, below the {:.1}% threshold; enlarge or move the search space and rerun",
            reach_percentage, cfg.threshold
        )
    });
    Ok(OptimizationResult {
        v: RESULT_VERSION,
        robot: robot.name.clone(),
        best,
        reach_percentage,
        meets_threshold,
        threshold: cfg.threshold,
        local_runs: outcome.local_runs,
        evaluations: trace.len(),
        seeds: cfg.seeds,
        base_pose,
        base_pose_world,
        hint,
        config: cfg,
        targets,
        trace,
    })
}

/// Edits to the search space between runs. Translation and rotation are
/// expressed in the current plane frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Adjustment {
    Translate { offset: Vec3 },
    Scale { fx: f64, fy: f64 },
    Rotate {
        #[serde(with = "quat_serde")]
        rotation: Quat,
    },
}

pub fn adjust_search_space(space: &SearchSpace, op: &Adjustment) -> Result<SearchSpace, OptimizerError> {
    let mut s = *space;
    match *op {
        Adjustment::Translate { offset } => {
            if !offset.iter().all(|c| c.is_finite()) {
                return Err(OptimizerError::InvalidConfig("translation must be finite".into()));
            }
            s.center += space.orientation * offset;
        }
        Adjustment::Scale { fx, fy } => {
            if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
                return Err(OptimizerError::InvalidConfig(format!("scale factors must be positive, got ({fx}, {fy})")));
            }
            s.half_extent_x *= fx;
            s.half_extent_y *= fy;
        }
        Adjustment::Rotate { rotation } => {
            s.orientation = space.orientation * rotation;
        }
    }
    s.validate()?;
    Ok(s)
}
