//! The pipeline stages as library calls; `main` only parses flags and prints.

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicUsize;

use basecamp_core::annotate::{derive_annotations, Annotations, SearchSpace};
use basecamp_core::cloudio::{simulate_scan, ScanConfig};
use basecamp_core::geom::Quat;
use basecamp_core::kinematics::{generic6r, planar2, RobotModel};
use basecamp_core::optimizer::{
    adjust_search_space, optimize_base_with, Adjustment, OptimizationResult, OptimizeConfig, Seeds, Workcell,
};
use basecamp_core::registry::Registry;

use crate::bundle::{self, write_json, write_text, Bundle, Meta, ScanMeta, SceneFile, TrajectoryFile};
use crate::report::{reach_heatmap, report_text, targets_csv, Heatmap};
use crate::{demo, WorkbenchError};

pub const THREADS_ENV: &str = "BASECAMP_THREADS";

/// Worker cap from `BASECAMP_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, WorkbenchError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| WorkbenchError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanArgs {
    pub scene: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub config: ScanConfig,
    pub seed: u64,
}

pub fn cmd_scan(bundle: &Bundle, args: &ScanArgs) -> Result<ScanMeta, WorkbenchError> {
    let scene = bundle.scene(args.scene.as_deref())?;
    let trajectory = bundle.trajectory(args.trajectory.as_deref())?;
    let out = simulate_scan(&scene, &trajectory, &args.config, args.seed)?;
    if out.cloud.is_empty() {
        return Err(WorkbenchError::Usage("scan produced no points; check the trajectory aims at the scene".into()));
    }
    bundle.save_cloud(&out.cloud)?;
    let meta = ScanMeta {
        config: args.config,
        seed: args.seed,
        frames: out.frames(),
        points: out.cloud.len(),
    };
    let m = meta.clone();
    bundle.update_meta(|x| x.scan = Some(m))?;
    Ok(meta)
}

/// Derives zones and regions from the strokes and writes them back; strokes
/// and any other fields are kept as they were.
pub fn cmd_annotate(bundle: &Bundle, annotations: Option<&Path>) -> Result<Annotations, WorkbenchError> {
    let doc: Annotations = match annotations {
        Some(p) => bundle::read_json(p)?,
        None => bundle.annotations()?,
    };
    annotate_document(bundle, doc)
}

/// Derives geometry for `doc` against the bundle's cloud and stores it as
/// annotations.json. The search-space frame orients the zone boxes.
pub fn annotate_document(bundle: &Bundle, mut doc: Annotations) -> Result<Annotations, WorkbenchError> {
    let cloud = bundle.cloud()?;
    let frame = if bundle.has(bundle::SEARCHSPACE) {
        bundle.search_space()?.orientation
    } else {
        doc.searchspace.map(|s| s.orientation).unwrap_or_else(Quat::identity)
    };
    let derived = derive_annotations(&cloud, &doc.strokes, &frame, doc.filter.unwrap_or_default())?;
    doc.zones = derived.zones;
    doc.regions = derived.regions;
    write_json(&bundle.path(bundle::ANNOTATIONS), &doc)?;
    bundle.update_meta(|_| {})?;
    Ok(doc)
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeArgs {
    /// Built-in name or robot JSON path; `None` uses the bundle's robot.json.
    pub robot: Option<String>,
    pub config: OptimizeConfig,
}

fn resolve_robot(bundle: &Bundle, spec: Option<&str>) -> Result<(RobotModel, String), WorkbenchError> {
    match spec {
        None | Some(bundle::ROBOT) if bundle.has(bundle::ROBOT) => Ok((bundle.robot()?, bundle::ROBOT.into())),
        None => Err(WorkbenchError::Missing {
            path: bundle.path(bundle::ROBOT).display().to_string(),
            hint: "pass --robot or add robot.json".into(),
        }),
        Some(s) => Ok((Registry::builtin().robot(s)?, s.to_string())),
    }
}

pub fn load_workcell(bundle: &Bundle) -> Result<Workcell, WorkbenchError> {
    let space = bundle.search_space()?;
    let doc = bundle.annotations()?;
    if doc.zones.is_empty() {
        return Err(WorkbenchError::Usage(format!(
            "{}: no derived zones; run `basecamp annotate` first",
            bundle::ANNOTATIONS
        )));
    }
    Ok(Workcell::from_world(&doc.zones, &doc.regions, space, Some(bundle::CLOUD.into()))?)
}

pub fn cmd_optimize(bundle: &Bundle, args: &OptimizeArgs) -> Result<OptimizationResult, WorkbenchError> {
    optimize_bundle(bundle, args, None)
}

/// [`cmd_optimize`] with an evaluation counter for progress reporting.
pub fn optimize_bundle(
    bundle: &Bundle,
    args: &OptimizeArgs,
    progress: Option<&AtomicUsize>,
) -> Result<OptimizationResult, WorkbenchError> {
    let workcell = load_workcell(bundle)?;
    let (robot, robot_ref) = resolve_robot(bundle, args.robot.as_deref())?;
    let result = optimize_base_with(&Registry::builtin(), &workcell, &robot, &args.config, progress)?;
    write_json(&bundle.path(bundle::RESULT), &result)?;
    let seeds = result.seeds;
    bundle.update_meta(|m| {
        m.seeds = Some(seeds);
        m.robot = Some(robot_ref);
    })?;
    Ok(result)
}

pub struct ReportOutput {
    pub text: String,
    pub heatmap: Heatmap,
    pub result: OptimizationResult,
}

pub fn cmd_report(bundle: &Bundle, pitch: f64) -> Result<ReportOutput, WorkbenchError> {
    let result = bundle.result()?;
    let workcell = load_workcell(bundle)?;
    let meta = bundle.meta()?;
    let (robot, _) = resolve_robot(bundle, meta.robot.as_deref())?;
    if robot.name != result.robot {
        return Err(WorkbenchError::Usage(format!(
            "result.json was computed for robot '{}' but the bundle now resolves '{}'; rerun optimize",
            result.robot, robot.name
        )));
    }
    let heatmap = reach_heatmap(&workcell, &result.targets, &robot, &result.config.reach, pitch)?;
    let text = report_text(&result, &heatmap);
    write_text(&bundle.path(bundle::HEATMAP), &heatmap.to_csv())?;
    write_text(&bundle.path(bundle::TARGETS), &targets_csv(&result))?;
    write_text(&bundle.path(bundle::REPORT), &text)?;
    Ok(ReportOutput { text, heatmap, result })
}

pub fn cmd_adjust(bundle: &Bundle, op: &Adjustment) -> Result<SearchSpace, WorkbenchError> {
    let space = adjust_search_space(&bundle.search_space()?, op)?;
    bundle.save_search_space(&space)?;
    bundle.update_meta(|_| {})?;
    Ok(space)
}

/// Writes the demo inputs: scene, trajectory, strokes, search space and
/// robots. Scanning, annotating and optimizing are separate stages.
pub fn cmd_demo(dir: &Path) -> Result<Bundle, WorkbenchError> {
    let bundle = Bundle::create(dir)?;
    write_json(
        &bundle.path(bundle::SCENE),
        &SceneFile {
            v: bundle::BUNDLE_VERSION,
            scene: demo::scene(),
        },
    )?;
    write_json(
        &bundle.path(bundle::TRAJECTORY),
        &TrajectoryFile {
            v: bundle::BUNDLE_VERSION,
            trajectory: demo::trajectory(),
        },
    )?;
    write_json(&bundle.path(bundle::ANNOTATIONS), &Annotations::new(demo::strokes()))?;
    bundle.save_search_space(&demo::search_space())?;
    write_text(&bundle.path(bundle::ROBOT), &generic6r().to_json())?;
    let robots = bundle.path("robots");
    std::fs::create_dir_all(&robots).map_err(|source| WorkbenchError::Write {
        path: robots.display().to_string(),
        source,
    })?;
    write_text(&robots.join("generic6r.json"), &generic6r().to_json())?;
    write_text(&robots.join("planar2.json"), &planar2().to_json())?;
    write_json(&bundle.path(bundle::META), &Meta::new())?;
    Ok(bundle)
}

/// Demo inputs followed by every stage with default settings.
pub fn run_demo_pipeline(dir: &Path, seeds: Seeds, threads: Option<usize>) -> Result<OptimizationResult, WorkbenchError> {
    let bundle = cmd_demo(dir)?;
    cmd_scan(&bundle, &ScanArgs::default())?;
    cmd_annotate(&bundle, None)?;
    let mut args = OptimizeArgs::default();
    args.config.seeds = seeds;
    args.config.threads = threads;
    cmd_optimize(&bundle, &args)
}

