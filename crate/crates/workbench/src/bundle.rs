//! On-disk workcell bundle: one directory, one file per pipeline stage.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use basecamp_core::annotate::{Annotations, SearchSpace, ANNOTATIONS_VERSION};
use basecamp_core::cloudio::{load_cloud, save_cloud, CameraTrajectory, MeshScene, PointCloud, ScanConfig};
use basecamp_core::kinematics::{RobotModel, ROBOT_VERSION};
use basecamp_core::optimizer::{OptimizationResult, Seeds, RESULT_VERSION};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::WorkbenchError;

pub const BUNDLE_VERSION: u32 = 1;

pub const CLOUD: &str = "cloud.ply";
pub const ANNOTATIONS: &str = "annotations.json";
pub const SEARCHSPACE: &str = "searchspace.json";
pub const ROBOT: &str = "robot.json";
pub const RESULT: &str = "result.json";
pub const META: &str = "meta.json";
pub const SCENE: &str = "scene.json";
pub const TRAJECTORY: &str = "trajectory.json";
pub const HEATMAP: &str = "reach_heatmap.csv";
pub const TARGETS: &str = "targets.csv";
pub const REPORT: &str = "report.txt";

fn version() -> u32 {
    BUNDLE_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default = "version")]
    pub v: u32,
    #[serde(flatten)]
    pub scene: MeshScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    #[serde(default = "version")]
    pub v: u32,
    #[serde(flatten)]
    pub trajectory: CameraTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaceFile {
    #[serde(default = "version")]
    pub v: u32,
    #[serde(flatten)]
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub config: ScanConfig,
    pub seed: u64,
    pub frames: usize,
    pub points: usize,
}

/// Bookkeeping for the bundle; the only file that carries timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default = "version")]
    pub v: u32,
    pub schemas: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    /// Robot used by the last optimize run: a built-in name, a path, or
    /// `robot.json` for the bundle's own model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    pub created: String,
    pub updated: String,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl Meta {
    pub fn new() -> Self {
        let t = now();
        let schemas = [
            ("bundle", BUNDLE_VERSION),
            ("annotations", ANNOTATIONS_VERSION),
            ("robot", ROBOT_VERSION),
            ("result", RESULT_VERSION),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Meta {
            v: BUNDLE_VERSION,
            schemas,
            scan: None,
            seeds: None,
            robot: None,
            created: t.clone(),
            updated: t,
        }
    }

    pub fn check(&self) -> Result<(), WorkbenchError> {
        let fresh = Meta::new();
        if self.v != BUNDLE_VERSION || self.schemas != fresh.schemas {
            return Err(WorkbenchError::Usage(format!(
                "{META}: schema versions {:?} do not match this build {:?}",
                self.schemas, fresh.schemas
            )));
        }
        Ok(())
    }
}

impl Default for Meta {
    fn default() -> Self {
        Meta::new()
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|source| WorkbenchError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| WorkbenchError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WorkbenchError> {
    let mut text = serde_json::to_string_pretty(value).expect("bundle types serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), WorkbenchError> {
    fs::write(path, text).map_err(|source| WorkbenchError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Handle on a bundle directory.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
}

impl Bundle {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, WorkbenchError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(WorkbenchError::Missing {
                path: dir.display().to_string(),
                hint: "not a bundle directory".into(),
            });
        }
        Ok(Bundle { dir })
    }

    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, WorkbenchError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| WorkbenchError::Write {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Bundle { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    fn require(&self, name: &str, hint: &str) -> Result<PathBuf, WorkbenchError> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(WorkbenchError::Missing {
                path: p.display().to_string(),
                hint: hint.into(),
            })
        }
    }

    pub fn meta(&self) -> Result<Meta, WorkbenchError> {
        if !self.has(META) {
            return Ok(Meta::new());
        }
        let m: Meta = read_json(&self.path(META))?;
        m.check()?;
        Ok(m)
    }

    /// Applies `edit` to meta.json and bumps its `updated` stamp.
    pub fn update_meta(&self, edit: impl FnOnce(&mut Meta)) -> Result<(), WorkbenchError> {
        let mut m = self.meta()?;
        edit(&mut m);
        m.updated = now();
        write_json(&self.path(META), &m)
    }

    pub fn cloud(&self) -> Result<PointCloud, WorkbenchError> {
        let p = self.require(CLOUD, "run `basecamp scan` first")?;
        Ok(load_cloud(p)?)
    }

    pub fn save_cloud(&self, cloud: &PointCloud) -> Result<(), WorkbenchError> {
        save_cloud(cloud, self.path(CLOUD)).map_err(WorkbenchError::from)
    }

    pub fn annotations(&self) -> Result<Annotations, WorkbenchError> {
        let p = self.require(ANNOTATIONS, "write annotation strokes first")?;
        let a: Annotations = read_json(&p)?;
        if a.v != ANNOTATIONS_VERSION {
            return Err(WorkbenchError::Usage(format!("{ANNOTATIONS}: unsupported version {}", a.v)));
        }
        Ok(a)
    }

    pub fn search_space(&self) -> Result<SearchSpace, WorkbenchError> {
        let p = self.require(SEARCHSPACE, "define the search space first")?;
        let f: SearchSpaceFile = read_json(&p)?;
        f.space.validate()?;
        Ok(f.space)
    }

    pub fn save_search_space(&self, space: &SearchSpace) -> Result<(), WorkbenchError> {
        write_json(
            &self.path(SEARCHSPACE),
            &SearchSpaceFile {
                v: BUNDLE_VERSION,
                space: *space,
            },
        )
    }

    pub fn robot(&self) -> Result<RobotModel, WorkbenchError> {
        let p = self.require(ROBOT, "pass --robot or add robot.json")?;
        RobotModel::load(p).map_err(|e| WorkbenchError::Usage(format!("{ROBOT}: {e}")))
    }

    pub fn result(&self) -> Result<OptimizationResult, WorkbenchError> {
        let p = self.require(RESULT, "run `basecamp optimize` first")?;
        read_json(&p)
    }

    pub fn scene(&self, path: Option<&Path>) -> Result<MeshScene, WorkbenchError> {
        let p = match path {
            Some(p) => p.to_path_buf(),
            None => self.require(SCENE, "pass --scene")?,
        };
        let f: SceneFile = read_json(&p)?;
        Ok(f.scene)
    }

    pub fn trajectory(&self, path: Option<&Path>) -> Result<CameraTrajectory, WorkbenchError> {
        let p = match path {
            Some(p) => p.to_path_buf(),
            None => self.require(TRAJECTORY, "pass --trajectory")?,
        };
        let f: TrajectoryFile = read_json(&p)?;
        if f.trajectory.poses.is_empty() {
            return Err(WorkbenchError::Usage(format!("{}: trajectory has no poses", p.display())));
        }
        Ok(f.trajectory)
    }
}
