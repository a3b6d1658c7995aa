//! Named strategies: global/local optimizers and robot models, chosen at
//! run time by name from config or the command line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kinematics::{generic6r, planar2, KinematicsError, RobotModel};
use crate::optimizer::global::{Mlsl, MlslConfig, RandomSearch};
use crate::optimizer::local::{Compass, NelderMead, NelderMeadConfig};

/// Plane-local (x, y).
pub type Point2 = [f64; 2];

/// Objective to maximize.
pub type Objective<'a> = dyn FnMut(Point2) -> f64 + 'a;

/// The centered box −wx ≤ x ≤ wx, −wy ≤ y ≤ wy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub wx: f64,
    pub wy: f64,
}

impl Bounds {
    pub fn new(wx: f64, wy: f64) -> Self {
        Bounds { wx, wy }
    }

    pub fn project(&self, p: Point2) -> Point2 {
        [p[0].clamp(-self.wx, self.wx), p[1].clamp(-self.wy, self.wy)]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0].abs() <= self.wx && p[1].abs() <= self.wy
    }

    pub fn area(&self) -> f64 {
        4.0 * self.wx * self.wy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOutcome {
    pub best: Point2,
    pub value: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOutcome {
    pub best: Point2,
    pub value: f64,
    pub local_runs: usize,
    pub evals: usize,
    /// Every evaluated (projected) point with its value, in call order.
    pub trace: Vec<(Point2, f64)>,
}

pub trait LocalOptimizer: Send + Sync {
    fn name(&self) -> &'static str;
    /// Maximize from `x0` using at most `budget` evaluations of `f`.
    fn maximize(&self, f: &mut Objective, x0: Point2, bounds: &Bounds, budget: usize) -> LocalOutcome;
    /// Distance under which two local optima count as the same.
    fn xtol(&self) -> f64;
    fn ftol(&self) -> f64;
}

pub trait GlobalOptimizer: Send + Sync {
    fn name(&self) -> &'static str;
    fn maximize(&self, f: &mut Objective, bounds: &Bounds, local: &dyn LocalOptimizer) -> GlobalOutcome;
}

/// Tunables handed to every factory; each strategy reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub global: MlslConfig,
    pub local: NelderMeadConfig,
}

pub type GlobalFactory = fn(&SearchSettings) -> Box<dyn GlobalOptimizer>;
pub type LocalFactory = fn(&SearchSettings) -> Box<dyn LocalOptimizer>;
pub type RobotFactory = fn() -> RobotModel;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown {kind} strategy '{name}' (known: {known})")]
    Unknown { kind: &'static str, name: String, known: String },
    #[error(transparent)]
    Robot(#[from] KinematicsError),
}

pub struct Registry {
    globals: BTreeMap<&'static str, GlobalFactory>,
    locals: BTreeMap<&'static str, LocalFactory>,
    robots: BTreeMap<&'static str, RobotFactory>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn unknown<T>(kind: &'static str, name: &str, map: &BTreeMap<&'static str, T>) -> RegistryError {
    RegistryError::Unknown {
        kind,
        name: name.to_string(),
        known: map.keys().copied().collect::<Vec<_>>().join(", "),
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            globals: BTreeMap::new(),
            locals: BTreeMap::new(),
            robots: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_global("mlsl", |s| Box::new(Mlsl { config: s.global }));
        r.register_global("random", |s| Box::new(RandomSearch { config: s.global }));
        r.register_local("nelder-mead", |s| Box::new(NelderMead { config: s.local }));
        r.register_local("compass", |s| Box::new(Compass { config: s.local }));
        r.register_robot("generic6r", generic6r);
        r.register_robot("planar2", planar2);
        r
    }

    pub fn register_global(&mut self, name: &'static str, f: GlobalFactory) {
        self.globals.insert(name, f);
    }

    pub fn register_local(&mut self, name: &'static str, f: LocalFactory) {
        self.locals.insert(name, f);
    }

    pub fn register_robot(&mut self, name: &'static str, f: RobotFactory) {
        self.robots.insert(name, f);
    }

    pub fn global(&self, name: &str, s: &SearchSettings) -> Result<Box<dyn GlobalOptimizer>, RegistryError> {
        self.globals.get(name).map(|f| f(s)).ok_or_else(|| unknown("global", name, &self.globals))
    }

    pub fn local(&self, name: &str, s: &SearchSettings) -> Result<Box<dyn LocalOptimizer>, RegistryError> {
        self.locals.get(name).map(|f| f(s)).ok_or_else(|| unknown("local", name, &self.locals))
    }

    pub fn robot_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.robots.keys().copied()
    }

    pub fn global_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.globals.keys().copied()
    }

    pub fn local_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.locals.keys().copied()
    }

    /// A registered robot name, else a path to a robot JSON file.
    pub fn robot(&self, name_or_path: &str) -> Result<RobotModel, RegistryError> {
        if let Some(f) = self.robots.get(name_or_path) {
            return Ok(f());
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Ok(RobotModel::load(path)?);
        }
        Err(unknown("robot", name_or_path, &self.robots))
    }
}
