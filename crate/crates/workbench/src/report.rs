//! Brute-force reach heatmap over the search plane and the per-target table.

use basecamp_core::kinematics::{ReachConfig, RobotModel};
use basecamp_core::optimizer::{OptimizationResult, PlacementCandidate, PlacementEvaluator, TargetSet, Workcell};
use rayon::prelude::*;
use serde::Serialize;

use crate::WorkbenchError;

pub const HEATMAP_PITCH: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    pub objective: f64,
    pub n_reached: usize,
    pub miss_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, y outer.
    pub cells: Vec<HeatCell>,
}

fn axis(half: f64, pitch: f64) -> Vec<f64> {
    let n = (2.0 * half / pitch + 1e-9).floor() as usize + 1;
    (0..n).map(|i| -half + i as f64 * pitch).collect()
}

/// Evaluates every grid node of the plane at `pitch` with the same targets
/// and reach settings the optimizer used.
pub fn reach_heatmap(
    workcell: &Workcell,
    targets: &TargetSet,
    robot: &RobotModel,
    reach: &ReachConfig,
    pitch: f64,
) -> Result<Heatmap, WorkbenchError> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(WorkbenchError::Usage(format!("heatmap pitch must be > 0, got {pitch}")));
    }
    let (wx, wy) = (workcell.space.half_extent_x, workcell.space.half_extent_y);
    if !(wx > 0.0 && wy > 0.0) {
        return Err(WorkbenchError::Usage("search space has zero extent".into()));
    }
    let xs = axis(wx, pitch);
    let ys = axis(wy, pitch);
    let nodes: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let evaluator = PlacementEvaluator::new(workcell, targets, robot, *reach);
    let cells = nodes
        .par_iter()
        .map(|&(x, y)| {
            let e = evaluator.evaluate(PlacementCandidate::new(x, y));
            HeatCell {
                x,
                y,
                objective: e.objective,
                n_reached: e.n_reached,
                miss_sum: e.miss_sum,
            }
        })
        .collect();
    Ok(Heatmap {
        pitch,
        nx: xs.len(),
        ny: ys.len(),
        cells,
    })
}

impl Heatmap {
    /// First cell (row-major) holding the maximum objective.
    pub fn max_index(&self) -> usize {
        (0..self.cells.len())
            .reduce(|a, b| if self.cells[b].objective > self.cells[a].objective { b } else { a })
            .expect("heatmap is never empty")
    }

    pub fn max_cell(&self) -> HeatCell {
        self.cells[self.max_index()]
    }

    /// Largest objective drop from a maximum cell to one of its eight
    /// neighbours: how much a search that lands within one pitch of the
    /// grid maximum can miss it by. Among tied maxima the one with the
    /// smallest drop counts.
    pub fn slack(&self) -> f64 {
        let top = self.max_cell().objective;
        (0..self.cells.len())
            .filter(|&k| self.cells[k].objective == top)
            .map(|k| self.local_drop(k))
            .fold(f64::INFINITY, f64::min)
    }

    fn local_drop(&self, k: usize) -> f64 {
        let (ci, cj) = ((k % self.nx) as i64, (k / self.nx) as i64);
        let top = self.cells[k].objective;
        let mut s: f64 = 0.0;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                    continue;
                }
                s = s.max(top - self.cells[j as usize * self.nx + i as usize].objective);
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(c).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

#[derive(Debug, Serialize)]
struct TargetRow<'a> {
    index: usize,
    zone_id: &'a str,
    x: f64,
    y: f64,
    z: f64,
    reached: bool,
    position_error: f64,
    failure_reason: String,
}

/// One row per target at the reported best placement, workcell frame.
pub fn targets_csv(result: &OptimizationResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (t, o) in result.targets.targets.iter().zip(&result.best.outcomes) {
        w.serialize(TargetRow {
            index: o.target_index,
            zone_id: &t.zone_id,
            x: t.position.x,
            y: t.position.y,
            z: t.position.z,
            reached: o.reached,
            position_error: o.position_error,
            failure_reason: o.failure_reason.map(|r| format!("{r:?}")).unwrap_or_default(),
        })
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Human-readable summary; the slack line doubles as the heatmap header.
pub fn report_text(result: &OptimizationResult, heatmap: &Heatmap) -> String {
    let best = &result.best;
    let max = heatmap.max_cell();
    let slack = heatmap.slack();
    let p = result.base_pose_world.position;
    let q = result.base_pose_world.orientation.quaternion();
    let offset = ((max.x - best.candidate.x).powi(2) + (max.y - best.candidate.y).powi(2)).sqrt();
    let oracle = if max.objective <= best.objective + slack { "ok" } else { "VIOLATED" };
    let mut s = String::new();
    s.push_str(&format!("robot: {}\n", result.robot));
    s.push_str(&format!(
        "base (workcell frame): x = {:.4} m, y = {:.4} m\n",
        best.candidate.x, best.candidate.y
    ));
    s.push_str(&format!(
        "base (scan frame): position [{:.4}, {:.4}, {:.4}], orientation w {:.4} x {:.4} y {:.4} z {:.4}\n",
        p.x, p.y, p.z, q.w, q.i, q.j, q.k
    ));
    s.push_str(&format!(
        "reach: {:.1}% ({}/{}), threshold {:.1}%: {}\n",
        result.reach_percentage,
        best.n_reached,
        result.targets.len(),
        result.threshold,
        if result.meets_threshold { "met" } else { "not met" }
    ));
    s.push_str(&format!("objective: {:.4} (miss sum {:.4} m)\n", best.objective, best.miss_sum));
    if let Some(h) = &result.hint {
        s.push_str(&format!("hint: {h}\n"));
    }
    s.push_str(&format!(
        "heatmap: {} x {} cells at {:.3} m pitch, max objective {:.4} at ({:.3}, {:.3}), {:.3} m from best\n",
        heatmap.nx, heatmap.ny, heatmap.pitch, max.objective, max.x, max.y, offset
    ));
    s.push_str(&format!(
        "slack: {slack:.4} (largest objective drop from the max cell to a neighbour)\n"
    ));
    s.push_str(&format!("oracle: heatmap max <= best + slack: {oracle}\n"));
    s
}
