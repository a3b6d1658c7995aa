//! Multistart global search over the search rectangle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::registry::{Bounds, GlobalOptimizer, GlobalOutcome, LocalOptimizer, Objective, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlslConfig {
    /// Uniform samples drawn per iteration.
    pub batch: usize,
    /// Critical-radius scale.
    pub sigma: f64,
    pub max_local: usize,
    /// Total objective evaluations, samples and local searches together.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for MlslConfig {
    fn default() -> Self {
        MlslConfig {
            batch: 10,
            sigma: 2.0,
            max_local: 50,
            max_evals: 2000,
            seed: 0,
        }
    }
}

/// Critical radius after `total` uniform samples over `area`.
pub fn critical_radius(sigma: f64, area: f64, total: usize) -> f64 {
    let kn = total as f64;
    if total < 2 {
        return f64::INFINITY;
    }
    sigma * (area * kn.ln() / (kn * PI)).sqrt()
}

fn dist(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Wraps the objective so every call is counted, recorded and projected.
struct Recorder<'a, 'f> {
    f: &'a mut Objective<'f>,
    bounds: Bounds,
    trace: Vec<(Point2, f64)>,
    max_evals: usize,
    best: Option<(Point2, f64)>,
}

impl Recorder<'_, '_> {
    fn remaining(&self) -> usize {
        self.max_evals.saturating_sub(self.trace.len())
    }

    fn call(&mut self, x: Point2) -> f64 {
        let x = self.bounds.project(x);
        let v = (self.f)(x);
        self.trace.push((x, v));
        if self.best.is_none_or(|(_, b)| v > b) {
            self.best = Some((x, v));
        }
        v
    }

    fn run_local(&mut self, local: &dyn LocalOptimizer, x0: Point2) -> Point2 {
        let budget = self.remaining();
        let bounds = self.bounds;
        let mut g = |x: Point2| self.call(x);
        local.maximize(&mut g, x0, &bounds, budget).best
    }

    fn finish(self, local_runs: usize) -> GlobalOutcome {
        let (best, value) = self.best.unwrap_or(([0.0, 0.0], f64::NEG_INFINITY));
        GlobalOutcome {
            best,
            value,
            local_runs,
            evals: self.trace.len(),
            trace: self.trace,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, b: &Bounds) -> Point2 {
    [rng.random_range(-b.wx..=b.wx), rng.random_range(-b.wy..=b.wy)]
}

/// Multi-level single linkage with a pluggable local optimizer.
#[derive(Debug, Clone, Default)]
pub struct Mlsl {
    pub config: MlslConfig,
}

pub fn mlsl_optimize(f: &mut Objective, bounds: &Bounds, local: &dyn LocalOptimizer, cfg: &MlslConfig) -> GlobalOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder {
        f,
        bounds: *bounds,
        trace: Vec::new(),
        max_evals: cfg.max_evals,
        best: None,
    };
    let batch = cfg.batch.max(1);
    let mut samples: Vec<(Point2, f64)> = Vec::new();
    let mut started: Vec<bool> = Vec::new();
    let mut optima: Vec<Point2> = Vec::new();
    let mut local_runs = 0;
    let mut stale = 0;

    'outer: while rec.remaining() > 0 && local_runs < cfg.max_local {
        let before = rec.best.map(|b| b.1);
        for _ in 0..batch {
            if rec.remaining() == 0 {
                break 'outer;
            }
            let x = bounds.project(uniform(&mut rng, bounds));
            let v = rec.call(x);
            samples.push((x, v));
            started.push(false);
        }
        let r = critical_radius(cfg.sigma, bounds.area(), samples.len());
        let mut starts: Vec<usize> = (0..samples.len())
            .filter(|&i| !started[i])
            .filter(|&i| {
                let (xi, vi) = samples[i];
                !samples.iter().any(|&(xj, vj)| vj > vi && dist(xi, xj) <= r)
            })
            .filter(|&i| optima.iter().all(|&o| dist(samples[i].0, o) >= local.xtol()))
            .collect();
        starts.sort_by(|&a, &b| samples[b].1.total_cmp(&samples[a].1).then(a.cmp(&b)));
        for i in starts {
            if local_runs >= cfg.max_local || rec.remaining() == 0 {
                break 'outer;
            }
            started[i] = true;
            let opt = rec.run_local(local, samples[i].0);
            local_runs += 1;
            optima.push(opt);
        }
        let after = rec.best.map(|b| b.1);
        let improved = match (before, after) {
            (None, Some(_)) => true,
            (Some(b), Some(a)) => a - b > local.ftol(),
            _ => false,
        };
        stale = if improved { 0 } else { stale + 1 };
        if stale >= batch {
            break;
        }
    }
    rec.finish(local_runs)
}

impl GlobalOptimizer for Mlsl {
    fn name(&self) -> &'static str {
        "mlsl"
    }

    fn maximize(&self, f: &mut Objective, bounds: &Bounds, local: &dyn LocalOptimizer) -> GlobalOutcome {
        mlsl_optimize(f, bounds, local, &self.config)
    }
}

/// Uniform random sampling, then one local polish from the best sample.
/// Baseline for comparing against MLSL.
#[derive(Debug, Clone, Default)]
pub struct RandomSearch {
    pub config: MlslConfig,
}

impl GlobalOptimizer for RandomSearch {
    fn name(&self) -> &'static str {
        "random"
    }

    fn maximize(&self, f: &mut Objective, bounds: &Bounds, local: &dyn LocalOptimizer) -> GlobalOutcome {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut rec = Recorder {
            f,
            bounds: *bounds,
            trace: Vec::new(),
            max_evals: cfg.max_evals,
            best: None,
        };
        // Keep part of the budget for the polish.
        let sampling = cfg.max_evals.saturating_sub(cfg.max_evals / 5).max(1);
        let batch = cfg.batch.max(1);
        let mut stale = 0;
        while rec.trace.len() < sampling {
            let before = rec.best.map(|b| b.1);
            for _ in 0..batch {
                if rec.trace.len() >= sampling {
                    break;
                }
                let x = uniform(&mut rng, bounds);
                rec.call(x);
            }
            let after = rec.best.map(|b| b.1);
            let improved = match (before, after) {
                (Some(b), Some(a)) => a - b > local.ftol(),
                _ => true,
            };
            stale = if improved { 0 } else { stale + 1 };
            if stale >= batch {
                break;
            }
        }
        let mut local_runs = 0;
        if let Some((x0, _)) = rec.best {
            if rec.remaining() > 0 {
                rec.run_local(local, x0);
                local_runs = 1;
            }
        }
        rec.finish(local_runs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::local::NelderMead;

    #[test]
    fn radius_shrinks_with_samples() {
        let a = critical_radius(2.0, 1.0, 10);
        let b = critical_radius(2.0, 1.0, 100);
        assert!(b < a);
        let expect = 2.0 * (10f64.ln() / (10.0 * PI)).sqrt();
        assert!((a - expect).abs() < 1e-15);
    }

    #[test]
    fn unimodal_center() {
        let b = Bounds::new(0.4, 0.3);
        for seed in 0..10 {
            let mut f = |p: Point2| -(p[0] * p[0] + p[1] * p[1]);
            let cfg = MlslConfig { seed, ..Default::default() };
            let out = mlsl_optimize(&mut f, &b, &NelderMead::default(), &cfg);
            assert!(dist(out.best, [0.0, 0.0]) < 1e-3, "seed {seed}: {:?}", out.best);
            assert!(out.trace.iter().all(|&(_, v)| v <= out.value));
        }
    }

    #[test]
    fn single_local_run() {
        let b = Bounds::new(0.5, 0.5);
        let target = [0.1, -0.2];
        let mut f = |p: Point2| -dist(p, target).powi(2);
        let cfg = MlslConfig { max_local: 1, seed: 4, ..Default::default() };
        let out = mlsl_optimize(&mut f, &b, &NelderMead::default(), &cfg);
        assert_eq!(out.local_runs, 1);

        // Replaying the single local run from the best first-batch sample gives the same answer.
        let first = &out.trace[..cfg.batch];
        let (x0, _) = first.iter().copied().fold(first[0], |a, s| if s.1 > a.1 { s } else { a });
        let mut g = |p: Point2| -dist(p, target).powi(2);
        let lone = NelderMead::default().maximize(&mut g, x0, &b, usize::MAX);
        assert_eq!(lone.best, out.best);
        assert_eq!(lone.value, out.value);
    }

    #[test]
    fn budget_caps_evaluations() {
        let b = Bounds::new(0.5, 0.5);
        let mut f = |p: Point2| (7.0 * p[0]).sin() * (5.0 * p[1]).cos();
        let cfg = MlslConfig { max_evals: 137, ..Default::default() };
        let out = mlsl_optimize(&mut f, &b, &NelderMead::default(), &cfg);
        assert!(out.evals <= 137);
    }
}
