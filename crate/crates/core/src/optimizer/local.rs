//! Local maximizers over the 2-D search rectangle.

use serde::{Deserialize, Serialize};

use crate::registry::{Bounds, LocalOptimizer, LocalOutcome, Objective, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub initial_step: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Simplex diameter at which to stop, meters.
    pub xtol: f64,
    /// Relative value spread at which to stop.
    pub ftol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            initial_step: 0.05,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            xtol: 1e-3,
            ftol: 1e-4,
            max_evals: 200,
        }
    }
}

/// Counts evaluations against a budget; points are projected into bounds.
struct Budgeted<'a, 'f> {
    f: &'a mut Objective<'f>,
    bounds: &'a Bounds,
    evals: usize,
    budget: usize,
}

impl Budgeted<'_, '_> {
    /// Negated value, so the simplex machinery minimizes.
    fn cost(&mut self, x: Point2) -> Option<(Point2, f64)> {
        if self.evals >= self.budget {
            return None;
        }
        self.evals += 1;
        let x = self.bounds.project(x);
        Some((x, -(self.f)(x)))
    }
}

fn dist(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn lerp(a: Point2, b: Point2, t: f64) -> Point2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Nelder-Mead maximization of `f` from `x0`, every trial point clamped into
/// `bounds`. Stops when the simplex diameter drops below `xtol`, the value
/// spread below `ftol` relative to the best value, or the budget runs out.
pub fn nelder_mead(f: &mut Objective, x0: Point2, bounds: &Bounds, cfg: &NelderMeadConfig, budget: usize) -> LocalOutcome {
    let mut ev = Budgeted {
        f,
        bounds,
        evals: 0,
        budget: budget.min(cfg.max_evals).max(1),
    };
    let x0 = bounds.project(x0);
    // Step away from the nearer bound so the initial simplex is not flattened.
    let step = |c: f64, w: f64| {
        if c + cfg.initial_step <= w {
            c + cfg.initial_step
        } else {
            c - cfg.initial_step
        }
    };
    let init = [x0, [step(x0[0], bounds.wx), x0[1]], [x0[0], step(x0[1], bounds.wy)]];
    let mut simplex: Vec<(Point2, f64)> = Vec::with_capacity(3);
    for x in init {
        match ev.cost(x) {
            Some(v) => simplex.push(v),
            None => break,
        }
    }

    let finish = |simplex: &mut Vec<(Point2, f64)>, evals: usize| {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        LocalOutcome {
            best: simplex[0].0,
            value: -simplex[0].1,
            evals,
        }
    };
    if simplex.len() < 3 {
        return finish(&mut simplex, ev.evals);
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, second, worst) = (simplex[0], simplex[1], simplex[2]);
        let diameter = dist(best.0, second.0).max(dist(best.0, worst.0)).max(dist(second.0, worst.0));
        let spread = worst.1 - best.1;
        if diameter < cfg.xtol || spread <= cfg.ftol * best.1.abs() {
            break;
        }
        let centroid = lerp(best.0, second.0, 0.5);
        let Some(reflected) = ev.cost(lerp(centroid, worst.0, -cfg.reflection)) else { break };

        if reflected.1 < best.1 {
            let Some(expanded) = ev.cost(lerp(centroid, reflected.0, cfg.expansion)) else {
                simplex[2] = reflected;
                break;
            };
            simplex[2] = if expanded.1 < reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 < second.1 {
            simplex[2] = reflected;
            continue;
        }
        let contracted = if reflected.1 < worst.1 {
            let Some(c) = ev.cost(lerp(centroid, reflected.0, cfg.contraction)) else { break };
            (c.1 <= reflected.1).then_some(c)
        } else {
            let Some(c) = ev.cost(lerp(centroid, worst.0, cfg.contraction)) else { break };
            (c.1 < worst.1).then_some(c)
        };
        if let Some(c) = contracted {
            simplex[2] = c;
            continue;
        }
        let mut exhausted = false;
        for vertex in simplex.iter_mut().skip(1) {
            match ev.cost(lerp(best.0, vertex.0, cfg.shrink)) {
                Some(v) => *vertex = v,
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        if exhausted {
            break;
        }
    }
    finish(&mut simplex, ev.evals)
}

#[derive(Debug, Clone, Default)]
pub struct NelderMead {
    pub config: NelderMeadConfig,
}

impl LocalOptimizer for NelderMead {
    fn name(&self) -> &'static str {
        "nelder-mead"
    }

    fn maximize(&self, f: &mut Objective, x0: Point2, bounds: &Bounds, budget: usize) -> LocalOutcome {
        nelder_mead(f, x0, bounds, &self.config, budget)
    }

    fn xtol(&self) -> f64 {
        self.config.xtol
    }

    fn ftol(&self) -> f64 {
        self.config.ftol
    }
}

/// Compass (coordinate pattern) search: poll the four axis neighbours, move
/// to the first improvement, halve the step when none improves.
#[derive(Debug, Clone, Default)]
pub struct Compass {
    pub config: NelderMeadConfig,
}

impl LocalOptimizer for Compass {
    fn name(&self) -> &'static str {
        "compass"
    }

    fn maximize(&self, f: &mut Objective, x0: Point2, bounds: &Bounds, budget: usize) -> LocalOutcome {
        let budget = budget.min(self.config.max_evals).max(1);
        let mut x = bounds.project(x0);
        let mut fx = f(x);
        let mut evals = 1;
        let mut step = self.config.initial_step;
        while step >= self.config.xtol && evals < budget {
            let mut moved = false;
            for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                if evals >= budget {
                    break;
                }
                let y = bounds.project([x[0] + d[0] * step, x[1] + d[1] * step]);
                if y == x {
                    continue;
                }
                let fy = f(y);
                evals += 1;
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        LocalOutcome { best: x, value: fx, evals }
    }

    fn xtol(&self) -> f64 {
        self.config.xtol
    }

    fn ftol(&self) -> f64 {
        self.config.ftol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_quadratic() {
        let b = Bounds::new(0.5, 0.5);
        let mut f = |p: Point2| -(p[0] - 0.2).powi(2) - (p[1] + 0.1).powi(2);
        let out = nelder_mead(&mut f, [0.0, 0.0], &b, &NelderMeadConfig::default(), 200);
        assert!(dist(out.best, [0.2, -0.1]) < 1e-3, "{:?}", out.best);
    }

    #[test]
    fn constant_objective_stops_early() {
        let b = Bounds::new(0.5, 0.5);
        let mut calls = 0;
        let mut f = |_: Point2| {
            calls += 1;
            3.0
        };
        let out = nelder_mead(&mut f, [0.1, 0.1], &b, &NelderMeadConfig::default(), 200);
        assert_eq!(out.evals, 3);
        assert_eq!(out.value, 3.0);
        assert_eq!(calls, 3);
    }

    #[test]
    fn starts_at_corner_without_flat_simplex() {
        let b = Bounds::new(0.5, 0.5);
        let mut f = |p: Point2| -(p[0] - 0.1).powi(2) - (p[1] - 0.1).powi(2);
        let out = nelder_mead(&mut f, [0.5, 0.5], &b, &NelderMeadConfig::default(), 200);
        assert!(dist(out.best, [0.1, 0.1]) < 1e-3);
    }

    #[test]
    fn budget_is_respected() {
        let b = Bounds::new(0.5, 0.5);
        let mut f = |p: Point2| -(p[0] - 0.2).powi(2) - (p[1] + 0.1).powi(2);
        assert!(nelder_mead(&mut f, [0.0, 0.0], &b, &NelderMeadConfig::default(), 7).evals <= 7);
    }

    #[test]
    fn compass_finds_quadratic_peak() {
        let b = Bounds::new(0.5, 0.5);
        let mut f = |p: Point2| -(p[0] - 0.2).powi(2) - (p[1] + 0.1).powi(2);
        let out = Compass::default().maximize(&mut f, [0.0, 0.0], &b, 500);
        assert!(dist(out.best, [0.2, -0.1]) < 2e-3);
    }
}
