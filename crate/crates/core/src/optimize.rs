//! Box-constrained limited-memory BFGS with a backtracking Armijo line search.
//!
//! Bounds are handled by projecting trial points onto the box and freezing
//! coordinates that sit on an active bound. Objective failures (`None`) and
//! non-finite values are treated as rejected trial points.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient satisfies `‖g‖∞ ≤ gtol · max(1, |f|)`.
    pub gtol: f64,
    /// Stop when an iteration reduces `f` by at most `ftol · max(1, |f|)`.
    pub ftol: f64,
    /// Largest coordinate move of a single step.
    pub max_step: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iterations: 200,
            gtol: 1e-5,
            ftol: 1e-12,
            max_step: 2.0,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    FunctionChange,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl LbfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Gradient | Termination::FunctionChange)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// Returns `None` when the objective cannot be evaluated at the (projected) start.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LbfgsOptions) -> Option<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let dim = x0.len();
    assert!(lower.len() == dim && upper.len() == dim, "bounds must match the start point");
    let clamp = |x: &mut [f64]| x.iter_mut().enumerate().for_each(|(i, v)| *v = v.clamp(lower[i], upper[i]));
    let mut eval = |x: &[f64]| f(x).filter(|(v, g)| v.is_finite() && g.iter().all(|c| c.is_finite()));

    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = eval(&x)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    let termination = loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= opts.gtol * fx.abs().max(1.0) {
            break Termination::Gradient;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let mut dir = if attempt == 0 && !history.is_empty() { two_loop(&pg, &history) } else { pg.iter().map(|v| -v).collect() };
            for i in 0..dim {
                if (x[i] <= lower[i] && dir[i] < 0.0) || (x[i] >= upper[i] && dir[i] > 0.0) {
                    dir[i] = 0.0;
                }
            }
            if dot(&dir, &pg) >= 0.0 {
                dir = pg.iter().map(|v| -v).collect();
            }
            let dir_max = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut t = if dir_max > opts.max_step { opts.max_step / dir_max } else { 1.0 };
            if history.is_empty() {
                // First step after a reset moves at most one unit per coordinate.
                t = t.min(1.0 / dir_max);
            }
            for _ in 0..opts.max_backtracks {
                let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
                clamp(&mut trial);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                if step.iter().all(|s| *s == 0.0) {
                    break;
                }
                if let Some((ft, gt)) = eval(&trial) {
                    if ft <= fx + opts.armijo * dot(&g, &step) {
                        accepted = Some((trial, ft, gt, step));
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            history.clear();
        }

        let Some((x_new, f_new, g_new, s)) = accepted else {
            break Termination::LineSearch;
        };
        iterations += 1;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - f_new;
        let scale = fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if decrease <= opts.ftol * scale {
            break Termination::FunctionChange;
        }
    };

    Some(LbfgsOutcome { x, f: fx, grad: g, iterations, termination })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let opts = LbfgsOptions { gtol: 1e-9, ftol: 0.0, max_iterations: 500, ..Default::default() };
        let out = minimize(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts).unwrap();
        assert!(out.converged());
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn respects_active_bound() {
        let f = |x: &[f64]| Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
        let out = minimize(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &LbfgsOptions::default()).unwrap();
        assert!(out.converged());
        assert_eq!(out.x[0], 1.0);
        assert!((out.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_failed_evaluations() {
        // Undefined for x < 0.5; minimum of (x − 1)² lies inside the valid region.
        let f = |x: &[f64]| (x[0] >= 0.5).then(|| ((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]));
        let out = minimize(f, &[4.0], &[-10.0], &[10.0], &LbfgsOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!(minimize(f, &[0.0], &[-10.0], &[10.0], &LbfgsOptions::default()).is_none());
    }
}
