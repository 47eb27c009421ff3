//! Nonlinear conjugate-gradient ascent (Polak–Ribière+) with a strong-Wolfe
//! line search, restricted to the box `[-bound, bound]^D`.
//!
//! Components sitting on a bound whose gradient points outward are frozen for
//! the step; a step that reaches the box boundary is accepted when it satisfies
//! the sufficient-increase condition and restarts the direction.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    /// Stop once the projected gradient norm falls below this.
    pub grad_tol: f64,
    pub bound: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_evals: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-5,
            bound: super::kernel::LOG_BOUND,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.1,
            max_line_evals: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    Converged,
    MaxIterations,
    /// The line search could not make progress; the best iterate is returned.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct Ascent<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub gradient: [f64; D],
    pub iterations: usize,
    pub evaluations: usize,
    pub status: OptimStatus,
    /// Objective value after each accepted iteration, starting with the
    /// initial point.
    pub trace: Vec<f64>,
}

impl<const D: usize> Ascent<D> {
    pub fn projected_gradient_norm(&self, bound: f64) -> f64 {
        norm(&project_gradient(&self.x, &self.gradient, bound))
    }
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm<const D: usize>(a: &[f64; D]) -> f64 {
    dot(a, a).sqrt()
}

fn project_gradient<const D: usize>(x: &[f64; D], g: &[f64; D], bound: f64) -> [f64; D] {
    let mut p = *g;
    for i in 0..D {
        if (x[i] <= -bound && g[i] < 0.0) || (x[i] >= bound && g[i] > 0.0) {
            p[i] = 0.0;
        }
    }
    p
}

/// Largest step along `d` that stays inside the box.
fn max_step<const D: usize>(x: &[f64; D], d: &[f64; D], bound: f64) -> f64 {
    let mut amax = f64::INFINITY;
    for i in 0..D {
        if d[i] > 0.0 {
            amax = amax.min((bound - x[i]) / d[i]);
        } else if d[i] < 0.0 {
            amax = amax.min((-bound - x[i]) / d[i]);
        }
    }
    amax.max(0.0)
}

struct Trial<const D: usize> {
    step: f64,
    x: [f64; D],
    value: f64,
    gradient: [f64; D],
    slope: f64,
}

struct LineSearch<'a, const D: usize, F> {
    f: &'a mut F,
    x: [f64; D],
    d: [f64; D],
    bound: f64,
    evals: usize,
}

impl<const D: usize, F> LineSearch<'_, D, F>
where
    F: FnMut(&[f64; D]) -> Result<(f64, [f64; D])>,
{
    fn eval(&mut self, step: f64) -> Option<Trial<D>> {
        self.evals += 1;
        let mut x = self.x;
        for i in 0..D {
            x[i] = (x[i] + step * self.d[i]).clamp(-self.bound, self.bound);
        }
        match (self.f)(&x) {
            Ok((value, gradient)) if value.is_finite() && gradient.iter().all(|g| g.is_finite()) => {
                let slope = dot(&gradient, &self.d);
                Some(Trial {
                    step,
                    x,
                    value,
                    gradient,
                    slope,
                })
            }
            _ => None,
        }
    }
}

/// Maximize `f` starting from `x0` (clamped into the box).
///
/// `f` returns the objective and its gradient. Evaluation errors at trial
/// points are treated as `-inf` and shrink the step; an error at the start
/// point is returned.
pub fn maximize<const D: usize, F>(mut f: F, x0: [f64; D], opts: &OptimizerOptions) -> Result<Ascent<D>>
where
    F: FnMut(&[f64; D]) -> Result<(f64, [f64; D])>,
{
    let bound = opts.bound;
    let mut x = x0.map(|v| v.clamp(-bound, bound));
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("objective is not finite at the start point"));
    }
    let mut evaluations = 1;
    let mut trace = vec![fx];
    let mut pg = project_gradient(&x, &g, bound);
    let mut d = pg;
    let mut prev_step_slope: Option<f64> = None;
    let mut status = OptimStatus::MaxIterations;
    let mut iterations = 0;
    let mut flat_steps = 0;

    if norm(&pg) <= opts.grad_tol {
        status = OptimStatus::Converged;
    } else {
        for iter in 1..=opts.max_iter {
            iterations = iter;
            // freeze components pushing against an active bound
            for i in 0..D {
                if (x[i] <= -bound && d[i] < 0.0) || (x[i] >= bound && d[i] > 0.0) {
                    d[i] = 0.0;
                }
            }
            let mut slope = dot(&g, &d);
            if !(slope > 0.0) {
                d = pg;
                slope = dot(&g, &d);
            }
            let amax = max_step(&x, &d, bound);
            if amax <= 0.0 || !(slope > 0.0) {
                status = OptimStatus::Stalled;
                break;
            }
            let dinf = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut a0 = match prev_step_slope {
                Some(ps) => (ps / slope).min(1e3 / dinf),
                None => (1.0 / dinf).min(1.0),
            };
            if !(a0 > 0.0) || !a0.is_finite() {
                a0 = 1.0 / dinf;
            }
            a0 = a0.min(amax);

            let mut ls = LineSearch {
                f: &mut f,
                x,
                d,
                bound,
                evals: 0,
            };
            let result = strong_wolfe(&mut ls, fx, slope, a0, amax, opts);
            evaluations += ls.evals;
            let Some((trial, hit_bound)) = result else {
                status = OptimStatus::Stalled;
                break;
            };

            let improvement = trial.value - fx;
            let pg_new = project_gradient(&trial.x, &trial.gradient, bound);
            let denom = dot(&pg, &pg);
            let mut beta = if denom > 0.0 {
                let diff: [f64; D] = std::array::from_fn(|i| pg_new[i] - pg[i]);
                (dot(&pg_new, &diff) / denom).max(0.0)
            } else {
                0.0
            };
            // restart on bound contact, every D steps, or when successive
            // gradients lose orthogonality
            if hit_bound || iter % D == 0 || dot(&pg_new, &pg).abs() >= 0.2 * dot(&pg_new, &pg_new) {
                beta = 0.0;
            }
            prev_step_slope = Some(trial.step * slope);
            x = trial.x;
            fx = trial.value;
            g = trial.gradient;
            pg = pg_new;
            for i in 0..D {
                d[i] = pg[i] + beta * d[i];
            }
            trace.push(fx);

            if norm(&pg) <= opts.grad_tol {
                status = OptimStatus::Converged;
                break;
            }
            if improvement <= 1e-14 * (1.0 + fx.abs()) {
                flat_steps += 1;
                if flat_steps >= 3 {
                    status = OptimStatus::Stalled;
                    break;
                }
            } else {
                flat_steps = 0;
            }
        }
    }

    Ok(Ascent {
        x,
        value: fx,
        gradient: g,
        iterations,
        evaluations,
        status,
        trace,
    })
}

/// Returns the accepted trial and whether it sits on the box boundary.
fn strong_wolfe<const D: usize, F>(
    ls: &mut LineSearch<'_, D, F>,
    f0: f64,
    slope0: f64,
    a0: f64,
    amax: f64,
    opts: &OptimizerOptions,
) -> Option<(Trial<D>, bool)>
where
    F: FnMut(&[f64; D]) -> Result<(f64, [f64; D])>,
{
    let (c1, c2) = (opts.wolfe_c1, opts.wolfe_c2);
    let armijo = |t: &Trial<D>| t.value >= f0 + c1 * t.step * slope0;

    let mut prev = Trial {
        step: 0.0,
        x: ls.x,
        value: f0,
        gradient: [0.0; D],
        slope: slope0,
    };
    let mut step = a0;
    let mut first = true;
    while ls.evals < opts.max_line_evals {
        let Some(t) = ls.eval(step) else {
            return zoom(ls, f0, slope0, prev, step, None, opts);
        };
        if !armijo(&t) || (!first && t.value <= prev.value) {
            return zoom(ls, f0, slope0, prev, t.step, Some(t.value), opts);
        }
        if t.slope.abs() <= c2 * slope0 {
            return Some((t, false));
        }
        if t.slope <= 0.0 {
            let hi = prev.step;
            let hi_val = prev.value;
            return zoom(ls, f0, slope0, t, hi, Some(hi_val), opts);
        }
        if t.step >= amax {
            return Some((t, true));
        }
        first = false;
        step = (t.step * 4.0).min(amax);
        prev = t;
    }
    (prev.step > 0.0).then_some((prev, false))
}

fn zoom<const D: usize, F>(
    ls: &mut LineSearch<'_, D, F>,
    f0: f64,
    slope0: f64,
    mut lo: Trial<D>,
    mut hi: f64,
    mut hi_val: Option<f64>,
    opts: &OptimizerOptions,
) -> Option<(Trial<D>, bool)>
where
    F: FnMut(&[f64; D]) -> Result<(f64, [f64; D])>,
{
    let (c1, c2) = (opts.wolfe_c1, opts.wolfe_c2);
    while ls.evals < opts.max_line_evals {
        let width = hi - lo.step;
        if width.abs() <= 1e-14 * (1.0 + lo.step.abs()) {
            break;
        }
        // quadratic through (lo, f_lo, slope_lo) and (hi, f_hi), safeguarded
        let mut step = lo.step + 0.5 * width;
        if let Some(fh) = hi_val {
            let c = (fh - lo.value - lo.slope * width) / (width * width);
            if c < 0.0 {
                let t = -lo.slope / (2.0 * c);
                let (a, b) = (0.1 * width, 0.9 * width);
                let (tmin, tmax) = if a < b { (a, b) } else { (b, a) };
                step = lo.step + t.clamp(tmin, tmax);
            }
        }
        match ls.eval(step) {
            None => {
                hi = step;
                hi_val = None;
            }
            Some(t) => {
                if t.value < f0 + c1 * t.step * slope0 || t.value <= lo.value {
                    hi = t.step;
                    hi_val = Some(t.value);
                } else {
                    if t.slope.abs() <= c2 * slope0 {
                        return Some((t, false));
                    }
                    if t.slope * (hi - lo.step) <= 0.0 {
                        hi = lo.step;
                        hi_val = Some(lo.value);
                    }
                    lo = t;
                }
            }
        }
    }
    // fall back to the best sufficient-increase point found
    (lo.step > 0.0).then_some((lo, false))
}
