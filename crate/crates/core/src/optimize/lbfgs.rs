//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Real};

/// Objective value and gradient at a point, with an optional tracked quantity
/// that is carried into the trace but not optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub tracking: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig<T> {
    pub max_iters: usize,
    pub memory: usize,
    pub c1: T,
    pub c2: T,
    /// Stop when `||g|| <= gtol_rel * ||g_0||`.
    pub gtol_rel: T,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl<T: Real> Default for LbfgsConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            memory: 10,
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
            gtol_rel: T::lit(1e-8),
            max_line_search: 25,
        }
    }
}

impl<T: Real> LbfgsConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if self.memory == 0 {
            return Err(Error::invalid("L-BFGS memory must be >= 1"));
        }
        if !(self.c1 > T::zero() && self.c1 < self.c2 && self.c2 < T::one()) {
            return Err(Error::invalid(format!(
                "Wolfe constants need 0 < c1 < c2 < 1 (got {}, {})",
                self.c1, self.c2
            )));
        }
        if !(self.gtol_rel >= T::zero()) || self.max_line_search == 0 {
            return Err(Error::invalid(
                "gtol_rel must be >= 0 and max_line_search >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    /// Gradient norm fell below the tolerance.
    Converged,
    MaxIterations,
    /// No step satisfying the strong Wolfe conditions was found; the best
    /// iterate so far is returned.
    LineSearchFailed,
}

impl LbfgsStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iterations",
            Self::LineSearchFailed => "line-search-failed",
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub objective: T,
    pub tracking: Option<T>,
    pub grad_norm: T,
    /// Accepted line search parameter.
    pub step_length: T,
    /// `||x_{k+1} - x_k||`.
    pub step_norm: T,
    pub evaluations: usize,
    pub wolfe_ok: bool,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub tracking: Option<T>,
    pub initial_value: T,
    pub initial_tracking: Option<T>,
    pub status: LbfgsStatus,
    pub trace: Vec<IterationRecord<T>>,
    pub evaluations: usize,
}

struct Point<T> {
    x: Vec<T>,
    eval: Evaluated<T>,
}

fn checked<T: Real>(e: Evaluated<T>, n: usize) -> Result<Evaluated<T>> {
    if e.gradient.len() != n {
        return Err(Error::invalid(format!(
            "objective returned a gradient of length {}, expected {n}",
            e.gradient.len()
        )));
    }
    Ok(e)
}

/// Minimizes `f` from `x0`. Numeric failures inside the line search count as
/// rejected trial points; every other error is propagated.
pub fn lbfgs_minimize<T, F>(mut f: F, x0: &[T], config: &LbfgsConfig<T>) -> Result<LbfgsResult<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Evaluated<T>>,
{
    config.validate()?;
    let n = x0.len();
    let first = checked(f(x0)?, n)?;
    if !first.value.is_finite() || first.gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid(
            "objective is not finite at the starting point",
        ));
    }
    let mut evaluations = 1;
    let g0_norm = norm2(&first.gradient);
    let gtol = config.gtol_rel * g0_norm;
    let initial_value = first.value;
    let initial_tracking = first.tracking;
    let mut cur = Point {
        x: x0.to_vec(),
        eval: first,
    };
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(config.memory);
    let mut trace = Vec::new();
    let mut status = LbfgsStatus::MaxIterations;

    if g0_norm <= gtol || g0_norm == T::zero() {
        status = LbfgsStatus::Converged;
    } else {
        for iter in 1..=config.max_iters {
            let mut attempt = 0;
            let outcome = loop {
                let mut d = two_loop(&cur.eval.gradient, &history);
                let mut slope = dot(&cur.eval.gradient, &d);
                if !(slope < T::zero()) {
                    history.clear();
                    d = cur.eval.gradient.iter().map(|&g| -g).collect();
                    slope = dot(&cur.eval.gradient, &d);
                }
                let alpha0 = if history.is_empty() {
                    T::one() / norm2(&d)
                } else {
                    T::one()
                };
                let ls = line_search(&mut f, &cur, &d, slope, alpha0, config, &mut evaluations)?;
                match ls {
                    Some(found) => break Some((found, d)),
                    None if attempt == 0 && !history.is_empty() => {
                        log::debug!("line search failed at iteration {iter}; restarting from steepest descent");
                        history.clear();
                        attempt += 1;
                    }
                    None => break None,
                }
            };
            let Some(((alpha, next), d)) = outcome else {
                log::warn!("line search failed at iteration {iter}; returning the best iterate");
                status = LbfgsStatus::LineSearchFailed;
                break;
            };
            let s: Vec<T> = next.x.iter().zip(&cur.x).map(|(&a, &b)| a - b).collect();
            let y: Vec<T> = next
                .eval
                .gradient
                .iter()
                .zip(&cur.eval.gradient)
                .map(|(&a, &b)| a - b)
                .collect();
            let sy = dot(&s, &y);
            let step_norm = norm2(&s);
            let grad_norm = norm2(&next.eval.gradient);
            let wolfe_ok = strong_wolfe(
                cur.eval.value,
                dot(&cur.eval.gradient, &d),
                &next.eval,
                &d,
                alpha,
                config,
            );
            if sy > T::epsilon() * norm2(&y) * step_norm {
                if history.len() == config.memory {
                    history.pop_front();
                }
                history.push_back((s, y, T::one() / sy));
            }
            trace.push(IterationRecord {
                iteration: iter,
                objective: next.eval.value,
                tracking: next.eval.tracking,
                grad_norm,
                step_length: alpha,
                step_norm,
                evaluations,
                wolfe_ok,
            });
            cur = next;
            if grad_norm <= gtol {
                status = LbfgsStatus::Converged;
                break;
            }
        }
    }
    Ok(LbfgsResult {
        x: cur.x,
        value: cur.eval.value,
        gradient: cur.eval.gradient,
        tracking: cur.eval.tracking,
        initial_value,
        initial_tracking,
        status,
        trace,
        evaluations,
    })
}

fn strong_wolfe<T: Real>(
    f0: T,
    slope0: T,
    e: &Evaluated<T>,
    d: &[T],
    alpha: T,
    cfg: &LbfgsConfig<T>,
) -> bool {
    let slope = dot(&e.gradient, d);
    sufficient_decrease(f0, slope0, e.value, slope, alpha, cfg)
        && slope.abs() <= cfg.c2 * slope0.abs()
}

/// Armijo condition. When the change in `f` is at the level of its rounding
/// error (`100 eps |f|`), the slope form `phi'(alpha) <= (2 c1 - 1) phi'(0)`
/// of the condition (exact for quadratics) is used instead. Accepted values
/// never exceed `f0`.
fn sufficient_decrease<T: Real>(
    f0: T,
    slope0: T,
    value: T,
    slope: T,
    alpha: T,
    cfg: &LbfgsConfig<T>,
) -> bool {
    if value <= f0 + cfg.c1 * alpha * slope0 {
        return true;
    }
    value <= f0
        && value >= f0 - rounding_level(f0)
        && slope <= (T::lit(2.0) * cfg.c1 - T::one()) * slope0
}

pub(crate) fn rounding_level<T: Real>(f: T) -> T {
    T::lit(100.0) * T::epsilon() * f.abs()
}

/// `H g` by the two-loop recursion, returned negated (a descent direction).
fn two_loop<T: Real>(g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

struct Trial<T> {
    alpha: T,
    value: T,
    slope: T,
    point: Option<Point<T>>,
}

/// Bracketing phase followed by zoom with safeguarded cubic interpolation.
/// Returns `None` when no strong Wolfe point is found within the budget.
fn line_search<T, F>(
    f: &mut F,
    cur: &Point<T>,
    d: &[T],
    slope0: T,
    alpha0: T,
    cfg: &LbfgsConfig<T>,
    evaluations: &mut usize,
) -> Result<Option<(T, Point<T>)>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Evaluated<T>>,
{
    let f0 = cur.eval.value;
    let mut budget = cfg.max_line_search;
    let mut eval_at = |alpha: T, budget: &mut usize| -> Result<Trial<T>> {
        *budget -= 1;
        *evaluations += 1;
        let x: Vec<T> = cur
            .x
            .iter()
            .zip(d)
            .map(|(&xi, &di)| xi + alpha * di)
            .collect();
        match f(&x) {
            Ok(e) => {
                let e = checked(e, x.len())?;
                let finite = e.value.is_finite() && e.gradient.iter().all(|g| g.is_finite());
                if !finite {
                    return Ok(Trial {
                        alpha,
                        value: T::infinity(),
                        slope: T::zero(),
                        point: None,
                    });
                }
                let slope = dot(&e.gradient, d);
                Ok(Trial {
                    alpha,
                    value: e.value,
                    slope,
                    point: Some(Point { x, eval: e }),
                })
            }
            Err(err) if err.is_numeric() => Ok(Trial {
                alpha,
                value: T::infinity(),
                slope: T::zero(),
                point: None,
            }),
            Err(err) => Err(err),
        }
    };
    let armijo = |t: &Trial<T>| sufficient_decrease(f0, slope0, t.value, t.slope, t.alpha, cfg);
    let curvature = |t: &Trial<T>| t.slope.abs() <= cfg.c2 * slope0.abs();

    let mut prev = Trial {
        alpha: T::zero(),
        value: f0,
        slope: slope0,
        point: None,
    };
    let mut alpha = alpha0;
    let mut first = true;
    let (mut lo, mut hi) = loop {
        if budget == 0 {
            return Ok(None);
        }
        let t = eval_at(alpha, &mut budget)?;
        if !armijo(&t) || (!first && t.value >= prev.value) {
            break (prev, t);
        }
        if curvature(&t) {
            let a = t.alpha;
            return Ok(t.point.map(|p| (a, p)));
        }
        if t.slope >= T::zero() {
            break (t, prev);
        }
        first = false;
        alpha = t.alpha * T::lit(2.0);
        prev = t;
    };
    // zoom: lo satisfies Armijo with the lowest value so far; the minimizer
    // lies between lo and hi
    while budget > 0 {
        let a = interpolate(&lo, &hi);
        let t = eval_at(a, &mut budget)?;
        if !armijo(&t) || t.value >= lo.value {
            hi = t;
        } else {
            if curvature(&t) {
                let a = t.alpha;
                return Ok(t.point.map(|p| (a, p)));
            }
            if t.slope * (hi.alpha - lo.alpha) >= T::zero() {
                hi = lo;
            }
            lo = t;
        }
        if (hi.alpha - lo.alpha).abs() <= T::epsilon() * lo.alpha.abs().max(T::one()) {
            break;
        }
    }
    Ok(None)
}

/// Cubic interpolation of the two bracket ends, kept inside the inner 80% of
/// the interval; bisection when the cubic is unusable.
fn interpolate<T: Real>(lo: &Trial<T>, hi: &Trial<T>) -> T {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = T::lit(0.5) * (a + b);
    let width = b - a;
    if !hi.value.is_finite() || !lo.value.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - T::lit(3.0) * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if !(disc >= T::zero()) {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + T::lit(2.0) * d2;
    if denom == T::zero() {
        return mid;
    }
    let c = b - (b - a) * (hi.slope + d2 - d1) / denom;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = T::lit(0.1) * width.abs();
    if !c.is_finite() || c < left + margin || c > right - margin {
        return mid;
    }
    c
}
