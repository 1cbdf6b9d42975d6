use super::schedule::Schedule;
use super::trace::{IterationTrace, StopRule, TraceStep};
use crate::contraction::SelfMap;
use crate::convexity::{ConvexStructure, WeightVector};
use crate::error::{Error, Result};
use crate::metric::{AMetricSpace, Point};

/// Iterates whose largest coordinate exceeds this abort the run.
pub const DIVERGENCE_GUARD: f64 = 1e100;

/// Below this the running product is continued in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-300;

fn check_modulus(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidModulus(delta))
    }
}

/// Running value of `A0 * prod_k [1 - (1 - delta) alpha_t^k]`.
struct BoundTracker {
    a0: f64,
    prod: f64,
    log_prod: f64,
    log_mode: bool,
}

impl BoundTracker {
    fn new(a0: f64) -> Self {
        Self {
            a0,
            prod: 1.0,
            log_prod: 0.0,
            log_mode: false,
        }
    }

    fn push(&mut self, delta: f64, alpha: f64) {
        let factor = 1.0 - (1.0 - delta) * alpha;
        self.log_prod += factor.ln();
        if !self.log_mode {
            self.prod *= factor;
            if self.prod < LOG_SPACE_THRESHOLD {
                self.log_mode = true;
            }
        }
    }

    fn value(&self) -> f64 {
        if self.log_mode {
            if self.a0 == 0.0 {
                0.0
            } else {
                (self.log_prod + self.a0.ln()).exp()
            }
        } else {
            self.a0 * self.prod
        }
    }
}

/// `A0 * prod_{k=0}^{n} [1 - (1 - delta) alpha_t^k]` for `n = 0..n_steps`,
/// i.e. element `n` bounds `A(u, .., u, x_{n+1})`.
pub fn theoretical_bound(
    delta: f64,
    schedule: &Schedule,
    a0: f64,
    n_steps: usize,
) -> Result<Vec<f64>> {
    check_modulus(delta)?;
    if !(a0 >= 0.0) || !a0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "initial distance {a0} must be finite and >= 0"
        )));
    }
    let mut tracker = BoundTracker::new(a0);
    Ok((0..n_steps)
        .map(|k| {
            tracker.push(delta, schedule.alpha_last(k));
            tracker.value()
        })
        .collect())
}

/// One Mann step `W(x, .., x, f(x); weights)`.
pub fn mann_step(
    w: &ConvexStructure,
    f: &SelfMap,
    x: &Point,
    weights: &WeightVector,
) -> Result<Point> {
    if f.dim() != w.dim() {
        return Err(Error::shape(
            format!("map of dimension {}", w.dim()),
            format!("dimension {}", f.dim()),
        ));
    }
    let fx = f.apply(x);
    let mut pts = vec![x; w.arity() - 1];
    pts.push(&fx);
    w.combine_refs(&pts, weights)
}

struct Tracking<'a> {
    u: Option<&'a Point>,
    bound: Option<(f64, &'a Schedule, BoundTracker)>,
}

fn run_loop<'a>(
    space: &AMetricSpace,
    f: &SelfMap,
    x0: &Point,
    stop: &StopRule,
    mut tracking: Tracking<'a>,
    mut step: impl FnMut(usize, &Point) -> Result<Point>,
) -> Result<IterationTrace> {
    stop.validate()?;
    space.check_dim(x0)?;
    if f.dim() != space.dim() {
        return Err(Error::shape(
            format!("map of dimension {}", space.dim()),
            format!("dimension {}", f.dim()),
        ));
    }
    if let Some(u) = tracking.u {
        space.check_dim(u)?;
    }
    let dist = |x: &Point| tracking.u.map(|u| space.repeated_unchecked(u, x));

    let mut trace = IterationTrace::default();
    trace.steps.push(TraceStep {
        n: 0,
        x: x0.clone(),
        dist_to_u: dist(x0),
        bound: tracking.bound.as_ref().map(|(_, _, b)| b.value()),
    });

    let mut x = x0.clone();
    let mut small = 0;
    let mut converged = false;
    for n in 0..stop.max_steps {
        if !f.contains(&x) {
            return Err(Error::OutsideDomain {
                step: n,
                trace: Box::new(trace),
            });
        }
        let next = step(n, &x)?;
        if !next.is_finite() || next.max_abs() > DIVERGENCE_GUARD {
            return Err(Error::Diverged {
                step: n + 1,
                trace: Box::new(trace),
            });
        }
        if next == x && f.apply(&x) == x {
            converged = true;
            break;
        }
        let moved = space.repeated_unchecked(&next, &x);
        if let Some((delta, schedule, tracker)) = tracking.bound.as_mut() {
            tracker.push(*delta, schedule.alpha_last(n));
        }
        trace.steps.push(TraceStep {
            n: n + 1,
            dist_to_u: dist(&next),
            bound: tracking.bound.as_ref().map(|(_, _, b)| b.value()),
            x: next.clone(),
        });
        x = next;
        small = if moved < stop.dist_tol { small + 1 } else { 0 };
        if small >= stop.cauchy_window {
            converged = true;
            break;
        }
    }

    trace.converged = converged;
    if converged {
        trace.residual = Some(space.repeated_unchecked(&f.apply(&x), &x));
        trace.limit = Some(x);
    }
    Ok(trace)
}

/// Picard iteration `x_{n+1} = f(x_n)`. Records `A(u,..,u,x_n)` when the
/// map carries a known fixed point; stops at once on an exact fixed point.
pub fn picard_run(
    space: &AMetricSpace,
    f: &SelfMap,
    x0: &Point,
    stop: &StopRule,
) -> Result<IterationTrace> {
    let tracking = Tracking {
        u: f.known_fixed_point(),
        bound: None,
    };
    run_loop(space, f, x0, stop, tracking, |_, x| Ok(f.apply(x)))
}

/// Mann iteration `x_{n+1} = W(x_n, .., x_n, f x_n; alpha^n)`.
///
/// `u` defaults to the map's known fixed point. With both `delta` and a fixed
/// point, each step also records the rate bound
/// `prod_{k<n} [1 - (1 - delta) alpha_t^k] A(u, .., u, x_0)`. Stops at once
/// on an exact fixed point, so `alpha_t = 1` reproduces [`picard_run`].
#[allow(clippy::too_many_arguments)]
pub fn mann_run(
    space: &AMetricSpace,
    w: &ConvexStructure,
    f: &SelfMap,
    x0: &Point,
    schedule: &Schedule,
    stop: &StopRule,
    delta: Option<f64>,
    u: Option<&Point>,
) -> Result<IterationTrace> {
    if schedule.arity() != w.arity() || w.arity() != space.arity() {
        return Err(Error::shape(
            format!("arity {}", space.arity()),
            format!(
                "structure arity {}, schedule arity {}",
                w.arity(),
                schedule.arity()
            ),
        ));
    }
    if let Some(d) = delta {
        check_modulus(d)?;
    }
    let u = u.or(f.known_fixed_point());
    let bound = match (delta, u) {
        (Some(d), Some(u)) => {
            space.check_dim(u)?;
            Some((
                d,
                schedule,
                BoundTracker::new(space.repeated_unchecked(u, x0)),
            ))
        }
        _ => None,
    };
    let tracking = Tracking { u, bound };
    run_loop(space, f, x0, stop, tracking, |n, x| {
        mann_step(w, f, x, &schedule.weights(n)?)
    })
}
