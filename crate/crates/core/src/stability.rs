//! Stability of the Mann process under perturbed orbits.
//!
//! For an arbitrary sequence `y_n` let `g(f, y_n) = W(y_n, .., y_n, f y_n;
//! alpha^n)` and `eps_n = A(y_{n+1}, .., y_{n+1}, g(f, y_n))`. The process is
//! stable when `eps_n -> 0` exactly when `y_n -> u`. [`perturbed_run`] builds
//! `y_{n+1} = g(f, y_n) + p_n` for a chosen perturbation and tests both
//! limits numerically; [`forward_bound_check`] checks the per-step recursion
//! `A(y_{n+1},..,u) <= [1 - (1 - delta) alpha_t^n] A(y_n,..,u) + (t - 1) eps_n`.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contraction::{classify_az, SelfMap};
use crate::convexity::{ConvexStructure, WeightVector};
use crate::error::{Error, Result};
use crate::iteration::{
    csv_version_header, fmt_f64, mann_run, mann_step, Schedule, StopRule, DIVERGENCE_GUARD,
};
use crate::metric::{AMetricSpace, Point};
use crate::numeric::{approx_le, limit_is_zero, DEFAULT_TOL, LIMIT_TOL, LIMIT_WINDOW};
use crate::sampling::UniformBox;

/// Pairs sampled when a violation verdict triggers re-verification of the
/// AZ hypothesis.
const REVERIFY_SAMPLES: usize = 2_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerturbationKind {
    None,
    DecayingGeometric { rate: f64 },
    DecayingHarmonic,
    Constant { magnitude: f64 },
    Custom,
}

type DisplacementFn = dyn Fn(usize) -> Point + Send + Sync;

/// Additive displacement `p_n` applied after each Mann step.
///
/// The built-in kinds act along the first coordinate axis, so every
/// `l_p` norm of `p_n` equals its magnitude.
#[derive(Clone)]
pub struct Perturbation {
    kind: PerturbationKind,
    dim: usize,
    generator: Arc<DisplacementFn>,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .finish()
    }
}

impl Perturbation {
    fn axis(
        kind: PerturbationKind,
        dim: usize,
        magnitude: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            kind,
            dim,
            generator: Arc::new(move |n| {
                let mut v = vec![0.0; dim];
                v[0] = magnitude(n);
                Point::from_raw(v)
            }),
        })
    }

    pub fn none(dim: usize) -> Result<Self> {
        Self::axis(PerturbationKind::None, dim, |_| 0.0)
    }

    /// `|p_n| = rate^n`.
    pub fn decaying_geometric(dim: usize, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} outside (0, 1)"
            )));
        }
        Self::axis(
            PerturbationKind::DecayingGeometric { rate },
            dim,
            move |n| rate.powi(n.min(i32::MAX as usize) as i32),
        )
    }

    /// `|p_n| = 1 / (n + 1)`.
    pub fn decaying_harmonic(dim: usize) -> Result<Self> {
        Self::axis(PerturbationKind::DecayingHarmonic, dim, |n| {
            1.0 / (n as f64 + 1.0)
        })
    }

    /// `|p_n| = magnitude` for every `n`.
    pub fn constant(dim: usize, magnitude: f64) -> Result<Self> {
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "magnitude {magnitude} must be finite and >= 0"
            )));
        }
        Self::axis(PerturbationKind::Constant { magnitude }, dim, move |_| {
            magnitude
        })
    }

    pub fn custom<F>(dim: usize, generator: F) -> Result<Self>
    where
        F: Fn(usize) -> Point + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            kind: PerturbationKind::Custom,
            dim,
            generator: Arc::new(generator),
        })
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn displacement(&self, n: usize) -> Point {
        (self.generator)(n)
    }
}

/// `g(f, y) = W(y, .., y, f y; weights)`; the same operator as a Mann step.
pub fn mann_operator(
    w: &ConvexStructure,
    f: &SelfMap,
    y: &Point,
    weights: &WeightVector,
) -> Result<Point> {
    mann_step(w, f, y, weights)
}

/// `eps_n = A(y_{n+1}, .., y_{n+1}, g(f, y_n))` for `n = 0..len - 1`.
pub fn epsilon_sequence(
    space: &AMetricSpace,
    w: &ConvexStructure,
    f: &SelfMap,
    schedule: &Schedule,
    y_seq: &[Point],
) -> Result<Vec<f64>> {
    if y_seq.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two points of the sequence".into(),
        ));
    }
    y_seq
        .windows(2)
        .enumerate()
        .map(|(n, pair)| {
            let g = mann_operator(w, f, &pair[0], &schedule.weights(n)?)?;
            space.repeated_distance(&pair[1], &g)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Both limits vanish.
    ConsistentStable,
    /// Neither limit vanishes.
    ConsistentUnstableInput,
    /// Exactly one limit vanishes, with the AZ hypothesis re-verified.
    Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityStep {
    pub n: usize,
    pub y: Point,
    /// `eps_n`; absent on the final row, which has no successor.
    pub eps: Option<f64>,
    /// `A(y_n, .., y_n, u)`.
    pub dist_to_u: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub u: Point,
    pub steps: Vec<StabilityStep>,
    pub eps_limit_zero: bool,
    pub y_converges_to_u: bool,
    pub verdict: Verdict,
    /// Stability hypotheses that do not hold for this run.
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn eps_series(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.eps).collect()
    }

    pub fn dist_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.dist_to_u).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", csv_version_header())?;
        let dim = self.u.dim();
        let coords: Vec<String> = (1..=dim).map(|k| format!("y{k}")).collect();
        writeln!(w, "n,{},eps,dist_to_u", coords.join(","))?;
        for s in &self.steps {
            let ys: Vec<String> = s.y.coords().iter().map(|&c| fmt_f64(Some(c))).collect();
            writeln!(
                w,
                "{},{},{},{}",
                s.n,
                ys.join(","),
                fmt_f64(s.eps),
                fmt_f64(Some(s.dist_to_u))
            )?;
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn resolve_fixed_point(
    space: &AMetricSpace,
    w: &ConvexStructure,
    f: &SelfMap,
    x0: &Point,
    schedule: &Schedule,
) -> Result<Point> {
    if let Some(u) = f.known_fixed_point() {
        return Ok(u.clone());
    }
    let trace = mann_run(space, w, f, x0, schedule, &StopRule::default(), None, None)
        .map_err(|e| Error::NoFixedPoint(format!("unperturbed Mann run failed: {e}")))?;
    match (trace.limit, trace.residual) {
        (Some(u), Some(r)) if r < 1e-9 => Ok(u),
        _ => Err(Error::NoFixedPoint(
            "unperturbed Mann run did not reach a fixed point".into(),
        )),
    }
}

/// Runs `y_{n+1} = g(f, y_n) + p_n` from `y_0 = x0` for `n_steps` steps.
///
/// The fixed point `u` is the map's known fixed point, or else the limit of
/// the unperturbed Mann run. A schedule without a positive lower bound on
/// `alpha_t^n` produces a warning; the run still proceeds.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_run(
    space: &AMetricSpace,
    w: &ConvexStructure,
    f: &SelfMap,
    x0: &Point,
    schedule: &Schedule,
    perturbation: &Perturbation,
    n_steps: usize,
) -> Result<StabilityReport> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    if perturbation.dim() != space.dim() {
        return Err(Error::shape(
            format!("perturbation of dimension {}", space.dim()),
            format!("dimension {}", perturbation.dim()),
        ));
    }
    if schedule.arity() != space.arity() {
        return Err(Error::shape(
            format!("schedule of arity {}", space.arity()),
            format!("arity {}", schedule.arity()),
        ));
    }
    space.check_dim(x0)?;
    let u = resolve_fixed_point(space, w, f, x0, schedule)?;

    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    if schedule.lower_bound().is_none() {
        warnings.push("schedule has no positive lower bound on alpha_t^n; the stability guarantee does not apply".into());
    }

    let dist = |y: &Point| space.repeated_unchecked(y, &u);
    let mut steps = Vec::with_capacity(n_steps + 1);
    let mut y = x0.clone();
    for n in 0..n_steps {
        let g = mann_operator(w, f, &y, &schedule.weights(n)?)?;
        let next = g.add(&perturbation.displacement(n));
        if !next.is_finite() || next.max_abs() > DIVERGENCE_GUARD {
            warnings.push(format!(
                "perturbed orbit exceeded the divergence guard at step {}",
                n + 1
            ));
            break;
        }
        steps.push(StabilityStep {
            n,
            dist_to_u: dist(&y),
            eps: Some(space.repeated_unchecked(&next, &g)),
            y,
        });
        y = next;
    }
    steps.push(StabilityStep {
        n: steps.len(),
        dist_to_u: dist(&y),
        eps: None,
        y,
    });

    let eps: Vec<f64> = steps.iter().filter_map(|s| s.eps).collect();
    let dists: Vec<f64> = steps.iter().map(|s| s.dist_to_u).collect();
    let eps_limit_zero = limit_is_zero(&eps, LIMIT_TOL);
    let y_converges_to_u = limit_is_zero(&dists, LIMIT_TOL);

    let mut verdict = match (eps_limit_zero, y_converges_to_u) {
        (true, true) => Verdict::ConsistentStable,
        (false, false) => Verdict::ConsistentUnstableInput,
        _ => Verdict::Violation,
    };
    if verdict == Verdict::Violation {
        if !reverify_az(space, f, &steps, &u)? {
            verdict = Verdict::ConsistentUnstableInput;
            notes.push(
                "limits disagree but the map failed AZ re-verification; hypothesis not met".into(),
            );
        } else if schedule.lower_bound().is_none() {
            verdict = Verdict::ConsistentUnstableInput;
            notes.push(
                "limits disagree but the schedule lacks a lower bound; hypothesis not met".into(),
            );
        } else {
            notes.push(
                "limits disagree and the AZ hypothesis re-verified on the orbit's bounding box"
                    .into(),
            );
        }
    }

    Ok(StabilityReport {
        u,
        steps,
        eps_limit_zero,
        y_converges_to_u,
        verdict,
        warnings,
        notes,
    })
}

fn reverify_az(
    space: &AMetricSpace,
    f: &SelfMap,
    steps: &[StabilityStep],
    u: &Point,
) -> Result<bool> {
    let (lo, hi) = steps
        .iter()
        .map(|s| &s.y)
        .chain(std::iter::once(u))
        .flat_map(|p| p.coords().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c), hi.max(c))
        });
    let sampler = UniformBox::new(space.dim(), lo - 1.0, hi + 1.0, 0)?.with_anchor(u.clone());
    Ok(classify_az(space, f, None, &sampler, REVERIFY_SAMPLES, DEFAULT_TOL)?.is_az)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardCheck {
    pub passed: bool,
    pub steps_checked: usize,
    /// First step `n` where the recursion failed, with both sides.
    pub witness: Option<(usize, f64, f64)>,
}

/// Checks `A(y_{n+1},..,u) <= [1 - (1 - delta) alpha_t^n] A(y_n,..,u) + (t - 1) eps_n`
/// at every recorded step.
pub fn forward_bound_check(
    report: &StabilityReport,
    delta: f64,
    schedule: &Schedule,
    t: usize,
) -> Result<ForwardCheck> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidModulus(delta));
    }
    let tm1 = (t - 1) as f64;
    let mut checked = 0;
    for pair in report.steps.windows(2) {
        let Some(eps) = pair[0].eps else { continue };
        let n = pair[0].n;
        let factor = 1.0 - (1.0 - delta) * schedule.alpha_last(n);
        let rhs = factor * pair[0].dist_to_u + tm1 * eps;
        let lhs = pair[1].dist_to_u;
        checked += 1;
        if !approx_le(lhs, rhs, DEFAULT_TOL) {
            return Ok(ForwardCheck {
                passed: false,
                steps_checked: checked,
                witness: Some((n, lhs, rhs)),
            });
        }
    }
    Ok(ForwardCheck {
        passed: true,
        steps_checked: checked,
        witness: None,
    })
}

type EpsFn = dyn Fn(usize) -> f64 + Send + Sync;

/// Data for the extremal recursion `u_{n+1} = delta u_n + eps_n`.
#[derive(Clone)]
pub struct BerindeInput {
    delta: f64,
    eps: Arc<EpsFn>,
    u0: f64,
}

impl fmt::Debug for BerindeInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BerindeInput")
            .field("delta", &self.delta)
            .field("u0", &self.u0)
            .finish()
    }
}

impl BerindeInput {
    pub fn new<F>(delta: f64, eps: F, u0: f64) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidModulus(delta));
        }
        if !(u0 >= 0.0 && u0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "u0 = {u0} must be finite and >= 0"
            )));
        }
        Ok(Self {
            delta,
            eps: Arc::new(eps),
            u0,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn step(&self, u: f64, n: usize) -> Result<f64> {
        let e = (self.eps)(n);
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_{n} = {e} must be finite and >= 0"
            )));
        }
        Ok(self.delta * u + e)
    }
}

/// `u_0, .., u_{n_steps}` of the extremal recursion.
pub fn berinde_sequence(input: &BerindeInput, n_steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut u = input.u0;
    out.push(u);
    for n in 0..n_steps {
        u = input.step(u, n)?;
        out.push(u);
    }
    Ok(out)
}

/// Runs the extremal recursion for `n_steps` and reports whether its tail
/// meets the numerical `lim = 0` criterion at [`LIMIT_TOL`].
pub fn berinde_limit_check(input: &BerindeInput, n_steps: usize) -> Result<bool> {
    let mut tail = VecDeque::with_capacity(LIMIT_WINDOW);
    let mut u = input.u0;
    tail.push_back(u);
    for n in 0..n_steps {
        u = input.step(u, n)?;
        if tail.len() == LIMIT_WINDOW {
            tail.pop_front();
        }
        tail.push_back(u);
    }
    Ok(limit_is_zero(tail.make_contiguous(), LIMIT_TOL))
}
