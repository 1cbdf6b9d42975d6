use serde::{Deserialize, Serialize};

use super::az::check_map_shape;
use super::{sample_pairs, PairTerms, SelfMap};
use crate::error::{Error, Result};
use crate::metric::{AMetricSpace, Point};
use crate::numeric::approx_le;
use crate::sampling::Sampler;

/// Ratios whose denominator falls below this are skipped.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// `delta_hat` must stay this far below 1 to count as a contraction.
pub const CONTRACTION_MARGIN: f64 = 1e-9;

/// The two unified bounds, differing in the displacement term:
/// `AtX` uses `t delta A(fx,..,fx,x)`, `AtY` uses `t delta A(fy,..,fy,x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaBound {
    AtX,
    AtY,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta_hat: f64,
    pub witness_pair: Option<(Point, Point)>,
    pub witness_bound: Option<LemmaBound>,
    pub contraction: bool,
    pub samples_checked: usize,
    /// Pairs where a denominator vanished (`x = y` and `f(x) = x`).
    pub skipped_degenerate: usize,
    pub skipped_outside_domain: usize,
}

fn denominators(p: &PairTerms, t: f64) -> [(LemmaBound, f64); 2] {
    [
        (LemmaBound::AtX, p.xy + t * p.fx_x),
        (LemmaBound::AtY, p.xy + t * p.fy_x),
    ]
}

/// Smallest `delta` consistent with both unified bounds on the sampled
/// pairs: the supremum of `A(fx,..,fy) / (A(x,..,y) + t A(fx,..,x))` and of
/// the `A(fy,..,x)` variant. Ties keep the earliest sample.
pub fn estimate_delta(
    space: &AMetricSpace,
    f: &SelfMap,
    sampler: &dyn Sampler,
    n_samples: usize,
) -> Result<DeltaEstimate> {
    check_map_shape(space, f, sampler)?;
    let t = space.arity() as f64;
    let (pairs, outside) = sample_pairs(space, f, sampler, n_samples);

    let mut best: Option<(f64, usize, LemmaBound)> = None;
    let mut skipped = 0;
    for (k, p) in pairs.iter().enumerate() {
        let mut degenerate = false;
        for (bound, den) in denominators(p, t) {
            if den < DENOMINATOR_TOL {
                degenerate = true;
                continue;
            }
            let ratio = p.lhs / den;
            if best.is_none_or(|(r, _, _)| ratio > r) {
                best = Some((ratio, k, bound));
            }
        }
        skipped += degenerate as usize;
    }

    let delta_hat = best.map_or(0.0, |(r, _, _)| r);
    Ok(DeltaEstimate {
        delta_hat,
        witness_pair: best.map(|(_, k, _)| (pairs[k].x.clone(), pairs[k].y.clone())),
        witness_bound: best.map(|(_, _, b)| b),
        contraction: delta_hat < 1.0 - CONTRACTION_MARGIN,
        samples_checked: pairs.len(),
        skipped_degenerate: skipped,
        skipped_outside_domain: outside,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionViolation {
    pub sample: usize,
    pub x: Point,
    pub y: Point,
    pub bound: LemmaBound,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub delta: f64,
    pub samples_checked: usize,
    pub violations: Vec<ContractionViolation>,
    pub passed: bool,
}

/// Checks both unified bounds with the given `delta` on every sampled pair.
pub fn verify_contraction_inequalities(
    space: &AMetricSpace,
    f: &SelfMap,
    delta: f64,
    sampler: &dyn Sampler,
    n_samples: usize,
    tol: f64,
) -> Result<ContractionCheck> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidModulus(delta));
    }
    check_map_shape(space, f, sampler)?;
    let t = space.arity() as f64;
    let (pairs, _) = sample_pairs(space, f, sampler, n_samples);
    let mut violations = Vec::new();
    for p in &pairs {
        for (bound, den) in denominators(p, t) {
            let rhs = delta * den;
            if !approx_le(p.lhs, rhs, tol) {
                violations.push(ContractionViolation {
                    sample: p.sample,
                    x: p.x.clone(),
                    y: p.y.clone(),
                    bound,
                    lhs: p.lhs,
                    rhs,
                });
            }
        }
    }
    Ok(ContractionCheck {
        delta,
        samples_checked: pairs.len(),
        passed: violations.is_empty(),
        violations,
    })
}
