use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_pairs, PairTerms, SelfMap};
use crate::error::{Error, Result};
use crate::metric::{AMetricSpace, Point};
use crate::numeric::approx_le;
use crate::sampling::{check_sampler_dim, Sampler};

/// Grid spacing of the parameter search.
pub const SEARCH_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AZParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AZParams {
    /// Validates `0 <= a < 1` and `0 <= b, c < 1/t`.
    pub fn new(a: f64, b: f64, c: f64, t: usize) -> Result<Self> {
        let p = Self { a, b, c };
        p.validate(t)?;
        Ok(p)
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        let inv_t = 1.0 / t as f64;
        if !(0.0..1.0).contains(&self.a) {
            return Err(Error::InvalidParameter(format!(
                "a = {} outside [0, 1)",
                self.a
            )));
        }
        for (name, v) in [("b", self.b), ("c", self.c)] {
            if !(0.0 <= v && v < inv_t) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1/{t})"
                )));
            }
        }
        Ok(())
    }

    /// Admissible grid values `k * SEARCH_STEP` for `a` and for `b`, `c`.
    fn grid(t: usize) -> (Vec<f64>, Vec<f64>) {
        let steps = (1.0 / SEARCH_STEP).round() as usize;
        let inv_t = 1.0 / t as f64;
        let a: Vec<f64> = (0..steps)
            .map(|k| k as f64 / steps as f64)
            .filter(|&v| v < 1.0)
            .collect();
        let bc: Vec<f64> = (0..steps)
            .map(|k| k as f64 / steps as f64)
            .filter(|&v| v < inv_t)
            .collect();
        (a, bc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AZCondition {
    AZ1,
    AZ2,
    AZ3,
}

/// Which conditions held for one sampled pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub sample: usize,
    pub az1: bool,
    pub az2: bool,
    pub az3: bool,
}

impl PairRecord {
    pub fn any(&self) -> bool {
        self.az1 || self.az2 || self.az3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AZFailure {
    pub sample: usize,
    pub x: Point,
    pub y: Point,
    pub az1: Sides,
    pub az2: Sides,
    pub az3: Sides,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AZReport {
    pub samples_checked: usize,
    /// Pairs dropped because a point fell outside the map's domain.
    pub skipped_outside_domain: usize,
    /// The constants the report was evaluated with; `None` when a search
    /// found no admissible triple.
    pub params: Option<AZParams>,
    /// Pairs on which AZ1, AZ2 and AZ3 held, respectively.
    pub held_counts: [usize; 3],
    pub records: Vec<PairRecord>,
    pub failures: Vec<AZFailure>,
    pub is_az: bool,
}

fn sides(p: &PairTerms, params: &AZParams) -> [Sides; 3] {
    [
        Sides {
            lhs: p.lhs,
            rhs: params.a * p.xy,
        },
        Sides {
            lhs: p.lhs,
            rhs: params.b * (p.fx_x + p.fy_y),
        },
        Sides {
            lhs: p.lhs,
            rhs: params.c * (p.fx_y + p.fy_x),
        },
    ]
}

fn held(p: &PairTerms, params: &AZParams, tol: f64) -> [bool; 3] {
    sides(p, params).map(|s| approx_le(s.lhs, s.rhs, tol))
}

fn build_report(
    pairs: &[PairTerms],
    outside: usize,
    params: AZParams,
    tol: f64,
    found: bool,
) -> AZReport {
    let mut held_counts = [0; 3];
    let mut records = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    for p in pairs {
        let h = held(p, &params, tol);
        for (count, ok) in held_counts.iter_mut().zip(h) {
            *count += ok as usize;
        }
        let rec = PairRecord {
            sample: p.sample,
            az1: h[0],
            az2: h[1],
            az3: h[2],
        };
        if !rec.any() {
            let [az1, az2, az3] = sides(p, &params);
            failures.push(AZFailure {
                sample: p.sample,
                x: p.x.clone(),
                y: p.y.clone(),
                az1,
                az2,
                az3,
            });
        }
        records.push(rec);
    }
    let is_az = failures.is_empty() && found;
    AZReport {
        samples_checked: pairs.len(),
        skipped_outside_domain: outside,
        params: found.then_some(params),
        held_counts,
        records,
        failures,
        is_az,
    }
}

pub(crate) fn check_map_shape(
    space: &AMetricSpace,
    f: &SelfMap,
    sampler: &dyn Sampler,
) -> Result<()> {
    if f.dim() != space.dim() {
        return Err(Error::shape(
            format!("map of dimension {}", space.dim()),
            format!("dimension {}", f.dim()),
        ));
    }
    check_sampler_dim(sampler, space.dim())
}

/// Tests the AZ conditions on sampled pairs; a pair passes if at least one
/// condition holds. Without `params`, searches the admissible box on a grid
/// of step [`SEARCH_STEP`] and reports the lexicographically first `(a, b, c)`
/// that passes every pair.
pub fn classify_az(
    space: &AMetricSpace,
    f: &SelfMap,
    params: Option<AZParams>,
    sampler: &dyn Sampler,
    n_samples: usize,
    tol: f64,
) -> Result<AZReport> {
    check_map_shape(space, f, sampler)?;
    let t = space.arity();
    if let Some(p) = &params {
        p.validate(t)?;
    }
    let (pairs, outside) = sample_pairs(space, f, sampler, n_samples);

    if let Some(p) = params {
        return Ok(build_report(&pairs, outside, p, tol, true));
    }

    // Each condition only gets easier as its constant grows, so the largest
    // grid triple fails iff every grid triple does.
    let (a_grid, bc_grid) = AZParams::grid(t);
    let top = AZParams {
        a: *a_grid.last().unwrap(),
        b: *bc_grid.last().unwrap(),
        c: *bc_grid.last().unwrap(),
    };
    let passes_all = |p: &AZParams| {
        pairs
            .par_iter()
            .all(|pt| held(pt, p, tol).iter().any(|&h| h))
    };
    if !passes_all(&top) {
        return Ok(build_report(&pairs, outside, top, tol, false));
    }
    for &a in &a_grid {
        for &b in &bc_grid {
            for &c in &bc_grid {
                let p = AZParams { a, b, c };
                if passes_all(&p) {
                    return Ok(build_report(&pairs, outside, p, tol, true));
                }
            }
        }
    }
    unreachable!("the top grid triple passed")
}
