//! Zamfirescu-type (AZ) mappings and the contraction modulus `delta`.
//!
//! A map is AZ for constants `0 <= a < 1`, `0 <= b, c < 1/t` when every pair
//! `(x, y)` satisfies at least one of
//!
//! * AZ1: `A(fx,..,fx,fy) <= a A(x,..,x,y)`
//! * AZ2: `A(fx,..,fx,fy) <= b [A(fx,..,fx,x) + A(fy,..,fy,y)]`
//! * AZ3: `A(fx,..,fx,fy) <= c [A(fx,..,fx,y) + A(fy,..,fy,x)]`
//!
//! AZ maps obey `A(fx,..,fy) <= delta A(x,..,y) + t delta A(fx,..,x)` (and the
//! same with `A(fy,..,x)`) for some `delta < 1`; [`estimate_delta`] recovers
//! the smallest such `delta` supported by the samples.

mod az;
mod delta;
mod maps;

pub use az::{classify_az, AZCondition, AZFailure, AZParams, AZReport, PairRecord, Sides};
pub use delta::{
    estimate_delta, verify_contraction_inequalities, ContractionCheck, ContractionViolation,
    DeltaEstimate, LemmaBound,
};
pub use maps::{corpus, Domain, SelfMap};

use rayon::prelude::*;

use crate::metric::{AMetricSpace, Point};
use crate::sampling::{corner_anchors, Sampler};

/// Repeated distances needed by the AZ conditions and the modulus bounds,
/// evaluated once per pair.
#[derive(Clone, Debug)]
pub(crate) struct PairTerms {
    pub sample: usize,
    pub x: Point,
    pub y: Point,
    /// `A(fx,..,fx,fy)`
    pub lhs: f64,
    /// `A(x,..,x,y)`
    pub xy: f64,
    /// `A(fx,..,fx,x)`
    pub fx_x: f64,
    /// `A(fy,..,fy,y)`
    pub fy_y: f64,
    /// `A(fx,..,fx,y)`
    pub fx_y: f64,
    /// `A(fy,..,fy,x)`
    pub fy_x: f64,
}

impl PairTerms {
    fn new(space: &AMetricSpace, f: &SelfMap, sample: usize, x: Point, y: Point) -> Self {
        let fx = f.apply(&x);
        let fy = f.apply(&y);
        let r = |p: &Point, q: &Point| space.repeated_unchecked(p, q);
        Self {
            sample,
            lhs: r(&fx, &fy),
            xy: r(&x, &y),
            fx_x: r(&fx, &x),
            fy_y: r(&fy, &y),
            fx_y: r(&fx, &y),
            fy_x: r(&fy, &x),
            x,
            y,
        }
    }
}

/// All ordered anchor pairs, then `n_samples` random pairs. Pairs with a
/// point outside the map's domain are dropped; the second value counts them.
pub(crate) fn sample_pairs(
    space: &AMetricSpace,
    f: &SelfMap,
    sampler: &dyn Sampler,
    n_samples: usize,
) -> (Vec<PairTerms>, usize) {
    let anchors = corner_anchors(sampler, 2);
    let mut raw: Vec<(Point, Point)> = Vec::with_capacity(anchors.len().pow(2) + n_samples);
    for a in &anchors {
        for b in &anchors {
            raw.push((a.clone(), b.clone()));
        }
    }
    raw.extend(
        (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = sampler.rng_for(i as u64);
                let x = sampler.draw(&mut rng);
                let y = sampler.draw(&mut rng);
                (x, y)
            })
            .collect::<Vec<_>>(),
    );
    let total = raw.len();
    let terms: Vec<PairTerms> = raw
        .into_par_iter()
        .enumerate()
        .filter(|(_, (x, y))| f.contains(x) && f.contains(y))
        .map(|(i, (x, y))| PairTerms::new(space, f, i, x, y))
        .collect();
    let outside = total - terms.len();
    (terms, outside)
}
