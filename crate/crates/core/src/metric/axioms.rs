use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AMetricSpace, Point};
use crate::error::{Error, Result};
use crate::numeric::{approx_eq, approx_le};
use crate::sampling::{check_sampler_dim, corner_anchors, Sampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxiomId {
    /// Nonnegativity.
    A1,
    /// Zero iff all arguments coincide.
    A2,
    /// Rectangle inequality.
    A3,
    /// `A(x,..,x,y) = A(y,..,y,x)`.
    L2,
    /// `A(x,..,x,z) <= (t-1) A(x,..,x,y) + A(z,..,z,y)`.
    L3a,
    /// `A(x,..,x,z) <= (t-1) A(x,..,x,y) + A(y,..,y,z)`.
    L3b,
}

/// One failed check. The check is always read as `lhs <= rhs` (or `lhs = rhs`
/// for L2); for the A2 reverse direction `lhs` is the tolerance and `rhs` the
/// value that should have exceeded it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: AxiomId,
    pub tuple: Vec<Point>,
    pub lhs: f64,
    pub rhs: f64,
    /// Sample index (corner tuples come first).
    pub sample: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples_checked: usize,
    pub violations: Vec<AxiomViolation>,
    pub passed: bool,
}

impl AxiomReport {
    pub(crate) fn from_violations(samples_checked: usize, violations: Vec<AxiomViolation>) -> Self {
        Self {
            samples_checked,
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn count(&self, axiom: AxiomId) -> usize {
        self.violations.iter().filter(|v| v.axiom == axiom).count()
    }
}

/// Checks A1-A3 and the two derived lemmas on sampled tuples.
///
/// Corner tuples built from the sampler's anchors are checked first, then
/// `n_samples` random instances, each made of a random `t`-tuple plus two
/// extra points `y`, `z`.
pub fn check_axioms(
    space: &AMetricSpace,
    sampler: &dyn Sampler,
    n_samples: usize,
    tol: f64,
) -> Result<AxiomReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter(
            "n_samples must be at least 1".into(),
        ));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be >= 0"
        )));
    }
    check_sampler_dim(sampler, space.dim())?;
    let t = space.arity();

    let anchors = corner_anchors(sampler, 3);
    let mut corners = Vec::new();
    for a in &anchors {
        for b in &anchors {
            for c in &anchors {
                let mut xs = vec![a.clone(); t - 1];
                xs.push(b.clone());
                corners.push(Instance {
                    xs,
                    y: c.clone(),
                    z: b.clone(),
                });
            }
        }
    }
    let n_corners = corners.len();

    let mut violations: Vec<AxiomViolation> = corners
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, inst)| inst.check(space, tol, i))
        .collect();

    let random: Vec<AxiomViolation> = (0..n_samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = sampler.rng_for(i as u64);
            let xs = (0..t).map(|_| sampler.draw(&mut rng)).collect();
            let y = sampler.draw(&mut rng);
            let z = sampler.draw(&mut rng);
            Instance { xs, y, z }.check(space, tol, n_corners + i)
        })
        .collect();
    violations.extend(random);

    Ok(AxiomReport::from_violations(
        n_corners + n_samples,
        violations,
    ))
}

struct Instance {
    xs: Vec<Point>,
    y: Point,
    z: Point,
}

impl Instance {
    fn check(&self, space: &AMetricSpace, tol: f64, sample: usize) -> Vec<AxiomViolation> {
        let t = space.arity();
        let tm1 = (t - 1) as f64;
        let mut out = Vec::new();
        let mut flag = |axiom, tuple: Vec<&Point>, lhs, rhs| {
            out.push(AxiomViolation {
                axiom,
                tuple: tuple.into_iter().cloned().collect(),
                lhs,
                rhs,
                sample,
            })
        };

        let x = &self.xs[0];
        let (y, z) = (&self.y, &self.z);
        let xs: Vec<&Point> = self.xs.iter().collect();
        let a_xs = space.eval_unchecked(&xs);
        let r = |p: &Point, q: &Point| space.repeated_unchecked(p, q);
        let rxy = r(x, y);

        // A1
        if !approx_le(0.0, a_xs, tol) {
            flag(AxiomId::A1, xs.clone(), 0.0, a_xs);
        }
        if !approx_le(0.0, rxy, tol) {
            flag(AxiomId::A1, repeated_tuple(x, y, t), 0.0, rxy);
        }

        // A2, forward: constant tuples evaluate to zero
        let constant = vec![x; t];
        let a_const = space.eval_unchecked(&constant);
        if !(a_const.abs() <= tol) {
            flag(AxiomId::A2, constant, a_const, 0.0);
        }
        // A2, reverse: non-constant tuples evaluate above tol
        if xs.iter().any(|p| *p != x) && !(a_xs > tol) {
            flag(AxiomId::A2, xs.clone(), tol, a_xs);
        }
        if x != y && !(rxy > tol) {
            flag(AxiomId::A2, repeated_tuple(x, y, t), tol, rxy);
        }

        // A3
        let rect: f64 = self.xs.iter().map(|xi| r(xi, y)).sum();
        if !approx_le(a_xs, rect, tol) {
            let mut tuple = xs.clone();
            tuple.push(y);
            flag(AxiomId::A3, tuple, a_xs, rect);
        }

        // L2
        let ryx = r(y, x);
        if !approx_eq(rxy, ryx, tol) {
            flag(AxiomId::L2, vec![x, y], rxy, ryx);
        }

        // L3, both forms
        let rxz = r(x, z);
        let l3a = tm1 * rxy + r(z, y);
        if !approx_le(rxz, l3a, tol) {
            flag(AxiomId::L3a, vec![x, y, z], rxz, l3a);
        }
        let l3b = tm1 * rxy + r(y, z);
        if !approx_le(rxz, l3b, tol) {
            flag(AxiomId::L3b, vec![x, y, z], rxz, l3b);
        }
        out
    }
}

fn repeated_tuple<'a>(x: &'a Point, y: &'a Point, t: usize) -> Vec<&'a Point> {
    let mut v = vec![x; t - 1];
    v.push(y);
    v
}
