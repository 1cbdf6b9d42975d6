//! Convex structures `W: X^t x [0,1]^t -> X` and the sampled check of
//! `A(u_1..u_{t-1}, W(x; a)) <= sum_i a_i A(u_1..u_{t-1}, x_i)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{validate_shape, AMetricSpace, Point};
use crate::numeric::approx_le;
use crate::sampling::{check_sampler_dim, corner_anchors, Sampler};

/// Weight sums further than this from 1 are rejected.
pub const WEIGHT_REJECT_TOL: f64 = 1e-9;
/// Weight sums within this of 1 are kept as given; anything between the two
/// thresholds is renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Convex weights `a_1, ..., a_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidWeights(format!(
                "need at least 2 weights, got {}",
                weights.len()
            )));
        }
        for &w in &weights {
            if !w.is_finite() || !(-WEIGHT_SUM_TOL..=1.0 + WEIGHT_SUM_TOL).contains(&w) {
                return Err(Error::InvalidWeights(format!("weight {w} outside [0, 1]")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_REJECT_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        let mut weights = weights;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            for w in &mut weights {
                *w /= sum;
            }
        }
        for w in &mut weights {
            *w = w.clamp(0.0, 1.0);
        }
        Ok(Self(weights))
    }

    /// All mass on slot `i`.
    pub fn basis(t: usize, i: usize) -> Result<Self> {
        if i >= t {
            return Err(Error::InvalidWeights(format!(
                "slot {i} out of range for arity {t}"
            )));
        }
        let mut w = vec![0.0; t];
        w[i] = 1.0;
        Self::new(w)
    }

    pub fn uniform(t: usize) -> Result<Self> {
        Self::new(vec![1.0 / t as f64; t])
    }

    /// Mann weights: `alpha_last` on the final slot and `1 - alpha_last`
    /// split equally over the first `t - 1`.
    pub fn mann(t: usize, alpha_last: f64) -> Result<Self> {
        Self::mann_with_split(t, alpha_last, &RestSplit::Equal)
    }

    pub fn mann_with_split(t: usize, alpha_last: f64, split: &RestSplit) -> Result<Self> {
        if t < 2 {
            return Err(Error::InvalidArity(t));
        }
        if !(0.0..=1.0).contains(&alpha_last) {
            return Err(Error::InvalidWeights(format!(
                "alpha {alpha_last} outside [0, 1]"
            )));
        }
        let rest = 1.0 - alpha_last;
        let mut w = match split {
            RestSplit::Equal => vec![rest / (t - 1) as f64; t - 1],
            RestSplit::Proportional(p) => {
                if p.len() != t - 1 || p.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::InvalidWeights(format!(
                        "split needs {} nonnegative proportions",
                        t - 1
                    )));
                }
                let total: f64 = p.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::InvalidWeights("split proportions sum to 0".into()));
                }
                p.iter().map(|v| rest * v / total).collect()
            }
        };
        w.push(alpha_last);
        Self::new(w)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The weight on the final slot, the one multiplying `f(x)` in a Mann step.
    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// How the mass `1 - alpha_t` is distributed across the first `t - 1` slots.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum RestSplit {
    #[default]
    Equal,
    Proportional(Vec<f64>),
}

type CombineFn = dyn Fn(&[&Point], &WeightVector) -> Point + Send + Sync;

#[derive(Clone)]
pub struct ConvexStructure {
    arity: usize,
    dim: usize,
    label: String,
    combine: Arc<CombineFn>,
}

impl fmt::Debug for ConvexStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexStructure")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ConvexStructure {
    pub fn from_fn<F>(
        label: impl Into<String>,
        arity: usize,
        dim: usize,
        combine: F,
    ) -> Result<Self>
    where
        F: Fn(&[&Point], &WeightVector) -> Point + Send + Sync + 'static,
    {
        validate_shape(arity, dim)?;
        Ok(Self {
            arity,
            dim,
            label: label.into(),
            combine: Arc::new(combine),
        })
    }

    /// `W(x; a) = x_1` whatever the weights. Not a convex structure; kept as
    /// a negative fixture for [`check_convexity`].
    pub fn first_slot_selector(t: usize, d: usize) -> Result<Self> {
        Self::from_fn("first-slot", t, d, |pts, _| pts[0].clone())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn combine(&self, points: &[Point], weights: &WeightVector) -> Result<Point> {
        let refs: Vec<&Point> = points.iter().collect();
        self.combine_refs(&refs, weights)
    }

    pub fn combine_refs(&self, points: &[&Point], weights: &WeightVector) -> Result<Point> {
        if points.len() != self.arity {
            return Err(Error::shape(
                format!("{} points", self.arity),
                format!("{} points", points.len()),
            ));
        }
        if weights.arity() != self.arity {
            return Err(Error::shape(
                format!("{} weights", self.arity),
                format!("{} weights", weights.arity()),
            ));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != self.dim) {
            return Err(Error::shape(
                format!("dimension {}", self.dim),
                format!("dimension {}", p.dim()),
            ));
        }
        Ok((self.combine)(points, weights))
    }

    pub(crate) fn combine_unchecked(&self, points: &[&Point], weights: &WeightVector) -> Point {
        (self.combine)(points, weights)
    }
}

/// Coordinatewise affine combination `sum_i a_i x_i`.
///
/// A weight of exactly 1 returns that slot's point unchanged.
pub fn weighted_mean_structure(t: usize, d: usize) -> Result<ConvexStructure> {
    ConvexStructure::from_fn("weighted_mean", t, d, |pts, w| {
        let w = w.as_slice();
        if let Some(i) = w.iter().position(|&a| a == 1.0) {
            return pts[i].clone();
        }
        let mut acc: Vec<f64> = pts[0].coords().iter().map(|c| w[0] * c).collect();
        for (p, &a) in pts.iter().zip(w).skip(1) {
            for (s, c) in acc.iter_mut().zip(p.coords()) {
                *s += a * c;
            }
        }
        Point::from_raw(acc)
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub u: Vec<Point>,
    pub x: Vec<Point>,
    pub weights: WeightVector,
    pub lhs: f64,
    pub rhs: f64,
    pub sample: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples_checked: usize,
    pub violations: Vec<ConvexityViolation>,
    pub passed: bool,
}

struct Instance {
    u: Vec<Point>,
    x: Vec<Point>,
    weights: WeightVector,
}

impl Instance {
    fn check(
        self,
        space: &AMetricSpace,
        w: &ConvexStructure,
        tol: f64,
        sample: usize,
    ) -> Option<ConvexityViolation> {
        let (lhs, rhs) = convexity_sides(space, w, &self.u, &self.x, &self.weights);
        (!approx_le(lhs, rhs, tol)).then_some(ConvexityViolation {
            u: self.u,
            x: self.x,
            weights: self.weights,
            lhs,
            rhs,
            sample,
        })
    }
}

/// Both sides of the convexity inequality for one instance.
pub(crate) fn convexity_sides(
    space: &AMetricSpace,
    w: &ConvexStructure,
    u: &[Point],
    x: &[Point],
    weights: &WeightVector,
) -> (f64, f64) {
    let xs: Vec<&Point> = x.iter().collect();
    let combined = w.combine_unchecked(&xs, weights);
    let mut tuple: Vec<&Point> = u.iter().collect();
    tuple.push(&combined);
    let lhs = space.eval_unchecked(&tuple);
    let rhs = x
        .iter()
        .zip(weights.as_slice())
        .map(|(xi, a)| {
            *tuple.last_mut().unwrap() = xi;
            a * space.eval_unchecked(&tuple)
        })
        .sum();
    (lhs, rhs)
}

fn random_weights(rng: &mut impl Rng, t: usize) -> WeightVector {
    let raw: Vec<f64> = (0..t).map(|_| rng.random::<f64>() + 1e-12).collect();
    let total: f64 = raw.iter().sum();
    WeightVector::new(raw.into_iter().map(|v| v / total).collect()).expect("normalized weights")
}

/// Samples the convexity inequality. Deterministic corner instances
/// (coincident points, basis weights) come before `n_samples` random ones.
pub fn check_convexity(
    space: &AMetricSpace,
    w: &ConvexStructure,
    sampler: &dyn Sampler,
    n_samples: usize,
    tol: f64,
) -> Result<ConvexityReport> {
    if space.arity() != w.arity() || space.dim() != w.dim() {
        return Err(Error::shape(
            format!(
                "structure of arity {} and dimension {}",
                space.arity(),
                space.dim()
            ),
            format!("arity {} and dimension {}", w.arity(), w.dim()),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter(
            "n_samples must be at least 1".into(),
        ));
    }
    check_sampler_dim(sampler, space.dim())?;
    let t = space.arity();

    let anchors = corner_anchors(sampler, 2);
    let mut weight_set: Vec<WeightVector> = (0..t)
        .map(|i| WeightVector::basis(t, i))
        .collect::<Result<_>>()?;
    weight_set.push(WeightVector::uniform(t)?);
    let mut corners = Vec::new();
    for a in &anchors {
        for b in &anchors {
            let u = vec![a.clone(); t - 1];
            let coincident = vec![b.clone(); t];
            let mut mixed = vec![a.clone(); t];
            mixed[0] = b.clone();
            let cycling: Vec<Point> = (0..t).map(|i| anchors[i % anchors.len()].clone()).collect();
            for x in [coincident, mixed, cycling] {
                for weights in &weight_set {
                    corners.push(Instance {
                        u: u.clone(),
                        x: x.clone(),
                        weights: weights.clone(),
                    });
                }
            }
        }
    }
    let n_corners = corners.len();

    let mut violations: Vec<ConvexityViolation> = corners
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, inst)| inst.check(space, w, tol, i))
        .collect();
    let random: Vec<ConvexityViolation> = (0..n_samples)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = sampler.rng_for(i as u64);
            let u = (0..t - 1).map(|_| sampler.draw(&mut rng)).collect();
            let x = (0..t).map(|_| sampler.draw(&mut rng)).collect();
            let weights = random_weights(&mut rng, t);
            Instance { u, x, weights }.check(space, w, tol, n_corners + i)
        })
        .collect();
    violations.extend(random);

    Ok(ConvexityReport {
        samples_checked: n_corners + n_samples,
        passed: violations.is_empty(),
        violations,
    })
}
