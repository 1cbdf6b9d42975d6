//! A-metric spaces over `R^d`.
//!
//! An A-metric of arity `t` is a map `A: X^t -> R` that is nonnegative, zero
//! exactly on constant tuples, and satisfies the rectangle inequality
//! `A(x_1..x_t) <= sum_i A(x_i,..,x_i,y)`. Spaces here are concrete values
//! carrying an evaluator closure; [`check_axioms`] verifies a candidate by
//! seeded sampling.

mod axioms;
mod point;

use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

pub use axioms::{check_axioms, AxiomId, AxiomReport, AxiomViolation};
pub use point::Point;

use crate::error::{Error, Result};

/// Largest arity accepted by the constructors. Pair-sum evaluation is O(t^2).
pub const MAX_ARITY: usize = 64;

type TupleFn = dyn Fn(&[&Point]) -> f64 + Send + Sync;
type PairFn = dyn Fn(&Point, &Point) -> f64 + Send + Sync;

pub(crate) fn validate_shape(arity: usize, dim: usize) -> Result<()> {
    if !(2..=MAX_ARITY).contains(&arity) {
        return Err(Error::InvalidArity(arity));
    }
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(())
}

/// A t-ary distance function on `R^d`.
#[derive(Clone)]
pub struct AMetricSpace {
    arity: usize,
    dim: usize,
    label: String,
    /// Set for pairwise-sum lifts, whose evaluator is permutation invariant.
    pairwise: bool,
    eval: Arc<TupleFn>,
}

impl fmt::Debug for AMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AMetricSpace")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .field("dim", &self.dim)
            .finish()
    }
}

impl AMetricSpace {
    /// Wraps an arbitrary evaluator. Nothing about the axioms is assumed;
    /// run [`check_axioms`] to test them.
    pub fn from_fn<F>(label: impl Into<String>, arity: usize, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        validate_shape(arity, dim)?;
        Ok(Self {
            arity,
            dim,
            label: label.into(),
            pairwise: false,
            eval: Arc::new(eval),
        })
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

    /// True for spaces built by [`lift_metric`] or [`example_space`].
    pub fn is_pairwise_lift(&self) -> bool {
        self.pairwise
    }

    /// `A(x_1, ..., x_t)`.
    pub fn evaluate<P: Borrow<Point>>(&self, points: &[P]) -> Result<f64> {
        if points.len() != self.arity {
            return Err(Error::shape(
                format!("{} points", self.arity),
                format!("{} points", points.len()),
            ));
        }
        let refs: Vec<&Point> = points.iter().map(Borrow::borrow).collect();
        for p in &refs {
            self.check_dim(p)?;
        }
        Ok((self.eval)(&refs))
    }

    /// `A(x, ..., x, y)` with `x` repeated `t - 1` times.
    pub fn repeated_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.repeated_unchecked(x, y))
    }

    pub(crate) fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::shape(
                format!("dimension {}", self.dim),
                format!("dimension {}", p.dim()),
            ));
        }
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, points: &[&Point]) -> f64 {
        (self.eval)(points)
    }

    pub(crate) fn repeated_unchecked(&self, x: &Point, y: &Point) -> f64 {
        let mut tuple = vec![x; self.arity - 1];
        tuple.push(y);
        (self.eval)(&tuple)
    }
}

/// An ordinary metric on `R^d`, the ingredient of a pairwise-sum lift.
#[derive(Clone)]
pub struct BaseMetric {
    dim: usize,
    label: String,
    eval: Arc<PairFn>,
}

impl fmt::Debug for BaseMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseMetric")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

impl BaseMetric {
    pub fn from_fn<F>(label: impl Into<String>, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        })
    }

    /// Manhattan distance.
    pub fn l1(dim: usize) -> Result<Self> {
        Self::from_fn("l1", dim, |x, y| x.l1_distance(y))
    }

    /// Euclidean distance.
    pub fn l2(dim: usize) -> Result<Self> {
        Self::from_fn("l2", dim, |x, y| x.l2_distance(y))
    }

    /// 0 if the points coincide, 1 otherwise.
    pub fn discrete(dim: usize) -> Result<Self> {
        Self::from_fn("discrete", dim, |x, y| if x == y { 0.0 } else { 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        (self.eval)(x, y)
    }

    /// Samples the metric axioms through the arity-2 lift, where A1-A3 and
    /// the symmetry lemma reduce to the ordinary metric axioms.
    pub fn check(
        &self,
        sampler: &dyn crate::sampling::Sampler,
        n_samples: usize,
        tol: f64,
    ) -> Result<AxiomReport> {
        let lifted = lift_metric(self, 2)?;
        check_axioms(&lifted, sampler, n_samples, tol)
    }
}

/// `A(x_1..x_t) = sum_{i<j} base(x_i, x_j)`.
pub fn lift_metric(base: &BaseMetric, t: usize) -> Result<AMetricSpace> {
    validate_shape(t, base.dim)?;
    let eval = base.eval.clone();
    Ok(AMetricSpace {
        arity: t,
        dim: base.dim,
        label: format!("lift({}, t={t})", base.label),
        pairwise: true,
        eval: Arc::new(move |pts: &[&Point]| pair_sum(pts, |a, b| eval(a, b))),
    })
}

/// The sum of pairwise L1 distances; for `d = 1` this is the sum of
/// `|x_i - x_j|` over all `i < j`.
pub fn example_space(t: usize, d: usize) -> Result<AMetricSpace> {
    validate_shape(t, d)?;
    Ok(AMetricSpace {
        arity: t,
        dim: d,
        label: format!("example(t={t}, d={d})"),
        pairwise: true,
        eval: Arc::new(|pts: &[&Point]| pair_sum(pts, |a, b| a.l1_distance(b))),
    })
}

fn pair_sum(pts: &[&Point], d: impl Fn(&Point, &Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            total += d(a, b);
        }
    }
    total
}
