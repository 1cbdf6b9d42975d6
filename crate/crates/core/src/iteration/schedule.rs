use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convexity::{RestSplit, WeightVector};
use crate::error::{Error, Result};
use crate::metric::validate_shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Harmonic,
    Geometric,
    Custom,
}

type AlphaFn = dyn Fn(usize) -> f64 + Send + Sync;

/// Per-step Mann weights `(alpha_1^n, ..., alpha_t^n)`.
///
/// Only `alpha_t^n`, the weight on `f(x_n)`, is specified per kind; the
/// remaining mass is spread over the first `t - 1` slots by a [`RestSplit`].
/// `diverges` records whether `sum_n alpha_t^n = infinity` and `lower_bound`
/// an `alpha > 0` with `alpha <= alpha_t^n` for all `n`, when one exists.
#[derive(Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    arity: usize,
    alpha: Arc<AlphaFn>,
    diverges: bool,
    lower_bound: Option<f64>,
    split: RestSplit,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schedule")
            .field("kind", &self.kind)
            .field("arity", &self.arity)
            .field("diverges", &self.diverges)
            .field("lower_bound", &self.lower_bound)
            .finish()
    }
}

impl Schedule {
    /// `alpha_t^n = alpha` for every `n`.
    pub fn constant(t: usize, alpha: f64) -> Result<Self> {
        validate_shape(t, 1)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        let positive = alpha > 0.0;
        Ok(Self {
            kind: ScheduleKind::Constant,
            arity: t,
            alpha: Arc::new(move |_| alpha),
            diverges: positive,
            lower_bound: positive.then_some(alpha),
            split: RestSplit::Equal,
        })
    }

    /// `alpha_t^n = 1 / (n + 2)`.
    pub fn harmonic(t: usize) -> Result<Self> {
        validate_shape(t, 1)?;
        Ok(Self {
            kind: ScheduleKind::Harmonic,
            arity: t,
            alpha: Arc::new(|n| 1.0 / (n as f64 + 2.0)),
            diverges: true,
            lower_bound: None,
            split: RestSplit::Equal,
        })
    }

    /// `alpha_t^n = r^n` with `0 < r < 1`; summable, so the rate bound does
    /// not force convergence.
    pub fn geometric(t: usize, r: f64) -> Result<Self> {
        validate_shape(t, 1)?;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!("ratio {r} outside (0, 1)")));
        }
        Ok(Self {
            kind: ScheduleKind::Geometric,
            arity: t,
            alpha: Arc::new(move |n| r.powi(n.min(i32::MAX as usize) as i32)),
            diverges: false,
            lower_bound: None,
            split: RestSplit::Equal,
        })
    }

    /// User-supplied `alpha_t^n`; the divergence flag and lower bound are
    /// taken on trust.
    pub fn custom<F>(t: usize, alpha: F, diverges: bool, lower_bound: Option<f64>) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        validate_shape(t, 1)?;
        if let Some(lb) = lower_bound {
            if !(lb > 0.0 && lb <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "lower bound {lb} outside (0, 1]"
                )));
            }
        }
        Ok(Self {
            kind: ScheduleKind::Custom,
            arity: t,
            alpha: Arc::new(alpha),
            diverges,
            lower_bound,
            split: RestSplit::Equal,
        })
    }

    pub fn with_split(mut self, split: RestSplit) -> Self {
        self.split = split;
        self
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn diverges(&self) -> bool {
        self.diverges
    }

    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    /// `alpha_t^n`.
    pub fn alpha_last(&self, n: usize) -> f64 {
        (self.alpha)(n)
    }

    pub fn weights(&self, n: usize) -> Result<WeightVector> {
        WeightVector::mann_with_split(self.arity, self.alpha_last(n), &self.split)
    }
}
