use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{AMetricSpace, Point};

type ApplyFn = dyn Fn(&Point) -> Point + Send + Sync;

/// Axis-aligned box a map is defined on.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn contains(&self, p: &Point) -> bool {
        p.coords()
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }
}

/// A self-map `f: R^d -> R^d`, optionally carrying its known fixed point as
/// oracle metadata.
#[derive(Clone)]
pub struct SelfMap {
    dim: usize,
    label: String,
    apply: Arc<ApplyFn>,
    known_fixed_point: Option<Point>,
    domain: Option<Domain>,
}

impl fmt::Debug for SelfMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelfMap")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("known_fixed_point", &self.known_fixed_point)
            .finish()
    }
}

impl SelfMap {
    pub fn from_fn<F>(label: impl Into<String>, dim: usize, apply: F) -> Result<Self>
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            dim,
            label: label.into(),
            apply: Arc::new(apply),
            known_fixed_point: None,
            domain: None,
        })
    }

    pub fn with_fixed_point(mut self, u: Point) -> Result<Self> {
        if u.dim() != self.dim {
            return Err(Error::shape(
                format!("dimension {}", self.dim),
                format!("dimension {}", u.dim()),
            ));
        }
        self.known_fixed_point = Some(u);
        Ok(self)
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    /// `f(x) = lambda x`.
    pub fn linear(lambda: f64, dim: usize) -> Result<Self> {
        finite_param("lambda", lambda)?;
        Self::from_fn(format!("linear({lambda})"), dim, move |x| {
            x.map(|c| lambda * c)
        })?
        .with_fixed_point(Point::zeros(dim))
    }

    /// `f(x) = lambda x + offset`, with fixed point `offset / (1 - lambda)`
    /// when `lambda != 1`.
    pub fn affine(lambda: f64, offset: Point) -> Result<Self> {
        finite_param("lambda", lambda)?;
        let dim = offset.dim();
        let fixed = (lambda != 1.0).then(|| offset.map(|c| c / (1.0 - lambda)));
        let off = offset.clone();
        let map = Self::from_fn(format!("affine({lambda})"), dim, move |x| {
            x.zip_map(&off, |c, o| lambda * c + o)
        })?;
        match fixed {
            Some(u) => map.with_fixed_point(u),
            None => Ok(map),
        }
    }

    pub fn constant(value: Point) -> Result<Self> {
        let v = value.clone();
        Self::from_fn("constant", value.dim(), move |_| v.clone())?.with_fixed_point(value)
    }

    /// Every point is fixed; no unique fixed point is recorded.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn("identity", dim, |x| x.clone())
    }

    /// `f(x) = 2x`.
    pub fn doubling(dim: usize) -> Result<Self> {
        Self::from_fn("doubling", dim, |x| x.map(|c| 2.0 * c))?.with_fixed_point(Point::zeros(dim))
    }

    /// Discontinuous piecewise-linear map, coordinatewise `c / 4` below `1/2`
    /// and `c / 5` from `1/2` on. Not Lipschitz-contractive across the jump.
    pub fn kannan(dim: usize) -> Result<Self> {
        Self::from_fn("kannan", dim, |x| {
            x.map(|c| if c < 0.5 { c / 4.0 } else { c / 5.0 })
        })?
        .with_fixed_point(Point::zeros(dim))
    }

    /// Tabulated map: nearest-neighbour (L1) lookup over `inputs`, defined
    /// only on the bounding box of the inputs. A row whose output equals its
    /// input is recorded as the fixed point.
    pub fn custom_table(inputs: Vec<Point>, outputs: Vec<Point>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::InvalidParameter(format!(
                "table needs matching non-empty columns, got {} inputs and {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let dim = inputs[0].dim();
        if inputs.iter().chain(&outputs).any(|p| p.dim() != dim) {
            return Err(Error::shape(format!("dimension {dim}"), "mixed dimensions"));
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in &inputs {
            for (k, &c) in p.coords().iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        let fixed = inputs
            .iter()
            .zip(&outputs)
            .find(|(i, o)| i == o)
            .map(|(i, _)| i.clone());
        let apply = move |x: &Point| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, p) in inputs.iter().enumerate() {
                let d = p.l1_distance(x);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            outputs[best].clone()
        };
        let mut map = Self::from_fn("custom-table", dim, apply)?.with_domain(Domain { lo, hi });
        if let Some(u) = fixed {
            map = map.with_fixed_point(u)?;
        }
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn known_fixed_point(&self) -> Option<&Point> {
        self.known_fixed_point.as_ref()
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.dim && self.domain.as_ref().is_none_or(|d| d.contains(x))
    }

    pub fn apply(&self, x: &Point) -> Point {
        (self.apply)(x)
    }

    /// `A(f(x), .., f(x), x)`; zero exactly at fixed points.
    pub fn fixed_point_residual(&self, space: &AMetricSpace, x: &Point) -> Result<f64> {
        space.repeated_distance(&self.apply(x), x)
    }
}

fn finite_param(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

/// The shipped test maps on `R^d`.
pub fn corpus(dim: usize) -> Result<Vec<SelfMap>> {
    Ok(vec![
        SelfMap::linear(0.5, dim)?,
        SelfMap::linear(0.9, dim)?,
        SelfMap::affine(0.5, Point::splat(dim, 1.0))?,
        SelfMap::constant(Point::splat(dim, 3.0))?,
        SelfMap::identity(dim)?,
        SelfMap::doubling(dim)?,
        SelfMap::kannan(dim)?,
    ])
}
