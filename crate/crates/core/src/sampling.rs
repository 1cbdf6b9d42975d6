//! Deterministic point samplers.
//!
//! Every sample index gets its own ChaCha stream derived from the sampler's
//! seed, so a reported witness can be reproduced from `(seed, index)` alone
//! and checkers can fan samples out to worker threads without changing the
//! result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::Point;

/// Cap on the number of deterministic corner tuples a checker enumerates.
pub(crate) const CORNER_CAP: usize = 10_000;

pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    fn seed(&self) -> u64;

    /// Draws one point from `rng`.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Point;

    /// Points checked deterministically before any random draw.
    fn anchors(&self) -> Vec<Point> {
        Vec::new()
    }

    /// The generator for sample `index`.
    fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        rng.set_stream(index);
        rng
    }
}

/// Anchors truncated so that `anchors^arity <= CORNER_CAP`.
pub(crate) fn corner_anchors(sampler: &dyn Sampler, arity: u32) -> Vec<Point> {
    let mut anchors = sampler.anchors();
    while !anchors.is_empty() && anchors.len().pow(arity) > CORNER_CAP {
        anchors.pop();
    }
    anchors
}

pub(crate) fn check_sampler_dim(sampler: &dyn Sampler, dim: usize) -> Result<()> {
    if sampler.dim() != dim {
        return Err(Error::shape(
            format!("sampler of dimension {dim}"),
            format!("sampler of dimension {}", sampler.dim()),
        ));
    }
    Ok(())
}

/// Uniform draws from the box `[lo, hi]^d`.
///
/// Anchors default to the origin (when inside the box) and the two extreme
/// corners.
#[derive(Clone, Debug)]
pub struct UniformBox {
    dim: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    anchors: Vec<Point>,
}

impl UniformBox {
    pub fn new(dim: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "sampling box [{lo}, {hi}] is empty or unbounded"
            )));
        }
        let mut anchors = Vec::new();
        if lo <= 0.0 && 0.0 <= hi {
            anchors.push(Point::zeros(dim));
        }
        anchors.push(Point::splat(dim, lo));
        anchors.push(Point::splat(dim, hi));
        Ok(Self {
            dim,
            lo,
            hi,
            seed,
            anchors,
        })
    }

    /// Adds a deterministic anchor, e.g. a known fixed point.
    pub fn with_anchor(mut self, p: Point) -> Self {
        if !self.anchors.contains(&p) {
            self.anchors.insert(0, p);
        }
        self
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl Sampler for UniformBox {
    fn dim(&self) -> usize {
        self.dim
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::from_raw(
            (0..self.dim)
                .map(|_| rng.random_range(self.lo..=self.hi))
                .collect(),
        )
    }

    fn anchors(&self) -> Vec<Point> {
        self.anchors.clone()
    }
}

/// Draws uniformly from a fixed list of points; every listed point is also an
/// anchor.
#[derive(Clone, Debug)]
pub struct GridSampler {
    dim: usize,
    points: Vec<Point>,
    seed: u64,
}

impl GridSampler {
    pub fn from_points(points: Vec<Point>, seed: u64) -> Result<Self> {
        let dim = points
            .first()
            .map(Point::dim)
            .ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::shape(format!("dimension {dim}"), "mixed dimensions"));
        }
        Ok(Self { dim, points, seed })
    }

    /// `per_axis` evenly spaced nodes per coordinate on `[lo, hi]^dim`.
    pub fn regular(dim: usize, lo: f64, hi: f64, per_axis: usize, seed: u64) -> Result<Self> {
        if per_axis < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        let axis: Vec<f64> = (0..per_axis)
            .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
            .collect();
        let mut points = vec![Vec::new()];
        for _ in 0..dim {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        Self::from_points(points.into_iter().map(Point::from_raw).collect(), seed)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

impl Sampler for GridSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Point {
        self.points[rng.random_range(0..self.points.len())].clone()
    }

    fn anchors(&self) -> Vec<Point> {
        self.points.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_per_index() {
        let s = UniformBox::new(2, -1.0, 1.0, 7).unwrap();
        let a = s.draw(&mut s.rng_for(3));
        let b = s.draw(&mut s.rng_for(3));
        let c = s.draw(&mut s.rng_for(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.coords().iter().all(|c| (-1.0..=1.0).contains(c)));
    }

    #[test]
    fn regular_grid_includes_origin_when_odd() {
        let g = GridSampler::regular(1, -5.0, 5.0, 41, 0).unwrap();
        assert_eq!(g.points().len(), 41);
        assert!(g.points().contains(&Point::scalar(0.0)));
        let g2 = GridSampler::regular(2, 0.0, 1.0, 3, 0).unwrap();
        assert_eq!(g2.points().len(), 9);
    }

    #[test]
    fn bad_boxes_rejected() {
        assert!(UniformBox::new(1, 1.0, 1.0, 0).is_err());
        assert!(UniformBox::new(0, 0.0, 1.0, 0).is_err());
        assert!(GridSampler::from_points(vec![], 0).is_err());
    }
}
