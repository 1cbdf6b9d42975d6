//! Convex A-metric spaces, Zamfirescu-type contractions and the Mann
//! iteration, with sampling-based checks for every axiom and inequality
//! involved.
//!
//! * [`metric`]: A-metric spaces, the pairwise-sum lift and an axiom checker.
//! * [`convexity`]: convex structures and the convexity inequality.
//! * [`contraction`]: AZ classification and the contraction modulus.
//! * [`iteration`]: Picard/Mann runners and the product rate bound.
//! * [`stability`]: perturbed orbits, the stability verdict and the
//!   Berinde recursion.
//! * [`cli`]: the `ametric-lab` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contraction;
pub mod convexity;
pub mod error;
pub mod iteration;
pub mod metric;
pub mod numeric;
pub mod sampling;
pub mod stability;

pub use error::{Error, Result};
pub use metric::Point;
