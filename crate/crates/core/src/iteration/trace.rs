use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{AMetricSpace, Point};

/// Version line written at the top of every CSV file.
pub fn csv_version_header() -> String {
    format!("# ametric-lab v{}", env!("CARGO_PKG_VERSION"))
}

/// Shortest round-trip formatting; empty for missing values.
pub(crate) fn fmt_f64(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub n: usize,
    pub x: Point,
    /// `A(u, .., u, x_n)`.
    pub dist_to_u: Option<f64>,
    /// Rate bound `prod_{k<n} [1 - (1 - delta) alpha_t^k] A(u, .., u, x_0)`.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub converged: bool,
    pub limit: Option<Point>,
    /// `A(f(limit), .., f(limit), limit)` when a limit was found. A
    /// stationary trace is not necessarily a fixed point of `f`.
    pub residual: Option<f64>,
}

impl IterationTrace {
    pub fn last_point(&self) -> Option<&Point> {
        self.steps.last().map(|s| &s.x)
    }

    pub fn dist_series(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.dist_to_u).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", csv_version_header())?;
        let dim = self.steps.first().map_or(0, |s| s.x.dim());
        let coords: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "n,{},dist_to_u,bound", coords.join(","))?;
        for s in &self.steps {
            let xs: Vec<String> = s.x.coords().iter().map(|&c| fmt_f64(Some(c))).collect();
            writeln!(
                w,
                "{},{},{},{}",
                s.n,
                xs.join(","),
                fmt_f64(s.dist_to_u),
                fmt_f64(s.bound)
            )?;
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// When a run stops: after `max_steps`, or once `A(x_{n+1},..,x_{n+1},x_n)`
/// has stayed below `dist_tol` for `cauchy_window` consecutive steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_steps: usize,
    pub dist_tol: f64,
    pub cauchy_window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            dist_tol: 1e-12,
            cauchy_window: 5,
        }
    }
}

impl StopRule {
    pub fn new(max_steps: usize, dist_tol: f64, cauchy_window: usize) -> Result<Self> {
        let rule = Self {
            max_steps,
            dist_tol,
            cauchy_window,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "max_steps must be at least 1".into(),
            ));
        }
        if !(self.dist_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dist_tol {} must be > 0",
                self.dist_tol
            )));
        }
        if self.cauchy_window == 0 {
            return Err(Error::InvalidParameter(
                "cauchy_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    pub limit: Option<Point>,
}

/// Window used by [`detect_convergence`].
pub const DETECT_WINDOW: usize = 5;

/// Cauchy-style detection on a recorded trace: the last [`DETECT_WINDOW`]
/// consecutive repeated distances (or all of them, for short traces) must be
/// below `tol`. A single-row trace counts as stationary.
pub fn detect_convergence(
    trace: &IterationTrace,
    space: &AMetricSpace,
    tol: f64,
) -> Result<Convergence> {
    let steps = &trace.steps;
    if steps.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let start = steps.len().saturating_sub(DETECT_WINDOW + 1);
    let mut converged = true;
    for pair in steps[start..].windows(2) {
        let d = space.repeated_distance(&pair[1].x, &pair[0].x)?;
        if !(d < tol) {
            converged = false;
            break;
        }
    }
    Ok(Convergence {
        converged,
        limit: converged.then(|| steps[steps.len() - 1].x.clone()),
    })
}
