//! TOML experiment configuration. Unknown keys are rejected.

use std::path::PathBuf;

use serde::Deserialize;

use crate::contraction::{AZParams, SelfMap};
use crate::convexity::{weighted_mean_structure, ConvexStructure};
use crate::error::{Error, Result};
use crate::iteration::Schedule;
use crate::metric::{example_space, lift_metric, AMetricSpace, BaseMetric, Point};
use crate::numeric::DEFAULT_TOL;
use crate::sampling::UniformBox;
use crate::stability::Perturbation;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_BOX: [f64; 2] = [-10.0, 10.0];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub map: Option<MapConfig>,
    pub structure: Option<StructureConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub run: RunConfig,
    pub az: Option<AzConfig>,
    pub perturbation: Option<PerturbationConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Example,
    Lift,
    /// `sum_{i<j} (x_i - x_j)` summed over coordinates; violates A1.
    SignedSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseMetricKind {
    L1,
    L2,
    Discrete,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub t: usize,
    pub d: usize,
    pub base_metric: Option<BaseMetricKind>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParams {
    pub lambda: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineParams {
    pub lambda: f64,
    pub offset: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "kebab-case",
    deny_unknown_fields
)]
pub enum MapConfig {
    Linear(LambdaParams),
    Affine(AffineParams),
    Constant(ConstantParams),
    Identity,
    Doubling,
    Kannan,
    CustomTable(TableParams),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureConfig {
    WeightedMean,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaParams {
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioParams {
    pub r: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum ScheduleConfig {
    Constant(AlphaParams),
    Harmonic,
    Geometric(RatioParams),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub rate: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnitudeParams {
    pub magnitude: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum PerturbationConfig {
    None,
    #[serde(alias = "decaying_geometric")]
    Geometric(RateParams),
    #[serde(alias = "decaying_harmonic")]
    Harmonic,
    Constant(MagnitudeParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Picard,
    Mann,
    Stability,
    Check,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    pub x0: Option<Vec<f64>>,
    pub n_steps: Option<usize>,
    /// Stopping tolerance on consecutive repeated distances.
    pub tol: Option<f64>,
    pub seed: u64,
    pub samples: Option<usize>,
    #[serde(rename = "box")]
    pub bounds: Option<[f64; 2]>,
    /// Tolerance of the sampled inequality checks.
    pub check_tol: Option<f64>,
    /// Contraction modulus for the rate bound and the forward recursion check.
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AzConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

fn missing(section: &str) -> Error {
    Error::InvalidParameter(format!("config is missing the [{section}] section"))
}

fn point(coords: &[f64], dim: usize, what: &str) -> Result<Point> {
    if coords.len() != dim {
        return Err(Error::shape(
            format!("{what} of dimension {dim}"),
            format!("dimension {}", coords.len()),
        ));
    }
    Point::new(coords.to_vec())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn build_space(&self) -> Result<AMetricSpace> {
        let SpaceConfig {
            kind,
            t,
            d,
            base_metric,
        } = self.space;
        match kind {
            SpaceKind::Example => match base_metric {
                None | Some(BaseMetricKind::L1) => example_space(t, d),
                Some(other) => Err(Error::InvalidParameter(format!(
                    "example space is the l1 lift; use kind = \"lift\" for {other:?}"
                ))),
            },
            SpaceKind::Lift => {
                let base = match base_metric
                    .ok_or_else(|| Error::InvalidParameter("lift requires base_metric".into()))?
                {
                    BaseMetricKind::L1 => BaseMetric::l1(d)?,
                    BaseMetricKind::L2 => BaseMetric::l2(d)?,
                    BaseMetricKind::Discrete => BaseMetric::discrete(d)?,
                };
                lift_metric(&base, t)
            }
            SpaceKind::SignedSum => AMetricSpace::from_fn("signed-sum", t, d, |pts| {
                let mut s = 0.0;
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        s += pts[i]
                            .coords()
                            .iter()
                            .zip(pts[j].coords())
                            .map(|(a, b)| a - b)
                            .sum::<f64>();
                    }
                }
                s
            }),
        }
    }

    pub fn build_map(&self) -> Result<SelfMap> {
        let d = self.space.d;
        match self.map.as_ref().ok_or_else(|| missing("map"))? {
            MapConfig::Linear(p) => SelfMap::linear(p.lambda, d),
            MapConfig::Affine(p) => SelfMap::affine(p.lambda, point(&p.offset, d, "offset")?),
            MapConfig::Constant(p) => SelfMap::constant(point(&p.value, d, "value")?),
            MapConfig::Identity => SelfMap::identity(d),
            MapConfig::Doubling => SelfMap::doubling(d),
            MapConfig::Kannan => SelfMap::kannan(d),
            MapConfig::CustomTable(p) => {
                let to_points = |rows: &[Vec<f64>], what| {
                    rows.iter()
                        .map(|r| point(r, d, what))
                        .collect::<Result<Vec<_>>>()
                };
                SelfMap::custom_table(
                    to_points(&p.inputs, "table input")?,
                    to_points(&p.outputs, "table output")?,
                )
            }
        }
    }

    pub fn build_structure(&self) -> Result<ConvexStructure> {
        match self.structure {
            None | Some(StructureConfig::WeightedMean) => {
                weighted_mean_structure(self.space.t, self.space.d)
            }
        }
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        let t = self.space.t;
        match self.schedule.as_ref().ok_or_else(|| missing("schedule"))? {
            ScheduleConfig::Constant(p) => Schedule::constant(t, p.alpha),
            ScheduleConfig::Harmonic => Schedule::harmonic(t),
            ScheduleConfig::Geometric(p) => Schedule::geometric(t, p.r),
        }
    }

    pub fn build_perturbation(&self) -> Result<Perturbation> {
        let d = self.space.d;
        match self
            .perturbation
            .as_ref()
            .unwrap_or(&PerturbationConfig::None)
        {
            PerturbationConfig::None => Perturbation::none(d),
            PerturbationConfig::Geometric(p) => Perturbation::decaying_geometric(d, p.rate),
            PerturbationConfig::Harmonic => Perturbation::decaying_harmonic(d),
            PerturbationConfig::Constant(p) => Perturbation::constant(d, p.magnitude),
        }
    }

    pub fn az_params(&self) -> Result<Option<AZParams>> {
        self.az
            .map(|p| AZParams::new(p.a, p.b, p.c, self.space.t))
            .transpose()
    }

    pub fn sampler(&self, seed: u64) -> Result<UniformBox> {
        let [lo, hi] = self.run.bounds.unwrap_or(DEFAULT_BOX);
        UniformBox::new(self.space.d, lo, hi, seed)
    }

    pub fn samples(&self) -> usize {
        self.run.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn check_tol(&self) -> f64 {
        self.run.check_tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn x0(&self) -> Result<Point> {
        let coords = self
            .run
            .x0
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("run.x0 is required".into()))?;
        point(coords, self.space.d, "x0")
    }

    pub fn n_steps(&self) -> Result<usize> {
        self.run
            .n_steps
            .ok_or_else(|| Error::InvalidParameter("run.n_steps is required".into()))
    }
}
