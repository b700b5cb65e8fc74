//! Metric-like cost functions and the periodicity-cost functional
//! `C_t^h(U, c) = ∫_U c(x, φ_t^h(x)) dμ_ω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, IntegratorConfig, SystemDef, TimeVector};
use crate::error::{Error, Result};
use crate::geometry::{sample_points, ChartPoint, DarbouxChart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    /// Euclidean distance between ambient embeddings.
    Chordal,
    /// Its square.
    ChordalSq,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Chordal => "chordal",
            CostKind::ChordalSq => "chordal-sq",
        }
    }

    /// Apply to two ambient vectors.
    pub fn eval_ambient(self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self {
            CostKind::Chordal => sq.sqrt(),
            CostKind::ChordalSq => sq,
        }
    }
}

impl std::str::FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chordal" => Ok(CostKind::Chordal),
            "chordal-sq" => Ok(CostKind::ChordalSq),
            other => Err(Error::UnknownCost(other.to_string())),
        }
    }
}

/// A continuous metric-like cost on a chart, computed through the chart's
/// injective embedding. Symmetric and vanishing exactly on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    pub kind: CostKind,
    pub chart: DarbouxChart,
}

impl CostFunction {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn eval(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        let a = self.chart.embed(x)?;
        let b = self.chart.embed(y)?;
        Ok(self.kind.eval_ambient(&a, &b))
    }
}

pub fn make_cost(name: &str, chart: &DarbouxChart) -> Result<CostFunction> {
    Ok(CostFunction {
        kind: name.parse()?,
        chart: chart.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub t: TimeVector,
    pub seed: u64,
    /// Samples dropped because the flow failed.
    #[serde(default)]
    pub failed: usize,
}

/// Axis-aligned box in chart coordinates, restricting the integration domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub bounds: Vec<(f64, f64)>,
}

impl BoxRegion {
    pub fn contains(&self, coords: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(coords)
            .all(|((lo, hi), x)| x > lo && x < hi)
    }
}

pub const MIN_SAMPLES: usize = 100;
const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Monte Carlo estimate of `C_t^h(M, c)` from `n_samples` μ_ω-uniform points.
pub fn periodicity_cost(
    sys: &SystemDef,
    t: &TimeVector,
    c: &CostFunction,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<CostEstimate> {
    check_inputs(sys, c, n_samples, cfg)?;
    let samples = sample_points(&sys.chart, n_samples, seed);
    estimate_on_samples(sys, t, c, &samples, seed, cfg, None)
}

/// `C_t^h(U, c)` for a box `U`. The integrand is multiplied by the indicator
/// of `U`, so the estimate stays normalized by the full chart volume.
pub fn periodicity_cost_in(
    sys: &SystemDef,
    t: &TimeVector,
    c: &CostFunction,
    region: &BoxRegion,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<CostEstimate> {
    check_inputs(sys, c, n_samples, cfg)?;
    if region.bounds.len() != sys.chart.dimension() {
        return Err(Error::InvalidInput(
            "region dimension does not match the chart".into(),
        ));
    }
    let samples = sample_points(&sys.chart, n_samples, seed);
    estimate_on_samples(sys, t, c, &samples, seed, cfg, Some(region))
}

/// Evaluate along `t_path`, reusing one sample set for every entry.
pub fn cost_continuity_probe(
    sys: &SystemDef,
    c: &CostFunction,
    t_path: &[TimeVector],
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<Vec<CostEstimate>> {
    if t_path.is_empty() {
        return Err(Error::InvalidInput("time path is empty".into()));
    }
    check_inputs(sys, c, n_samples, cfg)?;
    let samples = sample_points(&sys.chart, n_samples, seed);
    t_path
        .iter()
        .map(|t| estimate_on_samples(sys, t, c, &samples, seed, cfg, None))
        .collect()
}

pub(crate) fn check_inputs(
    sys: &SystemDef,
    c: &CostFunction,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "n_samples must be at least {MIN_SAMPLES}, got {n_samples}"
        )));
    }
    check_setup(sys, c, cfg)
}

pub(crate) fn check_setup(sys: &SystemDef, c: &CostFunction, cfg: &IntegratorConfig) -> Result<()> {
    if c.chart != sys.chart {
        return Err(Error::InvalidInput(format!(
            "cost is defined on chart {}, system lives on {}",
            c.chart.id(),
            sys.chart.id()
        )));
    }
    cfg.validate()
}

/// Core estimator with common random numbers: the caller owns `samples`.
pub(crate) fn estimate_on_samples(
    sys: &SystemDef,
    t: &TimeVector,
    c: &CostFunction,
    samples: &[ChartPoint],
    seed: u64,
    cfg: &IntegratorConfig,
    region: Option<&BoxRegion>,
) -> Result<CostEstimate> {
    if t.len() != sys.half_dimension() {
        return Err(Error::InvalidInput(format!(
            "time vector has {} entries, system has n = {}",
            t.len(),
            sys.half_dimension()
        )));
    }
    let integrand: Vec<Option<f64>> = samples
        .par_iter()
        .map(|x| {
            if let Some(r) = region {
                if !r.contains(x.coords()) {
                    return Some(0.0);
                }
            }
            let y = flow(sys, t, x, cfg).ok()?;
            c.eval(x, &y).ok()
        })
        .collect();

    let failed = integrand.iter().filter(|v| v.is_none()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * samples.len() as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total: samples.len(),
        });
    }
    let values: Vec<f64> = integrand.into_iter().flatten().collect();
    let (mean, sd) = mean_and_sd(&values);
    let volume = sys.chart.total_volume();
    let n = values.len();
    Ok(CostEstimate {
        value: mean * volume,
        std_error: sd * volume / (n as f64).sqrt(),
        n_samples: n,
        t: t.clone(),
        seed,
        failed,
    })
}

/// Sample mean and (n − 1)-normalized standard deviation, summed in index
/// order so the result does not depend on the worker count.
pub(crate) fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean cost between independent μ_ω-uniform point pairs.
pub fn cost_scale(c: &CostFunction, pairs: usize, seed: u64) -> Result<f64> {
    let stream = seed ^ 0x7363_616c_6521_0000;
    let pts = sample_points(&c.chart, 2 * pairs.max(1), stream);
    let values = pts
        .chunks_exact(2)
        .map(|p| c.eval(&p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_and_sd(&values).0)
}

/// Deterministic midpoint-rule `C_t` on a two-dimensional (n = 1) chart with
/// `cells × cells` cells. Cross-check for the Monte Carlo estimator.
pub fn periodicity_cost_quadrature(
    sys: &SystemDef,
    t: &TimeVector,
    c: &CostFunction,
    cells: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if sys.chart.dimension() != 2 {
        return Err(Error::InvalidInput(
            "grid quadrature needs a two-dimensional chart".into(),
        ));
    }
    if cells == 0 {
        return Err(Error::InvalidInput("cells must be positive".into()));
    }
    let ranges = sys.chart.coord_ranges();
    let bounds: Vec<(f64, f64)> = ranges
        .iter()
        .map(|r| match *r {
            crate::geometry::CoordRange::Angle => (0.0, std::f64::consts::TAU),
            crate::geometry::CoordRange::Open { lo, hi } => (lo, hi),
        })
        .collect();
    let h0 = (bounds[0].1 - bounds[0].0) / cells as f64;
    let h1 = (bounds[1].1 - bounds[1].0) / cells as f64;
    let rows: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let a = bounds[0].0 + (i as f64 + 0.5) * h0;
            let mut row = 0.0;
            for j in 0..cells {
                let b = bounds[1].0 + (j as f64 + 0.5) * h1;
                let x = ChartPoint::from_raw(vec![a, b]);
                let y = flow(sys, t, &x, cfg)?;
                row += c.eval(&x, &y)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum::<f64>() * h0 * h1)
}
