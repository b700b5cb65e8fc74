//! Compact symplectic manifolds represented by box-shaped Darboux charts.
//!
//! Every chart is a product of two-dimensional factors, each factor being one
//! Darboux pair `(q, p)` with `ω = dq ∧ dp`:
//!
//! * [`Factor::Sphere`]: cylindrical coordinates `(θ, z)` on the unit sphere,
//!   `θ ∈ [0, 2π)`, `z ∈ (−1, 1)`. Archimedes' theorem makes `dθ ∧ dz` the area
//!   form, so the symplectic volume is Lebesgue measure on the box.
//! * [`Factor::Torus`]: angles `(θ₁, θ₂)` on the flat torus with `ω = dθ₁ ∧ dθ₂`.
//!
//! Products concatenate coordinates and ambient embeddings, so squared chordal
//! distances add up factor by factor.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range of a single chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoordRange {
    /// Full circle `[0, 2π)`, stored reduced modulo 2π.
    Angle,
    /// Bounded open interval `(lo, hi)`.
    Open { lo: f64, hi: f64 },
}

impl CoordRange {
    pub fn length(&self) -> f64 {
        match *self {
            CoordRange::Angle => TAU,
            CoordRange::Open { lo, hi } => hi - lo,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            CoordRange::Angle => (0.0..TAU).contains(&x),
            CoordRange::Open { lo, hi } => x > lo && x < hi,
        }
    }

    pub fn is_angle(&self) -> bool {
        matches!(self, CoordRange::Angle)
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest signed angular difference `a − b`, in `(−π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    Sphere,
    Torus,
}

impl Factor {
    fn ranges(self) -> [CoordRange; 2] {
        match self {
            Factor::Sphere => [CoordRange::Angle, CoordRange::Open { lo: -1.0, hi: 1.0 }],
            Factor::Torus => [CoordRange::Angle, CoordRange::Angle],
        }
    }

    fn embedding_dim(self) -> usize {
        match self {
            Factor::Sphere => 3,
            Factor::Torus => 4,
        }
    }

    fn embed_into(self, coords: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match self {
            Factor::Sphere => {
                let (theta, z) = (coords[0], coords[1]);
                if !(z > -1.0 && z < 1.0) {
                    return Err(Error::Domain { index: 1, value: z });
                }
                let r = (1.0 - z * z).sqrt();
                out.extend_from_slice(&[r * theta.cos(), r * theta.sin(), z]);
            }
            Factor::Torus => {
                let (a, b) = (coords[0], coords[1]);
                out.extend_from_slice(&[a.cos(), a.sin(), b.cos(), b.sin()]);
            }
        }
        Ok(())
    }
}

/// A point in chart coordinates. Angular entries are kept in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    /// Validate `coords` against `chart`, reducing angular entries.
    pub fn new(chart: &DarbouxChart, coords: Vec<f64>) -> Result<Self> {
        chart.check_coords(coords)
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        ChartPoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Predicate picking out a measure-zero locus of a chart.
#[derive(Clone)]
pub struct SingularSetSpec {
    pub description: String,
    predicate: Predicate,
}

impl SingularSetSpec {
    pub fn new(
        description: impl Into<String>,
        predicate: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        SingularSetSpec {
            description: description.into(),
            predicate: Arc::new(predicate),
        }
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        (self.predicate)(coords)
    }
}

impl fmt::Debug for SingularSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SingularSetSpec")
            .field("description", &self.description)
            .finish()
    }
}

/// A product of sphere and torus factors in Darboux coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxChart {
    id: String,
    factors: Vec<Factor>,
}

impl DarbouxChart {
    pub fn new(id: impl Into<String>, factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidInput(
                "a chart needs at least one factor".into(),
            ));
        }
        Ok(DarbouxChart {
            id: id.into(),
            factors,
        })
    }

    pub fn sphere() -> Self {
        DarbouxChart {
            id: "s2".into(),
            factors: vec![Factor::Sphere],
        }
    }

    pub fn torus() -> Self {
        DarbouxChart {
            id: "t2".into(),
            factors: vec![Factor::Torus],
        }
    }

    /// Look up a chart by catalog identifier: `s2`, `t2`, `s2xs2`, `t2xt2`.
    pub fn from_id(id: &str) -> Result<Self> {
        let factors = match id {
            "s2" => vec![Factor::Sphere],
            "t2" => vec![Factor::Torus],
            "s2xs2" => vec![Factor::Sphere, Factor::Sphere],
            "t2xt2" => vec![Factor::Torus, Factor::Torus],
            _ => return Err(Error::UnknownChart(id.to_string())),
        };
        DarbouxChart::new(id, factors)
    }

    /// Concatenate charts into a product chart.
    pub fn product(charts: &[DarbouxChart]) -> Result<Self> {
        let id = charts
            .iter()
            .map(|c| c.id.as_str())
            .collect::<Vec<_>>()
            .join("x");
        let factors = charts
            .iter()
            .flat_map(|c| c.factors.iter().copied())
            .collect();
        DarbouxChart::new(id, factors)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// `n`, half the real dimension.
    pub fn half_dimension(&self) -> usize {
        self.factors.len()
    }

    pub fn dimension(&self) -> usize {
        2 * self.factors.len()
    }

    pub fn coord_ranges(&self) -> Vec<CoordRange> {
        self.factors.iter().flat_map(|f| f.ranges()).collect()
    }

    pub fn embedding_dim(&self) -> usize {
        self.factors.iter().map(|f| f.embedding_dim()).sum()
    }

    /// Symplectic volume of the chart, the product of the range lengths.
    pub fn total_volume(&self) -> f64 {
        self.coord_ranges().iter().map(CoordRange::length).product()
    }

    /// The sphere poles; empty for pure tori.
    pub fn singular_set(&self) -> SingularSetSpec {
        let sphere_heights: Vec<usize> = self
            .factors
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == Factor::Sphere)
            .map(|(i, _)| 2 * i + 1)
            .collect();
        let description = if sphere_heights.is_empty() {
            "empty".to_string()
        } else {
            "sphere poles |z| >= 1".to_string()
        };
        SingularSetSpec::new(description, move |c: &[f64]| {
            sphere_heights
                .iter()
                .any(|&i| c[i].is_nan() || c[i].abs() >= 1.0)
        })
    }

    pub(crate) fn check_coords(&self, mut coords: Vec<f64>) -> Result<ChartPoint> {
        if coords.len() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "chart {} expects {} coordinates, got {}",
                self.id,
                self.dimension(),
                coords.len()
            )));
        }
        for (i, (x, range)) in coords.iter_mut().zip(self.coord_ranges()).enumerate() {
            if !x.is_finite() {
                return Err(Error::Domain {
                    index: i,
                    value: *x,
                });
            }
            if range.is_angle() {
                *x = reduce_angle(*x);
            } else if !range.contains(*x) {
                return Err(Error::Domain {
                    index: i,
                    value: *x,
                });
            }
        }
        Ok(ChartPoint { coords })
    }

    /// Reduce angular coordinates in place.
    pub(crate) fn normalize(&self, coords: &mut [f64]) {
        for (x, range) in coords.iter_mut().zip(self.coord_ranges()) {
            if range.is_angle() {
                *x = reduce_angle(*x);
            }
        }
    }

    /// Coordinate difference `a − b` with angular entries wrapped into `(−π, π]`.
    pub fn coord_difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.coord_ranges()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(r, (x, y))| {
                if r.is_angle() {
                    angle_difference(*x, *y)
                } else {
                    x - y
                }
            })
            .collect()
    }

    /// Ambient Euclidean image of a chart point.
    ///
    /// Sphere factors map to the unit sphere in ℝ³, torus factors to a pair of
    /// unit circles in ℝ⁴. Both maps are injective on the chart.
    pub fn embed(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.embed_coords(p.coords())
    }

    pub(crate) fn embed_coords(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.embedding_dim());
        for (i, f) in self.factors.iter().enumerate() {
            f.embed_into(&coords[2 * i..2 * i + 2], &mut out)
                .map_err(|e| match e {
                    Error::Domain { index, value } => Error::Domain {
                        index: 2 * i + index,
                        value,
                    },
                    other => other,
                })?;
        }
        Ok(out)
    }

    /// Draw the `index`-th point of the stream identified by `seed`.
    ///
    /// Each index owns its own ChaCha stream, so any partition of the index
    /// range reproduces the single-threaded sequence.
    pub fn sample_point(&self, seed: u64, index: u64) -> ChartPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let ranges = self.coord_ranges();
        let singular = self.singular_set();
        loop {
            let coords: Vec<f64> = ranges
                .iter()
                .map(|r| match *r {
                    CoordRange::Angle => rng.random::<f64>() * TAU,
                    CoordRange::Open { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                })
                .collect();
            if ranges.iter().zip(&coords).all(|(r, x)| r.contains(*x))
                && !singular.contains(&coords)
            {
                return ChartPoint { coords };
            }
        }
    }
}

/// `count` i.i.d. μ_ω-uniform points, deterministic in `seed`.
pub fn sample_points(chart: &DarbouxChart, count: usize, seed: u64) -> Vec<ChartPoint> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| chart.sample_point(seed, i))
        .collect()
}
