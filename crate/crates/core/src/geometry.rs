//! Positions, observation matrices and the squared-distance cost.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, GardeError, Result};

/// A position in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Like [`Point2::new`] but rejects NaN and infinite coordinates.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Point2 { x, y })
        } else {
            Err(GardeError::NonFinitePoint { x, y })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Euclidean distance between two points.
pub fn distance(p: Point2, q: Point2) -> f64 {
    (p - q).norm()
}

/// Arithmetic mean of a non-empty point list.
pub fn centroid(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let sum = points
        .iter()
        .fold(Point2::ORIGIN, |acc, &p| acc + p);
    Point2::new(sum.x / n, sum.y / n)
}

/// Node and source positions of one network. Indices are stable identifiers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Geometry {
    pub nodes: Vec<Point2>,
    pub sources: Vec<Point2>,
}

impl Geometry {
    pub fn new(nodes: Vec<Point2>, sources: Vec<Point2>) -> Self {
        Geometry { nodes, sources }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    /// Nodes followed by sources, for metrics over the whole geometry.
    pub fn all_points(&self) -> Vec<Point2> {
        self.nodes.iter().chain(&self.sources).copied().collect()
    }

    /// Exact node-to-source distances as a fully valid observation set.
    pub fn exact_observations(&self) -> ObservationSet {
        let mut distances = Vec::with_capacity(self.nodes.len() * self.sources.len());
        for &p in &self.nodes {
            for &o in &self.sources {
                distances.push(distance(p, o));
            }
        }
        ObservationSet {
            node_count: self.nodes.len(),
            source_count: self.sources.len(),
            valid: vec![true; distances.len()],
            distances,
        }
    }

    fn check_matches(&self, obs: &ObservationSet) -> Result<()> {
        if self.nodes.len() != obs.node_count {
            return Err(GardeError::DimensionMismatch {
                what: "node count",
                expected: obs.node_count,
                actual: self.nodes.len(),
            });
        }
        if self.sources.len() != obs.source_count {
            return Err(GardeError::DimensionMismatch {
                what: "source count",
                expected: obs.source_count,
                actual: self.sources.len(),
            });
        }
        Ok(())
    }
}

/// N×K matrix of node-to-source distance estimates with a validity mask.
///
/// Storage is row-major (one row per node). Masked entries stand for
/// observations that were never made or were flagged out of range; every
/// computation in this crate skips them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    node_count: usize,
    source_count: usize,
    distances: Vec<f64>,
    valid: Vec<bool>,
}

impl ObservationSet {
    /// Fully observed set from row-major distances.
    pub fn from_dense(node_count: usize, source_count: usize, distances: Vec<f64>) -> Result<Self> {
        let valid = vec![true; distances.len()];
        Self::with_mask(node_count, source_count, distances, valid)
    }

    /// Row-major distances plus a validity mask. Masked entries may hold any value.
    pub fn with_mask(
        node_count: usize,
        source_count: usize,
        mut distances: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let len = node_count * source_count;
        if distances.len() != len {
            return Err(GardeError::DimensionMismatch {
                what: "distance entries",
                expected: len,
                actual: distances.len(),
            });
        }
        if valid.len() != len {
            return Err(GardeError::DimensionMismatch {
                what: "mask entries",
                expected: len,
                actual: valid.len(),
            });
        }
        for (idx, (d, &ok)) in distances.iter_mut().zip(&valid).enumerate() {
            if !ok {
                *d = 0.0;
                continue;
            }
            if !(d.is_finite() && *d > 0.0) {
                return Err(GardeError::InvalidObservation {
                    node: idx / source_count,
                    source_id: idx % source_count,
                    value: *d,
                });
            }
        }
        Ok(ObservationSet {
            node_count,
            source_count,
            distances,
            valid,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// The distance for (node, source), or `None` if masked.
    pub fn get(&self, node: usize, source: usize) -> Option<f64> {
        let idx = node * self.source_count + source;
        self.valid[idx].then(|| self.distances[idx])
    }

    pub fn is_valid(&self, node: usize, source: usize) -> bool {
        self.valid[node * self.source_count + source]
    }

    /// Iterates `(node, source, distance)` over valid entries in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.source_count;
        self.valid
            .iter()
            .zip(&self.distances)
            .enumerate()
            .filter(|(_, (ok, _))| **ok)
            .map(move |(idx, (_, &d))| (idx / k, idx % k, d))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_in_row(&self, node: usize) -> usize {
        (0..self.source_count)
            .filter(|&k| self.is_valid(node, k))
            .count()
    }

    pub fn valid_in_column(&self, source: usize) -> usize {
        (0..self.node_count)
            .filter(|&n| self.is_valid(n, source))
            .count()
    }

    /// Checks that every node row and every source column carries at least
    /// three valid entries, the minimum for a planar position fix.
    pub fn check_solvable(&self) -> Result<()> {
        const REQUIRED: usize = 3;
        for k in 0..self.source_count {
            let count = self.valid_in_column(k);
            if count < REQUIRED {
                return Err(GardeError::UnderObserved {
                    axis: Axis::Source,
                    index: k,
                    count,
                    required: REQUIRED,
                });
            }
        }
        for n in 0..self.node_count {
            let count = self.valid_in_row(n);
            if count < REQUIRED {
                return Err(GardeError::UnderObserved {
                    axis: Axis::Node,
                    index: n,
                    count,
                    required: REQUIRED,
                });
            }
        }
        Ok(())
    }

    /// Same observations with rows and columns swapped.
    pub fn transposed(&self) -> ObservationSet {
        let (n, k) = (self.node_count, self.source_count);
        let mut distances = Vec::with_capacity(n * k);
        let mut valid = Vec::with_capacity(n * k);
        for s in 0..k {
            for r in 0..n {
                distances.push(self.distances[r * k + s]);
                valid.push(self.valid[r * k + s]);
            }
        }
        ObservationSet {
            node_count: k,
            source_count: n,
            distances,
            valid,
        }
    }
}

/// Residual matrix `d̂ - ||p - o||`; `None` marks masked entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub node_count: usize,
    pub source_count: usize,
    pub values: Vec<Option<f64>>,
}

impl Residuals {
    pub fn get(&self, node: usize, source: usize) -> Option<f64> {
        self.values[node * self.source_count + source]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Sum over valid entries of `(d̂² - ||p_n - o_k||²)²`.
pub fn cost_j(geometry: &Geometry, obs: &ObservationSet) -> Result<f64> {
    geometry.check_matches(obs)?;
    Ok(obs
        .iter_valid()
        .map(|(n, k, d)| {
            let e = d * d - (geometry.nodes[n] - geometry.sources[k]).norm_sq();
            e * e
        })
        .sum())
}

pub fn residuals(geometry: &Geometry, obs: &ObservationSet) -> Result<Residuals> {
    geometry.check_matches(obs)?;
    let values = (0..obs.node_count)
        .flat_map(|n| (0..obs.source_count).map(move |k| (n, k)))
        .map(|(n, k)| {
            obs.get(n, k)
                .map(|d| d - distance(geometry.nodes[n], geometry.sources[k]))
        })
        .collect();
    Ok(Residuals {
        node_count: obs.node_count,
        source_count: obs.source_count,
        values,
    })
}

/// Mean absolute residual over all valid entries. This is the score used to
/// rank candidate geometries.
pub fn mean_abs_residual(geometry: &Geometry, obs: &ObservationSet) -> Result<f64> {
    geometry.check_matches(obs)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (n, k, d) in obs.iter_valid() {
        sum += (d - distance(geometry.nodes[n], geometry.sources[k])).abs();
        count += 1;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}
