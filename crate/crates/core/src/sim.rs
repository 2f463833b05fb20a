//! Synthetic rooms, layouts and noisy range observations.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GardeError, Result};
use crate::geometry::{distance, Geometry, ObservationSet, Point2};

/// Total rejection-sampling budget for one layout.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Noisy ranges are clamped to at least this many meters.
pub const MIN_OBSERVED_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub room: Room,
    pub node_count: usize,
    pub source_count: usize,
    /// Minimum distance of every position from the walls.
    pub margin: f64,
    /// Minimum distance between any two positions, nodes and sources alike.
    pub min_separation: f64,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let Room { width, height } = self.room;
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(GardeError::Config(format!(
                "room dimensions must be positive, got {width} x {height}"
            )));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(GardeError::Config(format!("margin must be nonnegative, got {}", self.margin)));
        }
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return Err(GardeError::Config(format!(
                "min_separation must be nonnegative, got {}",
                self.min_separation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Heteroscedastic,
    OutlierContaminated,
}

fn default_slope() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Base standard deviation, meters.
    pub sigma_d: f64,
    /// Growth of the standard deviation per meter of true distance.
    #[serde(default = "default_slope")]
    pub slope: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default)]
    pub outlier_shift: f64,
    /// Pairs farther apart than this are marked unobserved.
    #[serde(default)]
    pub oor_threshold: Option<f64>,
}

impl NoiseModel {
    pub fn gaussian(sigma_d: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma_d,
            slope: default_slope(),
            outlier_rate: 0.0,
            outlier_shift: 0.0,
            oor_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_d.is_finite() && self.sigma_d > 0.0) {
            return Err(GardeError::Config(format!("sigma_d must be positive, got {}", self.sigma_d)));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(GardeError::Config(format!(
                "outlier_rate must lie in [0, 1), got {}",
                self.outlier_rate
            )));
        }
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(GardeError::Config(format!("slope must be nonnegative, got {}", self.slope)));
        }
        if !self.outlier_shift.is_finite() {
            return Err(GardeError::Config("outlier_shift must be finite".into()));
        }
        Ok(())
    }

    /// Standard deviation of the range error at true distance `d`.
    pub fn std_at(&self, d: f64) -> f64 {
        match self.kind {
            NoiseKind::Heteroscedastic => self.sigma_d + self.slope * d,
            NoiseKind::Gaussian | NoiseKind::OutlierContaminated => self.sigma_d,
        }
    }

    /// Mean standard deviation over the observed pairs of `geometry`; the
    /// constant-variance stand-in used for bounds.
    pub fn effective_sigma(&self, geometry: &Geometry, obs: &ObservationSet) -> f64 {
        let (sum, count) = obs.iter_valid().fold((0.0, 0usize), |(s, c), (n, k, _)| {
            (s + self.std_at(distance(geometry.nodes[n], geometry.sources[k])), c + 1)
        });
        if count == 0 {
            self.sigma_d
        } else {
            sum / count as f64
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn mix_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random node and source layout honoring the wall margin and the minimum
/// separation. Nodes are placed first, then sources.
pub fn generate_scenario(s: &Scenario) -> Result<Geometry> {
    s.validate()?;
    let (w, h) = (s.room.width, s.room.height);
    let (x0, x1) = (s.margin, w - s.margin);
    let (y0, y1) = (s.margin, h - s.margin);
    if x0 > x1 || y0 > y1 {
        return Err(GardeError::Infeasible(format!(
            "margin {} leaves no room inside {w} x {h}",
            s.margin
        )));
    }
    let total = s.node_count + s.source_count;
    if total > 1 && s.min_separation > (x1 - x0).hypot(y1 - y0) {
        return Err(GardeError::Infeasible(format!(
            "min_separation {} exceeds the usable diagonal",
            s.min_separation
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.rng_seed);
    let mut placed: Vec<Point2> = Vec::with_capacity(total);
    let mut attempts = 0usize;
    let min_sq = s.min_separation * s.min_separation;
    while placed.len() < total {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(GardeError::Infeasible(format!(
                "placed {} of {total} positions in {MAX_PLACEMENT_ATTEMPTS} attempts",
                placed.len()
            )));
        }
        attempts += 1;
        let p = Point2::new(
            x0 + (x1 - x0) * rng.random::<f64>(),
            y0 + (y1 - y0) * rng.random::<f64>(),
        );
        if placed.iter().all(|&q| (p - q).norm_sq() >= min_sq) {
            placed.push(p);
        }
    }
    let sources = placed.split_off(s.node_count);
    Ok(Geometry::new(placed, sources))
}

/// Noisy observations of every node-source pair.
///
/// Entries are drawn in row-major order from a ChaCha8 stream keyed by
/// `seed`: one normal draw per entry, plus one uniform draw in the
/// outlier-contaminated mode.
pub fn synthesize_observations(geometry: &Geometry, noise: &NoiseModel, seed: u64) -> Result<ObservationSet> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k) = (geometry.node_count(), geometry.source_count());
    let mut distances = Vec::with_capacity(n * k);
    let mut valid = Vec::with_capacity(n * k);
    for &p in &geometry.nodes {
        for &o in &geometry.sources {
            let d = distance(p, o);
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut observed = d + noise.std_at(d) * z;
            if noise.kind == NoiseKind::OutlierContaminated && rng.random::<f64>() < noise.outlier_rate {
                observed += noise.outlier_shift;
            }
            if observed < MIN_OBSERVED_DISTANCE {
                observed = MIN_OBSERVED_DISTANCE;
            }
            distances.push(observed);
            valid.push(noise.oor_threshold.is_none_or(|t| d <= t));
        }
    }
    ObservationSet::with_mask(n, k, distances, valid)
}
