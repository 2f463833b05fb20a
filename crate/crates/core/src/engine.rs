//! Alternating weighted-least-squares calibration with annealed restarts.
//!
//! Starting from an MDS layout of the nodes, sources and nodes are placed in
//! turn by [`crate::wls`]. Each pass re-fits the nodes against the sources
//! that currently explain the observations best, maps the new node set back
//! onto the current frame, and blends old and new positions. Around the best
//! geometry seen so far, Gaussian perturbations with a shrinking scale
//! restart the passes to escape poor local optima.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::align::align;
use crate::error::{GardeError, Result};
use crate::geometry::{distance, mean_abs_residual, Geometry, ObservationSet, Point2};
use crate::mds::initial_nodes;
use crate::wls::{localize_all_nodes, localize_all_sources};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GardeConfig {
    /// Weight kept on the previous node positions when blending.
    pub alpha: f64,
    /// Weight kept on the previous source positions when blending.
    pub beta: f64,
    pub num_iterations: usize,
    pub num_annealing: usize,
    /// Perturbation scale of the first annealing round, meters.
    pub mu0: f64,
    pub mu_decay: f64,
    /// Fraction of sources kept by the residual-based source selection.
    pub fit_fraction: f64,
    pub min_fit_sources: usize,
    pub rng_seed: u64,
}

impl Default for GardeConfig {
    fn default() -> Self {
        GardeConfig {
            alpha: 0.2,
            beta: 0.2,
            num_iterations: 30,
            num_annealing: 30,
            mu0: 0.5,
            mu_decay: 0.7,
            fit_fraction: 0.8,
            min_fit_sources: 4,
            rng_seed: 0,
        }
    }
}

impl GardeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GardeError::Config(msg));
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1), got {}", self.beta));
        }
        if !(self.mu0.is_finite() && self.mu0 >= 0.0) {
            return bad(format!("mu0 must be a nonnegative length, got {}", self.mu0));
        }
        if !(self.mu_decay > 0.0 && self.mu_decay < 1.0) {
            return bad(format!("mu_decay must lie in (0, 1), got {}", self.mu_decay));
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction <= 1.0) {
            return bad(format!(
                "fit_fraction must lie in (0, 1], got {}",
                self.fit_fraction
            ));
        }
        if self.min_fit_sources < 4 {
            return bad(format!(
                "min_fit_sources must be at least 4, got {}",
                self.min_fit_sources
            ));
        }
        Ok(())
    }

    /// Perturbation scale for annealing round `round` (1-based).
    pub fn mu(&self, round: usize) -> f64 {
        self.mu0 * self.mu_decay.powi(round as i32)
    }
}

/// One annealing round as seen by the best-geometry tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    /// Perturbation scale applied after this round.
    pub mu: f64,
    /// Score of this round's iterate output, absent if the round failed.
    pub candidate_score: Option<f64>,
    /// Score of the best geometry after this round.
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub geometry: Geometry,
    pub selected_sources: Vec<usize>,
    /// Mean absolute residual of `geometry` over all valid observations.
    pub fit_score: f64,
    pub trace: Vec<TraceRecord>,
}

/// Per-source mean absolute residual; sources without valid entries score
/// infinity.
pub fn source_scores(geometry: &Geometry, obs: &ObservationSet) -> Vec<f64> {
    (0..obs.source_count())
        .map(|k| {
            let o = geometry.sources[k];
            let (mut sum, mut count) = (0.0, 0usize);
            for (n, &p) in geometry.nodes.iter().enumerate() {
                if let Some(d) = obs.get(n, k) {
                    sum += (d - distance(p, o)).abs();
                    count += 1;
                }
            }
            if count == 0 {
                f64::INFINITY
            } else {
                sum / count as f64
            }
        })
        .collect()
}

/// Sources whose observations agree best with the geometry, in index order.
///
/// Keeps `ceil(fit_fraction * K)` sources, never fewer than
/// `min_fit_sources`. Ties go to the lower index.
pub fn fit_select(geometry: &Geometry, obs: &ObservationSet, config: &GardeConfig) -> Result<Vec<usize>> {
    check_dims(geometry, obs)?;
    let k = obs.source_count();
    if k < config.min_fit_sources {
        return Err(GardeError::Config(format!(
            "{k} sources, at least min_fit_sources = {} required",
            config.min_fit_sources
        )));
    }
    let keep = ((config.fit_fraction * k as f64).ceil() as usize)
        .max(config.min_fit_sources)
        .min(k);
    let scores = source_scores(geometry, obs);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut selected = order[..keep].to_vec();
    selected.sort_unstable();
    Ok(selected)
}

/// The geometry with the smaller mean absolute residual; ties keep the incumbent.
pub fn opt_select<'a>(
    candidate: &'a Geometry,
    incumbent: &'a Geometry,
    obs: &ObservationSet,
) -> Result<&'a Geometry> {
    let c = mean_abs_residual(candidate, obs)?;
    let i = mean_abs_residual(incumbent, obs)?;
    Ok(if c < i { candidate } else { incumbent })
}

fn check_dims(geometry: &Geometry, obs: &ObservationSet) -> Result<()> {
    if geometry.node_count() != obs.node_count() || geometry.source_count() != obs.source_count() {
        return Err(GardeError::DimensionMismatch {
            what: "geometry size (nodes*sources)",
            expected: obs.node_count() * obs.source_count(),
            actual: geometry.node_count() * geometry.source_count(),
        });
    }
    Ok(())
}

fn blend(old: &mut [Point2], new: &[Point2], keep: f64) {
    for (o, &n) in old.iter_mut().zip(new) {
        *o = *o * keep + n * (1.0 - keep);
    }
}

/// One alternating pass: source selection, node fix, frame mapping,
/// blending, then source fix and blending.
pub fn iterate_once(geometry: &mut Geometry, obs: &ObservationSet, config: &GardeConfig) -> Result<()> {
    let subset = fit_select(geometry, obs, config)?;
    let fitted = localize_all_nodes(&geometry.sources, &subset, &geometry.nodes, obs)?;
    let (_, mapped) = align(&fitted, &geometry.nodes, false)?;
    blend(&mut geometry.nodes, &mapped, config.alpha);
    let sources = localize_all_sources(&geometry.nodes, obs)?;
    blend(&mut geometry.sources, &sources, config.beta);
    Ok(())
}

/// `config.num_iterations` alternating passes.
pub fn iterate(geometry: &Geometry, obs: &ObservationSet, config: &GardeConfig) -> Result<Geometry> {
    check_dims(geometry, obs)?;
    let mut g = geometry.clone();
    for pass in 0..config.num_iterations {
        iterate_once(&mut g, obs, config).map_err(|e| e.at_pass(pass))?;
    }
    Ok(g)
}

/// Random stream for annealing round `round`: ChaCha8 keyed by the seed,
/// with the round number as stream id.
fn round_rng(seed: u64, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    rng
}

fn perturb(base: &Geometry, mu: f64, rng: &mut ChaCha8Rng) -> Geometry {
    let mut jitter = |p: &Point2| {
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        Point2::new(p.x + mu * dx, p.y + mu * dy)
    };
    let nodes = base.nodes.iter().map(&mut jitter).collect();
    let sources = base.sources.iter().map(&mut jitter).collect();
    Geometry::new(nodes, sources)
}

/// Initial geometry: MDS node layout plus one source fix from it.
pub fn initialize(obs: &ObservationSet) -> Result<Geometry> {
    let nodes = initial_nodes(obs).map_err(|e| e.in_stage("mds-init"))?;
    let sources = localize_all_sources(&nodes, obs).map_err(|e| e.in_stage("source-init"))?;
    Ok(Geometry::new(nodes, sources))
}

/// Full calibration of nodes and sources from distance observations.
pub fn run(obs: &ObservationSet, config: &GardeConfig) -> Result<CalibrationResult> {
    config.validate()?;
    obs.check_solvable()?;
    if obs.source_count() < config.min_fit_sources {
        return Err(GardeError::Config(format!(
            "{} sources, at least min_fit_sources = {} required",
            obs.source_count(),
            config.min_fit_sources
        )));
    }

    let start = initialize(obs)?;
    // A diverging first refinement is not fatal while annealing rounds
    // remain; they restart from perturbations of the initial layout.
    let (mut working, first_error) = match iterate(&start, obs, config) {
        Ok(g) => (g, None),
        Err(e) if config.num_annealing > 0 => (start.clone(), Some(e)),
        Err(e) => return Err(e.in_stage("iterate")),
    };
    // The initial layout competes for best-so-far, so a refinement that
    // drifted off is not used as the perturbation base.
    let mut best = if config.num_annealing > 0 {
        opt_select(&working, &start, obs)?.clone()
    } else {
        working.clone()
    };
    let mut best_score = mean_abs_residual(&best, obs)?;
    let mut refined = first_error.is_none();
    let mut trace = Vec::with_capacity(config.num_annealing);

    for round in 1..=config.num_annealing {
        // A perturbed start may land on a singular layout; such a round is
        // recorded and skipped.
        let candidate_score = match iterate(&working, obs, config) {
            Ok(candidate) => {
                let score = mean_abs_residual(&candidate, obs)?;
                if score < best_score {
                    best = candidate;
                    best_score = score;
                }
                refined = true;
                Some(score)
            }
            Err(_) => None,
        };
        let mu = config.mu(round);
        working = perturb(&best, mu, &mut round_rng(config.rng_seed, round));
        trace.push(TraceRecord {
            round,
            mu,
            candidate_score,
            best_score,
        });
    }

    if let (false, Some(e)) = (refined, first_error) {
        return Err(e.in_stage("iterate"));
    }
    let selected_sources = fit_select(&best, obs, config)?;
    Ok(CalibrationResult {
        geometry: best,
        selected_sources,
        fit_score: best_score,
        trace,
    })
}
