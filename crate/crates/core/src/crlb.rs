//! Cramér–Rao bounds for range-only position fixes.
//!
//! For one position `q` observed from anchors `a_n` with i.i.d. Gaussian
//! range errors of standard deviation `σ`, the expected Hessian of the
//! log-likelihood is
//!
//! ```text
//! γ_xx = -Σ (a_n,x - q_x)² / (σ² |a_n - q|²)
//! γ_yy = -Σ (a_n,y - q_y)² / (σ² |a_n - q|²)
//! γ_xy = -Σ (a_n,x - q_x)(a_n,y - q_y) / (σ² |a_n - q|²)
//! ```
//!
//! and the RMSE of any unbiased estimator of `q` is at least
//! `sqrt((γ_xx + γ_yy) / (γ_xy² - γ_xx γ_yy))`. Sources are bounded with the
//! nodes as anchors and nodes with the sources as anchors, each conditioned
//! on the other set being known.

use std::fmt;

use crate::error::{GardeError, Result};
use crate::geometry::{Geometry, ObservationSet, Point2};

/// Entries of the expected log-likelihood Hessian for one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gammas {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Gammas {
    /// `γ_xy² - γ_xx γ_yy`, the negated Fisher determinant.
    pub fn det(&self) -> f64 {
        self.xy * self.xy - self.xx * self.yy
    }

    pub fn rmse_bound(&self) -> Result<f64> {
        let det = self.det();
        let scale = self.xx + self.yy;
        // Collinear anchors make the determinant vanish relative to the trace.
        if !(det < -1e-12 * scale * scale) {
            return Err(GardeError::SingularInformation { det });
        }
        Ok((scale / det).sqrt())
    }
}

pub fn gammas(anchors: &[Point2], target: Point2, sigma_d: f64) -> Result<Gammas> {
    if !(sigma_d.is_finite() && sigma_d > 0.0) {
        return Err(GardeError::Config(format!(
            "sigma_d must be positive, got {sigma_d}"
        )));
    }
    let inv_var = 1.0 / (sigma_d * sigma_d);
    let mut g = Gammas { xx: 0.0, yy: 0.0, xy: 0.0 };
    for &a in anchors {
        let d = a - target;
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            return Err(GardeError::Coincident { x: a.x, y: a.y });
        }
        g.xx -= inv_var * d.x * d.x / r2;
        g.yy -= inv_var * d.y * d.y / r2;
        g.xy -= inv_var * d.x * d.y / r2;
    }
    Ok(g)
}

pub fn gammas_for_source(nodes: &[Point2], source: Point2, sigma_d: f64) -> Result<Gammas> {
    gammas(nodes, source, sigma_d)
}

pub fn source_rmse_bound(nodes: &[Point2], source: Point2, sigma_d: f64) -> Result<f64> {
    gammas(nodes, source, sigma_d)?.rmse_bound()
}

pub fn node_rmse_bound(sources: &[Point2], node: Point2, sigma_d: f64) -> Result<f64> {
    gammas(sources, node, sigma_d)?.rmse_bound()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionKind {
    Source,
    Node,
}

impl fmt::Display for PositionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositionKind::Source => f.write_str("source"),
            PositionKind::Node => f.write_str("node"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub index: usize,
    pub gammas: Gammas,
    pub rmse_bound: f64,
}

/// Per-position bounds for one position class. Failed entries carry their
/// error and do not affect the others.
#[derive(Debug)]
pub struct CrlbReport {
    pub kind: PositionKind,
    pub sigma_d: f64,
    pub per_position: Vec<std::result::Result<BoundEntry, (usize, GardeError)>>,
}

impl CrlbReport {
    /// Bounds of the successful entries, in index order.
    pub fn bounds(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_position
            .iter()
            .filter_map(|e| e.as_ref().ok().map(|b| b.rmse_bound))
    }

    /// Root of the mean squared bound over successful entries.
    pub fn rms_bound(&self) -> Option<f64> {
        let (sum, count) = self.bounds().fold((0.0, 0usize), |(s, c), b| (s + b * b, c + 1));
        (count > 0).then(|| (sum / count as f64).sqrt())
    }
}

fn report(
    kind: PositionKind,
    targets: &[Point2],
    anchors: &[Point2],
    sigma_d: f64,
    mask: impl Fn(usize, usize) -> bool,
) -> CrlbReport {
    let per_position = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let used: Vec<Point2> = anchors
                .iter()
                .enumerate()
                .filter(|(a, _)| mask(i, *a))
                .map(|(_, &p)| p)
                .collect();
            gammas(&used, t, sigma_d)
                .and_then(|g| {
                    Ok(BoundEntry {
                        index: i,
                        gammas: g,
                        rmse_bound: g.rmse_bound()?,
                    })
                })
                .map_err(|e| (i, e))
        })
        .collect();
    CrlbReport {
        kind,
        sigma_d,
        per_position,
    }
}

/// Source bounds from all nodes and node bounds from all sources.
///
/// With `obs` given, unobserved pairs are left out of the sums.
pub fn crlb_report(
    geometry: &Geometry,
    sigma_d: f64,
    obs: Option<&ObservationSet>,
) -> Result<(CrlbReport, CrlbReport)> {
    if !(sigma_d.is_finite() && sigma_d > 0.0) {
        return Err(GardeError::Config(format!(
            "sigma_d must be positive, got {sigma_d}"
        )));
    }
    if let Some(obs) = obs {
        if obs.node_count() != geometry.node_count() || obs.source_count() != geometry.source_count() {
            return Err(GardeError::DimensionMismatch {
                what: "observation matrix size",
                expected: geometry.node_count() * geometry.source_count(),
                actual: obs.node_count() * obs.source_count(),
            });
        }
    }
    let sources = report(
        PositionKind::Source,
        &geometry.sources,
        &geometry.nodes,
        sigma_d,
        |k, n| obs.is_none_or(|o| o.is_valid(n, k)),
    );
    let nodes = report(
        PositionKind::Node,
        &geometry.nodes,
        &geometry.sources,
        sigma_d,
        |n, k| obs.is_none_or(|o| o.is_valid(n, k)),
    );
    Ok((sources, nodes))
}
