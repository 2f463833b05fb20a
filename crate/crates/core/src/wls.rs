//! Range-based position fixes by weighted least squares.
//!
//! With anchors `a_m` and measured ranges `r_m` to an unknown point `x`, the
//! anchor with the shortest range is chosen as reference `ν` and moved to the
//! origin. Subtracting its circle equation from the others linearizes the
//! problem:
//!
//! ```text
//! 2 a_m · x = r_ν² + |a_m|² - r_m²        (m ≠ ν, anchors relative to a_ν)
//! ```
//!
//! which is solved as `x = (RᵀWR)⁻¹ RᵀW b` with `W = diag(1 / w_m²)`.
//! The same routine places sources from nodes and nodes from sources.

use crate::error::{Axis, GardeError, Result};
use crate::geometry::{distance, ObservationSet, Point2};

/// Weighting ranges below this are clamped before inversion.
pub const MIN_WEIGHT_DISTANCE: f64 = 1e-3;

/// Reciprocal condition number of `RᵀWR` below which the anchors count as
/// collinear.
pub const MIN_RCOND: f64 = 1e-12;

/// One position fix: anchors, measured ranges and the ranges used for weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsProblem {
    pub anchors: Vec<Point2>,
    pub dists: Vec<f64>,
    pub weight_dists: Vec<f64>,
    pub reference_index: usize,
}

impl WlsProblem {
    /// Builds a problem, selecting the reference anchor from `dists`.
    pub fn new(anchors: Vec<Point2>, dists: Vec<f64>, weight_dists: Vec<f64>) -> Result<Self> {
        if dists.len() != anchors.len() {
            return Err(GardeError::DimensionMismatch {
                what: "range count",
                expected: anchors.len(),
                actual: dists.len(),
            });
        }
        if weight_dists.len() != anchors.len() {
            return Err(GardeError::DimensionMismatch {
                what: "weighting range count",
                expected: anchors.len(),
                actual: weight_dists.len(),
            });
        }
        let reference_index = select_reference(&dists)?;
        Ok(WlsProblem {
            anchors,
            dists,
            weight_dists,
            reference_index,
        })
    }
}

/// Index of the smallest range; ties go to the lowest index.
pub fn select_reference(dists: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &d) in dists.iter().enumerate() {
        match best {
            Some((_, b)) if d >= b => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| GardeError::Degenerate("no ranges to select a reference from".into()))
}

pub fn wls_solve(problem: &WlsProblem) -> Result<Point2> {
    let m = problem.anchors.len();
    if m < 3 {
        return Err(GardeError::Degenerate(format!(
            "position fix needs at least 3 anchors, got {m}"
        )));
    }
    for (&d, &w) in problem.dists.iter().zip(&problem.weight_dists) {
        if !(d.is_finite() && d > 0.0) || !(w.is_finite() && w >= 0.0) {
            return Err(GardeError::Degenerate(format!(
                "range {d} / weighting range {w} not positive and finite"
            )));
        }
    }
    let nu = problem.reference_index;
    let origin = problem.anchors[nu];
    let ref_sq = problem.dists[nu] * problem.dists[nu];

    // Accumulate the 2×2 normal equations RᵀWR x = RᵀWb directly.
    let (mut a00, mut a01, mut a11) = (0.0, 0.0, 0.0);
    let (mut y0, mut y1) = (0.0, 0.0);
    for i in (0..m).filter(|&i| i != nu) {
        let p = problem.anchors[i] - origin;
        let (rx, ry) = (2.0 * p.x, 2.0 * p.y);
        let b = ref_sq + p.norm_sq() - problem.dists[i] * problem.dists[i];
        let w = problem.weight_dists[i].max(MIN_WEIGHT_DISTANCE);
        let w = 1.0 / (w * w);
        a00 += w * rx * rx;
        a01 += w * rx * ry;
        a11 += w * ry * ry;
        y0 += w * rx * b;
        y1 += w * ry * b;
    }

    // Eigenvalues of the symmetric 2×2 matrix give its condition number.
    let half_tr = 0.5 * (a00 + a11);
    let disc = (0.25 * (a00 - a11) * (a00 - a11) + a01 * a01).sqrt();
    let (l_max, l_min) = (half_tr + disc, half_tr - disc);
    let rcond = if l_max > 0.0 { l_min / l_max } else { 0.0 };
    if !(rcond >= MIN_RCOND) {
        return Err(GardeError::SingularConfiguration { rcond });
    }
    let det = a00 * a11 - a01 * a01;
    let x = (a11 * y0 - a01 * y1) / det;
    let y = (a00 * y1 - a01 * y0) / det;
    Ok(Point2::new(x, y) + origin)
}

/// Places every source from the given node positions, weighting each range
/// by its own observed value.
pub fn localize_all_sources(nodes: &[Point2], obs: &ObservationSet) -> Result<Vec<Point2>> {
    if nodes.len() != obs.node_count() {
        return Err(GardeError::DimensionMismatch {
            what: "node count",
            expected: obs.node_count(),
            actual: nodes.len(),
        });
    }
    (0..obs.source_count())
        .map(|k| {
            let mut anchors = Vec::with_capacity(nodes.len());
            let mut dists = Vec::with_capacity(nodes.len());
            for (n, &p) in nodes.iter().enumerate() {
                if let Some(d) = obs.get(n, k) {
                    anchors.push(p);
                    dists.push(d);
                }
            }
            WlsProblem::new(anchors, dists.clone(), dists)
                .and_then(|p| wls_solve(&p))
                .map_err(|e| e.at(Axis::Source, k))
        })
        .collect()
}

/// Places every node from a subset of sources.
///
/// `sources` is indexed like the observation columns and `subset` lists the
/// columns to use. Each range is weighted by the model distance between the
/// node's `current_nodes` entry and the source, not by the observation.
pub fn localize_all_nodes(
    sources: &[Point2],
    subset: &[usize],
    current_nodes: &[Point2],
    obs: &ObservationSet,
) -> Result<Vec<Point2>> {
    if sources.len() != obs.source_count() {
        return Err(GardeError::DimensionMismatch {
            what: "source count",
            expected: obs.source_count(),
            actual: sources.len(),
        });
    }
    if current_nodes.len() != obs.node_count() {
        return Err(GardeError::DimensionMismatch {
            what: "node count",
            expected: obs.node_count(),
            actual: current_nodes.len(),
        });
    }
    current_nodes
        .iter()
        .enumerate()
        .map(|(n, &node)| {
            let mut anchors = Vec::with_capacity(subset.len());
            let mut dists = Vec::with_capacity(subset.len());
            let mut weights = Vec::with_capacity(subset.len());
            for &k in subset {
                if let Some(d) = obs.get(n, k) {
                    anchors.push(sources[k]);
                    dists.push(d);
                    weights.push(distance(node, sources[k]));
                }
            }
            WlsProblem::new(anchors, dists, weights)
                .and_then(|p| wls_solve(&p))
                .map_err(|e| e.at(Axis::Node, n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 4.0),
            Point2::new(4.0, 4.0),
        ]
    }

    #[test]
    fn reference_selection() {
        assert_eq!(select_reference(&[3.1, 1.4, 2.2]).unwrap(), 1);
        assert_eq!(select_reference(&[2.0, 2.0, 5.0]).unwrap(), 0);
        assert!(select_reference(&[]).is_err());
    }

    #[test]
    fn noiseless_square_fix() {
        let d = vec![2f64.sqrt(), 10f64.sqrt(), 10f64.sqrt(), 18f64.sqrt()];
        let p = WlsProblem::new(square(), d.clone(), d).unwrap();
        assert_eq!(p.reference_index, 0);
        let x = wls_solve(&p).unwrap();
        assert!((x - Point2::new(1.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn collinear_anchors_are_singular() {
        let anchors = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        let d = vec![1.0, 1.5, 2.0];
        let p = WlsProblem::new(anchors, d.clone(), d).unwrap();
        assert!(matches!(
            wls_solve(&p),
            Err(GardeError::SingularConfiguration { .. })
        ));
    }

    #[test]
    fn too_few_anchors() {
        let p = WlsProblem::new(square()[..2].to_vec(), vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(wls_solve(&p).is_err());
        assert!(WlsProblem::new(square(), vec![1.0; 3], vec![1.0; 4]).is_err());
    }

    #[test]
    fn zero_weight_distance_is_clamped() {
        let d = vec![2f64.sqrt(), 10f64.sqrt(), 10f64.sqrt(), 18f64.sqrt()];
        let mut w = d.clone();
        w[1] = 0.0;
        let x = wls_solve(&WlsProblem::new(square(), d, w).unwrap()).unwrap();
        assert!(x.is_finite());
        assert!((x - Point2::new(1.0, 1.0)).norm() < 1e-7);
    }

    #[test]
    fn all_sources_and_nodes_noiseless() {
        let nodes = square();
        let sources = vec![
            Point2::new(1.0, 1.0),
            Point2::new(3.0, 0.5),
            Point2::new(2.0, 3.5),
            Point2::new(0.5, 2.5),
            Point2::new(3.2, 2.9),
        ];
        let g = Geometry::new(nodes.clone(), sources.clone());
        let obs = g.exact_observations();
        let est = localize_all_sources(&nodes, &obs).unwrap();
        for (e, t) in est.iter().zip(&sources) {
            assert!((*e - *t).norm() < 1e-9);
        }
        // Roles exchanged: sources become anchors.
        let all: Vec<usize> = (0..sources.len()).collect();
        let est = localize_all_nodes(&sources, &all, &nodes, &obs).unwrap();
        for (e, t) in est.iter().zip(&nodes) {
            assert!((*e - *t).norm() < 1e-9);
        }
    }

    #[test]
    fn masked_entry_leaves_three_anchors() {
        let nodes = square();
        let g = Geometry::new(nodes.clone(), vec![Point2::new(1.0, 2.0), Point2::new(3.0, 3.0)]);
        let exact = g.exact_observations();
        let dense: Vec<f64> = exact.iter_valid().map(|(_, _, d)| d).collect();
        let mut valid = vec![true; 8];
        valid[3 * 2 + 1] = false;
        let obs = ObservationSet::with_mask(4, 2, dense, valid).unwrap();
        let est = localize_all_sources(&nodes, &obs).unwrap();
        assert!((est[1] - Point2::new(3.0, 3.0)).norm() < 1e-9);
    }

    #[test]
    fn singular_source_is_named() {
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(3.0, 0.0),
        ];
        let g = Geometry::new(nodes.clone(), vec![Point2::new(1.0, 1.0); 2]);
        let err = localize_all_sources(&nodes, &g.exact_observations()).unwrap_err();
        match err {
            GardeError::AtIndex {
                axis: Axis::Source,
                index: 0,
                ..
            } => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
