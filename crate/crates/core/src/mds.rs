//! Initial node layout from node-to-source distances.
//!
//! Inter-node distances are never observed directly. For two nodes `i`, `j`
//! and any source `s` observed by both, the triangle inequality gives
//!
//! ```text
//! |d(i,s) - d(j,s)|  <=  D(i,j)  <=  d(i,s) + d(j,s)
//! ```
//!
//! Taking the tightest bounds over all shared sources and their midpoint
//! yields a completed distance matrix, which classical MDS then embeds in
//! the plane.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{GardeError, Result};
use crate::geometry::{ObservationSet, Point2};

/// Completed inter-node distances with the bounds they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDistanceMatrix {
    pub d_hat: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

impl CompletedDistanceMatrix {
    /// Width of the bound interval for a pair; useful to spot pairs that
    /// share few or poorly placed sources.
    pub fn bound_width(&self, i: usize, j: usize) -> f64 {
        self.upper[(i, j)] - self.lower[(i, j)]
    }
}

pub fn complete_distances(obs: &ObservationSet) -> Result<CompletedDistanceMatrix> {
    let n = obs.node_count();
    let mut lower = DMatrix::zeros(n, n);
    let mut upper = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for s in 0..obs.source_count() {
                if let (Some(di), Some(dj)) = (obs.get(i, s), obs.get(j, s)) {
                    lo = lo.max((di - dj).abs());
                    hi = hi.min(di + dj);
                }
            }
            if !hi.is_finite() {
                return Err(GardeError::NoSharedSource(i, j));
            }
            lower[(i, j)] = lo;
            lower[(j, i)] = lo;
            upper[(i, j)] = hi;
            upper[(j, i)] = hi;
        }
    }
    let d_hat = (&lower + &upper) * 0.5;
    Ok(CompletedDistanceMatrix { d_hat, lower, upper })
}

/// Classical (Torgerson) MDS into the plane.
///
/// The squared distances are double-centered, `B = -1/2 J D² J`, and the
/// two leading eigenpairs give the coordinates. Negative eigenvalues are
/// clamped to zero. The result has zero column means.
pub fn classical_mds(d_hat: &DMatrix<f64>) -> Result<Vec<Point2>> {
    let n = d_hat.nrows();
    if d_hat.ncols() != n {
        return Err(GardeError::DimensionMismatch {
            what: "distance matrix columns",
            expected: n,
            actual: d_hat.ncols(),
        });
    }
    if n < 3 {
        return Err(GardeError::Degenerate(format!(
            "MDS needs at least 3 points, got {n}"
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let v = d_hat[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(GardeError::Degenerate(format!(
                    "distance ({i},{j}) = {v} is not a finite nonnegative value"
                )));
            }
        }
    }

    let b = double_center(d_hat);
    let eig = SymmetricEigen::new(b);

    // Descending by eigenvalue; stable sort keeps solver order on ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]].max(0.0);
    let l2 = eig.eigenvalues[order[1]].max(0.0);
    if l1 <= 0.0 || l2 <= 1e-9 * l1 {
        return Err(GardeError::Degenerate(format!(
            "fewer than 2 positive eigenvalues ({l1:e}, {l2:e})"
        )));
    }
    let (s1, s2) = (l1.sqrt(), l2.sqrt());
    let v1 = eig.eigenvectors.column(order[0]);
    let v2 = eig.eigenvectors.column(order[1]);
    let mut points: Vec<Point2> = (0..n)
        .map(|i| Point2::new(v1[i] * s1, v2[i] * s2))
        .collect();

    // Eigenvectors of a double-centered matrix are orthogonal to the ones
    // vector up to rounding; remove the residue.
    let c = crate::geometry::centroid(&points);
    for p in &mut points {
        *p = *p - c;
    }
    Ok(points)
}

/// `B = -1/2 J D² J` with `J = I - 11ᵀ/n`.
pub(crate) fn double_center(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let sq = d.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| sq.column(j).sum() / n as f64).collect();
    let grand = sq.sum() / (n * n) as f64;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (sq[(i, j)] - row_means[i] - col_means[j] + grand);
        }
    }
    b
}

/// Initial node positions: bound-midpoint completion followed by classical MDS.
pub fn initial_nodes(obs: &ObservationSet) -> Result<Vec<Point2>> {
    let completed = complete_distances(obs)?;
    classical_mds(&completed.d_hat)
}
