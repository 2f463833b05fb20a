#![allow(dead_code)]

use garde::sim::Room;
use garde::{Geometry, ObservationSet, Point2, Scenario};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, count: usize, w: f64, h: f64) -> Vec<Point2> {
    (0..count)
        .map(|_| Point2::new(w * rng.random::<f64>(), h * rng.random::<f64>()))
        .collect()
}

pub fn room_scenario(nodes: usize, sources: usize, seed: u64) -> Scenario {
    Scenario {
        room: Room { width: 6.0, height: 5.0 },
        node_count: nodes,
        source_count: sources,
        margin: 0.5,
        min_separation: 0.1,
        rng_seed: seed,
    }
}

/// Exact distances plus independent N(0, sigma²) errors, kept positive.
pub fn noisy_observations(g: &Geometry, sigma: f64, rng: &mut ChaCha8Rng) -> ObservationSet {
    let mut d = Vec::new();
    for p in &g.nodes {
        for o in &g.sources {
            let z: f64 = StandardNormal.sample(rng);
            let true_d = ((p.x - o.x).powi(2) + (p.y - o.y).powi(2)).sqrt();
            d.push((true_d + sigma * z).max(1e-3));
        }
    }
    ObservationSet::from_dense(g.node_count(), g.source_count(), d).unwrap()
}

/// Sum of squared squared-distance mismatches, written out entry by entry.
pub fn cost_oracle(nodes: &[Point2], sources: &[Point2], obs: &ObservationSet) -> f64 {
    let mut total = 0.0;
    for n in 0..nodes.len() {
        for k in 0..sources.len() {
            if let Some(d) = obs.get(n, k) {
                let dx = nodes[n].x - sources[k].x;
                let dy = nodes[n].y - sources[k].y;
                let e = d * d - (dx * dx + dy * dy);
                total += e * e;
            }
        }
    }
    total
}

/// Cyclic coordinate descent on the squared-distance cost.
///
/// Each coordinate is moved to a minimizer of the quartic one-dimensional
/// restriction, found by safeguarded Newton iterations on its derivative.
pub struct CoordinateDescent {
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for CoordinateDescent {
    fn default() -> Self {
        CoordinateDescent { max_sweeps: 20_000, tolerance: 1e-14 }
    }
}

/// Terms `(d², a, e²)` of the one-dimensional cost `Σ (d² - (c - a)² - e²)²`.
fn restricted_cost(terms: &[(f64, f64, f64)], c: f64) -> f64 {
    terms
        .iter()
        .map(|&(d2, a, e2)| {
            let r = d2 - (c - a) * (c - a) - e2;
            r * r
        })
        .sum()
}

fn minimize_1d(terms: &[(f64, f64, f64)], start: f64) -> f64 {
    let mut c = start;
    let mut f = restricted_cost(terms, c);
    for _ in 0..60 {
        let (mut g, mut h) = (0.0, 0.0);
        for &(d2, a, e2) in terms {
            let u = c - a;
            let r = d2 - u * u - e2;
            g += -4.0 * r * u;
            h += -4.0 * r + 8.0 * u * u;
        }
        if g == 0.0 {
            break;
        }
        let mut step = if h > 0.0 { -g / h } else { -g.signum() * 1e-2 };
        let mut moved = false;
        for _ in 0..60 {
            let trial = c + step;
            let ft = restricted_cost(terms, trial);
            if ft < f {
                c = trial;
                f = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || step.abs() < 1e-16 * (1.0 + c.abs()) {
            break;
        }
    }
    c
}

impl CoordinateDescent {
    pub fn minimize(&self, start: &Geometry, obs: &ObservationSet) -> Geometry {
        let mut nodes = start.nodes.clone();
        let mut sources = start.sources.clone();
        let (n_count, k_count) = (nodes.len(), sources.len());
        let mut terms = Vec::new();
        for _ in 0..self.max_sweeps {
            let mut largest = 0.0f64;
            for axis in 0..2 {
                for n in 0..n_count {
                    terms.clear();
                    for k in 0..k_count {
                        if let Some(d) = obs.get(n, k) {
                            let (a, e) = split(sources[k], nodes[n], axis);
                            terms.push((d * d, a, e * e));
                        }
                    }
                    let old = coord(nodes[n], axis);
                    let new = minimize_1d(&terms, old);
                    set_coord(&mut nodes[n], axis, new);
                    largest = largest.max((new - old).abs());
                }
                for k in 0..k_count {
                    terms.clear();
                    for n in 0..n_count {
                        if let Some(d) = obs.get(n, k) {
                            let (a, e) = split(nodes[n], sources[k], axis);
                            terms.push((d * d, a, e * e));
                        }
                    }
                    let old = coord(sources[k], axis);
                    let new = minimize_1d(&terms, old);
                    set_coord(&mut sources[k], axis, new);
                    largest = largest.max((new - old).abs());
                }
            }
            if largest < self.tolerance {
                break;
            }
        }
        Geometry::new(nodes, sources)
    }
}

fn coord(p: Point2, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

fn set_coord(p: &mut Point2, axis: usize, v: f64) {
    if axis == 0 {
        p.x = v
    } else {
        p.y = v
    }
}

/// Other point's coordinate on `axis` and the offset on the remaining axis.
fn split(other: Point2, me: Point2, axis: usize) -> (f64, f64) {
    if axis == 0 {
        (other.x, me.y - other.y)
    } else {
        (other.y, me.x - other.x)
    }
}

/// Jacobi eigenvalue iteration for a symmetric matrix given as rows.
/// Returns eigenvalues and eigenvectors (as columns of the second value).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// RMSE after the best proper rotation (and mirror if allowed), found by
/// scanning the angle in 1 mrad steps.
pub fn grid_alignment_rmse(moving: &[Point2], reference: &[Point2], allow_reflection: bool) -> f64 {
    let centroid = |pts: &[Point2]| {
        let n = pts.len() as f64;
        Point2::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n)
    };
    let cr = centroid(reference);
    let mut best = f64::INFINITY;
    let mirrors: &[f64] = if allow_reflection { &[1.0, -1.0] } else { &[1.0] };
    for &m in mirrors {
        let pts: Vec<Point2> = moving.iter().map(|p| Point2::new(p.x, m * p.y)).collect();
        let cm = centroid(&pts);
        let steps = (2.0 * std::f64::consts::PI / 1e-3).ceil() as usize;
        for i in 0..steps {
            let th = i as f64 * 1e-3;
            let (s, c) = th.sin_cos();
            let sq: f64 = pts
                .iter()
                .zip(reference)
                .map(|(p, r)| {
                    let (x, y) = (p.x - cm.x, p.y - cm.y);
                    let (rx, ry) = (c * x - s * y + cr.x, s * x + c * y + cr.y);
                    (rx - r.x).powi(2) + (ry - r.y).powi(2)
                })
                .sum();
            best = best.min((sq / pts.len() as f64).sqrt());
        }
    }
    best
}
