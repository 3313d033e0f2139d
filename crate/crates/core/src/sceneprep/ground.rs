//! Regional ground-plane removal.
//!
//! The footprint is split into square cells. Each cell fits `z = a·x + b·y + c`
//! by least squares to its lowest points (those near the cell minimum),
//! discarding residual outliers over a few refit rounds. Cells that cannot
//! support a fit, or whose fit strays far from the scene-wide plane, take a
//! neighbor's plane or the global one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geom::{Point3, PointCloud};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundParams {
    /// Cell edge length, meters.
    pub cell_size: f64,
    /// Points within this height of their cell plane are ground, meters.
    pub height_threshold: f64,
    /// Fraction of each cell's lowest points used to seed the fit.
    pub seed_quantile: f64,
    pub refit_rounds: usize,
    /// A cell plane whose height at the cell center differs from the global
    /// plane by more than this is rejected, meters.
    pub max_local_offset: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self { cell_size: 4.0, height_threshold: 0.25, seed_quantile: 0.3, refit_rounds: 3, max_local_offset: 0.5 }
    }
}

/// `z = a·x + b·y + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> Plane<T> {
    pub fn height_at(&self, x: T, y: T) -> T {
        self.a * x + self.b * y + self.c
    }

    pub fn residual(&self, p: &Point3<T>) -> T {
        p.z - self.height_at(p.x, p.y)
    }
}

/// Disjoint, exhaustive split of cloud indices, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundSplit {
    pub ground: Vec<usize>,
    pub non_ground: Vec<usize>,
}

/// Least-squares plane through `points`; `None` for fewer than three points
/// or a degenerate (collinear) set.
pub fn fit_plane<T: Scalar>(points: &[Point3<T>]) -> Option<Plane<T>> {
    if points.len() < 3 {
        return None;
    }
    // Center for conditioning, then solve the 3x3 normal equations.
    let n = T::from_count(points.len());
    let (mx, my) = points.iter().fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (mx / n, my / n);
    let mut m = [[T::zero(); 4]; 3];
    for p in points {
        let row = [p.x - mx, p.y - my, T::one()];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = m[i][j] + row[i] * row[j];
            }
            m[i][3] = m[i][3] + row[i] * p.z;
        }
    }
    let sol = solve3(m)?;
    Some(Plane { a: sol[0], b: sol[1], c: sol[2] - sol[0] * mx - sol[1] * my })
}

fn solve3<T: Scalar>(mut m: [[T; 4]; 3]) -> Option<[T; 3]> {
    let scale = m.iter().flat_map(|r| r[..3].iter()).fold(T::zero(), |acc, v| acc.max(v.abs()));
    let eps = scale * T::lit(1e-12);
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if m[pivot][col].abs() <= eps {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col];
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v = *v - f * *p;
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// The lowest `quantile` of `points`. With `band`, points more than `band`
/// above the lowest one are dropped as well (at least three are kept), so a
/// densely sampled object cannot fill the seed of a small cell.
fn lowest<T: Scalar>(points: &[Point3<T>], quantile: f64, band: Option<T>) -> Vec<Point3<T>> {
    let mut sorted: Vec<Point3<T>> = points.to_vec();
    sorted.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap_or(std::cmp::Ordering::Equal));
    let mut keep = ((quantile * sorted.len() as f64).ceil() as usize).max(3).min(sorted.len());
    if let (Some(band), Some(first)) = (band, sorted.first()) {
        let ceiling = first.z + band;
        keep = sorted[..keep].iter().take_while(|p| p.z <= ceiling).count().max(3.min(keep));
    }
    sorted.truncate(keep);
    sorted
}

fn robust_fit<T: Scalar>(seed: &[Point3<T>], params: &GroundParams) -> Option<Plane<T>> {
    let mut plane = fit_plane(seed)?;
    let thr = T::lit(params.height_threshold);
    for _ in 0..params.refit_rounds {
        let inliers: Vec<Point3<T>> = seed.iter().copied().filter(|p| plane.residual(p).abs() <= thr).collect();
        match fit_plane(&inliers) {
            Some(p) => plane = p,
            None => break,
        }
    }
    Some(plane)
}

pub fn remove_ground<T: Scalar>(cloud: &PointCloud<T>, params: &GroundParams) -> Result<GroundSplit, SceneError> {
    if cloud.is_empty() {
        return Err(SceneError::EmptyCloud);
    }
    let pts = &cloud.points;
    let global = robust_fit(&lowest(pts, params.seed_quantile, None), params).unwrap_or_else(|| {
        let zmin = pts.iter().fold(T::infinity(), |acc, p| acc.min(p.z));
        Plane { a: T::zero(), b: T::zero(), c: zmin }
    });

    let cell = T::lit(params.cell_size);
    let key = |p: &Point3<T>| -> (i64, i64) {
        ((p.x / cell).floor().to_i64().unwrap_or(0), (p.y / cell).floor().to_i64().unwrap_or(0))
    };
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in pts.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }

    let max_offset = T::lit(params.max_local_offset);
    let half = T::lit(0.5);
    let mut planes: BTreeMap<(i64, i64), Plane<T>> = BTreeMap::new();
    for (&k, idx) in &cells {
        let members: Vec<Point3<T>> = idx.iter().map(|&i| pts[i]).collect();
        if members.len() < 3 {
            continue;
        }
        let seed = lowest(&members, params.seed_quantile, Some(T::lit(params.height_threshold)));
        let Some(local) = robust_fit(&seed, params) else { continue };
        let cx = (T::lit(k.0 as f64) + half) * cell;
        let cy = (T::lit(k.1 as f64) + half) * cell;
        if (local.height_at(cx, cy) - global.height_at(cx, cy)).abs() <= max_offset {
            planes.insert(k, local);
        }
    }

    let thr = T::lit(params.height_threshold);
    let mut split = GroundSplit::default();
    for (&k, idx) in &cells {
        let plane = planes.get(&k).copied().or_else(|| neighbor_plane(&planes, k)).unwrap_or(global);
        for &i in idx {
            if plane.residual(&pts[i]).abs() <= thr {
                split.ground.push(i);
            } else {
                split.non_ground.push(i);
            }
        }
    }
    split.ground.sort_unstable();
    split.non_ground.sort_unstable();
    Ok(split)
}

fn neighbor_plane<T: Scalar>(planes: &BTreeMap<(i64, i64), Plane<T>>, k: (i64, i64)) -> Option<Plane<T>> {
    const RING: [(i64, i64); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    RING.iter().find_map(|(dx, dy)| planes.get(&(k.0 + dx, k.1 + dy)).copied())
}
