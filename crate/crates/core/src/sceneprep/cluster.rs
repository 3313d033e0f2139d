//! Density-based clustering (DBSCAN) over Euclidean 3D distance.
//!
//! Core points are linked into components with a union-find, which makes the
//! result independent of visiting order. A border point joins the cluster of
//! its nearest core neighbor, ties going to the lowest cloud index.

use std::collections::HashMap;

use crate::geom::{Point3, PointCloud};
use crate::optimizer::centroid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T> {
    /// Ascending indices into the scene cloud.
    pub point_indices: Vec<usize>,
    pub centroid: Point3<T>,
}

impl<T: Scalar> Cluster<T> {
    /// Builds a cluster from cloud indices; `indices` must be non-empty.
    pub fn from_indices(cloud: &PointCloud<T>, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let pts = cloud.select(&indices);
        let centroid = centroid(&pts).unwrap_or_else(Point3::origin);
        Self { point_indices: indices, centroid }
    }

    pub fn points(&self, cloud: &PointCloud<T>) -> Vec<Point3<T>> {
        cloud.select(&self.point_indices)
    }

    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl Grid {
    fn key(&self, p: [f64; 3]) -> (i64, i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64, (p[2] / self.cell).floor() as i64)
    }

    fn neighbors<'a>(&'a self, p: [f64; 3]) -> impl Iterator<Item = usize> + 'a {
        let (kx, ky, kz) = self.key(p);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                (-1..=1)
                    .flat_map(move |dz| self.buckets.get(&(kx + dx, ky + dy, kz + dz)).into_iter().flatten().copied())
            })
        })
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Clusters the `non_ground` subset of `cloud`. `min_pts` counts the point
/// itself. Clusters come back ordered by their smallest cloud index.
pub fn cluster_objects<T: Scalar>(
    cloud: &PointCloud<T>,
    non_ground: &[usize],
    eps: f64,
    min_pts: usize,
) -> Vec<Cluster<T>> {
    if non_ground.is_empty() || eps.is_nan() || eps <= 0.0 {
        return Vec::new();
    }
    // Work on cloud-index order so labels do not depend on the caller's order.
    let mut ids: Vec<usize> = non_ground.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let coords: Vec<[f64; 3]> = ids
        .iter()
        .map(|&i| {
            let p = cloud.points[i];
            [p.x.to_f64_lossy(), p.y.to_f64_lossy(), p.z.to_f64_lossy()]
        })
        .collect();

    let mut grid = Grid { cell: eps, buckets: HashMap::new() };
    for (slot, c) in coords.iter().enumerate() {
        let k = grid.key(*c);
        grid.buckets.entry(k).or_default().push(slot);
    }
    let eps2 = eps * eps;
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);

    let is_core: Vec<bool> = coords
        .iter()
        .map(|c| grid.neighbors(*c).filter(|&j| dist2(c, &coords[j]) <= eps2).count() >= min_pts)
        .collect();

    let n = coords.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in (0..n).filter(|&i| is_core[i]) {
        for j in grid.neighbors(coords[i]) {
            if j > i && is_core[j] && dist2(&coords[i], &coords[j]) <= eps2 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut label: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if is_core[i] {
            label[i] = Some(find(&mut parent, i));
        }
    }
    for i in (0..n).filter(|&i| !is_core[i]) {
        let mut best: Option<(f64, usize)> = None;
        for j in grid.neighbors(coords[i]).filter(|&j| is_core[j]) {
            let d = dist2(&coords[i], &coords[j]);
            if d <= eps2 && best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                best = Some((d, j));
            }
        }
        label[i] = best.map(|(_, j)| find(&mut parent, j));
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (slot, l) in label.iter().enumerate() {
        if let Some(root) = l {
            groups.entry(*root).or_default().push(ids[slot]);
        }
    }
    let mut clusters: Vec<Cluster<T>> = groups.into_values().map(|idx| Cluster::from_indices(cloud, idx)).collect();
    clusters.sort_by_key(|c| c.point_indices[0]);
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(cx: f64, n: usize) -> Vec<Point3<f64>> {
        (0..n).map(|i| Point3::new(cx + 0.05 * (i % 4) as f64, 0.05 * (i / 4) as f64, 0.0)).collect()
    }

    #[test]
    fn two_blobs() {
        let mut pts = blob(0.0, 12);
        pts.extend(blob(10.0, 12));
        let cloud = PointCloud::new(pts);
        let all: Vec<usize> = (0..cloud.len()).collect();
        let cl = cluster_objects(&cloud, &all, 0.5, 5);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].point_indices, (0..12).collect::<Vec<_>>());
        assert!((cl[1].centroid.x - 10.075).abs() < 1e-12);
    }

    #[test]
    fn isolated_points_are_noise() {
        let cloud = PointCloud::new((0..10).map(|i| Point3::new(i as f64 * 2.0, 0.0, 0.0)).collect());
        let all: Vec<usize> = (0..10).collect();
        assert!(cluster_objects(&cloud, &all, 0.5, 5).is_empty());
    }

    #[test]
    fn chain_connects() {
        let cloud = PointCloud::new((0..20).map(|i| Point3::new(i as f64 * 0.4, 0.0, 0.0)).collect());
        let all: Vec<usize> = (0..20).collect();
        let cl = cluster_objects(&cloud, &all, 0.5, 3);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].len(), 20);
    }

    #[test]
    fn only_listed_indices_participate() {
        let mut pts = blob(0.0, 12);
        pts.extend(blob(10.0, 12));
        let cloud = PointCloud::new(pts);
        let subset: Vec<usize> = (12..24).collect();
        let cl = cluster_objects(&cloud, &subset, 0.5, 5);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].point_indices, subset);
    }
}
