//! Cross-modal association: lift each image proposal to a viewing frustum and
//! pair it with every object cluster lying close to the frustum's center ray.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Box2D, CameraCalib, GeomError, Point3, Ray};
use crate::optimizer::SearchProblem;
use crate::scalar::Scalar;
use crate::sceneprep::{Cluster, Scene};

pub use crate::optimizer::point_to_ray_distance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("degenerate pixel ray")]
    DegenerateRay,
    #[error("need 0 <= d_min < d_max, got ({d_min}, {d_max})")]
    BadDepthRange { d_min: f64, d_max: f64 },
}

/// Per-proposal instance-mask statistics used by the occlusion and
/// resolution filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskStats {
    pub instance_pixel_count: u64,
    pub crop_w: u32,
    pub crop_h: u32,
}

impl MaskStats {
    pub fn crop_area(&self) -> u64 {
        self.crop_w as u64 * self.crop_h as u64
    }
}

/// One open-vocabulary image detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal2D<T> {
    pub bbox: Box2D<T>,
    pub camera_id: String,
    pub class_id: String,
    pub score: T,
    pub mask: MaskStats,
    /// Precomputed alignment embedding; carried through untouched.
    pub embedding: Option<Vec<f64>>,
}

/// Back-projected image box. Corner rays follow the pixel order
/// `(u_min, v_min), (u_max, v_min), (u_max, v_max), (u_min, v_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frustum<T> {
    pub corner_rays: [Ray<T>; 4],
    pub center: Ray<T>,
    pub d_min: T,
    pub d_max: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCriterion {
    /// Distance from the cluster point nearest the center ray.
    #[default]
    ClosestPoint,
    /// Distance from the cluster centroid.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocParams {
    /// Maximum cluster-to-ray distance for a match, meters.
    pub tau_match: f64,
    /// Depth window along the center ray, meters.
    pub d_min: f64,
    pub d_max: f64,
    pub criterion: MatchCriterion,
}

impl Default for AssocParams {
    fn default() -> Self {
        Self { tau_match: 2.0, d_min: 0.5, d_max: 60.0, criterion: MatchCriterion::ClosestPoint }
    }
}

/// A (proposal, cluster) pair awaiting box search.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossModalProposal<T> {
    pub frame_id: String,
    /// Index of the proposal within its frame's proposal list.
    pub proposal_index: usize,
    pub proposal: Proposal2D<T>,
    /// Index into `Scene::cameras`.
    pub camera_index: usize,
    pub cluster: Cluster<T>,
    pub center_ray: Ray<T>,
    pub distance_to_ray: T,
}

impl<T: Scalar> CrossModalProposal<T> {
    pub fn object_points(&self, scene: &Scene<T>) -> Vec<Point3<T>> {
        self.cluster.points(&scene.cloud)
    }

    /// Borrowed view for the optimizer; `points` must be this pair's
    /// [`object_points`](Self::object_points).
    pub fn search_problem<'a>(&self, scene: &'a Scene<T>, points: &'a [Point3<T>]) -> SearchProblem<'a, T> {
        SearchProblem {
            points,
            ego: scene.ego,
            proposal: self.proposal.bbox,
            calib: &scene.cameras[self.camera_index],
            center_ray: self.center_ray,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssocStats {
    pub proposals: usize,
    pub matched_proposals: usize,
    pub unmatched_proposals: usize,
    pub unknown_camera: usize,
    pub pairs: usize,
}

/// Ray from the optical center through pixel `(u, v)`, in the ego frame.
pub fn pixel_ray<T: Scalar>(calib: &CameraCalib<T>, u: T, v: T) -> Result<Ray<T>, AssocError> {
    let dir_cam = calib.pixel_to_camera_dir(u, v)?;
    Ray::new(calib.center_in_ego(), calib.direction_to_ego(&dir_cam)).ok_or(AssocError::DegenerateRay)
}

pub fn frustum_from_box<T: Scalar>(
    b: &Box2D<T>,
    calib: &CameraCalib<T>,
    d_min: T,
    d_max: T,
) -> Result<Frustum<T>, AssocError> {
    if !(d_min >= T::zero() && d_min < d_max) {
        return Err(AssocError::BadDepthRange { d_min: d_min.to_f64_lossy(), d_max: d_max.to_f64_lossy() });
    }
    let corners = [(b.u_min, b.v_min), (b.u_max, b.v_min), (b.u_max, b.v_max), (b.u_min, b.v_max)];
    let mut rays = Vec::with_capacity(4);
    for (u, v) in corners {
        rays.push(pixel_ray(calib, u, v)?);
    }
    let (cu, cv) = b.center();
    let center = pixel_ray(calib, cu, cv)?;
    Ok(Frustum { corner_rays: [rays[0], rays[1], rays[2], rays[3]], center, d_min, d_max })
}

pub fn center_ray<T: Scalar>(frustum: &Frustum<T>) -> Ray<T> {
    frustum.center
}

/// Distance of `cluster` to `ray` under `criterion`, together with the
/// position of the measured point along the ray.
fn cluster_ray_distance<T: Scalar>(
    scene: &Scene<T>,
    cluster: &Cluster<T>,
    ray: &Ray<T>,
    criterion: MatchCriterion,
) -> Option<(T, T)> {
    match criterion {
        MatchCriterion::Centroid => Some((point_to_ray_distance(&cluster.centroid, ray), ray.along(&cluster.centroid))),
        MatchCriterion::ClosestPoint => {
            let mut best: Option<(T, T)> = None;
            for &i in &cluster.point_indices {
                let p = &scene.cloud.points[i];
                let d = point_to_ray_distance(p, ray);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, ray.along(p)));
                }
            }
            best
        }
    }
}

/// Pairs every proposal with every cluster within `tau_match` of its center
/// ray whose measured point lies inside the depth window. One proposal may
/// yield several pairs, and one cluster may pair with several proposals.
/// Output is ordered by proposal, then by cluster position in `clusters`.
pub fn associate<T: Scalar>(
    scene: &Scene<T>,
    proposals: &[Proposal2D<T>],
    clusters: &[Cluster<T>],
    params: &AssocParams,
) -> (Vec<CrossModalProposal<T>>, AssocStats) {
    let mut stats = AssocStats { proposals: proposals.len(), ..Default::default() };
    let mut pairs = Vec::new();
    let tau = T::lit(params.tau_match);
    let (d_min, d_max) = (T::lit(params.d_min), T::lit(params.d_max));

    for (pi, prop) in proposals.iter().enumerate() {
        let Some((cam_idx, calib)) = scene.camera(&prop.camera_id) else {
            stats.unknown_camera += 1;
            continue;
        };
        let Ok(frustum) = frustum_from_box(&prop.bbox, calib, d_min, d_max) else {
            stats.unmatched_proposals += 1;
            continue;
        };
        let ray = center_ray(&frustum);
        let before = pairs.len();
        for cluster in clusters.iter().filter(|c| !c.is_empty()) {
            let Some((dist, along)) = cluster_ray_distance(scene, cluster, &ray, params.criterion) else { continue };
            if dist <= tau && along >= frustum.d_min && along <= frustum.d_max {
                pairs.push(CrossModalProposal {
                    frame_id: scene.frame_id.clone(),
                    proposal_index: pi,
                    proposal: prop.clone(),
                    camera_index: cam_idx,
                    cluster: cluster.clone(),
                    center_ray: ray,
                    distance_to_ray: dist,
                });
            }
        }
        if pairs.len() > before {
            stats.matched_proposals += 1;
        } else {
            stats.unmatched_proposals += 1;
        }
    }
    stats.pairs = pairs.len();
    (pairs, stats)
}
