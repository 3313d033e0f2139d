//! Box-fitting objective.
//!
//! A candidate box is scored against the object points, the ego reference
//! point and the originating image proposal:
//!
//! ```text
//! total = λ1·density + λ2·lshape + λ3·surface + iou2d
//! density = -(points inside) / (all points)            ∈ [-1, 0]
//! lshape  = mean over inside points of the BEV distance to the nearer of
//!           the two top edges facing the ego                ≥ 0
//! surface = -min(‖center_xy - ego_xy‖, c_surface)       ∈ [-c_surface, 0]
//! iou2d   = -γ · IoU(projected box hull, proposal)      ∈ [-γ, 0]
//! ```
//!
//! Lower is better. The image term is negated so that agreement with the
//! proposal lowers the cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    box_corners, iou_2d, local_inside, point_in_box, point_segment_distance_2d, project_box_to_2d, Box2D, BoxParams,
    CameraCalib, EgoPose, Point3,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("object point set is empty")]
    EmptyPoints,
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("invalid anchor for class {class}: {reason}")]
    InvalidAnchor { class: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub lambda3: T,
    pub gamma: T,
    /// Clip distance for the surface term, meters.
    pub c_surface: T,
}

impl<T: Scalar> CostWeights<T> {
    /// `(λ1, λ2, λ3, γ) = (5, 1, 1, 3)`.
    pub fn standard(c_surface: T) -> Self {
        Self { lambda1: T::lit(5.0), lambda2: T::one(), lambda3: T::one(), gamma: T::lit(3.0), c_surface }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let named =
            [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3), ("gamma", self.gamma)];
        for (name, v) in named {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(CostError::InvalidWeights(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.c_surface > T::zero() && self.c_surface.is_finite()) {
            return Err(CostError::InvalidWeights(format!("c_surface must be > 0, got {}", self.c_surface)));
        }
        Ok(())
    }
}

/// Per-class dimension bounds `(l, w, h)` in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRange<T> {
    pub class_id: String,
    pub dims_min: [T; 3],
    pub dims_max: [T; 3],
}

impl<T: Scalar> AnchorRange<T> {
    pub fn new(class_id: impl Into<String>, dims_min: [T; 3], dims_max: [T; 3]) -> Self {
        Self { class_id: class_id.into(), dims_min, dims_max }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for k in 0..3 {
            let (lo, hi) = (self.dims_min[k], self.dims_max[k]);
            if !(lo > T::zero() && lo <= hi && hi.is_finite()) {
                return Err(CostError::InvalidAnchor {
                    class: self.class_id.clone(),
                    reason: format!("need 0 < min <= max, got [{lo}, {hi}] on axis {k}"),
                });
            }
        }
        Ok(())
    }

    pub fn mean_dims(&self) -> [T; 3] {
        let half = T::lit(0.5);
        [
            (self.dims_min[0] + self.dims_max[0]) * half,
            (self.dims_min[1] + self.dims_max[1]) * half,
            (self.dims_min[2] + self.dims_max[2]) * half,
        ]
    }

    /// Diagonal of the largest footprint, `hypot(l_max, w_max)`.
    pub fn max_footprint_diagonal(&self) -> T {
        self.dims_max[0].hypot(self.dims_max[1])
    }

    /// Space diagonal of the largest box.
    pub fn max_diagonal(&self) -> T {
        let [l, w, h] = self.dims_max;
        (l * l + w * w + h * h).sqrt()
    }

    pub fn contains_dims(&self, b: &BoxParams<T>) -> bool {
        let d = [b.l, b.w, b.h];
        (0..3).all(|k| d[k] >= self.dims_min[k] && d[k] <= self.dims_max[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown<T> {
    /// Unweighted density term.
    pub density: T,
    /// Unweighted L-shape term.
    pub lshape: T,
    /// Unweighted surface term.
    pub surface: T,
    /// Image term, already scaled by `-γ`.
    pub iou2d: T,
    pub total: T,
}

impl<T: Scalar> CostBreakdown<T> {
    pub fn compose(density: T, lshape: T, surface: T, iou2d: T, w: &CostWeights<T>) -> Self {
        let total = w.lambda1 * density + w.lambda2 * lshape + w.lambda3 * surface + iou2d;
        Self { density, lshape, surface, iou2d, total }
    }
}

/// Anything that scores a box. The search routines minimize `total`.
pub trait Objective<T: Scalar>: Sync {
    fn evaluate(&self, candidate: &BoxParams<T>) -> CostBreakdown<T>;
}

pub fn cost_density<T: Scalar>(b: &BoxParams<T>, obj_points: &[Point3<T>]) -> Result<T, CostError> {
    if obj_points.is_empty() {
        return Err(CostError::EmptyPoints);
    }
    let inside = obj_points.iter().filter(|p| point_in_box(p, b)).count();
    Ok(-T::from_count(inside) / T::from_count(obj_points.len()))
}

/// The two non-parallel top edges whose midpoints are nearest the ego, as
/// BEV segments. The nearest edge comes first.
pub fn anchor_edges<T: Scalar>(b: &BoxParams<T>, ego: &EgoPose<T>) -> [[[T; 2]; 2]; 2] {
    let c = box_corners(b);
    let top = [c[4], c[5], c[6], c[7]];
    let edges: [[[T; 2]; 2]; 4] = std::array::from_fn(|i| {
        let (a, q) = (top[i], top[(i + 1) % 4]);
        [[a.x, a.y], [q.x, q.y]]
    });
    let half = T::lit(0.5);
    let mid_dist = |e: &[[T; 2]; 2]| {
        let mx = (e[0][0] + e[1][0]) * half - ego.x;
        let my = (e[0][1] + e[1][1]) * half - ego.y;
        mx * mx + my * my
    };
    let nearest = (0..4)
        .min_by(|&i, &j| mid_dist(&edges[i]).partial_cmp(&mid_dist(&edges[j])).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    // Edges adjacent in the cycle are the perpendicular ones.
    let (p, q) = ((nearest + 1) % 4, (nearest + 3) % 4);
    let second = if mid_dist(&edges[q]) < mid_dist(&edges[p]) { q } else { p };
    [edges[nearest], edges[second]]
}

pub fn cost_lshape<T: Scalar>(b: &BoxParams<T>, obj_points: &[Point3<T>], ego: &EgoPose<T>) -> Result<T, CostError> {
    if obj_points.is_empty() {
        return Err(CostError::EmptyPoints);
    }
    let [e1, e2] = anchor_edges(b, ego);
    let mut sum = T::zero();
    let mut inside = 0usize;
    for p in obj_points.iter().filter(|p| point_in_box(p, b)) {
        let q = [p.x, p.y];
        let d = point_segment_distance_2d(q, e1[0], e1[1]).min(point_segment_distance_2d(q, e2[0], e2[1]));
        sum = sum + d;
        inside += 1;
    }
    if inside == 0 {
        return Ok(T::zero());
    }
    Ok(sum / T::from_count(inside))
}

pub fn cost_surface<T: Scalar>(b: &BoxParams<T>, ego: &EgoPose<T>, weights: &CostWeights<T>) -> T {
    let d = (b.x - ego.x).hypot(b.y - ego.y);
    -d.min(weights.c_surface)
}

/// `-γ · IoU`; zero when the box does not project into the image.
pub fn cost_iou2d<T: Scalar>(
    b: &BoxParams<T>,
    proposal: &Box2D<T>,
    calib: &CameraCalib<T>,
    weights: &CostWeights<T>,
) -> T {
    match project_box_to_2d(b, calib) {
        Some(hull) => -weights.gamma * iou_2d(&hull, proposal),
        None => T::zero(),
    }
}

pub fn cost_total<T: Scalar>(
    b: &BoxParams<T>,
    obj_points: &[Point3<T>],
    ego: &EgoPose<T>,
    proposal: &Box2D<T>,
    calib: &CameraCalib<T>,
    weights: &CostWeights<T>,
) -> Result<CostBreakdown<T>, CostError> {
    Ok(BoxObjective::new(obj_points, *ego, *proposal, calib, *weights)?.evaluate(b))
}

/// Clamps dimensions into the anchor range and wraps yaw into `[0, π)`.
/// Position is left untouched.
pub fn clamp_to_constraints<T: Scalar>(b: &BoxParams<T>, anchor: &AnchorRange<T>) -> BoxParams<T> {
    let clamp = |v: T, k: usize| v.max(anchor.dims_min[k]).min(anchor.dims_max[k]);
    BoxParams { l: clamp(b.l, 0), w: clamp(b.w, 1), h: clamp(b.h, 2), ry: wrap_yaw(b.ry), ..*b }
}

/// Reduces a yaw modulo π into `[0, π)`.
pub fn wrap_yaw<T: Scalar>(ry: T) -> T {
    if !ry.is_finite() {
        return ry;
    }
    let pi = T::PI();
    let mut r = ry - pi * (ry / pi).floor();
    if r >= pi || r < T::zero() {
        r = T::zero();
    }
    r
}

/// Default surface clip: ego-to-centroid BEV distance plus half the anchor's
/// largest footprint diagonal.
pub fn default_c_surface<T: Scalar>(ego: &EgoPose<T>, centroid: &Point3<T>, anchor: &AnchorRange<T>) -> T {
    (centroid.x - ego.x).hypot(centroid.y - ego.y) + anchor.max_footprint_diagonal() * T::lit(0.5)
}

/// Full objective for one proposal with the per-point work fused into a
/// single pass. The inside count is shared by the density and L-shape terms.
#[derive(Debug, Clone)]
pub struct BoxObjective<'a, T> {
    points: &'a [Point3<T>],
    ego: EgoPose<T>,
    proposal: Box2D<T>,
    calib: &'a CameraCalib<T>,
    weights: CostWeights<T>,
}

impl<'a, T: Scalar> BoxObjective<'a, T> {
    pub fn new(
        points: &'a [Point3<T>],
        ego: EgoPose<T>,
        proposal: Box2D<T>,
        calib: &'a CameraCalib<T>,
        weights: CostWeights<T>,
    ) -> Result<Self, CostError> {
        if points.is_empty() {
            return Err(CostError::EmptyPoints);
        }
        Ok(Self { points, ego, proposal, calib, weights })
    }

    pub fn weights(&self) -> &CostWeights<T> {
        &self.weights
    }

    pub fn points(&self) -> &[Point3<T>] {
        self.points
    }
}

impl<T: Scalar> Objective<T> for BoxObjective<'_, T> {
    fn evaluate(&self, b: &BoxParams<T>) -> CostBreakdown<T> {
        let half = T::lit(0.5);
        let (hl, hw) = (b.l * half, b.w * half);
        let (s, c) = b.ry.sin_cos();

        // In the box frame the ego-facing top edges are the sides whose
        // normals point toward the ego.
        let ex = c * (self.ego.x - b.x) + s * (self.ego.y - b.y);
        let ey = -s * (self.ego.x - b.x) + c * (self.ego.y - b.y);
        let side_x = if ex >= T::zero() { hl } else { -hl };
        let side_y = if ey >= T::zero() { hw } else { -hw };

        let mut inside = 0usize;
        let mut dist_sum = T::zero();
        for p in self.points {
            let dx = p.x - b.x;
            let dy = p.y - b.y;
            let local = Point3::new(c * dx + s * dy, -s * dx + c * dy, p.z - b.z);
            if !local_inside(&local, b) {
                continue;
            }
            inside += 1;
            let ax = local.x - side_x;
            let ay = local.y - local.y.max(-hw).min(hw);
            let bx = local.x - local.x.max(-hl).min(hl);
            let by = local.y - side_y;
            let d1 = (ax * ax + ay * ay).sqrt();
            let d2 = (bx * bx + by * by).sqrt();
            dist_sum = dist_sum + d1.min(d2);
        }

        let density = -T::from_count(inside) / T::from_count(self.points.len());
        let lshape = if inside == 0 { T::zero() } else { dist_sum / T::from_count(inside) };
        let surface = cost_surface(b, &self.ego, &self.weights);
        let iou2d = cost_iou2d(b, &self.proposal, self.calib, &self.weights);
        CostBreakdown::compose(density, lshape, surface, iou2d, &self.weights)
    }
}

impl<T: Scalar, F> Objective<T> for F
where
    F: Fn(&BoxParams<T>) -> CostBreakdown<T> + Sync,
{
    fn evaluate(&self, candidate: &BoxParams<T>) -> CostBreakdown<T> {
        self(candidate)
    }
}
