//! Rotated-box geometry, pinhole projection, and overlap measures.
//!
//! Conventions used throughout the crate:
//!
//! * The ego/LiDAR frame is right-handed with +z up. Box yaw `ry` rotates the
//!   box's length axis counter-clockwise from +x when viewed from above.
//! * Camera frames are right-handed with +z forward (optical axis), +x right
//!   and +y down in the image. `CameraCalib::extrinsic` maps ego points into
//!   that frame.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Slack applied to every face when testing point containment, in meters.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("extrinsic rotation is not orthonormal with det +1 (det = {det}, max deviation = {deviation})")]
    BadExtrinsic { det: f64, deviation: f64 },
    #[error("intrinsic matrix must be upper-triangular with positive focal lengths")]
    BadIntrinsic,
    #[error("image extent must be positive, got {width}x{height}")]
    BadImageExtent { width: f64, height: f64 },
    #[error("intrinsic matrix is singular")]
    SingularIntrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Scalar> Add for Point3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Scalar> Sub for Point3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Scalar> Neg for Point3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Scalar> Mul<T> for Point3<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

/// Ordered point set. Indices are stable for the lifetime of a scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    pub points: Vec<Point3<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Vec<Point3<T>> {
        indices.iter().map(|&i| self.points[i]).collect()
    }
}

impl<T> From<Vec<Point3<T>>> for PointCloud<T> {
    fn from(points: Vec<Point3<T>>) -> Self {
        Self { points }
    }
}

/// Ego reference point used by the surface and L-shape terms.
pub type EgoPose<T> = Point3<T>;

/// Seven-parameter amodal box: center, dimensions along (length, width,
/// height), and yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxParams<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub l: T,
    pub w: T,
    pub h: T,
    pub ry: T,
}

impl<T: Scalar> BoxParams<T> {
    pub fn new(x: T, y: T, z: T, l: T, w: T, h: T, ry: T) -> Self {
        Self { x, y, z, l, w, h, ry }
    }

    pub fn center(&self) -> Point3<T> {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [T; 7] {
        [self.x, self.y, self.z, self.l, self.w, self.h, self.ry]
    }

    pub fn from_array(a: [T; 7]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6])
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.l > T::zero() && self.w > T::zero() && self.h > T::zero()
    }

    /// Expresses a world point in the box frame (origin at the center, +x
    /// along the length axis).
    pub fn to_local(&self, p: &Point3<T>) -> Point3<T> {
        let (s, c) = self.ry.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point3::new(c * dx + s * dy, -s * dx + c * dy, p.z - self.z)
    }

    pub fn to_world(&self, local: &Point3<T>) -> Point3<T> {
        let (s, c) = self.ry.sin_cos();
        Point3::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y, self.z + local.z)
    }

    /// Footprint corners in BEV, counter-clockwise (same order as the bottom
    /// face of [`box_corners`]).
    pub fn footprint(&self) -> [[T; 2]; 4] {
        let c = box_corners(self);
        [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y], [c[3].x, c[3].y]]
    }
}

/// Axis-aligned image rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Box2D<T> {
    pub u_min: T,
    pub v_min: T,
    pub u_max: T,
    pub v_max: T,
}

impl<T: Scalar> Box2D<T> {
    pub fn new(u_min: T, v_min: T, u_max: T, v_max: T) -> Self {
        Self { u_min, v_min, u_max, v_max }
    }

    pub fn width(&self) -> T {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> T {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> T {
        (self.width().max(T::zero())) * (self.height().max(T::zero()))
    }

    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        ((self.u_min + self.u_max) * half, (self.v_min + self.v_max) * half)
    }

    pub fn is_valid(&self) -> bool {
        self.u_min < self.u_max && self.v_min < self.v_max
    }

    pub fn contains(&self, u: T, v: T) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// Clips to `[0, width] x [0, height]`; `None` when nothing of positive
    /// area remains.
    pub fn clipped(&self, width: T, height: T) -> Option<Self> {
        let b = Self::new(
            self.u_min.max(T::zero()),
            self.v_min.max(T::zero()),
            self.u_max.min(width),
            self.v_max.min(height),
        );
        b.is_valid().then_some(b)
    }
}

/// Half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray<T> {
    pub origin: Point3<T>,
    pub direction: Point3<T>,
}

impl<T: Scalar> Ray<T> {
    /// Normalizes `direction`; `None` for a zero direction.
    pub fn new(origin: Point3<T>, direction: Point3<T>) -> Option<Self> {
        direction.normalized().map(|direction| Self { origin, direction })
    }

    pub fn at(&self, t: T) -> Point3<T> {
        self.origin + self.direction.scale(t)
    }

    /// Signed distance of the orthogonal projection of `p` along the ray.
    pub fn along(&self, p: &Point3<T>) -> T {
        (*p - self.origin).dot(&self.direction)
    }
}

/// Pinhole camera: `extrinsic` maps ego points into the camera frame,
/// `intrinsic` maps camera-frame rays to homogeneous pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraCalib<T> {
    pub camera_id: String,
    /// Row-major 4x4 rigid transform, ego -> camera.
    pub extrinsic: [[T; 4]; 4],
    /// Row-major 3x3 upper-triangular camera matrix.
    pub intrinsic: [[T; 3]; 3],
    pub image_width: T,
    pub image_height: T,
}

impl<T: Scalar> CameraCalib<T> {
    pub fn validate(&self) -> Result<(), GeomError> {
        let r = &self.extrinsic;
        let mut deviation = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot = (0..3).fold(T::zero(), |acc, k| acc + r[i][k] * r[j][k]);
                let target = if i == j { T::one() } else { T::zero() };
                deviation = deviation.max((dot - target).abs().to_f64_lossy());
            }
        }
        let det = det3([[r[0][0], r[0][1], r[0][2]], [r[1][0], r[1][1], r[1][2]], [r[2][0], r[2][1], r[2][2]]])
            .to_f64_lossy();
        let bottom_ok = r[3][0] == T::zero() && r[3][1] == T::zero() && r[3][2] == T::zero() && r[3][3] == T::one();
        if !(deviation <= 1e-6 && (det - 1.0).abs() <= 1e-6 && bottom_ok) {
            return Err(GeomError::BadExtrinsic { det, deviation });
        }

        let k = &self.intrinsic;
        let upper = k[1][0] == T::zero() && k[2][0] == T::zero() && k[2][1] == T::zero() && k[2][2] > T::zero();
        if !(upper && k[0][0] > T::zero() && k[1][1] > T::zero()) {
            return Err(GeomError::BadIntrinsic);
        }
        if !(self.image_width > T::zero() && self.image_height > T::zero()) {
            return Err(GeomError::BadImageExtent {
                width: self.image_width.to_f64_lossy(),
                height: self.image_height.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Ego point -> camera frame.
    pub fn to_camera(&self, p: &Point3<T>) -> Point3<T> {
        let m = &self.extrinsic;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    /// Camera-frame direction -> ego-frame direction (rotation transpose).
    pub fn direction_to_ego(&self, d: &Point3<T>) -> Point3<T> {
        let m = &self.extrinsic;
        Point3::new(
            m[0][0] * d.x + m[1][0] * d.y + m[2][0] * d.z,
            m[0][1] * d.x + m[1][1] * d.y + m[2][1] * d.z,
            m[0][2] * d.x + m[1][2] * d.y + m[2][2] * d.z,
        )
    }

    /// Optical center in the ego frame.
    pub fn center_in_ego(&self) -> Point3<T> {
        let m = &self.extrinsic;
        let t = Point3::new(m[0][3], m[1][3], m[2][3]);
        -self.direction_to_ego(&t)
    }

    /// Projects a camera-frame point with positive depth to pixels.
    pub fn camera_to_pixel(&self, pc: &Point3<T>) -> (T, T) {
        let k = &self.intrinsic;
        let hx = k[0][0] * pc.x + k[0][1] * pc.y + k[0][2] * pc.z;
        let hy = k[1][1] * pc.y + k[1][2] * pc.z;
        let hw = k[2][2] * pc.z;
        (hx / hw, hy / hw)
    }

    /// Camera-frame direction (not normalized, z = 1) through pixel `(u, v)`.
    pub fn pixel_to_camera_dir(&self, u: T, v: T) -> Result<Point3<T>, GeomError> {
        let k = &self.intrinsic;
        let (fx, s, cx) = (k[0][0], k[0][1], k[0][2]);
        let (fy, cy) = (k[1][1], k[1][2]);
        let k22 = k[2][2];
        if fx == T::zero() || fy == T::zero() || k22 == T::zero() {
            return Err(GeomError::SingularIntrinsic);
        }
        // Solve K [x y 1]^T = k22 [u v 1]^T for the upper-triangular K.
        let un = u * k22;
        let vn = v * k22;
        let y = (vn - cy) / fy;
        let x = (un - cx - s * y) / fx;
        Ok(Point3::new(x, y, T::one()))
    }

    pub fn image_box(&self) -> Box2D<T> {
        Box2D::new(T::zero(), T::zero(), self.image_width, self.image_height)
    }
}

fn det3<T: Scalar>(m: [[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Pixel coordinates plus camera-frame depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
}

/// Corners of the yaw-rotated cuboid.
///
/// Indices 0-3 are the bottom face, counter-clockwise viewed from above,
/// starting at local `(+l/2, -w/2)`; indices 4-7 are the top face in the same
/// order, so corner `i + 4` sits directly above corner `i`.
pub fn box_corners<T: Scalar>(b: &BoxParams<T>) -> [Point3<T>; 8] {
    let half = T::lit(0.5);
    let (hl, hw, hh) = (b.l * half, b.w * half, b.h * half);
    let local = [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)];
    let mut out = [Point3::origin(); 8];
    for (i, &(lx, ly)) in local.iter().enumerate() {
        out[i] = b.to_world(&Point3::new(lx, ly, -hh));
        out[i + 4] = b.to_world(&Point3::new(lx, ly, hh));
    }
    out
}

/// Inclusive containment with [`CONTAINMENT_TOLERANCE`] slack on every face.
pub fn point_in_box<T: Scalar>(p: &Point3<T>, b: &BoxParams<T>) -> bool {
    let local = b.to_local(p);
    local_inside(&local, b)
}

#[inline]
pub(crate) fn local_inside<T: Scalar>(local: &Point3<T>, b: &BoxParams<T>) -> bool {
    let half = T::lit(0.5);
    let tol = T::lit(CONTAINMENT_TOLERANCE);
    local.x.abs() <= b.l * half + tol && local.y.abs() <= b.w * half + tol && local.z.abs() <= b.h * half + tol
}

/// Projects every point; entries with camera depth <= 0 are `None` so indices
/// stay aligned with the input.
pub fn project_points<T: Scalar>(points: &[Point3<T>], calib: &CameraCalib<T>) -> Vec<Option<ImagePoint<T>>> {
    points.iter().map(|p| project_point(p, calib)).collect()
}

#[inline]
pub fn project_point<T: Scalar>(p: &Point3<T>, calib: &CameraCalib<T>) -> Option<ImagePoint<T>> {
    let pc = calib.to_camera(p);
    if pc.z <= T::zero() {
        return None;
    }
    let (u, v) = calib.camera_to_pixel(&pc);
    Some(ImagePoint { u, v, depth: pc.z })
}

/// Axis-aligned hull of the projected corners that lie in front of the
/// camera, clipped to the image. `None` if fewer than two corners are in
/// front or the clipped hull has no area.
pub fn project_box_to_2d<T: Scalar>(b: &BoxParams<T>, calib: &CameraCalib<T>) -> Option<Box2D<T>> {
    let corners = box_corners(b);
    let mut count = 0;
    let mut hull = Box2D::new(T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity());
    for c in &corners {
        if let Some(ip) = project_point(c, calib) {
            count += 1;
            hull.u_min = hull.u_min.min(ip.u);
            hull.v_min = hull.v_min.min(ip.v);
            hull.u_max = hull.u_max.max(ip.u);
            hull.v_max = hull.v_max.max(ip.v);
        }
    }
    if count < 2 {
        return None;
    }
    hull.clipped(calib.image_width, calib.image_height)
}

pub fn iou_2d<T: Scalar>(a: &Box2D<T>, b: &Box2D<T>) -> T {
    let iw = a.u_max.min(b.u_max) - a.u_min.max(b.u_min);
    let ih = a.v_max.min(b.v_max) - a.v_min.max(b.v_min);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one()).max(T::zero())
}

/// Shoelace area of a simple polygon (positive when counter-clockwise).
pub fn polygon_area<T: Scalar>(poly: &[[T; 2]]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        acc = acc + poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    acc * T::lit(0.5)
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
pub fn clip_convex<T: Scalar>(subject: &[[T; 2]], clip: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut output: Vec<[T; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let side = |p: &[T; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= T::zero() {
                if sp < T::zero() {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= T::zero() {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect<T: Scalar>(p: [T; 2], q: [T; 2], sp: T, sq: T) -> [T; 2] {
    let t = sp / (sp - sq);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

/// Bird's-eye-view IoU of two rotated footprints.
pub fn iou_bev<T: Scalar>(a: &BoxParams<T>, b: &BoxParams<T>) -> T {
    let fa = a.footprint();
    let fb = b.footprint();
    let inter = polygon_area(&clip_convex(&fa, &fb)).abs();
    let union = a.l * a.w + b.l * b.w - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one()).max(T::zero())
}

/// Euclidean distance from `p` to the segment `[a, b]` in the plane.
#[inline]
pub fn point_segment_distance_2d<T: Scalar>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > T::zero() {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let (cx, cy) = (a[0] + dx * t - p[0], a[1] + dy * t - p[1]);
    (cx * cx + cy * cy).sqrt()
}
